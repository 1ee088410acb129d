#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace coopga;
using V3 = Eigen::Vector3d;

namespace {

CooperativeSystem shipped(const std::string& name)
{
    return io::load_system(oracle::data_path("systems/" + name + ".json"));
}

Eigen::MatrixXd random_spd(int m, std::mt19937& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd a(m, m);
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k) a(i, k) = u(rng);
    return a * a.transpose() + Eigen::MatrixXd::Identity(m, m);
}

}  // namespace

TEST(TaskSpace, IdentityMassAndOrthonormalRows)
{
    // a free point: J_G rows are the three translation rows of the identity
    auto sys = oracle::point_robots(PrimitiveKind::Point, {V3(0, 0, 0)});
    auto model = JointDynamicsModel::identity(3);
    auto ts = task_space_dynamics(sys, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), model);
    Matrix7d p = Matrix7d::Zero();
    p.bottomRightCorner<3, 3>().setIdentity();
    EXPECT_LE((ts.inertia - p).norm(), 1e-12);
    EXPECT_LE(ts.coriolis.norm(), 1e-15);
    EXPECT_LE(ts.gravity.norm(), 1e-15);
}

TEST(TaskSpace, StaticConfigurationHasNoCoriolis)
{
    auto sys = shipped("three_arms");
    auto ts = task_space_dynamics(sys, sys.nominal, Eigen::VectorXd::Zero(sys.dof()),
                                  JointDynamicsModel::identity(sys.dof()));
    EXPECT_EQ(ts.coriolis.norm(), 0.0);
    EXPECT_EQ(ts.gravity.norm(), 0.0);
    EXPECT_GT(ts.min_eig, kMinTaskInertiaEig);
}

TEST(TaskSpace, KineticEnergyMatchesOnTheRowSpace)
{
    std::mt19937 rng(51);
    for (const std::string name : {"three_arms", "g1_like"}) {
        auto sys = shipped(name);
        Eigen::MatrixXd mass = random_spd(sys.dof(), rng);
        JointDynamicsModel model = JointDynamicsModel::identity(sys.dof());
        model.mass = [mass](const Eigen::VectorXd&) { return mass; };
        Eigen::VectorXd q = oracle::perturb(sys.nominal, rng, 0.2);
        auto ts = task_space_dynamics(sys, q, Eigen::VectorXd::Zero(sys.dof()), model);
        Vector7d y = oracle::random_bivector(rng);
        Eigen::VectorXd qd = mass.llt().solve(Eigen::MatrixXd(ts.jg.transpose())) * y;
        Vector7d xi = ts.jg * qd;
        double task = 0.5 * xi.dot(ts.inertia * xi);
        double joint = 0.5 * qd.dot(mass * qd);
        EXPECT_NEAR(task, joint, 1e-9 * joint) << name;
    }
}

TEST(TaskSpace, JacobianRateAlongTheFlow)
{
    std::mt19937 rng(52);
    auto sys = shipped("three_arms");
    for (int t = 0; t < 3; ++t) {
        Eigen::VectorXd q = oracle::perturb(sys.nominal, rng, 0.2);
        Eigen::VectorXd qd = oracle::perturb(Eigen::VectorXd::Zero(sys.dof()), rng, 0.5);
        Vector7d fast = jacobian_rate_times_velocity(sys, q, qd);
        Vector7d full = geometric_jacobian_rate(sys, q, qd) * qd;
        EXPECT_LE((fast - full).norm(), 1e-6 * std::max(1.0, full.norm()));
        // independent oracle: second difference of the twist along a constant-velocity path
        auto xi = [&](double s) { return Vector7d(cooperative_geometric_jacobian(sys, q + s * qd) * qd); };
        double h = 1e-4;
        Vector7d fd = (xi(h) - xi(-h)) / (2 * h);
        EXPECT_LE((fast - fd).norm(), 1e-5 * std::max(1.0, fd.norm()));
    }
}

TEST(TaskSpace, SingularInertiaIsReported)
{
    auto sys = oracle::point_robots(PrimitiveKind::Circle, oracle::unit_points(PrimitiveKind::Circle));
    Eigen::VectorXd q = Eigen::VectorXd::Zero(sys.dof());
    q[4] = 0.001 - 1.0;  // nearly collinear
    JointDynamicsModel heavy = JointDynamicsModel::identity(sys.dof(), 1e6);
    EXPECT_THROW(task_space_dynamics(sys, q, Eigen::VectorXd::Zero(sys.dof()), heavy), SingularTaskInertia);
}

TEST(DiffKin, ZeroAndAchievableTwists)
{
    std::mt19937 rng(53);
    auto sys = shipped("three_arms");
    Eigen::VectorXd q = oracle::perturb(sys.nominal, rng, 0.2);
    auto zero = differential_kinematics(sys, q, Vector7d::Zero());
    EXPECT_EQ(zero.qd.norm(), 0.0);

    Matrix7Xd jg = cooperative_geometric_jacobian(sys, q);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd v = oracle::perturb(Eigen::VectorXd::Zero(sys.dof()), rng, 1.0);
        Vector7d xi = jg * v;
        auto r = differential_kinematics(sys, q, xi);
        EXPECT_LE((jg * r.qd - xi).norm(), 1e-9 * std::max(1.0, xi.norm()));
        EXPECT_FALSE(r.projected);
    }
    // J_G pinv(J_G) is an orthogonal projector
    Eigen::MatrixXd p = jg * pinv(jg, mask_size(sys.kind));
    EXPECT_LE((p * p - p).norm(), 1e-9);
    EXPECT_LE((p - p.transpose()).norm(), 1e-9);
}

TEST(DiffKin, UncontrollableRowsAreProjectedOut)
{
    auto sys = shipped("three_arms");
    Vector7d xi = Vector7d::Zero();
    xi[row::e12] = 1.0;
    auto r = differential_kinematics(sys, sys.nominal, xi);
    EXPECT_TRUE(r.projected);
    EXPECT_LE(r.qd.norm(), 1e-9);
    Vector7d ok = Vector7d::Zero();
    ok[row::e1inf] = 0.1;
    EXPECT_FALSE(differential_kinematics(sys, sys.nominal, ok).projected);
}

TEST(DiffKin, PureDilationFollowsTheRadiusFlow)
{
    for (double s : {0.2, -0.2}) {
        auto sys = shipped("three_arms");
        Eigen::VectorXd q = sys.nominal;
        double r0 = radius(cooperative_primitive(sys, q));
        Vector7d xi = Vector7d::Zero();
        xi[row::e0inf] = s;
        double dt = 1e-3, last = r0;
        for (int k = 0; k < 500; ++k) {
            q = step_kinematic(sys, q, xi, dt);
            double r = radius(cooperative_primitive(sys, q));
            if (s > 0) EXPECT_GT(r, last);
            else EXPECT_LT(r, last);
            last = r;
        }
        // r(t) = r0 exp(s t)
        EXPECT_NEAR(last / r0, std::exp(s * 0.5), 2e-3);
    }
}

TEST(Ik, TargetAtStartNeedsNoIterations)
{
    auto sys = shipped("three_arms");
    auto r = gauss_newton_ik(sys, sys.nominal, cooperative_similarity(sys, sys.nominal).value);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_LE(r.residual, 1e-12);
}

TEST(Ik, ErrorJacobianMatchesFiniteDifferences)
{
    std::mt19937 rng(54);
    auto sys = shipped("three_arms");
    Eigen::VectorXd q = oracle::perturb(sys.nominal, rng, 0.2);
    Multivector target = cooperative_similarity(sys, oracle::perturb(sys.nominal, rng, 0.2)).value;
    auto an = similarity_error(sys, q, target);
    auto fd = oracle::fd_vector([&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return similarity_error(sys, x, target, nullptr, false).e;
    }, q);
    EXPECT_LE(oracle::rel_err(an.jacobian, fd), 1e-6);
}

TEST(Ik, ReachableTargetsConverge)
{
    std::mt19937 rng(55);
    auto sys = shipped("three_arms");
    int ok = 0, total = 0;
    for (int t = 0; t < 30; ++t) {
        Multivector target;
        try {
            target = cooperative_similarity(sys, oracle::perturb(sys.nominal, rng, 0.3)).value;
        } catch (const DegeneratePrimitive&) {
            continue;
        }
        ++total;
        auto r = gauss_newton_ik(sys, sys.nominal, target);
        if (r.converged && r.iterations <= 100) ++ok;
        for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k], r.trace[k - 1]);
    }
    EXPECT_GE(ok, 0.95 * total);
}

TEST(Ik, UnreachableTargetReportsNotConverged)
{
    auto sys = shipped("three_arms");
    Multivector v = cooperative_similarity(sys, sys.nominal).value;
    Multivector target = v * dilator(20.0);  // a circle twenty times wider than the arms reach
    IkOptions opt;
    auto r = gauss_newton_ik(sys, sys.nominal, target, opt);
    EXPECT_FALSE(r.converged);
    EXPECT_GT(r.residual, 1e-3);
    for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k], r.trace[k - 1]);
    opt.throw_on_failure = true;
    EXPECT_THROW(gauss_newton_ik(sys, sys.nominal, target, opt), NotConverged);
}

TEST(Impedance, ZeroTorqueAtRestOnTarget)
{
    auto sys = shipped("three_arms");
    auto model = JointDynamicsModel::identity(sys.dof());
    Multivector target = cooperative_similarity(sys, sys.nominal).value;
    auto tau = impedance_torque(sys, sys.nominal, Eigen::VectorXd::Zero(sys.dof()), target, Gains::reference(), model);
    EXPECT_LE(tau.norm(), 1e-12);

    // with gravity the torque at rest is exactly the projected compensation J_G^T g_S
    Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(sys.dof(), -1.0, 1.0);
    model.gravity = [g](const Eigen::VectorXd&) { return g; };
    auto r = impedance_control(sys, sys.nominal, Eigen::VectorXd::Zero(sys.dof()), target, Gains::reference(), model);
    EXPECT_LE((r.tau - r.dynamics.jg.transpose() * r.dynamics.gravity).norm(), 1e-12);
}

TEST(Impedance, ErrorRateIsMinusTheTwist)
{
    // d/dt log(reverse(V_Sc) V_Sd) = -xi at the target, in the coordinates used here
    std::mt19937 rng(56);
    auto sys = shipped("three_arms");
    Eigen::VectorXd q = oracle::perturb(sys.nominal, rng, 0.2);
    Eigen::VectorXd qd = oracle::perturb(Eigen::VectorXd::Zero(sys.dof()), rng, 0.5);
    Multivector target = cooperative_similarity(sys, q).value;
    double dt = 1e-5;
    Vector7d ep = similarity_error(sys, q + dt * qd, target, nullptr, false).e;
    Vector7d em = similarity_error(sys, q - dt * qd, target, nullptr, false).e;
    Vector7d rate = (ep - em) / (2 * dt);
    Vector7d xi = cooperative_geometric_jacobian(sys, q) * qd;
    EXPECT_LE((rate + xi).norm(), 1e-3 * xi.norm());
    EXPECT_GT((rate + 0.5 * xi).norm(), 0.1 * xi.norm());
}

TEST(Impedance, DampingOnlyDissipatesEnergy)
{
    std::mt19937 rng(57);
    auto sys = shipped("three_arms");
    auto model = JointDynamicsModel::identity(sys.dof());
    Gains g = Gains::reference();
    g.K.setZero();
    Multivector target = cooperative_similarity(sys, sys.nominal).value;
    Matrix7Xd jg = cooperative_geometric_jacobian(sys, sys.nominal);
    JointState s{sys.nominal, jg.transpose() * Vector7d(oracle::random_bivector(rng) * 0.05)};
    double e = model.kinetic_energy(s.q, s.qd), e_start = e;
    for (int k = 0; k < 500; ++k) {
        auto r = impedance_control(sys, s.q, s.qd, target, g, model);
        s = step_dynamic(model, s, r.tau, 1e-3);
        double en = model.kinetic_energy(s.q, s.qd);
        EXPECT_LE(en, e * (1 + 1e-9));
        e = en;
    }
    EXPECT_LT(e, 0.5 * e_start);
}

TEST(Impedance, RegulatesTranslationAndDilation)
{
    // short horizon version of the regulation experiment on a free sphere
    auto sys = oracle::point_robots(PrimitiveKind::Sphere, oracle::unit_points(PrimitiveKind::Sphere));
    auto model = JointDynamicsModel::identity(sys.dof());
    Multivector target = cooperative_similarity(sys, Eigen::VectorXd::Zero(sys.dof())).value;
    std::mt19937 rng(58);
    JointState s{oracle::perturb(Eigen::VectorXd::Zero(sys.dof()), rng, 0.1), Eigen::VectorXd::Zero(sys.dof())};
    double e0 = similarity_error(sys, s.q, target, nullptr, false).e.norm();
    OrientationContext ctx;
    for (int k = 0; k < 2000; ++k) {
        auto r = impedance_control(sys, s.q, s.qd, target, Gains::reference(), model, &ctx);
        s = step_dynamic(model, s, r.tau, 1e-3);
    }
    double e1 = similarity_error(sys, s.q, target, nullptr, false).e.norm();
    EXPECT_LT(e1, 0.05 * e0);
}

TEST(Nullspace, ProjectionKeepsTheSimilarityToFirstOrder)
{
    std::mt19937 rng(59);
    auto sys = shipped("three_arms");
    Eigen::VectorXd q = oracle::perturb(sys.nominal, rng, 0.2);
    EXPECT_EQ(project_secondary(sys, q, Eigen::VectorXd::Zero(sys.dof())).norm(), 0.0);

    Matrix7Xd jg = cooperative_geometric_jacobian(sys, q);
    Vector7d xi = jg * oracle::perturb(Eigen::VectorXd::Zero(sys.dof()), rng, 1.0);
    Eigen::VectorXd row_space = pinv(jg, mask_size(sys.kind)) * xi;
    EXPECT_LE(project_secondary(sys, q, row_space).norm(), 1e-9 * row_space.norm());

    Eigen::VectorXd v = project_secondary(sys, q, oracle::perturb(Eigen::VectorXd::Zero(sys.dof()), rng, 1.0));
    Multivector v0 = cooperative_similarity(sys, q).value;
    double d1 = (cooperative_similarity(sys, q + 1e-3 * v).value - v0).norm_inf();
    double d2 = (cooperative_similarity(sys, q + 2e-3 * v).value - v0).norm_inf();
    EXPECT_NEAR(d2 / d1, 4.0, 0.1);  // second order: doubling the step quadruples the drift
}

TEST(Nullspace, PointJacobianMatchesFiniteDifferences)
{
    std::mt19937 rng(60);
    auto sys = shipped("g1_like");
    Eigen::VectorXd q = oracle::perturb(sys.nominal, rng, 0.2);
    for (int c = 0; c < sys.chain_count(); ++c) {
        auto fd = oracle::fd_vector([&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
            return sys.end_effector_positions(x)[c];
        }, q);
        EXPECT_LE(oracle::rel_err(point_jacobian(sys, q, c), fd), 1e-7);
    }
}
