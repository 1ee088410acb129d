#pragma once

#include <functional>

#include "cooperative.hpp"
#include "linalg.hpp"

namespace coopga {

struct Gains {
    Matrix7d K = Matrix7d::Identity();
    Matrix7d D = Matrix7d::Identity();

    // diag(1,1,1,7.5,7.5,7.5,7.5) stiffness and diag(5) damping on (e23,e13,e12,e0inf,e1inf,e2inf,e3inf)
    static Gains reference()
    {
        Gains g;
        Vector7d k;
        k << 1.0, 1.0, 1.0, 7.5, 7.5, 7.5, 7.5;
        g.K = k.asDiagonal();
        g.D = Matrix7d::Identity() * 5.0;
        return g;
    }

    static Gains diagonal(const Vector7d& k, const Vector7d& d)
    {
        Gains g;
        g.K = k.asDiagonal();
        g.D = d.asDiagonal();
        return g;
    }
};

struct JointDynamicsModel {
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> mass;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> coriolis;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gravity;

    // constant diagonal inertia, no Coriolis, no gravity
    static JointDynamicsModel identity(int m, double inertia = 1.0)
    {
        JointDynamicsModel d;
        d.mass = [m, inertia](const Eigen::VectorXd&) { return Eigen::MatrixXd(Eigen::MatrixXd::Identity(m, m) * inertia); };
        d.coriolis = [m](const Eigen::VectorXd&, const Eigen::VectorXd&) { return Eigen::MatrixXd(Eigen::MatrixXd::Zero(m, m)); };
        d.gravity = [m](const Eigen::VectorXd&) { return Eigen::VectorXd(Eigen::VectorXd::Zero(m)); };
        return d;
    }

    // C(q, qd) qd, the Coriolis and centrifugal force
    Eigen::VectorXd coriolis_force(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const
    {
        return coriolis(q, qd) * qd;
    }

    Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::VectorXd& q) const
    {
        Eigen::LLT<Eigen::MatrixXd> llt(mass(q));
        if (llt.info() != Eigen::Success) throw SingularMass("joint mass matrix is not positive definite");
        return llt;
    }

    Eigen::VectorXd acceleration(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& tau) const
    {
        return factor(q).solve(tau - coriolis_force(q, qd) - gravity(q));
    }

    double kinetic_energy(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const
    {
        return 0.5 * qd.dot(mass(q) * qd);
    }
};

struct JointState {
    Eigen::VectorXd q;
    Eigen::VectorXd qd;
};

// semi-implicit Euler: velocity first, then position with the new velocity
inline JointState step_dynamic(const JointDynamicsModel& model, const JointState& s, const Eigen::VectorXd& tau,
                               double dt)
{
    JointState n;
    n.qd = s.qd + dt * model.acceleration(s.q, s.qd, tau);
    n.q = s.q + dt * n.qd;
    return n;
}

inline Matrix7Xd cooperative_geometric_jacobian(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                                OrientationContext* ctx = nullptr)
{
    auto ev = cooperative_similarity_eval(sys, q, ctx, true);
    return geometric_from_analytic(ev.versor.v, ev.versor.d);
}

// ---- task-space dynamics ----

struct TaskSpaceDynamics {
    Matrix7d inertia = Matrix7d::Zero();  // M_S
    Vector7d coriolis = Vector7d::Zero(); // C_S
    Vector7d gravity = Vector7d::Zero();  // g_S
    Matrix7Xd jg;
    Vector7d jg_dot_qd = Vector7d::Zero();  // (d/dt J_G) qd
    Vector7d twist = Vector7d::Zero();    // xi = J_G qd
    double min_eig = 0.0;                 // of J_G M^-1 J_G^T on the achievable directions
};

inline constexpr double kMinTaskInertiaEig = 1e-10;

// body twist J_G(q) v without forming J_G
inline Vector7d body_twist(const CooperativeSystem& sys, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                           OrientationContext* ctx = nullptr)
{
    auto ev = similarity_from_primitive(sys.kind, cooperative_primitive_directional(sys, q, v), ctx);
    return to_coords(reverse(ev.versor.v) * ev.versor.d[0] * -2.0);
}

// (d/dt J_G) qd by central differences along the flow q + t qd
inline Vector7d jacobian_rate_times_velocity(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                             const Eigen::VectorXd& qd, const OrientationContext* ctx = nullptr,
                                             double h = 1e-6)
{
    if (qd.squaredNorm() == 0.0) return Vector7d::Zero();
    OrientationContext cp, cm;
    if (ctx) cp = cm = *ctx;
    Vector7d xp = body_twist(sys, q + h * qd, qd, ctx ? &cp : nullptr);
    Vector7d xm = body_twist(sys, q - h * qd, qd, ctx ? &cm : nullptr);
    return (xp - xm) / (2.0 * h);
}

// full d/dt J_G along the flow, for diagnostics and tests
inline Matrix7Xd geometric_jacobian_rate(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& qd, const OrientationContext* ctx = nullptr,
                                         double h = 1e-6)
{
    if (qd.squaredNorm() == 0.0) return Matrix7Xd::Zero(7, sys.dof());
    OrientationContext cp, cm;
    if (ctx) cp = cm = *ctx;
    Matrix7Xd jp = cooperative_geometric_jacobian(sys, q + h * qd, ctx ? &cp : nullptr);
    Matrix7Xd jm = cooperative_geometric_jacobian(sys, q - h * qd, ctx ? &cm : nullptr);
    return (jp - jm) / (2.0 * h);
}

// The similarity task space of a primitive has mask_size achievable directions, so the
// task inertia is inverted on that subspace only.
inline TaskSpaceDynamics task_space_dynamics(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                             const Eigen::VectorXd& qd, const JointDynamicsModel& model,
                                             OrientationContext* ctx = nullptr)
{
    TaskSpaceDynamics out;
    OrientationContext before;
    if (ctx) before = *ctx;
    out.jg = cooperative_geometric_jacobian(sys, q, ctx);
    out.jg_dot_qd = jacobian_rate_times_velocity(sys, q, qd, ctx ? &before : nullptr);
    out.twist = out.jg * qd;

    auto llt = model.factor(q);
    Eigen::MatrixXd minv_jt = llt.solve(Eigen::MatrixXd(out.jg.transpose()));
    Matrix7d lambda_inv = out.jg * minv_jt;
    lambda_inv = 0.5 * (lambda_inv + lambda_inv.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix7d> es(lambda_inv);
    int r = mask_size(sys.kind);
    out.min_eig = es.eigenvalues()[7 - r];
    if (out.min_eig < kMinTaskInertiaEig)
        throw SingularTaskInertia("task inertia is singular (eigenvalue " + std::to_string(out.min_eig) + ")");
    for (int i = 7 - r; i < 7; ++i)
        out.inertia += es.eigenvectors().col(i) * (1.0 / es.eigenvalues()[i]) * es.eigenvectors().col(i).transpose();

    Eigen::VectorXd c = model.coriolis_force(q, qd);
    Eigen::VectorXd g = model.gravity(q);
    out.coriolis = out.inertia * (out.jg * llt.solve(c) - out.jg_dot_qd);
    out.gravity = out.inertia * (out.jg * llt.solve(g));
    return out;
}

// ---- differential kinematics ----

struct DiffKinResult {
    Eigen::VectorXd qd;
    Vector7d achieved = Vector7d::Zero();  // J_G qd, the command projected onto the achievable twists
    bool projected = false;                // part of the command was not achievable
    bool damped = false;
    double residual = 0.0;                 // |J_G qd - command|
};

// Least-squares joint velocity for a body twist. At the unit primitive the achievable
// twists are exactly the controllable rows; elsewhere the section tilts them, so the
// command is projected onto the range of J_G rather than masked row by row.
inline DiffKinResult differential_kinematics(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                             const Vector7d& xi, OrientationContext* ctx = nullptr)
{
    if (!xi.allFinite()) throw DegenerateInput("twist command is not finite");
    DiffKinResult out;
    Matrix7Xd jg = cooperative_geometric_jacobian(sys, q, ctx);
    auto pi = pseudo_inverse(jg, mask_size(sys.kind));
    out.qd = pi.pinv * xi;
    out.damped = pi.damped;
    out.achieved = jg * out.qd;
    out.residual = (out.achieved - xi).norm();
    out.projected = out.residual > 1e-9 * std::max(1.0, xi.norm());
    return out;
}

inline Eigen::VectorXd step_kinematic(const CooperativeSystem& sys, const Eigen::VectorXd& q, const Vector7d& xi,
                                      double dt, OrientationContext* ctx = nullptr)
{
    return q + dt * differential_kinematics(sys, q, xi, ctx).qd;
}

// ---- similarity error ----

struct SimilarityError {
    Vector7d e = Vector7d::Zero();          // log(reverse(V_Sc) V_Sd), shortest representative
    Matrix7Xd jacobian;                     // de/dq
    Multivector current;                    // V_Sc
};

inline SimilarityError similarity_error(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                        const Multivector& target, OrientationContext* ctx = nullptr,
                                        bool with_jacobian = true)
{
    auto ev = cooperative_similarity_eval(sys, q, ctx, with_jacobian);
    MvJet err = shortest(reverse(ev.versor) * MvJet(target));
    auto c = log_coords(err);
    SimilarityError out;
    out.current = ev.versor.v;
    if (with_jacobian) out.jacobian = Matrix7Xd::Zero(7, sys.dof());
    for (int i = 0; i < 7; ++i) {
        out.e[i] = c[i].v;
        if (with_jacobian && c[i].d.size()) out.jacobian.row(i) = c[i].d.transpose();
    }
    return out;
}

// ---- Gauss-Newton inverse kinematics ----

struct IkOptions {
    double tol = 1e-6;
    int max_iter = 100;
    double alpha0 = 1.0;
    double backtrack = 0.5;
    double armijo = 1e-4;
    double min_alpha = 1e-10;
    bool throw_on_failure = false;
};

struct IkResult {
    Eigen::VectorXd q;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    int rejected_steps = 0;     // trial points that were degenerate
    std::vector<double> trace;  // residual after each accepted iteration, starting with the initial one
};

inline IkResult gauss_newton_ik(const CooperativeSystem& sys, const Eigen::VectorXd& q0, const Multivector& target,
                                const IkOptions& opt = {})
{
    IkResult res;
    res.q = q0;
    auto cur = similarity_error(sys, q0, target);
    double f = cur.e.squaredNorm();
    res.residual = std::sqrt(f);
    res.trace.push_back(res.residual);
    int rank = mask_size(sys.kind);

    while (res.residual > opt.tol && res.iterations < opt.max_iter) {
        Eigen::VectorXd step = pseudo_inverse(cur.jacobian, rank).pinv * cur.e;
        double slope = 2.0 * cur.e.dot(cur.jacobian * step);
        if (!(slope > 0.0)) break;
        double alpha = opt.alpha0;
        bool accepted = false;
        while (alpha >= opt.min_alpha) {
            Eigen::VectorXd qt = res.q - alpha * step;
            try {
                auto trial = similarity_error(sys, qt, target);
                double ft = trial.e.squaredNorm();
                if (ft <= f - opt.armijo * alpha * slope) {
                    res.q = qt;
                    cur = std::move(trial);
                    f = ft;
                    accepted = true;
                    break;
                }
            } catch (const DegeneratePrimitive&) {
                ++res.rejected_steps;
            } catch (const RotationSingularity&) {
                ++res.rejected_steps;
            }
            alpha *= opt.backtrack;
        }
        if (!accepted) break;
        ++res.iterations;
        res.residual = std::sqrt(f);
        res.trace.push_back(res.residual);
    }
    res.converged = res.residual <= opt.tol;
    if (!res.converged && opt.throw_on_failure)
        throw NotConverged("inverse kinematics stopped at residual " + std::to_string(res.residual) + " after " +
                           std::to_string(res.iterations) + " iterations");
    return res;
}

// ---- similarity impedance ----

struct ImpedanceResult {
    Eigen::VectorXd tau;
    Vector7d error = Vector7d::Zero();     // B_e
    Vector7d accel = Vector7d::Zero();     // desired similarity acceleration
    Vector7d wrench = Vector7d::Zero();    // W_d
    TaskSpaceDynamics dynamics;
};

// Regulation (constant target): xi_dot_d = K B_e + D (-xi / 2), W_d = M_S xi_dot_d + C_S + g_S, tau = J_G^T W_d
inline ImpedanceResult impedance_control(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& qd, const Multivector& target, const Gains& gains,
                                         const JointDynamicsModel& model, OrientationContext* ctx = nullptr)
{
    ImpedanceResult out;
    OrientationContext before;
    if (ctx) before = *ctx;
    out.dynamics = task_space_dynamics(sys, q, qd, model, ctx);
    out.error = similarity_error(sys, q, target, ctx ? &before : nullptr, false).e;
    out.accel = gains.K * out.error + gains.D * (-0.5 * out.dynamics.twist);
    out.wrench = out.dynamics.inertia * out.accel + out.dynamics.coriolis + out.dynamics.gravity;
    out.tau = out.dynamics.jg.transpose() * out.wrench;
    return out;
}

inline Eigen::VectorXd impedance_torque(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& qd, const Multivector& target, const Gains& gains,
                                        const JointDynamicsModel& model)
{
    return impedance_control(sys, q, qd, target, gains, model).tau;
}

// ---- secondary tasks in the geometric nullspace ----

// d(end-effector position of chain c)/dq over the stacked joint vector, 3 x m
inline Eigen::MatrixXd point_jacobian(const CooperativeSystem& sys, const Eigen::VectorXd& q, int c)
{
    Eigen::VectorXd qc = sys.slice(q, c);
    MvJet m = sys.chains[c].forward_kinematics_jet(qc, sys.index[c], sys.dof());
    MvJet p = m * MvJet(e0()) * reverse(m);  // unit weight, so the Euclidean part is the position
    Eigen::MatrixXd j(3, sys.dof());
    for (int k = 0; k < sys.dof(); ++k) j.col(k) = euclidean_part(p.d[k]);
    return j;
}

inline Eigen::VectorXd project_secondary(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& qd_task, OrientationContext* ctx = nullptr)
{
    Matrix7Xd jg = cooperative_geometric_jacobian(sys, q, ctx);
    return nullspace_projector(jg, mask_size(sys.kind)) * qd_task;
}

}  // namespace coopga
