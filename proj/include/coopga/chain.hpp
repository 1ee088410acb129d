#pragma once

#include <limits>
#include <string>
#include <vector>

#include "versor.hpp"

namespace coopga {

enum class JointType { Revolute, Prismatic, Screw };

// A joint is a motor bivector B; the joint motor is exp(q B) taken as the exact
// screw exponential, i.e. rotation about the shifted axis plus any translation along it.
class Joint {
public:
    std::string name;
    JointType type = JointType::Revolute;
    Vector7d axis = Vector7d::Zero();  // coordinates on the similarity rows, dilation row zero
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    Joint() = default;

    static Joint from_bivector(std::string name, const Vector7d& b)
    {
        Joint j;
        j.name = std::move(name);
        j.axis = b;
        j.axis[row::e0inf] = 0.0;
        double rn = j.axis.head<3>().norm();
        if (rn > 1e-12) {
            j.axis /= rn;
            j.type = JointType::Revolute;
        } else {
            double tn = j.axis.tail<3>().norm();
            if (tn < 1e-12) throw ConfigError("joint '" + j.name + "' has a zero axis");
            j.axis /= tn;
            j.type = JointType::Prismatic;
        }
        j.prepare();
        return j;
    }

    // rotation about a unit axis through origin (right-handed)
    static Joint revolute(std::string name, const Eigen::Vector3d& axis, const Eigen::Vector3d& origin)
    {
        Eigen::Vector3d a = axis.normalized();
        Multivector omega = to_multivector(Vector7d((Vector7d() << a.x(), -a.y(), a.z(), 0, 0, 0, 0).finished()));
        Multivector t = exp_translator(origin);
        Joint j = from_bivector(std::move(name), to_coords(t * omega * reverse(t)));
        j.type = JointType::Revolute;
        return j;
    }

    static Joint prismatic(std::string name, const Eigen::Vector3d& axis)
    {
        Eigen::Vector3d a = axis.normalized();
        Vector7d b = Vector7d::Zero();
        b.tail<3>() = a;
        return from_bivector(std::move(name), b);
    }

    Multivector bivector() const { return to_multivector(axis); }

    Multivector motor(double q) const
    {
        if (type == JointType::Prismatic) return exp_translator(q * axis.tail<3>());
        Multivector r = exp_rotor(q * axis.head<3>());
        Multivector m = shift_ * r * reverse(shift_);
        if (pitch_.squaredNorm() > 0.0) m = exp_translator(q * pitch_) * m;
        return m;
    }

    // point on the axis closest to the origin, and the translation per unit q along it
    const Eigen::Vector3d& axis_point() const { return point_; }
    const Eigen::Vector3d& pitch() const { return pitch_; }

private:
    Multivector shift_{1.0};
    Eigen::Vector3d point_ = Eigen::Vector3d::Zero();
    Eigen::Vector3d pitch_ = Eigen::Vector3d::Zero();

    void prepare()
    {
        if (type == JointType::Prismatic) return;
        // translation part of T_p Omega T_p~ is linear in p
        Multivector omega = to_multivector(Vector7d((Vector7d() << axis.head<3>(), 0, 0, 0, 0).finished()));
        Eigen::Matrix3d a;
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d p = Eigen::Vector3d::Unit(k);
            Multivector t = exp_translator(p);
            a.col(k) = to_coords(t * omega * reverse(t)).tail<3>();
        }
        Eigen::Vector3d v = axis.tail<3>();
        point_ = a.completeOrthogonalDecomposition().solve(v);
        pitch_ = v - a * point_;
        if (pitch_.norm() > 1e-12) type = JointType::Screw;
        else pitch_.setZero();
        shift_ = exp_translator(point_);
    }
};

class KinematicChain {
public:
    std::string name;
    Multivector base{1.0};
    std::vector<Joint> joints;
    Multivector ee_offset{1.0};
    bool enforce_limits = false;

    int dof() const { return static_cast<int>(joints.size()); }

    void check(const Eigen::VectorXd& q) const
    {
        if (q.size() != dof())
            throw DegenerateInput("chain '" + name + "' expects " + std::to_string(dof()) + " joint values");
        if (!enforce_limits) return;
        for (int j = 0; j < dof(); ++j)
            if (q[j] < joints[j].lower || q[j] > joints[j].upper)
                throw JointLimit("joint '" + joints[j].name + "' outside its limits");
    }

    Multivector forward_kinematics(const Eigen::VectorXd& q) const
    {
        check(q);
        Multivector m = base;
        for (int j = 0; j < dof(); ++j) m = m * joints[j].motor(q[j]);
        return m * ee_offset;
    }

    Multivector end_effector_point(const Eigen::VectorXd& q) const
    {
        return apply_versor(forward_kinematics(q), e0());
    }

    // columns dM/dq_j = base E_1..E_{j-1} (-B_j/2) E_j..E_n ee
    MultivectorJacobian analytic_jacobian(const Eigen::VectorXd& q) const
    {
        check(q);
        int n = dof();
        std::vector<Multivector> e(n);
        for (int j = 0; j < n; ++j) e[j] = joints[j].motor(q[j]);
        std::vector<Multivector> suffix(n + 1);
        suffix[n] = ee_offset;
        for (int j = n - 1; j >= 0; --j) suffix[j] = e[j] * suffix[j + 1];
        MultivectorJacobian cols(n);
        Multivector prefix = base;
        for (int j = 0; j < n; ++j) {
            cols[j] = prefix * (joints[j].bivector() * -0.5) * suffix[j];
            prefix = prefix * e[j];
        }
        return cols;
    }

    // forward kinematics with its derivative, columns placed at the given global indices
    MvJet forward_kinematics_jet(const Eigen::VectorXd& q, const std::vector<int>& index, int total) const
    {
        MvJet m(forward_kinematics(q));
        m.d.assign(total, Multivector{});
        auto cols = analytic_jacobian(q);
        for (int j = 0; j < dof(); ++j) m.d[index[j]] += cols[j];
        return m;
    }

    // body-frame twists, one 7-vector per joint
    Eigen::Matrix<double, 7, Eigen::Dynamic> geometric_jacobian(const Eigen::VectorXd& q) const
    {
        Multivector m = forward_kinematics(q);
        auto ja = analytic_jacobian(q);
        Eigen::Matrix<double, 7, Eigen::Dynamic> jg(7, dof());
        Multivector mr = reverse(m) * -2.0;
        for (int j = 0; j < dof(); ++j) jg.col(j) = to_coords(mr * ja[j]);
        return jg;
    }
};

struct CdtsMotors {
    Multivector relative;
    Multivector absolute;
};

inline CdtsMotors cdts_motors(const KinematicChain& c1, const Eigen::VectorXd& q1, const KinematicChain& c2,
                              const Eigen::VectorXd& q2)
{
    Multivector m1 = c1.forward_kinematics(q1);
    Multivector m2 = c2.forward_kinematics(q2);
    Multivector rel = reverse(m2) * m1;
    GroupBivector b = log_versor(Versor(GroupKind::Motor, rel));
    b.coords *= 0.5;
    return {rel, m2 * exp_versor(b).value};
}

}  // namespace coopga
