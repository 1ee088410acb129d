#pragma once

#include "control.hpp"

namespace coopga {

struct OcpConfig {
    int horizon = 250;
    double dt = 1e-3;
    double r_weight = 1e-4;          // R = r_weight I unless R is given
    Eigen::MatrixXd R;
    Matrix7d Q = Matrix7d::Identity();
    int max_iter = 50;
    double tol = 1e-3;               // on the terminal error bivector norm
    double mu_init = 1e-6;
    double mu_min = 1e-9;
    double mu_max = 1e10;
    int line_search_steps = 10;
    bool throw_on_failure = false;
};

struct OcpSolution {
    std::vector<Eigen::VectorXd> q, qd;  // horizon + 1 states
    std::vector<Eigen::VectorXd> u;      // horizon controls (joint accelerations)
    std::vector<double> cost_trace;      // cost of each accepted iterate, starting with the initial rollout
    Vector7d terminal_error = Vector7d::Zero();
    double terminal_norm = 0.0;
    int iterations = 0;
    int rejected = 0;
    double mu = 0.0;
    bool converged = false;
};

// exact discretization of the double integrator
inline void integrate(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& u, double dt,
                      Eigen::VectorXd& q_next, Eigen::VectorXd& qd_next)
{
    q_next = q + dt * qd + (0.5 * dt * dt) * u;
    qd_next = qd + dt * u;
}

inline void rollout(const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0, const std::vector<Eigen::VectorXd>& u,
                    double dt, std::vector<Eigen::VectorXd>& q, std::vector<Eigen::VectorXd>& qd)
{
    q.assign(u.size() + 1, {});
    qd.assign(u.size() + 1, {});
    q[0] = q0;
    qd[0] = qd0;
    for (std::size_t k = 0; k < u.size(); ++k) integrate(q[k], qd[k], u[k], dt, q[k + 1], qd[k + 1]);
}

namespace detail {

inline Eigen::MatrixXd control_weight(const OcpConfig& cfg, int m)
{
    if (cfg.R.size() > 0) {
        if (cfg.R.rows() != m || cfg.R.cols() != m) throw ConfigError("R has the wrong size");
        return cfg.R;
    }
    return Eigen::MatrixXd::Identity(m, m) * cfg.r_weight;
}

inline double running_cost(const std::vector<Eigen::VectorXd>& u, const Eigen::MatrixXd& r)
{
    double c = 0.0;
    for (const auto& uk : u) c += uk.dot(r * uk);
    return c;
}

}  // namespace detail

// l_f = e^T Q e with e = log(reverse(V_Sc(q_n)) V_Sd); gradient and Gauss-Newton Hessian over q_n
struct TerminalCost {
    double value = 0.0;
    Vector7d error = Vector7d::Zero();
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

inline TerminalCost terminal_cost(const CooperativeSystem& sys, const Eigen::VectorXd& q, const Multivector& target,
                                  const Matrix7d& Q, bool with_derivatives = true)
{
    auto se = similarity_error(sys, q, target, nullptr, with_derivatives);
    TerminalCost t;
    t.error = se.e;
    t.value = se.e.dot(Q * se.e);
    if (with_derivatives) {
        t.gradient = 2.0 * se.jacobian.transpose() * (Q * se.e);
        t.hessian = 2.0 * se.jacobian.transpose() * Q * se.jacobian;
    }
    return t;
}

inline OcpSolution solve_reaching(const CooperativeSystem& sys, const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                                  const Multivector& target, const OcpConfig& cfg = {},
                                  std::vector<Eigen::VectorXd> u_init = {})
{
    const int m = sys.dof(), n = cfg.horizon, nx = 2 * m;
    if (n < 1 || cfg.dt <= 0.0) throw ConfigError("horizon and dt must be positive");
    const Eigen::MatrixXd R = detail::control_weight(cfg, m);
    const double dt = cfg.dt;

    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(nx, nx);
    A.topRightCorner(m, m) = dt * Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd B(nx, m);
    B.topRows(m) = 0.5 * dt * dt * Eigen::MatrixXd::Identity(m, m);
    B.bottomRows(m) = dt * Eigen::MatrixXd::Identity(m, m);

    OcpSolution sol;
    sol.u = u_init.empty() ? std::vector<Eigen::VectorXd>(n, Eigen::VectorXd::Zero(m)) : std::move(u_init);
    if (static_cast<int>(sol.u.size()) != n) throw ConfigError("initial controls have the wrong length");
    rollout(q0, qd0, sol.u, dt, sol.q, sol.qd);
    TerminalCost term = terminal_cost(sys, sol.q[n], target, cfg.Q);
    double cost = detail::running_cost(sol.u, R) + term.value;
    sol.cost_trace.push_back(cost);
    double mu = cfg.mu_init;

    std::vector<Eigen::VectorXd> kff(n);
    std::vector<Eigen::MatrixXd> kfb(n);
    while (term.error.norm() > cfg.tol && sol.iterations < cfg.max_iter) {
        // backward pass; the value Hessian is regularized by mu I
        Eigen::VectorXd vx = Eigen::VectorXd::Zero(nx);
        Eigen::MatrixXd vxx = Eigen::MatrixXd::Zero(nx, nx);
        vx.head(m) = term.gradient;
        vxx.topLeftCorner(m, m) = term.hessian;
        bool ok = true;
        for (int k = n - 1; k >= 0; --k) {
            Eigen::MatrixXd vreg = vxx + mu * Eigen::MatrixXd::Identity(nx, nx);
            Eigen::VectorXd qx = A.transpose() * vx;
            Eigen::VectorXd qu = 2.0 * R * sol.u[k] + B.transpose() * vx;
            Eigen::MatrixXd qxx = A.transpose() * vxx * A;
            Eigen::MatrixXd quu = 2.0 * R + B.transpose() * vreg * B;
            Eigen::MatrixXd qux = B.transpose() * vreg * A;
            Eigen::LLT<Eigen::MatrixXd> llt(quu);
            if (llt.info() != Eigen::Success) {
                ok = false;
                break;
            }
            kff[k] = -llt.solve(qu);
            kfb[k] = -llt.solve(qux);
            vx = qx + kfb[k].transpose() * (quu * kff[k]) + kfb[k].transpose() * qu + qux.transpose() * kff[k];
            vxx = qxx + kfb[k].transpose() * quu * kfb[k] + kfb[k].transpose() * qux + qux.transpose() * kfb[k];
            vxx = 0.5 * (vxx + vxx.transpose());
        }
        if (!ok) {
            mu = std::min(mu * 10.0, cfg.mu_max);
            ++sol.rejected;
            if (mu >= cfg.mu_max) break;
            continue;
        }

        // forward pass with a backtracking line search on the feedforward term
        bool accepted = false;
        double alpha = 1.0;
        for (int ls = 0; ls < cfg.line_search_steps && !accepted; ++ls, alpha *= 0.5) {
            std::vector<Eigen::VectorXd> u(n), q(n + 1), qd(n + 1);
            q[0] = q0;
            qd[0] = qd0;
            for (int k = 0; k < n; ++k) {
                Eigen::VectorXd dx(nx);
                dx << q[k] - sol.q[k], qd[k] - sol.qd[k];
                u[k] = sol.u[k] + alpha * kff[k] + kfb[k] * dx;
                integrate(q[k], qd[k], u[k], dt, q[k + 1], qd[k + 1]);
            }
            TerminalCost t;
            try {
                t = terminal_cost(sys, q[n], target, cfg.Q);
            } catch (const DegeneratePrimitive&) {
                continue;
            } catch (const RotationSingularity&) {
                continue;
            }
            double c = detail::running_cost(u, R) + t.value;
            if (c < cost) {
                sol.u = std::move(u);
                sol.q = std::move(q);
                sol.qd = std::move(qd);
                term = std::move(t);
                cost = c;
                accepted = true;
            }
        }
        if (accepted) {
            ++sol.iterations;
            sol.cost_trace.push_back(cost);
            mu = std::max(mu * 0.5, cfg.mu_min);
        } else {
            ++sol.rejected;
            mu = std::min(mu * 10.0, cfg.mu_max);
            if (mu >= cfg.mu_max) break;
        }
    }
    sol.terminal_error = term.error;
    sol.terminal_norm = term.error.norm();
    sol.converged = sol.terminal_norm <= cfg.tol;
    sol.mu = mu;
    if (!sol.converged && cfg.throw_on_failure)
        throw NotConverged("iLQR stopped with terminal error " + std::to_string(sol.terminal_norm) + " after " +
                           std::to_string(sol.iterations) + " iterations");
    return sol;
}

}  // namespace coopga
