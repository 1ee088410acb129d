#pragma once

#include <chrono>
#include <cstring>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>

#include "teleop.hpp"

// Property suites shared by the CLI and the acceptance binary. Every derivative is compared with
// central finite differences and every identity is measured, so a report carries numbers, not just flags.
namespace coopga::verify {

// ---- oracles ----

inline Eigen::MatrixXd fd_multivector(const std::function<Multivector(const Eigen::VectorXd&)>& f,
                                      const Eigen::VectorXd& x, double h = 1e-6)
{
    Eigen::MatrixXd j(32, x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        Multivector d = (f(xp) - f(xm)) * (1.0 / (2.0 * h));
        for (int i = 0; i < 32; ++i) j(i, k) = d.c[i];
    }
    return j;
}

inline Eigen::MatrixXd fd_vector(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double h = 1e-6)
{
    Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd j(f0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        j.col(k) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return j;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref)
{
    return (a - ref).norm() / std::max(ref.norm(), 1e-12);
}

inline Eigen::MatrixXd columns(const MultivectorJacobian& j)
{
    Eigen::MatrixXd m(32, static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k)
        for (int i = 0; i < 32; ++i) m(i, static_cast<Eigen::Index>(k)) = j[k].c[i];
    return m;
}

// J_G from a multivector Jacobian: -2 reverse(V) dV, column by column
inline Eigen::MatrixXd geometric_columns(const Multivector& v, const Eigen::MatrixXd& dv)
{
    Multivector vr = reverse(v) * -2.0;
    Eigen::MatrixXd out(7, dv.cols());
    for (Eigen::Index k = 0; k < dv.cols(); ++k) {
        Multivector col;
        for (int i = 0; i < 32; ++i) col.c[i] = dv(i, k);
        out.col(k) = to_coords(vr * col);
    }
    return out;
}

inline Multivector random_multivector(std::mt19937& rng, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    Multivector m;
    for (double& v : m.c) v = u(rng);
    return m;
}

inline Eigen::Vector3d random_vec3(std::mt19937& rng, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(rng), u(rng), u(rng)};
}

// rotation angle in (0, pi - 0.1), dilation in (-1, 1), translation in (-2, 2)
inline Vector7d random_bivector(std::mt19937& rng, double rot_max = M_PI - 0.1)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> ang(1e-3, rot_max);
    Eigen::Vector3d axis(u(rng), u(rng), u(rng));
    axis.normalize();
    Vector7d b;
    b.head<3>() = axis * ang(rng);
    b[3] = u(rng);
    b.tail<3>() = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 2.0;
    return b;
}

inline Eigen::VectorXd perturb(const Eigen::VectorXd& q, std::mt19937& rng, double range)
{
    std::uniform_real_distribution<double> u(-range, range);
    Eigen::VectorXd r = q;
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] += u(rng);
    return r;
}

inline bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

// ---- reports ----

enum class Rel { Le, Lt, Ge, Gt };

inline const char* symbol(Rel r)
{
    switch (r) {
    case Rel::Le: return "<=";
    case Rel::Lt: return "<";
    case Rel::Ge: return ">=";
    default: return ">";
    }
}

struct Check {
    std::string name;
    double measured = 0.0;
    Rel rel = Rel::Le;
    double bound = 0.0;
    std::string note;

    bool pass() const
    {
        switch (rel) {
        case Rel::Le: return measured <= bound;
        case Rel::Lt: return measured < bound;
        case Rel::Ge: return measured >= bound;
        default: return measured > bound;
        }
    }
};

struct Report {
    std::string suite;
    std::vector<Check> checks;
    double seconds = 0.0;

    void add(std::string name, double measured, Rel rel, double bound, std::string note = {})
    {
        checks.push_back({std::move(name), measured, rel, bound, std::move(note)});
    }

    bool pass() const
    {
        return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });
    }

    json to_json() const
    {
        json cs = json::array();
        for (const auto& c : checks)
            cs.push_back({{"name", c.name},
                          {"measured", std::isfinite(c.measured) ? json(c.measured) : json(nullptr)},
                          {"relation", symbol(c.rel)},
                          {"bound", c.bound},
                          {"pass", c.pass()},
                          {"note", c.note}});
        return {{"suite", suite}, {"pass", pass()}, {"seconds", seconds}, {"checks", cs}};
    }
};

inline void print(std::ostream& os, const Report& r)
{
    for (const auto& c : r.checks) {
        os << "  " << (c.pass() ? "ok   " : "FAIL ") << c.name << ": " << std::setprecision(3) << c.measured << ' '
           << symbol(c.rel) << ' ' << c.bound;
        if (!c.note.empty()) os << "  (" << c.note << ')';
        os << '\n';
    }
}

template <class F>
Report timed(const std::string& suite, F&& body)
{
    Report r;
    r.suite = suite;
    auto t0 = std::chrono::steady_clock::now();
    body(r);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline std::string sci(double v)
{
    std::ostringstream os;
    os << std::setprecision(3) << v;
    return os.str();
}

inline std::string path_in(const std::string& data_dir, const std::string& rel) { return data_dir + "/" + rel; }

inline const std::vector<GroupKind>& all_groups()
{
    static const std::vector<GroupKind> g{GroupKind::Rotation, GroupKind::Translation, GroupKind::Dilation,
                                          GroupKind::Motor, GroupKind::Similarity};
    return g;
}

inline const std::vector<PrimitiveKind>& all_kinds()
{
    static const std::vector<PrimitiveKind> k{PrimitiveKind::Point,  PrimitiveKind::PointPair, PrimitiveKind::Line,
                                              PrimitiveKind::Circle, PrimitiveKind::Plane,     PrimitiveKind::Sphere};
    return k;
}

// ---- suites ----

inline Report algebra(int triples = 1000, unsigned seed = 1)
{
    return timed("algebra", [&](Report& r) {
        Multivector i = pseudoscalar();
        r.add("e0^2 = 0", (e0() * e0()).norm_inf(), Rel::Le, 1e-12);
        r.add("einf^2 = 0", (einf() * einf()).norm_inf(), Rel::Le, 1e-12);
        r.add("e0 . einf = -1", std::abs(scalar_product(e0(), einf()) + 1.0), Rel::Le, 1e-12);
        r.add("I^2 = -1", (i * i - Multivector(-1.0)).norm_inf(), Rel::Le, 1e-12);

        std::mt19937 rng(seed);
        double assoc = 0.0;
        for (int k = 0; k < triples; ++k) {
            Multivector a = random_multivector(rng), b = random_multivector(rng), c = random_multivector(rng);
            assoc = std::max(assoc, ((a * b) * c - a * (b * c)).norm_inf());
        }
        r.add("associativity over " + std::to_string(triples) + " triples", assoc, Rel::Le, 1e-12);

        std::array<bool, 32> in{};
        for (int b : group_span(GroupKind::Similarity)) in[b] = true;
        double outside = 0.0;
        for (int k = 0; k < triples; ++k) {
            Multivector a = exp_versor(GroupBivector(GroupKind::Similarity, random_bivector(rng))).value;
            Multivector b = exp_versor(GroupBivector(GroupKind::Similarity, random_bivector(rng))).value;
            Multivector p = a * b;
            for (int c = 0; c < 32; ++c)
                if (!in[c]) outside = std::max(outside, std::abs(p.c[c]));
        }
        r.add("similarity products stay in the 12-blade span", outside, Rel::Le, 0.0, "exact zeros");
    });
}

inline Report groups(int samples = 10000, unsigned seed = 2)
{
    return timed("groups", [&](Report& r) {
        std::mt19937 rng(seed);
        for (auto g : all_groups()) {
            double trip = 0.0, constraint = 0.0;
            for (int k = 0; k < samples; ++k) {
                GroupBivector b(g, random_bivector(rng));
                Versor v = exp_versor(b);
                trip = std::max(trip, (log_versor(v).coords - b.coords).norm());
                constraint = std::max(constraint, versor_constraint_error(v.value));
            }
            r.add(to_string(g) + " exp/log round trip", trip, Rel::Le, 1e-10);
            r.add(to_string(g) + " versor constraint", constraint, Rel::Le, 1e-10);
        }
        Vector7d minus;
        minus.setZero();
        minus[row::e0inf] = -1.0;
        double from_scale = (log_versor(Versor(GroupKind::Dilation, dilator(0.3679))).coords - minus).norm();
        Multivector d = exp_versor(GroupBivector(GroupKind::Dilation, minus)).value;
        double to_scale = std::abs(std::exp(log_coords(d)[row::e0inf]) - 0.3679);
        r.add("log of the d = 0.3679 dilator is -e0inf", from_scale, Rel::Le, 1e-4);
        r.add("exp(-e0inf) scales by 0.3679", to_scale, Rel::Le, 1e-4);
    });
}

// J^A and J_G of every chain, the cooperative primitive Jacobian, J_A, J_G and J_B of the
// similarity, and the normalize / inverse Jacobians, all against central differences.
inline Report jacobians(const std::vector<CooperativeSystem>& systems, int configs = 50, unsigned seed = 3)
{
    return timed("jacobians", [&](Report& r) {
        std::mt19937 rng(seed);
        double chain_a = 0, chain_g = 0, prim = 0, ja = 0, jg = 0, jb = 0, jn = 0, ji = 0, logj = 0;
        int skipped = 0, used = 0;
        for (const auto& sys : systems) {
            for (int t = 0; t < configs; ++t) {
                Eigen::VectorXd q = perturb(sys.nominal, rng, 0.3);
                try {
                    for (int c = 0; c < sys.chain_count(); ++c) {
                        const auto& chain = sys.chains[c];
                        Eigen::VectorXd qc = sys.slice(q, c);
                        Eigen::MatrixXd fd =
                            fd_multivector([&](const Eigen::VectorXd& x) { return chain.forward_kinematics(x); }, qc);
                        chain_a = std::max(chain_a, rel_err(columns(chain.analytic_jacobian(qc)), fd));
                        chain_g = std::max(chain_g, rel_err(chain.geometric_jacobian(qc),
                                                            geometric_columns(chain.forward_kinematics(qc), fd)));
                    }
                    Eigen::MatrixXd xfd = fd_multivector(
                        [&](const Eigen::VectorXd& x) { return cooperative_primitive_jet(sys, x, false).v; }, q);
                    prim = std::max(prim, rel_err(columns(cooperative_primitive_jacobian(sys, q)), xfd));

                    OrientationContext ctx;
                    auto js = similarity_jacobians(sys, q, &ctx, LogJacobianMethod::Analytic);
                    // the reference keeps the orientation chosen at q so the sign cannot flip mid-stencil
                    auto sim_at = [&](const Eigen::VectorXd& x) {
                        OrientationContext c = ctx;
                        return cooperative_similarity(sys, x, &c).value;
                    };
                    Eigen::MatrixXd vfd = fd_multivector(sim_at, q);
                    ja = std::max(ja, rel_err(columns(js.analytic), vfd));
                    jg = std::max(jg, rel_err(js.geometric, geometric_columns(js.versor, vfd)));
                    Eigen::MatrixXd bfd = fd_vector(
                        [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return log_coords(sim_at(x)); }, q);
                    jb = std::max(jb, rel_err(js.bivector, bfd));
                    logj = std::max(logj, rel_err(log_jacobian_analytic(js.versor), log_jacobian_fd(js.versor)));
                    ++used;
                } catch (const DegeneratePrimitive&) {
                    ++skipped;
                }
            }
        }
        for (int t = 0; t < configs; ++t) {
            Eigen::VectorXd x = perturb(Eigen::VectorXd::Zero(8), rng, 1.0);
            auto curve = [](const Eigen::VectorXd& p) {
                Vector7d b = p.head<7>();
                return exp_versor(GroupBivector(GroupKind::Similarity, b)).value * (1.5 + 0.3 * std::sin(p[7]));
            };
            Eigen::MatrixXd fd = fd_multivector(curve, x);
            MultivectorJacobian jx(8);
            for (int k = 0; k < 8; ++k)
                for (int i = 0; i < 32; ++i) jx[k].c[i] = fd(i, k);
            Multivector v = curve(x);
            jn = std::max(jn, rel_err(to_matrix(jacobian_normalize(v, jx)),
                                      fd_multivector([&](const Eigen::VectorXd& p) { return normalize(curve(p)); }, x)));
            ji = std::max(ji, rel_err(to_matrix(jacobian_inverse(v, jx)),
                                      fd_multivector([&](const Eigen::VectorXd& p) { return inverse(curve(p)); }, x)));
        }
        std::string note = std::to_string(used) + " configurations";
        if (skipped) note += ", " + std::to_string(skipped) + " degenerate skipped";
        r.add("chain analytic Jacobian J^A", chain_a, Rel::Le, 1e-5, note);
        r.add("chain geometric Jacobian J_G = -2 M~ J^A", chain_g, Rel::Le, 1e-5);
        r.add("cooperative primitive Jacobian", prim, Rel::Le, 1e-5);
        r.add("similarity J_A", ja, Rel::Le, 1e-5);
        r.add("similarity J_G", jg, Rel::Le, 1e-5);
        r.add("similarity J_B", jb, Rel::Le, 1e-5);
        r.add("log Jacobian", logj, Rel::Le, 1e-5);
        r.add("normalize Jacobian", jn, Rel::Le, 1e-5);
        r.add("inverse Jacobian", ji, Rel::Le, 1e-5);
    });
}

inline Report similarity_pairs(int pairs = 500, unsigned seed = 4)
{
    return timed("similarity", [&](Report& r) {
        std::mt19937 rng(seed);
        for (auto k : all_kinds()) {
            double worst = 0.0, rotation = 0.0;
            int outside = 0, failed = 0;
            for (int t = 0; t < pairs; ++t) {
                try {
                    std::vector<Eigen::Vector3d> p1, p2;
                    for (int i = 0; i < point_count(k); ++i) {
                        p1.push_back(random_vec3(rng, 2.0));
                        p2.push_back(random_vec3(rng, 2.0));
                    }
                    auto x1 = construct(p1, is_flat(k)), x2 = construct(p2, is_flat(k));
                    Versor v = similarity_between(x1, x2);
                    worst = std::max(worst, comparison_residual(apply_versor(v, x1.blade), x2.blade));
                    if (!in_subgroup(v.value, similarity_group(k), 1e-10)) ++outside;
                    for (int b : {blade::e23, blade::e13, blade::e12, blade::e123inf})
                        rotation = std::max(rotation, std::abs(v.value.c[b]));
                } catch (const std::exception&) {
                    ++failed;
                }
            }
            r.add(to_string(k) + " sandwich residual", worst, Rel::Le, 1e-8,
                  to_string(similarity_group(k)) + " subgroup");
            r.add(to_string(k) + " versors outside the subgroup or failed", outside + failed, Rel::Le, 0.0);
            // spheres have no orientation, so their versor is a pure T D
            if (k == PrimitiveKind::Sphere) r.add("sphere versors: largest rotation coefficient", rotation, Rel::Le, 1e-12);
        }
    });
}

inline Report ik(const CooperativeSystem& sys, int targets = 100, unsigned seed = 5)
{
    return timed("ik", [&](Report& r) {
        std::mt19937 rng(seed);
        int ok = 0, total = 0, max_iter = 0;
        double worst = 0.0;
        while (total < targets) {
            Multivector target;
            try {
                target = cooperative_similarity(sys, perturb(sys.nominal, rng, 0.3)).value;
            } catch (const DegeneratePrimitive&) {
                continue;
            }
            ++total;
            auto res = gauss_newton_ik(sys, sys.nominal, target);
            if (res.converged && res.residual <= 1e-6 && res.iterations <= 100) {
                ++ok;
                max_iter = std::max(max_iter, res.iterations);
                worst = std::max(worst, res.residual);
            }
        }
        r.add("targets solved to 1e-6 within 100 iterations", static_cast<double>(ok) / total, Rel::Ge, 0.95,
              std::to_string(ok) + "/" + std::to_string(total) + ", at most " + std::to_string(max_iter) +
                  " iterations, worst residual " + sci(worst));
    });
}

inline Report ilqr(const CooperativeSystem& sys, int trials = 5, unsigned seed = 6)
{
    return timed("ilqr", [&](Report& r) {
        std::mt19937 rng(seed);
        OcpConfig cfg;
        cfg.Q = Matrix7d::Identity() * 1e4;
        int converged = 0, worst_iter = 0, increases = 0;
        double rollout = 0.0, worst_norm = 0.0;
        const Eigen::VectorXd qd0 = Eigen::VectorXd::Zero(sys.dof());
        for (int t = 0; t < trials; ++t) {
            Multivector target = cooperative_similarity(sys, perturb(sys.nominal, rng, 0.1)).value;
            auto sol = solve_reaching(sys, sys.nominal, qd0, target, cfg);
            converged += sol.converged;
            worst_iter = std::max(worst_iter, sol.iterations);
            worst_norm = std::max(worst_norm, sol.terminal_norm);
            for (std::size_t i = 1; i < sol.cost_trace.size(); ++i) increases += sol.cost_trace[i] > sol.cost_trace[i - 1];
            std::vector<Eigen::VectorXd> q, qd;
            coopga::rollout(sys.nominal, qd0, sol.u, cfg.dt, q, qd);
            for (std::size_t k = 0; k < q.size(); ++k)
                rollout = std::max({rollout, (q[k] - sol.q[k]).lpNorm<Eigen::Infinity>(),
                                    (qd[k] - sol.qd[k]).lpNorm<Eigen::Infinity>()});
        }
        r.add("targets converged (terminal norm <= 1e-3)", converged, Rel::Ge, trials,
              "n = 250, dt = 0.001, Q = 1e4 I, worst terminal norm " + sci(worst_norm));
        r.add("iterations", worst_iter, Rel::Le, 10);
        r.add("cost increases between accepted iterates", increases, Rel::Le, 0);
        r.add("rollout consistency", rollout, Rel::Le, 1e-12);
    });
}

inline Report impedance(const std::string& data_dir)
{
    return timed("impedance", [&](Report& r) {
        auto res = sim::run_scenario(sim::load_scenario(path_in(data_dir, "scenarios/impedance.json")));
        // final / initial error per row group, worst over the runs
        double rot = 0.0, dil = 0.0, tr = 0.0;
        for (const auto& run : res.summary["runs"]) {
            Eigen::VectorXd e0 = io::to_vector(run["initial_error_rows"]), ef = io::to_vector(run["final_error_rows"]);
            double n0 = e0.norm();
            rot = std::max(rot, ef.head<3>().norm() / n0);
            dil = std::max(dil, std::abs(ef[row::e0inf]) / n0);
            tr = std::max(tr, ef.tail<3>().norm() / n0);
        }
        std::ostringstream note;
        note << std::setprecision(3) << "rotation rows " << rot << ", dilation " << dil << ", translation " << tr
             << " of the initial norm";
        r.add("worst final / initial error over 10 runs", res.summary["worst_ratio"].get<double>(), Rel::Lt, 0.05,
              note.str());
    });
}

inline Report nullspace(const std::string& data_dir)
{
    return timed("nullspace", [&](Report& r) {
        auto on = sim::run_scenario(sim::load_scenario(path_in(data_dir, "scenarios/nullspace.json")));
        auto off = sim::run_scenario(sim::load_scenario(path_in(data_dir, "scenarios/nullspace-unprojected.json")));
        const auto& a = on.summary["runs"][0];
        r.add("projected: secondary error reduction", a["task_reduction"].get<double>(), Rel::Ge, 0.9);
        r.add("projected: max similarity distance", a["max_similarity_distance"].get<double>(), Rel::Le, 1e-6);
        r.add("unprojected: max similarity distance", off.summary["runs"][0]["max_similarity_distance"].get<double>(),
              Rel::Gt, 1e-3);
    });
}

inline Report singularity(const std::string& data_dir)
{
    return timed("singularity", [&](Report& r) {
        auto res = sim::run_scenario(sim::load_scenario(path_in(data_dir, "scenarios/singularity-sweep.json")));
        const auto& s = res.summary;
        r.add("radius monotone from t", s["radius_monotone_from"].get<double>(), Rel::Le, 0.0,
              "radius " + sci(s["initial_radius"].get<double>()) + " -> " + sci(s["final_radius"].get<double>()));
        r.add("smallest eigenvalue monotone from t", s["min_eig_monotone_from"].get<double>(), Rel::Le, 0.0);
        r.add("final smallest manipulability eigenvalue", s["final_min_eig"].get<double>(), Rel::Lt, 1e-6);
        r.add("DegeneratePrimitive raised", s["degenerate_raised"].get<bool>() ? 1.0 : 0.0, Rel::Ge, 1.0,
              s["event"].get<std::string>());
    });
}

inline Report reaching(const std::string& data_dir)
{
    return timed("reaching", [&](Report& r) {
        auto run = [&](const char* name) {
            return sim::run_scenario(sim::load_scenario(path_in(data_dir, std::string("scenarios/") + name + ".json")));
        };
        auto circle = run("circle-reaching");
        auto plane = run("plane-reaching");
        auto line = run("line-constraint");
        r.add("circle reaching: max |e0inf| twist", circle.summary["max_abs_twist"][row::e0inf].get<double>(), Rel::Gt,
              1e-6, circle.summary["converged"].get<bool>() ? "converged" : "did not converge");
        r.add("plane reaching: max |e0inf| twist", plane.summary["max_abs_twist"][row::e0inf].get<double>(), Rel::Le,
              1e-10, plane.summary["converged"].get<bool>() ? "converged" : "did not converge");
        r.add("line constraint: max coefficient deviation",
              line.summary["runs"][0]["max_coefficient_deviation"].get<double>(), Rel::Le, 1e-6);
    });
}

// A commander with varying axes, bursts that latest-wins drops, a stale gap, a reordered packet and a
// read-only viewer.
inline std::vector<teleop::StateUpdate> scripted_session(teleop::Session& s, int ticks)
{
    std::vector<teleop::StateUpdate> states;
    using teleop::AxesCommand;
    s.connect(1, 0);
    s.connect(2, 0);
    std::uint64_t seq = 0;
    auto text = [](const teleop::Axes& a, std::uint64_t n, std::int64_t t) {
        return teleop::encode(AxesCommand{a, t, n}).dump();
    };
    for (int k = 0; k < ticks; ++k) {
        std::int64_t now = 10 * k;
        if (k < 40 || (k > 70 && k < 110)) {
            double w = std::sin(0.1 * k);
            s.handle(1, text({0.3 * w, -0.2, 0.1 * w, 0.4, -0.3 * w, 0.2, -0.6 * w}, ++seq, now), now);
            s.handle(1, text({0.3 * w, 0.2, 0.1, 0.4, 0.3, -0.2 * w, 0.5}, ++seq, now), now + 1);
        }
        if (k == 50) s.handle(1, text({1, 1, 1, 1, 1, 1, 1}, 1, now), now);
        if (k == 60) s.handle(2, text({1, 1, 1, 1, 1, 1, 1}, 1000, now), now);
        states.push_back(s.tick(now + 5));
    }
    return states;
}

inline Report teleop_replay(const CooperativeSystem& sys, int ticks = 150)
{
    return timed("teleop", [&](Report& r) {
        teleop::TeleopConfig cfg;
        teleop::Session online(sys, cfg);
        auto states = scripted_session(online, ticks);
        std::ostringstream file;
        teleop::write_log(file, online.log());
        std::istringstream back(file.str());
        auto again = teleop::replay(sys, cfg, teleop::read_log(back));
        int diff_replay = again.size() == states.size() ? 0 : 1;
        for (std::size_t k = 0; k < std::min(again.size(), states.size()); ++k)
            diff_replay += teleop::encode(again[k]).dump() != teleop::encode(states[k]).dump();

        auto offline = sim::run_kinematic(teleop::offline_scenario(sys, online.config(), online.tick_log()));
        int diff_offline = offline.records.size() == states.size() + 1 ? 0 : 1;
        for (std::size_t k = 0; k < std::min(offline.records.size(), states.size()); ++k)
            diff_offline += !same_bits(offline.records[k].q, states[k].q) ||
                            !same_bits(offline.records[k].log_v, states[k].log_v);
        if (!same_bits(offline.records.back().q, online.q())) ++diff_offline;

        r.add("ticks differing after log replay", diff_replay, Rel::Le, 0,
              std::to_string(states.size()) + " ticks, compared as encoded messages");
        r.add("ticks differing from the offline kinematic run", diff_offline, Rel::Le, 0, "bit-for-bit q and log");

        // pure dilation: the sphere radius follows the sign of the command at every tick
        for (double sign : {-1.0, 1.0}) {
            teleop::Session s(sys, cfg);
            s.connect(1, 0);
            int wrong = 0;
            double prev = -1.0;
            for (int k = 0; k < 40; ++k) {
                s.handle(1, teleop::encode(teleop::AxesCommand{{0, 0, 0, 0, 0, 0, 0.5 * sign}, 0, std::uint64_t(k + 1)}).dump(),
                         10 * k);
                auto st = s.tick(10 * k);
                if (st.flags.singular) ++wrong;
                else if (prev > 0.0 && (sign < 0 ? st.params.radius >= prev : st.params.radius <= prev)) ++wrong;
                prev = st.params.radius;
            }
            r.add(std::string(sign < 0 ? "closing" : "opening") + " dilation: non-monotone radius steps", wrong,
                  Rel::Le, 0);
        }
    });
}

}  // namespace coopga::verify
