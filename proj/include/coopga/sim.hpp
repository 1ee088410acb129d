#pragma once

#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>

#include "io.hpp"
#include "ocp.hpp"

namespace coopga::sim {

inline constexpr const char* kScenarioSchema = "coopga.scenario/1";
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Mode { Kinematic, Dynamic, Ik, Ocp, Nullspace, SingularitySweep };

inline std::string to_string(Mode m)
{
    switch (m) {
    case Mode::Kinematic: return "kinematic";
    case Mode::Dynamic: return "dynamic";
    case Mode::Ik: return "ik";
    case Mode::Ocp: return "ocp";
    case Mode::Nullspace: return "nullspace";
    case Mode::SingularitySweep: return "singularity-sweep";
    }
    return "?";
}

inline Mode mode_from_string(const std::string& s)
{
    for (Mode m : {Mode::Kinematic, Mode::Dynamic, Mode::Ik, Mode::Ocp, Mode::Nullspace, Mode::SingularitySweep})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown mode '" + s + "'");
}

struct TargetSpec {
    enum class Type { None, Relative, Similarity, Joints, Points };
    Type type = Type::None;
    Vector7d bivector = Vector7d::Zero();
    Eigen::VectorXd q;
    std::vector<Eigen::Vector3d> points;
};

// a bivector command held from t until the next segment starts
struct CommandSegment {
    double t = 0.0;
    Vector7d twist = Vector7d::Zero();
};

struct SecondaryTask {
    int chain = 0;
    std::optional<Eigen::Vector3d> point;   // absolute target
    std::optional<Eigen::Vector3d> offset;  // target relative to the start position
    std::optional<double> angle;            // move along a circle by this angle
    double gain = 1.0;
};

struct ConstraintSpec {
    enum class Type { None, Similarity, Coefficients };
    Type type = Type::Similarity;
    std::vector<int> coefficients;  // blade indices held fixed
    std::optional<double> gain;     // defaults to 1/dt
};

struct Scenario {
    std::string name;
    std::string description;
    Mode mode = Mode::Kinematic;
    std::string system_path;
    CooperativeSystem system;
    Eigen::VectorXd q0;
    double dt = 0.01;
    double duration = 1.0;
    std::uint64_t seed = 0;
    int runs = 1;
    double perturbation = 0.0;  // uniform +- per joint around q0
    int record_every = 1;
    TargetSpec target;
    std::vector<CommandSegment> commands;
    double feedback_gain = 0.0;
    double max_joint_speed = std::numeric_limits<double>::infinity();
    Gains gains = Gains::reference();
    double success_ratio = 0.05;
    IkOptions ik;
    OcpConfig ocp;
    SecondaryTask secondary;
    ConstraintSpec constraint;
    std::string output;
    json source;  // the parsed file, echoed in summaries
};

namespace detail {

inline Vector7d vec7(const json& j, const std::string& what)
{
    auto v = io::to_vector(j);
    if (v.size() != 7) throw ConfigError(what + " needs 7 entries");
    return v;
}

inline Eigen::Vector3d vec3(const json& j, const std::string& what)
{
    auto v = io::to_vector(j);
    if (v.size() != 3) throw ConfigError(what + " needs 3 entries");
    return v;
}

inline TargetSpec parse_target(const json& j, int dof)
{
    TargetSpec t;
    if (j.contains("relative")) {
        t.type = TargetSpec::Type::Relative;
        t.bivector = vec7(j["relative"], "target.relative");
    } else if (j.contains("similarity")) {
        t.type = TargetSpec::Type::Similarity;
        t.bivector = vec7(j["similarity"], "target.similarity");
    } else if (j.contains("joints")) {
        t.type = TargetSpec::Type::Joints;
        t.q = io::to_vector(j["joints"]);
        if (t.q.size() != dof) throw ConfigError("target.joints has the wrong size");
    } else if (j.contains("points")) {
        t.type = TargetSpec::Type::Points;
        for (const auto& p : j["points"]) t.points.push_back(vec3(p, "target point"));
    } else {
        throw ConfigError("target needs one of relative, similarity, joints, points");
    }
    return t;
}

inline Gains parse_gains(const json& j)
{
    if (j.is_string()) {
        if (j.get<std::string>() != "reference") throw ConfigError("unknown gain preset");
        return Gains::reference();
    }
    return Gains::diagonal(vec7(j.at("K"), "gains.K"), vec7(j.at("D"), "gains.D"));
}

}  // namespace detail

inline Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir = {})
{
    Scenario sc;
    sc.source = j;
    if (j.value("schema", std::string()) != kScenarioSchema)
        throw ConfigError(std::string("scenario schema must be ") + kScenarioSchema);
    sc.name = j.value("name", std::string("unnamed"));
    sc.description = j.value("description", std::string());
    if (!j.contains("mode")) throw ConfigError("scenario needs a mode");
    sc.mode = mode_from_string(j["mode"].get<std::string>());

    std::optional<PrimitiveKind> kind;
    if (j.contains("primitive")) kind = primitive_kind_from_string(j["primitive"].get<std::string>());
    if (!j.contains("system")) throw ConfigError("scenario needs a system");
    if (j["system"].is_string()) {
        std::filesystem::path p = j["system"].get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        sc.system_path = p.lexically_normal().string();
        sc.system = io::load_system(sc.system_path, kind);
    } else {
        sc.system = io::parse_system(j["system"], kind);
    }
    const int m = sc.system.dof();

    sc.q0 = j.contains("q0") ? io::to_vector(j["q0"]) : sc.system.nominal;
    if (sc.q0.size() != m) throw ConfigError("q0 has the wrong size");
    sc.dt = j.value("dt", sc.dt);
    sc.duration = j.value("duration", sc.duration);
    if (!(sc.dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(sc.duration >= 0.0)) throw ConfigError("duration must not be negative");
    sc.seed = j.value("seed", std::uint64_t{0});
    sc.runs = j.value("runs", 1);
    sc.perturbation = j.value("perturbation", 0.0);
    sc.record_every = std::max(1, j.value("record_every", 1));
    sc.output = j.value("output", std::string());
    if (sc.runs < 1) throw ConfigError("runs must be at least 1");

    if (j.contains("target")) sc.target = detail::parse_target(j["target"], m);
    if (j.contains("commands"))
        for (const auto& c : j["commands"])
            sc.commands.push_back({c.value("t", 0.0), detail::vec7(c.at("twist"), "command twist")});
    std::stable_sort(sc.commands.begin(), sc.commands.end(),
                     [](const CommandSegment& a, const CommandSegment& b) { return a.t < b.t; });
    sc.feedback_gain = j.value("feedback_gain", 0.0);
    if (j.contains("max_joint_speed")) sc.max_joint_speed = j["max_joint_speed"].get<double>();
    if (j.contains("gains")) sc.gains = detail::parse_gains(j["gains"]);
    sc.success_ratio = j.value("success_ratio", sc.success_ratio);

    if (j.contains("ik")) {
        const auto& k = j["ik"];
        sc.ik.tol = k.value("tol", sc.ik.tol);
        sc.ik.max_iter = k.value("max_iter", sc.ik.max_iter);
    }
    if (j.contains("ocp")) {
        const auto& o = j["ocp"];
        sc.ocp.horizon = o.value("horizon", sc.ocp.horizon);
        sc.ocp.dt = o.value("dt", sc.ocp.dt);
        sc.ocp.r_weight = o.value("r_weight", sc.ocp.r_weight);
        if (o.contains("q_weight")) {
            if (o["q_weight"].is_array())
                sc.ocp.Q = detail::vec7(o["q_weight"], "ocp.q_weight").asDiagonal();
            else
                sc.ocp.Q = Matrix7d::Identity() * o["q_weight"].get<double>();
        }
        sc.ocp.max_iter = o.value("max_iter", sc.ocp.max_iter);
        sc.ocp.tol = o.value("tol", sc.ocp.tol);
    }
    if (j.contains("secondary")) {
        const auto& s = j["secondary"];
        sc.secondary.chain = s.value("chain", 0);
        sc.secondary.gain = s.value("gain", 1.0);
        if (s.contains("point")) sc.secondary.point = detail::vec3(s["point"], "secondary.point");
        if (s.contains("offset")) sc.secondary.offset = detail::vec3(s["offset"], "secondary.offset");
        if (s.contains("angle")) sc.secondary.angle = s["angle"].get<double>();
        if (sc.secondary.chain < 0 || sc.secondary.chain >= sc.system.chain_count())
            throw ConfigError("secondary.chain out of range");
    }
    if (j.contains("constraint")) {
        const auto& c = j["constraint"];
        std::string type = c.value("type", std::string("similarity"));
        if (type == "none") sc.constraint.type = ConstraintSpec::Type::None;
        else if (type == "similarity") sc.constraint.type = ConstraintSpec::Type::Similarity;
        else if (type == "coefficients") sc.constraint.type = ConstraintSpec::Type::Coefficients;
        else throw ConfigError("unknown constraint type '" + type + "'");
        for (const auto& n : c.value("coefficients", json::array())) {
            int b = blade::from_name(n.get<std::string>());
            if (b < 0) throw ConfigError("unknown blade '" + n.get<std::string>() + "'");
            sc.constraint.coefficients.push_back(b);
        }
        if (sc.constraint.type == ConstraintSpec::Type::Coefficients && sc.constraint.coefficients.empty())
            throw ConfigError("coefficient constraint needs at least one blade");
        if (c.contains("gain")) sc.constraint.gain = c["gain"].get<double>();
    }

    bool needs_target = sc.mode == Mode::Ik || sc.mode == Mode::Ocp;
    if (needs_target && sc.target.type == TargetSpec::Type::None)
        throw ConfigError(to_string(sc.mode) + " mode needs a target");
    if (sc.mode == Mode::Kinematic && sc.commands.empty() && sc.feedback_gain == 0.0)
        throw ConfigError("kinematic mode needs commands or a feedback gain");
    if (sc.feedback_gain != 0.0 && sc.target.type == TargetSpec::Type::None)
        throw ConfigError("feedback needs a target");
    if (sc.mode == Mode::Nullspace && !sc.secondary.point && !sc.secondary.offset && !sc.secondary.angle)
        throw ConfigError("nullspace mode needs secondary.point, offset or angle");
    return sc;
}

inline Scenario load_scenario(const std::string& path)
{
    std::filesystem::path p(path);
    return parse_scenario(io::read_file(path), p.parent_path());
}

// The similarity V_S(X_u, V X_u reverse(V)): a versor reaching the same primitive, in
// the form the cooperative similarity takes, so components along the primitive's own
// invariances (in-plane shifts, spin about a line) do not make the target unreachable.
inline Multivector canonical_target(PrimitiveKind kind, const Multivector& v)
{
    Multivector x = apply_versor(v, unit_primitive(kind).blade);
    return similarity_from_primitive(kind, MvJet(x)).versor.v;
}

// Desired similarity versor. Relative targets compose on the right of V_Sc(q0).
inline Multivector resolve_target(const CooperativeSystem& sys, const Eigen::VectorXd& q0, const TargetSpec& t)
{
    switch (t.type) {
    case TargetSpec::Type::Relative:
        return canonical_target(
            sys.kind, cooperative_similarity(sys, q0).value * exp_versor({GroupKind::Similarity, t.bivector}).value);
    case TargetSpec::Type::Similarity:
        return canonical_target(sys.kind, exp_versor({GroupKind::Similarity, t.bivector}).value);
    case TargetSpec::Type::Joints: return cooperative_similarity(sys, t.q).value;
    case TargetSpec::Type::Points: {
        if (static_cast<int>(t.points.size()) != point_count(sys.kind))
            throw ConfigError("target needs " + std::to_string(point_count(sys.kind)) + " points");
        auto x = construct(t.points, is_flat(sys.kind));
        return similarity_from_primitive(sys.kind, MvJet(x.blade)).versor.v;
    }
    case TargetSpec::Type::None: break;
    }
    return cooperative_similarity(sys, q0).value;
}

// ---- per-step records ----

struct StepRecord {
    int run = 0;
    int step = 0;
    double t = 0.0;
    Eigen::VectorXd q, qd, tau;
    Multivector blade;
    Multivector versor;  // V_Sc
    PrimitiveParams params;
    Vector7d log_v = Vector7d::Constant(kNaN);
    Vector7d twist = Vector7d::Constant(kNaN);
    std::optional<Vector7d> command;
    double error = kNaN;       // similarity error to the target or reference
    double task_error = kNaN;  // Euclidean error of a secondary task
    double constraint = kNaN;  // deviation of held primitive coefficients
    Eigen::VectorXd manipulability = Eigen::VectorXd::Constant(7, kNaN);
    double min_eig = kNaN;
    double degeneracy = kNaN;
    bool singular = false;
    bool clamped = false;
    std::string event;
};

struct RunResult {
    std::vector<StepRecord> records;
    json summary;
};

// Runs f and turns singular-configuration errors into a message.
template <class F>
std::optional<std::string> guarded(F&& f)
{
    try {
        f();
    } catch (const DegeneratePrimitive& e) {
        return std::string(e.what());
    } catch (const RotationSingularity& e) {
        return std::string(e.what());
    } catch (const SingularTaskInertia& e) {
        return std::string(e.what());
    } catch (const AntipodalNormals& e) {
        return std::string(e.what());
    }
    return std::nullopt;
}

// Fills the geometric fields of a record; returns J_G when it could be computed.
inline std::optional<Matrix7Xd> observe(const CooperativeSystem& sys, const Eigen::VectorXd& q, StepRecord& r,
                                        OrientationContext* ctx)
{
    r.q = q;
    std::optional<Matrix7Xd> jg;
    MvJet x = cooperative_primitive_jet(sys, q, true);
    r.blade = x.v;
    r.degeneracy = sys.kind == PrimitiveKind::Point ? 1.0 : degeneracy_measure(x.v, is_flat(sys.kind));
    auto err = guarded([&] {
        auto ev = similarity_from_primitive(sys.kind, x, ctx);
        r.params = params(GeometricPrimitive{sys.kind, ev.primitive, is_flat(sys.kind)});
        r.versor = ev.versor.v;
        r.log_v = log_coords(ev.versor.v);
        jg = geometric_from_analytic(ev.versor.v, ev.versor.d);
        auto man = manipulability(sys.kind, *jg);
        r.manipulability = man.eigenvalues;
        r.min_eig = man.effective_min;
    });
    if (err) {
        r.singular = true;
        r.event = *err;
        r.params = PrimitiveParams{};
        r.params.kind = sys.kind;
    }
    return jg;
}

namespace detail {

inline Eigen::VectorXd start_configuration(const Scenario& sc, std::mt19937_64& rng)
{
    Eigen::VectorXd q = sc.q0;
    if (sc.perturbation > 0.0) {
        std::uniform_real_distribution<double> u(-sc.perturbation, sc.perturbation);
        for (Eigen::Index i = 0; i < q.size(); ++i) q[i] += u(rng);
    }
    return q;
}

inline bool clamp_speed(Eigen::VectorXd& qd, double max_speed)
{
    double n = qd.norm();
    if (!(n > max_speed)) return false;
    qd *= max_speed / n;
    return true;
}

inline int step_count(const Scenario& sc) { return static_cast<int>(std::llround(sc.duration / sc.dt)); }

inline Vector7d command_at(const std::vector<CommandSegment>& cmds, double t)
{
    Vector7d xi = Vector7d::Zero();
    for (const auto& c : cmds) {
        if (c.t > t + 1e-12) break;
        xi = c.twist;
    }
    return xi;
}

inline json base_summary(const Scenario& sc)
{
    return {{"scenario", sc.name},
            {"mode", to_string(sc.mode)},
            {"system", sc.system.name},
            {"primitive", to_string(sc.system.kind)},
            {"dof", sc.system.dof()},
            {"seed", sc.seed},
            {"dt", sc.mode == Mode::Ocp ? sc.ocp.dt : sc.dt}};
}

inline json row_max(const std::vector<StepRecord>& recs, Vector7d StepRecord::*field)
{
    Vector7d m = Vector7d::Zero();
    for (const auto& r : recs)
        if (!r.singular) m = m.cwiseMax((r.*field).cwiseAbs());
    return io::from_vector(m);
}

}  // namespace detail

// first-order kinematics driven by a bivector command stream and/or feedback toward a target
inline RunResult run_kinematic(const Scenario& sc)
{
    const auto& sys = sc.system;
    RunResult out;
    std::mt19937_64 rng(sc.seed);
    std::optional<Multivector> target;
    if (sc.target.type != TargetSpec::Type::None) target = resolve_target(sys, sc.q0, sc.target);
    const int n = detail::step_count(sc);
    json runs = json::array();
    bool all_ok = true;
    for (int run = 0; run < sc.runs; ++run) {
        Eigen::VectorXd q = detail::start_configuration(sc, rng);
        OrientationContext ctx;
        int singular_steps = 0, clamps = 0;
        double first_error = kNaN, last_error = kNaN;
        for (int k = 0; k <= n; ++k) {
            StepRecord r;
            r.run = run;
            r.step = k;
            r.t = k * sc.dt;
            Vector7d xi = detail::command_at(sc.commands, r.t);
            if (target) {
                auto e = guarded([&] {
                    Vector7d err = similarity_error(sys, q, *target, nullptr, false).e;
                    r.error = err.norm();
                    xi += sc.feedback_gain * err;
                });
                if (e) r.event = *e;
            }
            Eigen::VectorXd qd = Eigen::VectorXd::Zero(sys.dof());
            if (k < n) {
                auto e = guarded([&] { qd = differential_kinematics(sys, q, xi, &ctx).qd; });
                if (e) {
                    // singular: hold still and report
                    qd.setZero();
                    r.singular = true;
                    r.event = *e;
                    ++singular_steps;
                }
                if (detail::clamp_speed(qd, sc.max_joint_speed)) {
                    r.clamped = true;
                    ++clamps;
                }
            }
            r.command = xi;
            r.qd = qd;
            bool flagged = r.singular;
            std::string ev = r.event;
            if (k % sc.record_every == 0 || k == n) {
                auto jg = observe(sys, q, r, &ctx);
                if (jg) r.twist = *jg * qd;
                r.singular = r.singular || flagged;
                if (r.event.empty()) r.event = ev;
                out.records.push_back(r);
            }
            if (k == 0) first_error = r.error;
            last_error = r.error;
            q = q + sc.dt * qd;
        }
        bool converged = !target || last_error <= std::max(1e-6, 1e-3 * first_error);
        all_ok = all_ok && converged;
        runs.push_back({{"run", run},
                        {"initial_error", first_error},
                        {"final_error", last_error},
                        {"singular_steps", singular_steps},
                        {"clamped_steps", clamps},
                        {"converged", converged},
                        {"final_q", io::from_vector(q)}});
    }
    out.summary = detail::base_summary(sc);
    out.summary["runs"] = runs;
    out.summary["converged"] = all_ok;
    out.summary["max_abs_twist"] = detail::row_max(out.records, &StepRecord::twist);
    return out;
}

// torque-driven dynamics under the similarity impedance law
inline RunResult run_dynamic(const Scenario& sc)
{
    const auto& sys = sc.system;
    RunResult out;
    std::mt19937_64 rng(sc.seed);
    const Multivector target = resolve_target(sys, sc.q0, sc.target);
    const auto model = JointDynamicsModel::identity(sys.dof());
    const int n = detail::step_count(sc);
    json runs = json::array();
    bool all_ok = true;
    double worst = 0.0;
    for (int run = 0; run < sc.runs; ++run) {
        JointState s{detail::start_configuration(sc, rng), Eigen::VectorXd::Zero(sys.dof())};
        OrientationContext ctx;
        double e0 = kNaN, ef = kNaN;
        Vector7d err0 = Vector7d::Zero(), errf = Vector7d::Zero();
        std::string failure;
        for (int k = 0; k <= n; ++k) {
            ImpedanceResult imp;
            auto e = guarded([&] { imp = impedance_control(sys, s.q, s.qd, target, sc.gains, model, &ctx); });
            if (e) {
                failure = *e;
                StepRecord r;
                r.run = run;
                r.step = k;
                r.t = k * sc.dt;
                r.qd = s.qd;
                observe(sys, s.q, r, nullptr);
                r.singular = true;
                r.event = *e;
                out.records.push_back(r);
                break;
            }
            if (k == 0) {
                e0 = imp.error.norm();
                err0 = imp.error;
            }
            ef = imp.error.norm();
            errf = imp.error;
            if (k % sc.record_every == 0 || k == n) {
                StepRecord r;
                r.run = run;
                r.step = k;
                r.t = k * sc.dt;
                r.qd = s.qd;
                r.tau = imp.tau;
                r.error = ef;
                observe(sys, s.q, r, nullptr);
                r.twist = imp.dynamics.twist;
                out.records.push_back(r);
            }
            if (k < n) s = step_dynamic(model, s, imp.tau, sc.dt);
        }
        double ratio = failure.empty() ? ef / e0 : kNaN;
        bool ok = failure.empty() && ratio < sc.success_ratio;
        all_ok = all_ok && ok;
        worst = std::max(worst, failure.empty() ? ratio : std::numeric_limits<double>::infinity());
        json jr{{"run", run},
                {"initial_error", e0},
                {"final_error", ef},
                {"ratio", ratio},
                {"initial_error_rows", io::from_vector(err0)},
                {"final_error_rows", io::from_vector(errf)},
                {"converged", ok}};
        if (!failure.empty()) jr["failure"] = failure;
        runs.push_back(jr);
    }
    out.summary = detail::base_summary(sc);
    out.summary["runs"] = runs;
    out.summary["worst_ratio"] = worst;
    out.summary["success_ratio"] = sc.success_ratio;
    out.summary["converged"] = all_ok;
    return out;
}

inline RunResult run_ik(const Scenario& sc)
{
    const auto& sys = sc.system;
    RunResult out;
    std::mt19937_64 rng(sc.seed);
    const Multivector target = resolve_target(sys, sc.q0, sc.target);
    json runs = json::array();
    bool all_ok = true;
    for (int run = 0; run < sc.runs; ++run) {
        Eigen::VectorXd q = detail::start_configuration(sc, rng);
        auto res = gauss_newton_ik(sys, q, target, sc.ik);
        for (int k : {0, 1}) {
            StepRecord r;
            r.run = run;
            r.step = k == 0 ? 0 : res.iterations;
            r.t = r.step;
            r.qd = Eigen::VectorXd::Zero(sys.dof());
            r.error = k == 0 ? res.trace.front() : res.residual;
            auto jg = observe(sys, k == 0 ? q : res.q, r, nullptr);
            if (jg) r.twist.setZero();
            out.records.push_back(r);
        }
        all_ok = all_ok && res.converged;
        runs.push_back({{"run", run},
                        {"iterations", res.iterations},
                        {"residual", res.residual},
                        {"converged", res.converged},
                        {"rejected_steps", res.rejected_steps},
                        {"trace", res.trace},
                        {"q", io::from_vector(res.q)}});
    }
    out.summary = detail::base_summary(sc);
    out.summary["runs"] = runs;
    out.summary["converged"] = all_ok;
    return out;
}

inline RunResult run_ocp(const Scenario& sc)
{
    const auto& sys = sc.system;
    RunResult out;
    std::mt19937_64 rng(sc.seed);
    const Multivector target = resolve_target(sys, sc.q0, sc.target);
    json runs = json::array();
    bool all_ok = true;
    for (int run = 0; run < sc.runs; ++run) {
        Eigen::VectorXd q = detail::start_configuration(sc, rng);
        auto sol = solve_reaching(sys, q, Eigen::VectorXd::Zero(sys.dof()), target, sc.ocp);
        OrientationContext ctx;
        for (std::size_t k = 0; k < sol.q.size(); ++k) {
            if (static_cast<int>(k) % sc.record_every != 0 && k + 1 != sol.q.size()) continue;
            StepRecord r;
            r.run = run;
            r.step = static_cast<int>(k);
            r.t = k * sc.ocp.dt;
            r.qd = sol.qd[k];
            auto jg = observe(sys, sol.q[k], r, &ctx);
            if (jg) r.twist = *jg * sol.qd[k];
            auto e = guarded([&] { r.error = similarity_error(sys, sol.q[k], target, nullptr, false).e.norm(); });
            if (e) r.event = *e;
            out.records.push_back(r);
        }
        all_ok = all_ok && sol.converged;
        runs.push_back({{"run", run},
                        {"iterations", sol.iterations},
                        {"rejected", sol.rejected},
                        {"terminal_norm", sol.terminal_norm},
                        {"terminal_error", io::from_vector(sol.terminal_error)},
                        {"cost_trace", sol.cost_trace},
                        {"converged", sol.converged}});
    }
    out.summary = detail::base_summary(sc);
    out.summary["runs"] = runs;
    out.summary["converged"] = all_ok;
    out.summary["max_abs_twist"] = detail::row_max(out.records, &StepRecord::twist);
    return out;
}

namespace detail {

inline Eigen::Vector3d secondary_target(const Scenario& sc, const Eigen::VectorXd& q)
{
    const auto& sys = sc.system;
    Eigen::Vector3d p = sys.end_effector_positions(q)[sc.secondary.chain];
    if (sc.secondary.point) return *sc.secondary.point;
    if (sc.secondary.offset) return p + *sc.secondary.offset;
    if (sys.kind != PrimitiveKind::Circle) throw ConfigError("secondary.angle needs a circle system");
    auto pp = params(cooperative_primitive(sys, q));
    return pp.center + Eigen::AngleAxisd(*sc.secondary.angle, pp.normal) * (p - pp.center);
}

inline Eigen::VectorXd coefficient_values(const Multivector& x, const std::vector<int>& idx)
{
    Eigen::VectorXd v(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) v[static_cast<Eigen::Index>(i)] = x.c[idx[i]];
    return v;
}

}  // namespace detail

// A single chain reaches a point while the cooperative primitive is held: either its
// similarity (geometric nullspace), selected blade coefficients, or nothing.
inline RunResult run_nullspace(const Scenario& sc)
{
    const auto& sys = sc.system;
    RunResult out;
    std::mt19937_64 rng(sc.seed);
    const int n = detail::step_count(sc), m = sys.dof(), ms = mask_size(sys.kind);
    const double hold = sc.constraint.gain.value_or(1.0 / sc.dt);
    const auto& idx = sc.constraint.coefficients;
    json runs = json::array();
    bool all_ok = true;
    for (int run = 0; run < sc.runs; ++run) {
        Eigen::VectorXd q = detail::start_configuration(sc, rng);
        const Multivector reference = cooperative_similarity(sys, q).value;
        const Eigen::VectorXd c0 = detail::coefficient_values(cooperative_primitive(sys, q).blade, idx);
        const Eigen::Vector3d goal = detail::secondary_target(sc, q);
        OrientationContext ctx;
        double d0 = kNaN, df = kNaN, max_dist = 0.0, max_dev = 0.0;
        std::string failure;
        for (int k = 0; k <= n; ++k) {
            StepRecord r;
            r.run = run;
            r.step = k;
            r.t = k * sc.dt;
            Eigen::VectorXd qd = Eigen::VectorXd::Zero(m);
            auto e = guarded([&] {
                Eigen::Vector3d p = sys.end_effector_positions(q)[sc.secondary.chain];
                r.task_error = (goal - p).norm();
                auto se = similarity_error(sys, q, reference, nullptr, false);
                r.error = se.e.norm();
                Eigen::VectorXd task = sc.secondary.gain * (pinv(point_jacobian(sys, q, sc.secondary.chain)) * (goal - p));
                switch (sc.constraint.type) {
                case ConstraintSpec::Type::None: qd = task; break;
                case ConstraintSpec::Type::Similarity: {
                    Matrix7Xd jg = cooperative_geometric_jacobian(sys, q, &ctx);
                    qd = nullspace_projector(jg, ms) * task + pseudo_inverse(jg, ms).pinv * (hold * se.e);
                    break;
                }
                case ConstraintSpec::Type::Coefficients: {
                    MvJet x = cooperative_primitive_jet(sys, q, true);
                    Eigen::MatrixXd jc(idx.size(), m);
                    for (std::size_t i = 0; i < idx.size(); ++i)
                        for (int c = 0; c < m; ++c) jc(static_cast<Eigen::Index>(i), c) = x.d[c].c[idx[i]];
                    Eigen::VectorXd dev = c0 - detail::coefficient_values(x.v, idx);
                    r.constraint = dev.cwiseAbs().maxCoeff();
                    Eigen::MatrixXd jp = pinv(jc);
                    qd = task - jp * (jc * task) + jp * (hold * dev);
                    break;
                }
                }
            });
            if (e) {
                failure = *e;
                r.singular = true;
                r.event = *e;
                qd.setZero();
            }
            if (k == n) qd.setZero();
            r.clamped = detail::clamp_speed(qd, sc.max_joint_speed);
            r.qd = qd;
            if (k == 0) d0 = r.task_error;
            df = r.task_error;
            if (!std::isnan(r.error)) max_dist = std::max(max_dist, r.error);
            if (!std::isnan(r.constraint)) max_dev = std::max(max_dev, r.constraint);
            if (k % sc.record_every == 0 || k == n) {
                bool flagged = r.singular;
                std::string ev = r.event;
                auto jg = observe(sys, q, r, &ctx);
                if (jg) r.twist = *jg * qd;
                r.singular = r.singular || flagged;
                if (r.event.empty()) r.event = ev;
                out.records.push_back(r);
            }
            if (!failure.empty()) break;
            q = q + sc.dt * qd;
        }
        double reduction = 1.0 - df / d0;
        all_ok = all_ok && failure.empty();
        json jr{{"run", run},
                {"goal", io::from_vector(goal)},
                {"initial_task_error", d0},
                {"final_task_error", df},
                {"task_reduction", reduction},
                {"max_similarity_distance", max_dist},
                {"converged", failure.empty()}};
        if (!idx.empty()) jr["max_coefficient_deviation"] = max_dev;
        if (!failure.empty()) jr["failure"] = failure;
        runs.push_back(jr);
    }
    out.summary = detail::base_summary(sc);
    out.summary["runs"] = runs;
    out.summary["converged"] = all_ok;
    return out;
}

// eigenvalues of J_G J_G^T below this fraction of the largest are rounding noise
inline constexpr double kEigenvalueNoise = 1e-13;

// One end effector is driven onto the line through two others (circle systems) and the
// primitive is tracked, not controlled, until it degenerates.
inline RunResult run_singularity_sweep(const Scenario& sc)
{
    const auto& sys = sc.system;
    if (sys.kind != PrimitiveKind::Circle) throw ConfigError("the singularity sweep needs a circle system");
    RunResult out;
    const int n = detail::step_count(sc), c = sc.secondary.chain;
    const int a = (c + 1) % 3, b = (c + 2) % 3;
    Eigen::VectorXd q = sc.q0;
    OrientationContext ctx;
    std::string raised;
    double raised_at = kNaN;
    for (int k = 0; k <= n; ++k) {
        StepRecord r;
        r.run = 0;
        r.step = k;
        r.t = k * sc.dt;
        auto pts = sys.end_effector_positions(q);
        Eigen::Vector3d dir = (pts[b] - pts[a]).normalized();
        Eigen::Vector3d foot = pts[a] + dir * dir.dot(pts[c] - pts[a]);
        r.task_error = (foot - pts[c]).norm();
        Eigen::VectorXd qd = sc.secondary.gain * (pinv(point_jacobian(sys, q, c)) * (foot - pts[c]));
        if (k == n) qd.setZero();
        r.clamped = detail::clamp_speed(qd, sc.max_joint_speed);
        r.qd = qd;
        observe(sys, q, r, &ctx);
        if (r.singular) {
            raised = r.event;
            raised_at = r.t;
            out.records.push_back(r);
            break;
        }
        if (k % sc.record_every == 0 || k == n) out.records.push_back(r);
        q = q + sc.dt * qd;
    }
    // radius growth and eigenvalue decay along the regular part of the sweep
    std::vector<double> radius, eig, noise;
    for (const auto& r : out.records)
        if (!r.singular) {
            radius.push_back(r.params.radius);
            eig.push_back(r.min_eig);
            noise.push_back(kEigenvalueNoise * r.manipulability[0]);
        }
    // first time after which the sequence is monotone, up to the noise level
    auto monotone_from = [&](const std::vector<double>& v, bool increasing, const std::vector<double>& tol) {
        std::size_t i = v.size() > 0 ? v.size() - 1 : 0;
        while (i > 0) {
            double slack = tol.empty() ? 0.0 : std::max(tol[i - 1], tol[i]);
            if (increasing ? v[i - 1] > v[i] + slack : v[i - 1] + slack < v[i]) break;
            --i;
        }
        return out.records[i].t;
    };
    out.summary = detail::base_summary(sc);
    out.summary["degenerate_raised"] = !raised.empty();
    out.summary["degenerate_at"] = raised_at;
    out.summary["event"] = raised;
    out.summary["steps"] = out.records.size();
    if (!radius.empty()) {
        out.summary["initial_radius"] = radius.front();
        out.summary["final_radius"] = radius.back();
        out.summary["radius_monotone_from"] = monotone_from(radius, true, {});
        out.summary["min_eig_monotone_from"] = monotone_from(eig, false, noise);
        out.summary["initial_min_eig"] = eig.front();
        out.summary["final_min_eig"] = eig.back();
        out.summary["final_degeneracy"] = out.records.back().degeneracy;
    }
    out.summary["converged"] = !raised.empty();
    return out;
}

inline RunResult run_scenario(const Scenario& sc)
{
    RunResult r;
    switch (sc.mode) {
    case Mode::Kinematic: r = run_kinematic(sc); break;
    case Mode::Dynamic: r = run_dynamic(sc); break;
    case Mode::Ik: r = run_ik(sc); break;
    case Mode::Ocp: r = run_ocp(sc); break;
    case Mode::Nullspace: r = run_nullspace(sc); break;
    case Mode::SingularitySweep: r = run_singularity_sweep(sc); break;
    }
    r.summary["config"] = sc.source;
    return r;
}

// ---- output ----

inline json record_json(const StepRecord& r)
{
    json blade = json::object();
    for (int i = 0; i < 32; ++i)
        if (r.blade.c[i] != 0.0) blade[blade::names[i]] = r.blade.c[i];
    json j{{"type", "step"},
           {"run", r.run},
           {"step", r.step},
           {"t", r.t},
           {"q", io::from_vector(r.q)},
           {"qd", io::from_vector(r.qd)},
           {"blade", blade},
           {"params", io::params_json(r.params)},
           {"log_v", io::from_vector(r.log_v)},
           {"twist", io::from_vector(r.twist)},
           {"error", r.error},
           {"manipulability", io::from_vector(r.manipulability)},
           {"min_eig", r.min_eig},
           {"degeneracy", r.degeneracy},
           {"singular", r.singular}};
    if (r.tau.size()) j["tau"] = io::from_vector(r.tau);
    if (r.command) j["command"] = io::from_vector(*r.command);
    if (!std::isnan(r.task_error)) j["task_error"] = r.task_error;
    if (!std::isnan(r.constraint)) j["constraint"] = r.constraint;
    if (r.clamped) j["clamped"] = true;
    if (!r.event.empty()) j["event"] = r.event;
    return j;
}

inline void write_records(std::ostream& os, const RunResult& res)
{
    for (const auto& r : res.records) os << record_json(r).dump() << '\n';
    json s = res.summary;
    s["type"] = "summary";
    os << s.dump() << '\n';
}

inline void write_table(std::ostream& os, const RunResult& res)
{
    if (res.records.empty()) return;
    const auto m = res.records.front().q.size();
    os << "run step t error task_error constraint degeneracy min_eig radius";
    for (const char* n : row::names) os << " log_" << n;
    for (const char* n : row::names) os << " twist_" << n;
    for (Eigen::Index i = 0; i < m; ++i) os << " q" << i;
    os << '\n';
    auto num = [&](double v) {
        if (std::isnan(v)) os << " nan";
        else os << ' ' << std::setprecision(10) << v;
    };
    for (const auto& r : res.records) {
        os << r.run << ' ' << r.step;
        num(r.t);
        num(r.error);
        num(r.task_error);
        num(r.constraint);
        num(r.degeneracy);
        num(r.min_eig);
        num(r.singular ? kNaN : r.params.radius);
        for (int i = 0; i < 7; ++i) num(r.log_v[i]);
        for (int i = 0; i < 7; ++i) num(r.twist[i]);
        for (Eigen::Index i = 0; i < m; ++i) num(r.q[i]);
        os << '\n';
    }
}

}  // namespace coopga::sim
