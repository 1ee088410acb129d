#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include <coopga/coopga.hpp>
#include <coopga/teleop_server.hpp>
#include <coopga/verify.hpp>

using namespace coopga;

namespace {

constexpr int kError = 1;
constexpr int kCheckFailed = 3;

#ifndef COOPGA_DATA_DIR
#define COOPGA_DATA_DIR "."
#endif

struct Common {
    std::string scenario;
    std::string system;
    std::string primitive;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "table";
    std::vector<double> q0;
    std::vector<double> target;
};

// Where output goes: --out or stdout.
class Sink {
public:
    explicit Sink(const std::string& path)
    {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw ConfigError("cannot write '" + path + "'");
        }
    }
    std::ostream& os() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

void echo(const std::string& what, const json& config)
{
    std::cerr << "# coopga " << what << " config " << config.dump() << '\n';
}

Eigen::VectorXd vec(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

CooperativeSystem load(const Common& c)
{
    std::optional<PrimitiveKind> kind;
    if (!c.primitive.empty()) kind = primitive_kind_from_string(c.primitive);
    return io::load_system(c.system, kind);
}

// A scenario from --scenario, or built from --system, --q0 and --target for the one-off solvers.
sim::Scenario scenario_for(const Common& c, sim::Mode mode)
{
    json j;
    std::filesystem::path base;
    if (!c.scenario.empty()) {
        j = io::read_file(c.scenario);
        base = std::filesystem::path(c.scenario).parent_path();
    } else {
        if (c.system.empty()) throw ConfigError("give --scenario or --system");
        j = {{"schema", sim::kScenarioSchema}, {"name", sim::to_string(mode)}, {"system", c.system}};
    }
    j["mode"] = sim::to_string(mode);
    if (!c.system.empty()) j["system"] = std::filesystem::absolute(c.system).string();
    if (!c.primitive.empty()) j["primitive"] = c.primitive;
    if (c.seed) j["seed"] = *c.seed;
    if (!c.q0.empty()) j["q0"] = c.q0;
    if (!c.target.empty()) j["target"] = {{"relative", c.target}};
    return sim::parse_scenario(j, base);
}

int emit(const Common& c, const sim::RunResult& res)
{
    Sink sink(c.out);
    if (c.format == "records") sim::write_records(sink.os(), res);
    else sim::write_table(sink.os(), res);
    std::cerr << "# summary " << res.summary.dump() << '\n';
    return 0;
}

int cmd_run(const Common& c)
{
    if (c.scenario.empty()) throw ConfigError("run needs --scenario");
    json j = io::read_file(c.scenario);
    auto mode = sim::mode_from_string(j.value("mode", "kinematic"));
    sim::Scenario sc = scenario_for(c, mode);
    echo("run", sc.source);
    return emit(c, sim::run_scenario(sc));
}

int cmd_solver(const Common& c, sim::Mode mode, const std::optional<int>& horizon, const std::optional<double>& q_weight)
{
    if (c.scenario.empty() && c.target.empty()) throw ConfigError("give --scenario or --target");
    sim::Scenario sc = scenario_for(c, mode);
    if (mode == sim::Mode::Ocp) {
        json& src = sc.source;
        if (horizon) {
            sc.ocp.horizon = *horizon;
            src["ocp"]["horizon"] = *horizon;
        }
        if (q_weight) {
            sc.ocp.Q = Matrix7d::Identity() * *q_weight;
            src["ocp"]["q_weight"] = *q_weight;
        }
    }
    echo(sim::to_string(mode), sc.source);
    auto res = sim::run_scenario(sc);
    if (c.format == "records" || !c.out.empty()) return emit(c, res);
    std::cout << res.summary.dump(2) << '\n';
    return 0;
}

struct TeleopArgs {
    unsigned short port = 8765;
    double dt = 0.01;
    std::vector<double> gains;
    bool rz_to_dilation = false;
    double max_joint_speed = 2.0;
    std::int64_t ticks = -1;
    std::string log;
    std::string replay;
};

teleop::TeleopConfig teleop_config(const Common& c, const TeleopArgs& a, const CooperativeSystem& sys)
{
    teleop::TeleopConfig cfg;
    cfg.dt = a.dt;
    if (!a.gains.empty()) {
        if (a.gains.size() != 7) throw ConfigError("--gains needs 7 values (tx ty tz rx ry rz dilation)");
        std::copy(a.gains.begin(), a.gains.end(), cfg.gains.begin());
    }
    cfg.rz_to_dilation = a.rz_to_dilation;
    cfg.max_joint_speed = a.max_joint_speed;
    cfg.q0 = c.q0.empty() ? sys.nominal : vec(c.q0);
    return cfg;
}

json teleop_echo(const std::string& system, const teleop::TeleopConfig& cfg, const TeleopArgs& a)
{
    return {{"system", system},   {"dt", cfg.dt},
            {"gains", cfg.gains}, {"rz_to_dilation", cfg.rz_to_dilation},
            {"max_joint_speed", cfg.max_joint_speed}, {"stale_ms", cfg.stale_ms},
            {"q0", io::from_vector(cfg.q0)}, {"port", a.port},
            {"ticks", a.ticks}};
}

int cmd_teleop(const Common& c, const TeleopArgs& a)
{
    if (c.system.empty()) throw ConfigError("teleop needs --system");
    auto sys = load(c);
    auto cfg = teleop_config(c, a, sys);
    echo("teleop", teleop_echo(c.system, cfg, a));

    if (!a.replay.empty()) {
        std::ifstream in(a.replay);
        if (!in) throw ConfigError("cannot open '" + a.replay + "'");
        teleop::Session session(sys, cfg);
        auto states = teleop::replay(sys, cfg, teleop::read_log(in), &session);
        Sink sink(c.out);
        for (const auto& s : states) sink.os() << teleop::encode(s).dump() << '\n';
        auto offline = sim::run_kinematic(teleop::offline_scenario(sys, session.config(), session.tick_log()));
        std::size_t differ = 0;
        for (std::size_t k = 0; k < states.size(); ++k)
            differ += !verify::same_bits(offline.records[k].q, states[k].q);
        std::cerr << "# replay " << states.size() << " ticks, " << differ << " differ from the offline run\n";
        return differ ? kCheckFailed : 0;
    }

    Sink trajectory(c.out);
    teleop::ServerOptions opt;
    opt.port = a.port;
    opt.max_ticks = a.ticks;
    opt.handle_signals = true;
    if (!c.out.empty()) opt.tee = &trajectory.os();
    teleop::Server server(teleop::Session(sys, cfg), opt);
    std::cerr << "# listening on ws://127.0.0.1:" << server.port() << "/\n";
    server.run();
    if (!a.log.empty()) {
        std::ofstream log(a.log);
        teleop::write_log(log, server.session().log());
    }
    std::cerr << "# stopped after " << server.session().ticks() << " ticks, " << server.session().clamp_events()
              << " clamp events\n";
    return 0;
}

int cmd_verify(const Common& c, const std::string& suite, const std::string& data_dir)
{
    const unsigned seed = static_cast<unsigned>(c.seed.value_or(1));
    echo("verify", {{"suite", suite}, {"seed", seed}, {"data", data_dir}});
    auto shipped = [&](const char* n) { return io::load_system(verify::path_in(data_dir, std::string("systems/") + n + ".json")); };
    std::vector<verify::Report> reports;
    if (suite == "algebra") {
        reports.push_back(verify::algebra(1000, seed));
    } else if (suite == "groups") {
        reports.push_back(verify::groups(10000, seed));
        reports.push_back(verify::similarity_pairs(500, seed));
    } else if (suite == "jacobians") {
        reports.push_back(verify::jacobians(
            {shipped("iiwa_like"), shipped("g1_like"), shipped("three_arms"), shipped("leap_like")}, 50, seed));
    } else if (suite == "controllers") {
        auto arms = shipped("three_arms");
        reports.push_back(verify::ik(arms, 100, seed));
        reports.push_back(verify::ilqr(arms, 5, seed));
        reports.push_back(verify::impedance(data_dir));
        reports.push_back(verify::nullspace(data_dir));
    } else {
        throw ConfigError("unknown suite '" + suite + "'");
    }
    bool ok = true;
    Sink sink(c.out);
    for (const auto& r : reports) {
        ok = ok && r.pass();
        if (c.format == "records") {
            sink.os() << r.to_json().dump() << '\n';
        } else {
            sink.os() << (r.pass() ? "PASS " : "FAIL ") << r.suite << " (" << std::fixed << std::setprecision(2)
                      << r.seconds << " s)\n"
                      << std::defaultfloat;
            verify::print(sink.os(), r);
        }
    }
    return ok ? 0 : kCheckFailed;
}

int cmd_inspect(const Common& c)
{
    if (c.system.empty()) throw ConfigError("inspect needs --system");
    auto sys = load(c);
    Eigen::VectorXd q = c.q0.empty() ? sys.nominal : vec(c.q0);
    if (q.size() != sys.dof()) throw ConfigError("--q0 needs " + std::to_string(sys.dof()) + " values");
    echo("inspect", {{"system", c.system}, {"primitive", to_string(sys.kind)}, {"q", io::from_vector(q)}});

    sim::StepRecord r;
    auto jg = sim::observe(sys, q, r, nullptr);
    json rep{{"system", sys.name},
             {"primitive", to_string(sys.kind)},
             {"dof", sys.dof()},
             {"q", io::from_vector(q)},
             {"mask", controllable_mask(sys.kind)},
             {"degeneracy_measure", r.degeneracy},
             {"degenerate", r.singular}};
    if (r.singular) {
        rep["event"] = r.event;
    } else {
        rep["params"] = io::params_json(r.params);
        rep["log_v"] = io::from_vector(r.log_v);
        auto parts = decompose_similarity(Versor(GroupKind::Similarity, r.versor));
        rep["decomposition"] = {{"translation", io::from_vector(log_versor(parts[0]).coords.tail<3>())},
                                {"rotation", io::from_vector(log_versor(parts[1]).coords.head<3>())},
                                {"dilation", log_versor(parts[2]).coords[row::e0inf]}};
        rep["manipulability"] = io::from_vector(r.manipulability);
        rep["min_eig"] = r.min_eig;
        rep["rank"] = jg ? static_cast<int>(Eigen::FullPivLU<Matrix7Xd>(*jg).rank()) : 0;
    }
    Sink sink(c.out);
    if (c.format == "records") {
        sink.os() << rep.dump() << '\n';
        return 0;
    }
    auto& os = sink.os();
    os << "system      " << sys.name << " (" << to_string(sys.kind) << ", " << sys.dof() << " joints)\n";
    os << "degeneracy  " << r.degeneracy << (r.singular ? "  DEGENERATE: " + r.event : std::string()) << '\n';
    os << "mask       ";
    for (int i = 0; i < 7; ++i) os << ' ' << row::names[i] << '=' << controllable_mask(sys.kind)[i];
    os << '\n';
    if (!r.singular) {
        os << "params      " << rep["params"].dump() << '\n';
        os << "log V_Sc   ";
        for (int i = 0; i < 7; ++i) os << ' ' << row::names[i] << '=' << r.log_v[i];
        os << '\n';
        os << "T R D       " << rep["decomposition"].dump() << '\n';
        os << "eigenvalues " << rep["manipulability"].dump() << "  effective min " << r.min_eig << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cooperative geometric primitives: scenarios, solvers, teleoperation and verification."};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* s, bool scenario) {
        if (scenario) s->add_option("--scenario", c.scenario, "scenario file")->check(CLI::ExistingFile);
        s->add_option("--system", c.system, "system file")->check(CLI::ExistingFile);
        s->add_option("--primitive", c.primitive, "override the system's primitive kind");
        s->add_option("--seed", c.seed, "random seed");
        s->add_option("--out", c.out, "output file (default stdout)");
        s->add_option("--format", c.format, "table or records")->check(CLI::IsMember({"table", "records"}));
        s->add_option("--q0", c.q0, "start configuration, comma separated")->delimiter(',');
    };

    auto* run = app.add_subcommand("run", "run a scenario file");
    add_common(run, true);

    std::optional<int> horizon;
    std::optional<double> q_weight;
    auto* ik = app.add_subcommand("ik", "Gauss-Newton inverse kinematics to a target");
    add_common(ik, true);
    ik->add_option("--target", c.target, "relative target bivector (7 rows), comma separated")->delimiter(',');
    auto* ocp = app.add_subcommand("ocp", "iLQR reaching to a target");
    add_common(ocp, true);
    ocp->add_option("--target", c.target, "relative target bivector (7 rows), comma separated")->delimiter(',');
    ocp->add_option("--horizon", horizon, "number of steps");
    ocp->add_option("--q-weight", q_weight, "terminal weight Q = w I");

    TeleopArgs ta;
    auto* tele = app.add_subcommand("teleop", "websocket teleoperation service, or offline replay of a session log");
    add_common(tele, false);
    tele->add_option("--port", ta.port, "listening port (0 picks one)");
    tele->add_option("--dt", ta.dt, "control period in seconds");
    tele->add_option("--gains", ta.gains, "axis gains tx,ty,tz,rx,ry,rz,dilation")->delimiter(',');
    tele->add_flag("--rz-dilation", ta.rz_to_dilation, "drive the dilation row from the rz axis");
    tele->add_option("--max-joint-speed", ta.max_joint_speed, "joint velocity norm limit");
    tele->add_option("--ticks", ta.ticks, "stop after this many control steps");
    tele->add_option("--log", ta.log, "write the session event log here on exit");
    tele->add_option("--replay", ta.replay, "replay an event log offline instead of serving")->check(CLI::ExistingFile);

    std::string suite, data_dir = COOPGA_DATA_DIR;
    auto* ver = app.add_subcommand("verify", "property suites against finite-difference and identity oracles");
    ver->add_option("suite", suite, "algebra, groups, jacobians or controllers")
        ->required()
        ->check(CLI::IsMember({"algebra", "groups", "jacobians", "controllers"}));
    ver->add_option("--seed", c.seed, "random seed");
    ver->add_option("--out", c.out, "output file (default stdout)");
    ver->add_option("--format", c.format, "table or records")->check(CLI::IsMember({"table", "records"}));
    ver->add_option("--data", data_dir, "directory holding systems/ and scenarios/");

    auto* ins = app.add_subcommand("inspect", "report the cooperative primitive and similarity at a configuration");
    add_common(ins, false);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(c);
        if (*ik) return cmd_solver(c, sim::Mode::Ik, std::nullopt, std::nullopt);
        if (*ocp) return cmd_solver(c, sim::Mode::Ocp, horizon, q_weight);
        if (*tele) return cmd_teleop(c, ta);
        if (*ver) return cmd_verify(c, suite, data_dir);
        if (*ins) return cmd_inspect(c);
    } catch (const std::exception& e) {
        std::cerr << "coopga: " << e.what() << '\n';
        return kError;
    }
    return kError;
}
