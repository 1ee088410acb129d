#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <variant>

#include "sim.hpp"

namespace coopga::teleop {

inline constexpr const char* kProtocol = "coopga.teleop/1";

// device axes, in wire order
using Axes = std::array<double, 7>;
inline constexpr std::array<const char*, 7> kAxisNames{"tx", "ty", "tz", "rx", "ry", "rz", "dilation"};

struct AxesCommand {
    Axes axes{};
    std::int64_t timestamp = 0;  // client clock, ms; informational only
    std::uint64_t seq = 0;
};

inline Axes clamp_axes(const Axes& a)
{
    Axes out{};
    for (int i = 0; i < 7; ++i) {
        if (!std::isfinite(a[i])) throw ProtocolError("axis values must be finite");
        out[i] = std::clamp(a[i], -1.0, 1.0);
    }
    return out;
}

// Device axes to a similarity twist in row order (e23, e13, e12, e0inf, e1inf, e2inf, e3inf).
// Rotation about e2 lives on e31 = -e13. With rz_to_dilation the rz axis drives the dilation row
// and the dilation axis is ignored.
inline Vector7d map_axes(const Axes& axes, const Axes& gains, const std::array<bool, 7>& mask,
                         bool rz_to_dilation = false)
{
    for (double g : gains)
        if (!std::isfinite(g)) throw ConfigError("axis gains must be finite");
    Axes a = clamp_axes(axes);
    double rz = rz_to_dilation ? 0.0 : a[5];
    double dil = rz_to_dilation ? a[5] : a[6];
    Vector7d xi;
    xi << gains[3] * a[3], -gains[4] * a[4], gains[5] * rz, gains[6] * dil, gains[0] * a[0], gains[1] * a[1],
        gains[2] * a[2];
    for (int i = 0; i < 7; ++i)
        if (!mask[i]) xi[i] = 0.0;
    return xi;
}

inline Vector7d map_axes(const AxesCommand& cmd, const Axes& gains, PrimitiveKind kind, bool rz_to_dilation = false)
{
    return map_axes(cmd.axes, gains, controllable_mask(kind), rz_to_dilation);
}

struct TeleopConfig {
    double dt = 0.01;
    Axes gains{0.1, 0.1, 0.1, 0.5, 0.5, 0.5, 1.0};  // m/s, rad/s and 1/s at full deflection
    bool rz_to_dilation = false;
    double max_joint_speed = 2.0;  // rad/s, norm over all joints
    std::int64_t stale_ms = 250;
    Eigen::VectorXd q0;  // empty: the system's nominal pose
};

struct StateFlags {
    bool singular = false;
    bool clamped = false;
    bool stale = false;
};

struct StateUpdate {
    std::uint64_t tick = 0;
    double t = 0.0;
    Eigen::VectorXd q;
    PrimitiveParams params;
    Vector7d log_v = Vector7d::Constant(sim::kNaN);
    std::array<double, 12> versor{};  // coefficients on similarity_blades()
    Vector7d twist = Vector7d::Zero();  // commanded, after mapping and masking
    double min_eig = sim::kNaN;
    std::uint64_t seq = 0;  // sequence number of the applied command, 0 when none
    StateFlags flags;
    std::string event;
};

struct ConfigMessage {
    std::string protocol = kProtocol;
    std::string role;  // "commander" or "viewer"
    std::string system;
    std::string primitive;
    int dof = 0;
    double dt = 0.01;
    Axes gains{};
    bool rz_to_dilation = false;
    std::array<bool, 7> mask{};
    double max_joint_speed = 0.0;
    std::int64_t stale_ms = 250;
    std::vector<std::string> joint_names;
};

struct ErrorMessage {
    std::string code;  // bad-message, read-only, out-of-order, bad-config
    std::string message;
};

using Message = std::variant<AxesCommand, StateUpdate, ConfigMessage, ErrorMessage>;

// ---- wire encoding ----

namespace detail {

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number(const json& j) { return j.is_null() ? sim::kNaN : j.get<double>(); }

template <class V>
json numbers(const V& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(v.size()); ++i) a.push_back(number(v[i]));
    return a;
}

template <std::size_t N>
std::array<double, N> fixed(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != N) throw ProtocolError(std::string(what) + " needs " + std::to_string(N) + " numbers");
    std::array<double, N> a{};
    for (std::size_t i = 0; i < N; ++i) {
        if (!j[i].is_number() && !j[i].is_null()) throw ProtocolError(std::string(what) + " must hold numbers");
        a[i] = number(j[i]);
    }
    return a;
}

inline json params_wire(const PrimitiveParams& p)
{
    json j = io::params_json(p);
    for (auto& [k, v] : j.items()) {
        if (v.is_number_float() && !std::isfinite(v.get<double>())) v = nullptr;
        if (v.is_array())
            for (auto& x : v)
                if (x.is_number_float() && !std::isfinite(x.get<double>())) x = nullptr;
    }
    return j;
}

}  // namespace detail

inline json encode(const AxesCommand& c)
{
    return {{"type", "axes"}, {"axes", c.axes}, {"timestamp", c.timestamp}, {"seq", c.seq}};
}

inline json encode(const StateUpdate& s)
{
    return {{"type", "state"},
            {"tick", s.tick},
            {"t", s.t},
            {"q", detail::numbers(s.q)},
            {"params", detail::params_wire(s.params)},
            {"log_v", detail::numbers(s.log_v)},
            {"versor", detail::numbers(s.versor)},
            {"twist", detail::numbers(s.twist)},
            {"min_eig", detail::number(s.min_eig)},
            {"seq", s.seq},
            {"flags", {{"singular", s.flags.singular}, {"clamped", s.flags.clamped}, {"stale", s.flags.stale}}},
            {"event", s.event}};
}

inline json encode(const ConfigMessage& c)
{
    json blades = json::array();
    for (int b : similarity_blades()) blades.push_back(blade::names[b]);
    return {{"type", "config"},
            {"protocol", c.protocol},
            {"role", c.role},
            {"system", c.system},
            {"primitive", c.primitive},
            {"dof", c.dof},
            {"dt", c.dt},
            {"axes", kAxisNames},
            {"gains", c.gains},
            {"rz_to_dilation", c.rz_to_dilation},
            {"mask", c.mask},
            {"rows", row::names},
            {"versor_blades", blades},
            {"max_joint_speed", c.max_joint_speed},
            {"stale_ms", c.stale_ms},
            {"joint_names", c.joint_names}};
}

inline json encode(const ErrorMessage& e) { return {{"type", "error"}, {"code", e.code}, {"message", e.message}}; }

inline json encode(const Message& m)
{
    return std::visit([](const auto& x) { return encode(x); }, m);
}

inline AxesCommand decode_axes(const json& j)
{
    AxesCommand c;
    c.axes = clamp_axes(detail::fixed<7>(j.at("axes"), "axes"));
    if (j.contains("timestamp")) {
        if (!j["timestamp"].is_number()) throw ProtocolError("timestamp must be a number");
        c.timestamp = static_cast<std::int64_t>(j["timestamp"].get<double>());
    }
    const json& s = j.at("seq");
    if (!s.is_number_unsigned()) throw ProtocolError("seq must be a non-negative integer");
    c.seq = s.get<std::uint64_t>();
    return c;
}

inline StateUpdate decode_state(const json& j)
{
    StateUpdate s;
    s.tick = j.at("tick").get<std::uint64_t>();
    s.t = j.at("t").get<double>();
    const json& q = j.at("q");
    s.q.resize(static_cast<Eigen::Index>(q.size()));
    for (std::size_t i = 0; i < q.size(); ++i) s.q[static_cast<Eigen::Index>(i)] = detail::number(q[i]);
    s.params = io::parse_params(j.at("params"));
    auto lv = detail::fixed<7>(j.at("log_v"), "log_v");
    auto tw = detail::fixed<7>(j.at("twist"), "twist");
    for (int i = 0; i < 7; ++i) {
        s.log_v[i] = lv[i];
        s.twist[i] = tw[i];
    }
    s.versor = detail::fixed<12>(j.at("versor"), "versor");
    s.min_eig = detail::number(j.at("min_eig"));
    s.seq = j.at("seq").get<std::uint64_t>();
    const json& f = j.at("flags");
    s.flags = {f.at("singular").get<bool>(), f.at("clamped").get<bool>(), f.at("stale").get<bool>()};
    s.event = j.at("event").get<std::string>();
    return s;
}

inline ConfigMessage decode_config(const json& j)
{
    ConfigMessage c;
    c.protocol = j.at("protocol").get<std::string>();
    c.role = j.at("role").get<std::string>();
    c.system = j.at("system").get<std::string>();
    c.primitive = j.at("primitive").get<std::string>();
    c.dof = j.at("dof").get<int>();
    c.dt = j.at("dt").get<double>();
    c.gains = detail::fixed<7>(j.at("gains"), "gains");
    c.rz_to_dilation = j.at("rz_to_dilation").get<bool>();
    c.mask = j.at("mask").get<std::array<bool, 7>>();
    c.max_joint_speed = j.at("max_joint_speed").get<double>();
    c.stale_ms = j.at("stale_ms").get<std::int64_t>();
    c.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    return c;
}

inline ErrorMessage decode_error(const json& j)
{
    return {j.at("code").get<std::string>(), j.at("message").get<std::string>()};
}

inline Message decode(const json& j)
{
    try {
        if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
            throw ProtocolError("message needs a string 'type'");
        const std::string type = j["type"].get<std::string>();
        if (type == "axes") return decode_axes(j);
        if (type == "state") return decode_state(j);
        if (type == "config") return decode_config(j);
        if (type == "error") return decode_error(j);
        throw ProtocolError("unknown message type '" + type + "'");
    } catch (const json::exception& e) {
        throw ProtocolError(e.what());
    } catch (const ConfigError& e) {
        throw ProtocolError(e.what());
    }
}

inline Message parse(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProtocolError(e.what());
    }
    return decode(j);
}

// ---- session ----

enum class Role { Commander, Viewer };

inline std::string to_string(Role r) { return r == Role::Commander ? "commander" : "viewer"; }

struct TickRecord {
    std::uint64_t tick = 0;
    std::int64_t at = 0;
    std::uint64_t seq = 0;
    Axes axes{};
    bool stale = false;
    Vector7d twist = Vector7d::Zero();
};

// Owns the simulation state. The caller provides time in milliseconds, so a session driven by a
// recorded clock is deterministic. Every input that changes state is appended to the event log.
class Session {
public:
    Session(CooperativeSystem sys, TeleopConfig cfg) : sys_(std::move(sys)), cfg_(std::move(cfg))
    {
        if (!(cfg_.dt > 0.0)) throw ConfigError("teleop dt must be positive");
        if (!(cfg_.max_joint_speed > 0.0)) throw ConfigError("max_joint_speed must be positive");
        if (cfg_.stale_ms < 0) throw ConfigError("stale_ms must be non-negative");
        for (double g : cfg_.gains)
            if (!std::isfinite(g)) throw ConfigError("axis gains must be finite");
        q_ = cfg_.q0.size() ? cfg_.q0 : sys_.nominal;
        if (q_.size() != sys_.dof()) throw ConfigError("teleop q0 has the wrong size");
        cfg_.q0 = q_;
    }

    const CooperativeSystem& system() const { return sys_; }
    const TeleopConfig& config() const { return cfg_; }
    const Eigen::VectorXd& q() const { return q_; }
    std::uint64_t ticks() const { return tick_; }
    std::optional<int> commander() const { return commander_; }
    const std::vector<json>& log() const { return log_; }
    const std::vector<TickRecord>& tick_log() const { return ticks_; }
    int clamp_events() const { return clamps_; }

    Role connect(int client, std::int64_t now)
    {
        log_.push_back({{"event", "connect"}, {"at", now}, {"client", client}});
        clients_.insert(client);
        if (!commander_) commander_ = client;
        return role(client);
    }

    void disconnect(int client, std::int64_t now)
    {
        log_.push_back({{"event", "disconnect"}, {"at", now}, {"client", client}});
        clients_.erase(client);
        // the slot goes to the next client that connects
        if (commander_ == client) commander_.reset();
    }

    Role role(int client) const { return commander_ == client ? Role::Commander : Role::Viewer; }

    ConfigMessage config_message(int client) const
    {
        ConfigMessage c;
        c.role = to_string(role(client));
        c.system = sys_.name;
        c.primitive = coopga::to_string(sys_.kind);
        c.dof = sys_.dof();
        c.dt = cfg_.dt;
        c.gains = cfg_.gains;
        c.rz_to_dilation = cfg_.rz_to_dilation;
        c.mask = controllable_mask(sys_.kind);
        c.max_joint_speed = cfg_.max_joint_speed;
        c.stale_ms = cfg_.stale_ms;
        c.joint_names = sys_.joint_names;
        return c;
    }

    // Handles one text message; returns the reply for that client, if any.
    std::optional<json> handle(int client, const std::string& text, std::int64_t now)
    {
        log_.push_back({{"event", "message"}, {"at", now}, {"client", client}, {"text", text}});
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            return encode(ErrorMessage{"bad-message", e.what()});
        }
        const std::string type = j.is_object() && j.contains("type") && j["type"].is_string() ? j["type"].get<std::string>() : "";
        if (type != "axes" && type != "config")
            return encode(ErrorMessage{"bad-message", "clients send 'axes' or 'config' messages"});
        if (role(client) != Role::Commander)
            return encode(ErrorMessage{"read-only", "another client holds the command slot"});
        if (type == "config") return update_config(client, j);
        AxesCommand c;
        try {
            c = decode_axes(j);
        } catch (const std::exception& e) {
            return encode(ErrorMessage{"bad-message", e.what()});
        }
        if (last_seq_ && c.seq <= *last_seq_)
            return encode(ErrorMessage{"out-of-order", "seq " + std::to_string(c.seq) + " is not above " +
                                                           std::to_string(*last_seq_)});
        last_seq_ = c.seq;
        latest_ = Pending{c, now};  // latest wins
        return std::nullopt;
    }

    // One control step at time now: latest command, staleness, mapping, differential kinematics,
    // speed clamp, then the state of the configuration the step started from.
    StateUpdate tick(std::int64_t now)
    {
        log_.push_back({{"event", "tick"}, {"at", now}});
        TickRecord tr;
        tr.tick = tick_;
        tr.at = now;
        if (latest_) {
            if (now - latest_->received > cfg_.stale_ms) {
                tr.stale = true;
            } else {
                tr.axes = latest_->cmd.axes;
                tr.seq = latest_->cmd.seq;
            }
        }
        tr.twist = map_axes(tr.axes, cfg_.gains, controllable_mask(sys_.kind), cfg_.rz_to_dilation);

        sim::StepRecord r;
        r.step = static_cast<int>(tick_);
        r.t = static_cast<double>(tick_) * cfg_.dt;
        Eigen::VectorXd qd = Eigen::VectorXd::Zero(sys_.dof());
        auto e = sim::guarded([&] { qd = differential_kinematics(sys_, q_, tr.twist, &ctx_).qd; });
        if (e) {
            qd.setZero();
            r.singular = true;
            r.event = *e;
        }
        if (sim::detail::clamp_speed(qd, cfg_.max_joint_speed)) {
            r.clamped = true;
            ++clamps_;
            if (r.event.empty()) r.event = "joint speed clamped";
        }
        bool flagged = r.singular;
        std::string ev = r.event;
        sim::observe(sys_, q_, r, &ctx_);
        r.singular = r.singular || flagged;
        if (!ev.empty()) r.event = ev;

        StateUpdate s;
        s.tick = tick_;
        s.t = r.t;
        s.q = q_;
        s.params = r.params;
        s.log_v = r.log_v;
        const auto& blades = similarity_blades();
        for (std::size_t i = 0; i < 12; ++i) s.versor[i] = r.singular ? sim::kNaN : r.versor.c[blades[i]];
        s.twist = r.singular ? Vector7d::Zero() : tr.twist;
        s.min_eig = r.min_eig;
        s.seq = tr.seq;
        s.flags = {r.singular, r.clamped, tr.stale};
        s.event = r.event;

        q_ = q_ + cfg_.dt * qd;
        ++tick_;
        ticks_.push_back(tr);
        return s;
    }

private:
    struct Pending {
        AxesCommand cmd;
        std::int64_t received = 0;
    };

    json update_config(int client, const json& j)
    {
        try {
            if (j.contains("gains")) {
                auto g = detail::fixed<7>(j["gains"], "gains");
                for (double x : g)
                    if (!std::isfinite(x)) throw ProtocolError("gains must be finite");
                cfg_.gains = g;
            }
            if (j.contains("rz_to_dilation")) cfg_.rz_to_dilation = j["rz_to_dilation"].get<bool>();
        } catch (const std::exception& e) {
            return encode(ErrorMessage{"bad-config", e.what()});
        }
        return encode(config_message(client));
    }

    CooperativeSystem sys_;
    TeleopConfig cfg_;
    Eigen::VectorXd q_;
    OrientationContext ctx_;
    std::uint64_t tick_ = 0;
    std::set<int> clients_;
    std::optional<int> commander_;
    std::optional<std::uint64_t> last_seq_;
    std::optional<Pending> latest_;
    std::vector<json> log_;
    std::vector<TickRecord> ticks_;
    int clamps_ = 0;
};

// ---- replay ----

// Runs an event log through a fresh session and returns the state of every tick.
inline std::vector<StateUpdate> replay(const CooperativeSystem& sys, const TeleopConfig& cfg,
                                       const std::vector<json>& log, Session* out = nullptr)
{
    Session s(sys, cfg);
    std::vector<StateUpdate> states;
    for (const auto& ev : log) {
        const std::string kind = ev.at("event").get<std::string>();
        const auto at = ev.at("at").get<std::int64_t>();
        if (kind == "connect") s.connect(ev.at("client").get<int>(), at);
        else if (kind == "disconnect") s.disconnect(ev.at("client").get<int>(), at);
        else if (kind == "message") s.handle(ev.at("client").get<int>(), ev.at("text").get<std::string>(), at);
        else if (kind == "tick") states.push_back(s.tick(at));
        else throw ConfigError("unknown log event '" + kind + "'");
    }
    if (out) *out = std::move(s);
    return states;
}

inline std::vector<json> read_log(std::istream& in)
{
    std::vector<json> log;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) log.push_back(json::parse(line));
    return log;
}

inline void write_log(std::ostream& os, const std::vector<json>& log)
{
    for (const auto& e : log) os << e.dump() << '\n';
}

// The same command stream as a kinematic scenario: one twist segment per tick.
inline sim::Scenario offline_scenario(const CooperativeSystem& sys, const TeleopConfig& cfg,
                                      const std::vector<TickRecord>& ticks)
{
    sim::Scenario sc;
    sc.name = "teleop-replay";
    sc.mode = sim::Mode::Kinematic;
    sc.system = sys;
    sc.q0 = cfg.q0.size() ? cfg.q0 : sys.nominal;
    sc.dt = cfg.dt;
    sc.duration = static_cast<double>(ticks.size()) * cfg.dt;
    sc.max_joint_speed = cfg.max_joint_speed;
    for (const auto& t : ticks) sc.commands.push_back({static_cast<double>(t.tick) * cfg.dt, t.twist});
    sc.source = {{"mode", "kinematic"}, {"ticks", ticks.size()}};
    return sc;
}

}  // namespace coopga::teleop
