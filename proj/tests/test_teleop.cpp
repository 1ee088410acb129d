#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <coopga/teleop_server.hpp>

#include "oracles.hpp"

using namespace coopga;
using namespace coopga::teleop;

namespace {

CooperativeSystem leap() { return io::load_system(oracle::data_path("systems/leap_like.json")); }

std::string axes_text(const Axes& a, std::uint64_t seq, std::int64_t ts = 0)
{
    return encode(AxesCommand{a, ts, seq}).dump();
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

json golden(const std::string& name)
{
    std::ifstream in(oracle::data_path("tests/golden/" + name + ".json"));
    return json::parse(in);
}

}  // namespace

TEST(MapAxes, ZeroAxesGiveZeroTwist)
{
    EXPECT_EQ(map_axes(Axes{}, TeleopConfig{}.gains, controllable_mask(PrimitiveKind::Circle)), Vector7d::Zero());
}

TEST(MapAxes, SphereDropsRotationRows)
{
    Axes a{0.1, 0.2, 0.3, 1.0, -1.0, 0.5, 0.0};
    Vector7d xi = map_axes(a, Axes{1, 1, 1, 1, 1, 1, 1}, controllable_mask(PrimitiveKind::Sphere));
    EXPECT_EQ(xi[row::e23], 0.0);
    EXPECT_EQ(xi[row::e13], 0.0);
    EXPECT_EQ(xi[row::e12], 0.0);
    EXPECT_DOUBLE_EQ(xi[row::e1inf], 0.1);
    EXPECT_DOUBLE_EQ(xi[row::e3inf], 0.3);
}

TEST(MapAxes, RowsGainsAndClamp)
{
    Axes g{0.1, 0.2, 0.3, 0.5, 0.6, 0.7, 2.0};
    std::array<bool, 7> all{true, true, true, true, true, true, true};
    Vector7d xi = map_axes(Axes{3.0, 0.5, -1.0, 1.0, 1.0, -0.5, -1.0}, g, all);
    Vector7d want;
    want << 0.5, -0.6, -0.35, -2.0, 0.1, 0.1, -0.3;
    EXPECT_LT((xi - want).norm(), 1e-15);

    // the rotor built from the e13 row turns about +e2 for positive ry
    Multivector r = exp_rotor(Eigen::Vector3d(0.0, -0.3, 0.0));
    Multivector ref = rotor(Eigen::Vector3d::UnitY(), 0.3);
    EXPECT_LT((r - ref).coeff_norm(), 1e-15);
}

TEST(MapAxes, RzCanDriveDilation)
{
    Axes a{0, 0, 0, 0, 0, -0.4, 0.9};
    Vector7d xi = map_axes(a, Axes{1, 1, 1, 1, 1, 1, 1}, controllable_mask(PrimitiveKind::Sphere), true);
    EXPECT_DOUBLE_EQ(xi[row::e0inf], -0.4);
    EXPECT_EQ(xi[row::e12], 0.0);
}

TEST(MapAxes, RejectsNonFiniteGains)
{
    Axes g{1, 1, 1, 1, 1, 1, std::numeric_limits<double>::infinity()};
    EXPECT_THROW(map_axes(Axes{}, g, controllable_mask(PrimitiveKind::Sphere)), ConfigError);
}

TEST(MapAxes, DilationHoldFollowsRadiusFlow)
{
    // -1 on the dilation axis with unit gain is xi = -e0inf; held for 0.25 s the radius scales by e^-0.25
    TeleopConfig cfg;
    cfg.gains = {1, 1, 1, 1, 1, 1, 1};
    Session s(leap(), cfg);
    s.connect(1, 0);
    s.handle(1, axes_text({0, 0, 0, 0, 0, 0, -1}, 1), 0);
    double r0 = 0.0, prev = 0.0;
    for (int k = 0; k <= 25; ++k) {
        auto st = s.tick(k * 10);
        EXPECT_FALSE(st.flags.singular) << st.event;
        if (k == 0) r0 = prev = st.params.radius;
        else {
            EXPECT_LT(st.params.radius, prev);
            prev = st.params.radius;
        }
        EXPECT_NEAR(st.twist[row::e0inf], -1.0, 0.0);
    }
    EXPECT_NEAR(prev / r0, std::exp(-0.25), 2e-3);
}

TEST(Protocol, GoldenFilesRoundTrip)
{
    for (const char* name : {"axes", "state", "state_singular", "config", "error"}) {
        json g = golden(name);
        Message m = decode(g);
        EXPECT_EQ(encode(m), g) << name;
        EXPECT_EQ(encode(parse(g.dump())), g) << name;
    }
    EXPECT_TRUE(std::holds_alternative<AxesCommand>(decode(golden("axes"))));
    auto s = std::get<StateUpdate>(decode(golden("state_singular")));
    EXPECT_TRUE(s.flags.singular);
    EXPECT_TRUE(std::isnan(s.log_v[0]));
}

TEST(Protocol, RejectsMalformedMessages)
{
    EXPECT_THROW(parse("{"), ProtocolError);
    EXPECT_THROW(parse(R"({"axes":[0,0,0,0,0,0,0],"seq":1})"), ProtocolError);
    EXPECT_THROW(parse(R"({"type":"nope"})"), ProtocolError);
    EXPECT_THROW(parse(R"({"type":"axes","axes":[0,0,0,0,0,0],"seq":1})"), ProtocolError);
    EXPECT_THROW(parse(R"({"type":"axes","axes":[0,0,0,0,0,0,"x"],"seq":1})"), ProtocolError);
    EXPECT_THROW(parse(R"({"type":"axes","axes":[0,0,0,0,0,0,0],"seq":-1})"), ProtocolError);
    auto c = std::get<AxesCommand>(parse(R"({"type":"axes","axes":[2,-3,0,0,0,0,0.5],"seq":3})"));
    EXPECT_EQ(c.axes[0], 1.0);
    EXPECT_EQ(c.axes[1], -1.0);
    EXPECT_EQ(c.axes[6], 0.5);
}

TEST(Session, NoClientHoldsSteady)
{
    Session s(leap(), {});
    Eigen::VectorXd q0 = s.q();
    for (int k = 0; k < 50; ++k) {
        auto st = s.tick(k * 10);
        EXPECT_EQ(st.twist, Vector7d::Zero());
    }
    EXPECT_TRUE(same_bits(s.q(), q0));
}

TEST(Session, FirstComeCommanderOthersReadOnly)
{
    Session s(leap(), {});
    EXPECT_EQ(s.connect(1, 0), Role::Commander);
    EXPECT_EQ(s.connect(2, 0), Role::Viewer);
    auto reply = s.handle(2, axes_text({1, 0, 0, 0, 0, 0, 0}, 1), 0);
    ASSERT_TRUE(reply);
    EXPECT_EQ((*reply)["code"], "read-only");
    EXPECT_FALSE(s.handle(1, axes_text({1, 0, 0, 0, 0, 0, 0}, 1), 0));
    s.disconnect(1, 5);
    EXPECT_EQ(s.role(2), Role::Viewer);
    EXPECT_EQ(s.connect(3, 6), Role::Commander);
    EXPECT_EQ(s.config_message(3).role, "commander");
    EXPECT_EQ(s.config_message(2).role, "viewer");
}

TEST(Session, LatestCommandWins)
{
    Session s(leap(), {});
    s.connect(1, 0);
    s.handle(1, axes_text({0, 0, 0, 0, 0, 0, 0.5}, 1), 0);
    s.handle(1, axes_text({0, 0, 0, 0, 0, 0, -0.25}, 2), 1);
    auto st = s.tick(2);
    EXPECT_EQ(st.seq, 2u);
    EXPECT_DOUBLE_EQ(st.twist[row::e0inf], -0.25);
}

TEST(Session, OutOfOrderSequenceRejected)
{
    Session s(leap(), {});
    s.connect(1, 0);
    EXPECT_FALSE(s.handle(1, axes_text({0, 0, 0, 0, 0, 0, 0.5}, 5), 0));
    auto r = s.handle(1, axes_text({0, 0, 0, 0, 0, 0, -0.5}, 5), 1);
    ASSERT_TRUE(r);
    EXPECT_EQ((*r)["code"], "out-of-order");
    EXPECT_EQ(s.tick(2).seq, 5u);
}

TEST(Session, StaleCommandsCountAsZero)
{
    Session s(leap(), {});
    s.connect(1, 0);
    s.handle(1, axes_text({0, 0, 0, 0, 0, 0, 1.0}, 1), 100);
    auto fresh = s.tick(350);
    EXPECT_FALSE(fresh.flags.stale);
    EXPECT_NE(fresh.twist[row::e0inf], 0.0);
    Eigen::VectorXd q = s.q();
    auto stale = s.tick(351);
    EXPECT_TRUE(stale.flags.stale);
    EXPECT_EQ(stale.twist, Vector7d::Zero());
    EXPECT_TRUE(same_bits(s.q(), q));
}

TEST(Session, JointSpeedIsClamped)
{
    TeleopConfig cfg;
    cfg.max_joint_speed = 0.05;
    Session s(leap(), cfg);
    s.connect(1, 0);
    s.handle(1, axes_text({1, 0, 0, 0, 0, 0, -1}, 1), 0);
    Eigen::VectorXd q = s.q();
    auto st = s.tick(0);
    EXPECT_TRUE(st.flags.clamped);
    EXPECT_EQ(st.event, "joint speed clamped");
    EXPECT_LE((s.q() - q).norm(), cfg.dt * cfg.max_joint_speed * (1 + 1e-12));
    EXPECT_EQ(s.clamp_events(), 1);
}

TEST(Session, SingularConfigurationZeroesTwist)
{
    // three sliders whose tips start on one line: the circle through them is degenerate
    json chains = json::array();
    for (double x : {-1.0, 0.0, 1.0})
        chains.push_back({{"base_pose", {{"translation", {x, 0.0, 0.0}}}},
                          {"joints", {{{"type", "prismatic"}, {"axis", {0, 0, 1}}}}}});
    auto sys = io::parse_system({{"schema", kSystemSchema}, {"name", "sliders"}, {"primitive", "circle"}, {"chains", chains}});
    Session s(sys, {});
    auto st0 = s.tick(0);
    ASSERT_TRUE(st0.flags.singular);
    s.connect(1, 0);
    s.handle(1, axes_text({0, 0, 0, 0, 0, 0, 1}, 1), 0);
    Eigen::VectorXd q = s.q();
    auto st = s.tick(10);
    EXPECT_TRUE(st.flags.singular);
    EXPECT_FALSE(st.event.empty());
    EXPECT_EQ(st.twist, Vector7d::Zero());
    EXPECT_TRUE(std::isnan(st.versor[0]));
    EXPECT_TRUE(same_bits(s.q(), q));
    // the streamed message stays valid JSON with nulls in place of the undefined values
    EXPECT_TRUE(std::get<StateUpdate>(parse(encode(st).dump())).flags.singular);
}

TEST(Replay, LogReplaysBitForBitAndMatchesOfflineSimulation)
{
    auto sys = leap();
    TeleopConfig cfg;
    Session online(sys, cfg);
    auto states = verify::scripted_session(online, 150);
    EXPECT_GT(online.ticks(), 0u);

    // the log written to disk and read back
    std::stringstream file;
    write_log(file, online.log());
    auto replayed = replay(sys, cfg, read_log(file));
    ASSERT_EQ(replayed.size(), states.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
        EXPECT_EQ(encode(replayed[k]).dump(), encode(states[k]).dump()) << k;
        EXPECT_TRUE(same_bits(replayed[k].q, states[k].q)) << k;
    }

    // the applied twists as a plain kinematic scenario
    auto offline = sim::run_kinematic(offline_scenario(sys, online.config(), online.tick_log()));
    ASSERT_EQ(offline.records.size(), states.size() + 1);
    for (std::size_t k = 0; k < states.size(); ++k) {
        EXPECT_TRUE(same_bits(offline.records[k].q, states[k].q)) << k;
        EXPECT_TRUE(same_bits(offline.records[k].log_v, states[k].log_v)) << k;
    }
    EXPECT_TRUE(same_bits(offline.records.back().q, online.q()));
}

TEST(Replay, PureDilationChangesRadiusMonotonically)
{
    for (double sign : {-1.0, 1.0}) {
        Session s(leap(), {});
        s.connect(1, 0);
        double prev = -1.0;
        for (int k = 0; k < 40; ++k) {
            s.handle(1, axes_text({0, 0, 0, 0, 0, 0, 0.5 * sign}, static_cast<std::uint64_t>(k + 1)), 10 * k);
            auto st = s.tick(10 * k);
            ASSERT_FALSE(st.flags.singular) << st.event;
            if (prev > 0.0) {
                if (sign < 0) EXPECT_LT(st.params.radius, prev);
                else EXPECT_GT(st.params.radius, prev);
            }
            prev = st.params.radius;
        }
    }
}

namespace {

struct Client {
    std::vector<std::string> received;
    std::thread thread;
};

void run_client(unsigned short port, Client& c, const std::function<void(websocket::stream<tcp::socket>&)>& after_config)
{
    net::io_context ioc;
    websocket::stream<tcp::socket> ws(ioc);
    ws.next_layer().connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    ws.handshake("127.0.0.1", "/");
    bool first = true;
    for (;;) {
        beast::flat_buffer b;
        beast::error_code ec;
        ws.read(b, ec);
        if (ec) break;
        c.received.push_back(beast::buffers_to_string(b.data()));
        if (first) {
            first = false;
            after_config(ws);
        }
    }
}

}  // namespace

TEST(Server, ViewersReceiveIdenticalStreams)
{
    auto sys = leap();
    TeleopConfig cfg;
    std::stringstream tee;
    ServerOptions opt;
    opt.port = 0;
    opt.max_ticks = 60;
    opt.tee = &tee;
    Server server(Session(sys, cfg), opt);
    const unsigned short port = server.port();
    std::thread loop([&] { server.run(); });

    Client commander, viewer1, viewer2;
    commander.thread = std::thread([&] {
        run_client(port, commander, [](auto& ws) {
            ws.text(true);
            ws.write(net::buffer(axes_text({0, 0, 0, 0, 0, 0, -0.5}, 1)));
        });
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    auto viewer = [&](Client& c) {
        return std::thread([&] {
            run_client(port, c, [](auto& ws) {
                ws.text(true);
                ws.write(net::buffer(axes_text({1, 0, 0, 0, 0, 0, 0}, 7)));
            });
        });
    };
    viewer1.thread = viewer(viewer1);
    viewer2.thread = viewer(viewer2);
    loop.join();
    commander.thread.join();
    viewer1.thread.join();
    viewer2.thread.join();

    ASSERT_FALSE(commander.received.empty());
    EXPECT_EQ(std::get<ConfigMessage>(parse(commander.received[0])).role, "commander");
    for (Client* v : {&viewer1, &viewer2}) {
        ASSERT_FALSE(v->received.empty());
        EXPECT_EQ(std::get<ConfigMessage>(parse(v->received[0])).role, "viewer");
        bool saw_error = false;
        for (const auto& m : v->received)
            if (json::parse(m)["type"] == "error" && json::parse(m)["code"] == "read-only") saw_error = true;
        EXPECT_TRUE(saw_error);
    }

    // state streams keyed by tick; where both viewers were connected they agree byte for byte
    auto states = [](const Client& c) {
        std::map<std::uint64_t, std::string> m;
        for (const auto& s : c.received) {
            json j = json::parse(s);
            if (j["type"] == "state") m[j["tick"].get<std::uint64_t>()] = s;
        }
        return m;
    };
    auto a = states(viewer1), b = states(viewer2), c = states(commander);
    int shared = 0;
    for (const auto& [tick, text] : a)
        if (b.count(tick)) {
            EXPECT_EQ(text, b[tick]) << tick;
            EXPECT_EQ(text, c[tick]) << tick;
            ++shared;
        }
    EXPECT_GT(shared, 10);

    // the commander's dilation shrinks the sphere, and the tee holds every tick
    const auto& online = server.session();
    EXPECT_EQ(online.ticks(), 60u);
    std::vector<std::string> teed;
    for (std::string line; std::getline(tee, line);) teed.push_back(line);
    ASSERT_EQ(teed.size(), 60u);
    EXPECT_LT(json::parse(teed.back())["params"]["radius"].get<double>(),
              json::parse(teed.front())["params"]["radius"].get<double>());

    // replaying the server's own log reproduces the stream exactly
    auto replayed = replay(sys, cfg, online.log());
    ASSERT_EQ(replayed.size(), teed.size());
    for (std::size_t k = 0; k < teed.size(); ++k) EXPECT_EQ(encode(replayed[k]).dump(), teed[k]) << k;
}
