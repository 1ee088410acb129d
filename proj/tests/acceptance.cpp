// One PASS/FAIL line per acceptance criterion, with the measured values underneath.
// A criterion passes when every check holds and it finishes inside its time budget.

#include <functional>
#include <iomanip>
#include <iostream>

#include <coopga/coopga.hpp>
#include <coopga/verify.hpp>

using namespace coopga;

namespace {

std::string data(const std::string& rel) { return std::string(COOPGA_DATA_DIR) + "/" + rel; }

CooperativeSystem shipped(const std::string& name) { return io::load_system(data("systems/" + name + ".json")); }

struct Criterion {
    std::string name;
    double limit_seconds;
    std::function<std::vector<verify::Report>()> run;
};

}  // namespace

int main()
{
    const std::string dir = COOPGA_DATA_DIR;
    const std::vector<Criterion> criteria = {
        {"algebra identities", 5, [] { return std::vector{verify::algebra(1000, 11)}; }},
        {"group exp/log maps", 10, [] { return std::vector{verify::groups(10000, 12)}; }},
        {"Jacobian oracle suite (7, 16, 17 and 21 joints, 50 configurations each)", 120,
         [] {
             return std::vector{verify::jacobians(
                 {shipped("iiwa_like"), shipped("leap_like"), shipped("g1_like"), shipped("three_arms")}, 50, 13)};
         }},
        {"similarity between primitives (500 pairs per kind)", 30,
         [] { return std::vector{verify::similarity_pairs(500, 14)}; }},
        {"inverse kinematics (100 targets, three 7-joint arms)", 60,
         [] { return std::vector{verify::ik(shipped("three_arms"), 100, 15)}; }},
        {"iLQR reaching (n = 250, dt = 0.001)", 120,
         [] { return std::vector{verify::ilqr(shipped("three_arms"), 5, 16)}; }},
        {"impedance regulation (10 starts, 4 s)", 60, [&] { return std::vector{verify::impedance(dir)}; }},
        {"geometric nullspace", 30, [&] { return std::vector{verify::nullspace(dir)}; }},
        {"geometric singularity sweep", 30, [&] { return std::vector{verify::singularity(dir)}; }},
        {"reaching scenarios (circle, plane, line constraint)", 120,
         [&] { return std::vector{verify::reaching(dir)}; }},
        {"teleoperation replay", 30, [] { return std::vector{verify::teleop_replay(shipped("leap_like"))}; }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        std::vector<verify::Report> reports;
        std::string error;
        double seconds = 0.0;
        try {
            reports = c.run();
        } catch (const std::exception& e) {
            error = e.what();
        }
        bool ok = error.empty();
        for (const auto& r : reports) {
            ok = ok && r.pass();
            seconds += r.seconds;
        }
        bool in_time = seconds <= c.limit_seconds;
        ok = ok && in_time;
        failed += !ok;
        std::cout << (ok ? "PASS " : "FAIL ") << std::setw(2) << i + 1 << ' ' << c.name << "  [" << std::fixed
                  << std::setprecision(2) << seconds << " s, limit " << std::setprecision(0) << c.limit_seconds
                  << " s]" << std::defaultfloat << '\n';
        if (!error.empty()) std::cout << "  error: " << error << '\n';
        if (!in_time) std::cout << "  over the time limit\n";
        for (const auto& r : reports) verify::print(std::cout, r);
        std::cout.flush();
    }
    std::cout << (criteria.size() - failed) << " of " << criteria.size() << " criteria pass\n";
    return failed ? 1 : 0;
}
