#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace coopga;
using V3 = Eigen::Vector3d;

namespace {

const std::vector<PrimitiveKind> kAllKinds = {PrimitiveKind::Point,  PrimitiveKind::PointPair, PrimitiveKind::Line,
                                              PrimitiveKind::Circle, PrimitiveKind::Plane,     PrimitiveKind::Sphere};

GeometricPrimitive random_primitive(PrimitiveKind k, std::mt19937& rng)
{
    std::vector<V3> pts;
    for (int i = 0; i < point_count(k); ++i) pts.push_back(oracle::random_vec3(rng, 2.0));
    return construct(pts, is_flat(k));
}

double wedge_residual(const GeometricPrimitive& x, const V3& p)
{
    Multivector w = x.blade ^ embed_point(p);
    return w.norm_inf() / x.blade.norm_inf();
}

}  // namespace

TEST(Construct, ExamplesFromPoints)
{
    auto line = construct(std::vector<V3>{V3(0, 0, 0), V3(0, 0, 1)}, true);
    EXPECT_EQ(line.kind, PrimitiveKind::Line);
    EXPECT_LE(wedge_residual(line, V3(0, 0, 2)), 1e-15);

    auto circle = construct(std::vector<V3>{V3(1, 0, 0), V3(-1, 0, 0), V3(0, 1, 0)}, false);
    auto p = params(circle);
    EXPECT_NEAR(p.radius, 1.0, 1e-12);
    EXPECT_LE(p.center.norm(), 1e-12);
    EXPECT_NEAR(std::abs(p.normal.z()), 1.0, 1e-12);

    auto sphere = construct(std::vector<V3>{V3(1, 0, 0), V3(-1, 0, 0), V3(0, 1, 0), V3(0, 0, 1)}, false);
    auto s = params(sphere);
    EXPECT_NEAR(s.radius, 1.0, 1e-12);
    EXPECT_LE(s.center.norm(), 1e-12);
}

TEST(Construct, DegenerateInputsRaise)
{
    EXPECT_THROW(construct(std::vector<V3>{V3(1, 1, 1), V3(1, 1, 1)}, false), DegeneratePrimitive);
    EXPECT_THROW(construct(std::vector<V3>{V3(0, 0, 0), V3(1, 0, 0), V3(2, 0, 0)}, false), DegeneratePrimitive);
    EXPECT_THROW(construct(std::vector<V3>{V3(0, 0, 0), V3(1, 0, 0), V3(2, 0, 0)}, true), DegeneratePrimitive);
    EXPECT_THROW(construct(std::vector<V3>{V3(0, 0, 0), V3(1, 0, 0), V3(0, 1, 0), V3(1, 1, 0)}, false),
                 DegeneratePrimitive);
    try {
        construct(std::vector<V3>{V3(0, 0, 0), V3(1, 0, 0), V3(2, 0, 0)}, false);
    } catch (const DegeneratePrimitive& e) {
        EXPECT_EQ(e.kind(), "circle");
        EXPECT_LE(e.measure(), 1e-9);
    }
}

TEST(Construct, OuterProductNullspaceBothWays)
{
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0), ang(0.0, 2 * M_PI);
    for (int trial = 0; trial < 50; ++trial) {
        // circle and sphere sampled through their parametric points
        V3 c = oracle::random_vec3(rng, 2.0);
        double r = 0.2 + std::abs(u(rng));
        V3 n = oracle::random_vec3(rng).normalized();
        V3 a = n.unitOrthogonal(), b = n.cross(a);
        auto pt = [&](double t) -> V3 { return c + r * (std::cos(t) * a + std::sin(t) * b); };
        auto circle = construct(std::vector<V3>{pt(0.1), pt(2.0), pt(4.0)}, false);
        auto sphere = construct(std::vector<V3>{pt(0.1), pt(2.0), pt(4.0), c + r * n}, false);
        auto plane = construct(std::vector<V3>{pt(0.1), pt(2.0), pt(4.0)}, true);
        auto line = construct(std::vector<V3>{pt(0.1), pt(2.0)}, true);
        for (int k = 0; k < 10; ++k) {
            double t = ang(rng);
            EXPECT_LE(wedge_residual(circle, pt(t)), 1e-9);
            V3 sp = oracle::random_vec3(rng).normalized();
            EXPECT_LE(wedge_residual(sphere, c + r * sp), 1e-9);
            EXPECT_LE(wedge_residual(plane, c + u(rng) * a + u(rng) * b), 1e-9);
            EXPECT_LE(wedge_residual(line, pt(0.1) + u(rng) * (pt(2.0) - pt(0.1))), 1e-9);
            // points off the primitive are not in the nullspace
            EXPECT_GT(wedge_residual(circle, pt(t) + 0.1 * n), 1e-6);
            EXPECT_GT(wedge_residual(sphere, c + (r + 0.1) * sp), 1e-6);
            EXPECT_GT(wedge_residual(plane, c + 0.1 * n), 1e-6);
        }
    }
}

TEST(Metric, RadiusCenterNormalExamples)
{
    auto unit = construct(std::vector<V3>{V3(1, 0, 0), V3(-1, 0, 0), V3(0, 1, 0)}, false);
    EXPECT_NEAR(radius(unit), 1.0, 1e-12);
    EXPECT_LE(extract_point(center(unit)).norm(), 1e-12);

    GeometricPrimitive scaled{PrimitiveKind::Circle, apply_versor(dilator(2.0), unit.blade), false};
    EXPECT_NEAR(radius(scaled), 2.0, 1e-12);

    auto plane = construct(std::vector<V3>{V3(0, 0, 0), V3(1, 0, 0), V3(0, 1, 0)}, true);
    Multivector n = plane_normal(plane);
    EXPECT_NEAR(std::abs(n.c[blade::e3]), 1.0, 1e-15);
    EXPECT_EQ(n.c[blade::einf], 0.0);

    // off-origin circle of radius 2
    auto c2 = construct(std::vector<V3>{V3(3, 2, 3), V3(1, 4, 3), V3(-1, 2, 3)}, false);
    auto p2 = params(c2);
    EXPECT_NEAR(p2.radius, 2.0, 1e-12);
    EXPECT_LE((p2.center - V3(1, 2, 3)).norm(), 1e-12);
    EXPECT_LE((p2.normal - V3(0, 0, 1)).norm(), 1e-12);  // counter-clockwise seen from +z

    auto pl = construct(std::vector<V3>{V3(0, 0, 2), V3(1, 0, 2), V3(0, 1, 2)}, true);
    auto pp = params(pl);
    EXPECT_NEAR(pp.distance, 2.0, 1e-12);

    auto pair = construct(std::vector<V3>{V3(1, 1, 0), V3(1, 1, 4)}, false);
    auto pq = params(pair);
    EXPECT_NEAR(pq.radius, 2.0, 1e-12);
    EXPECT_LE((pq.endpoints[0] - V3(1, 1, 0)).norm(), 1e-12);
    EXPECT_LE((pq.endpoints[1] - V3(1, 1, 4)).norm(), 1e-12);
}

TEST(Metric, ParamsAreUnitAndNonNegative)
{
    std::mt19937 rng(22);
    for (auto k : kAllKinds)
        for (int t = 0; t < 50; ++t) {
            auto p = params(random_primitive(k, rng));
            EXPECT_GE(p.radius, 0.0);
            if (k == PrimitiveKind::Circle || k == PrimitiveKind::Plane) EXPECT_NEAR(p.normal.norm(), 1.0, 1e-10);
            if (k == PrimitiveKind::Line || k == PrimitiveKind::PointPair)
                EXPECT_NEAR(p.direction.norm(), 1.0, 1e-10);
        }
}

TEST(Projection, Examples)
{
    auto line = construct(std::vector<V3>{V3(0, 0, 0), V3(0, 0, 1)}, true);
    Multivector p = project_point(embed_point(V3(2, 0, 5)), line);
    EXPECT_LE((extract_point(p) - V3(0, 0, 5)).norm(), 1e-12);

    auto plane = construct(std::vector<V3>{V3(0, 0, 1), V3(1, 0, 1), V3(0, 1, 1)}, true);
    EXPECT_LE((extract_point(project_point(embed_point(V3(2, 0.5, 5)), plane)) - V3(2, 0.5, 1)).norm(), 1e-12);

    std::mt19937 rng(23);
    for (int t = 0; t < 100; ++t) {
        auto s = random_primitive(PrimitiveKind::Sphere, rng);
        auto sp = params(s);
        V3 q = oracle::random_vec3(rng, 3.0);
        V3 r = extract_point(project_point(embed_point(q), s));
        EXPECT_NEAR((r - sp.center).norm(), sp.radius, 1e-9 * std::max(1.0, sp.radius));
        // idempotent on the primitive
        V3 r2 = extract_point(project_point(embed_point(r), s));
        EXPECT_LE((r2 - r).norm(), 1e-9 * std::max(1.0, sp.radius));

        auto c = random_primitive(PrimitiveKind::Circle, rng);
        V3 rc = extract_point(project_point(embed_point(q), c));
        EXPECT_LE(wedge_residual(c, rc), 1e-9);
        auto l = random_primitive(PrimitiveKind::Line, rng);
        V3 rl = extract_point(project_point(embed_point(q), l));
        EXPECT_LE(wedge_residual(l, rl), 1e-9);
        EXPECT_LE((extract_point(project_point(embed_point(rl), l)) - rl).norm(), 1e-9);
    }
}

TEST(Meet, Examples)
{
    auto z0 = construct(std::vector<V3>{V3(0, 0, 0), V3(1, 0, 0), V3(0, 1, 0)}, true);
    auto x0 = construct(std::vector<V3>{V3(0, 0, 0), V3(0, 1, 0), V3(0, 0, 1)}, true);
    auto yaxis = construct(std::vector<V3>{V3(0, 0, 0), V3(0, 1, 0)}, true);
    EXPECT_LE(comparison_residual(meet(z0.blade, x0.blade), yaxis.blade), 1e-12);
    // symmetric up to sign
    EXPECT_LE(comparison_residual(meet(z0.blade, x0.blade), meet(x0.blade, z0.blade)), 1e-12);

    auto sphere = unit_primitive(PrimitiveKind::Sphere);
    Multivector c = meet(sphere.blade, z0.blade);
    GeometricPrimitive circle{PrimitiveKind::Circle, c, false};
    EXPECT_NEAR(radius(circle), 1.0, 1e-12);
    EXPECT_LE(extract_point(center(circle)).norm(), 1e-12);
    EXPECT_LE(comparison_residual(c, unit_primitive(PrimitiveKind::Circle).blade), 1e-12);

    // a plane missing the sphere gives an imaginary circle: opposite sign of X X~
    auto far = construct(std::vector<V3>{V3(0, 0, 3), V3(1, 0, 3), V3(0, 1, 3)}, true);
    Multivector ci = meet(sphere.blade, far.blade);
    double real = (c * reverse(c)).c[0], imag = (ci * reverse(ci)).c[0];
    EXPECT_LT(real * imag, 0.0);
}

TEST(Similarity, IdentityAndPureDilation)
{
    for (auto k : kAllKinds) {
        auto u = unit_primitive(k);
        auto v = similarity_between(u, u);
        EXPECT_LE((v.value - Multivector(1.0)).norm_inf(), 1e-14) << to_string(k);
    }
    auto c1 = construct(std::vector<V3>{V3(1, 0, 0), V3(0, 1, 0), V3(-1, 0, 0)}, false);
    auto c2 = construct(std::vector<V3>{V3(2, 0, 0), V3(0, 2, 0), V3(-2, 0, 0)}, false);
    auto v = similarity_between(c1, c2);
    EXPECT_LE((v.value - dilator(2.0)).norm_inf(), 1e-14);
}

TEST(Similarity, RandomPairsAndSubgroups)
{
    std::mt19937 rng(24);
    for (auto k : kAllKinds)
        for (int t = 0; t < 200; ++t) {
            auto x1 = random_primitive(k, rng), x2 = random_primitive(k, rng);
            auto v = similarity_between(x1, x2);
            EXPECT_LE(comparison_residual(apply_versor(v, x1.blade), x2.blade), 1e-8) << to_string(k);
            EXPECT_TRUE(in_subgroup(v.value, similarity_group(k), 1e-10)) << to_string(k);
            if (is_round(k)) {
                // radius maps by the dilator scale
                auto f = decompose_similarity(Versor(GroupKind::Similarity, v.value));
                double d = std::exp(log_versor(f[2]).coords[row::e0inf]);
                EXPECT_NEAR(radius(x1) * d, radius(x2), 1e-9 * radius(x2));
            }
            if (k == PrimitiveKind::Sphere) EXPECT_LE(outside_span(v.value, GroupKind::Similarity), 0.0);
        }
}

TEST(Similarity, AntipodalNormals)
{
    auto c1 = unit_primitive(PrimitiveKind::Circle);
    auto c2 = construct(std::vector<V3>{V3(1, 0, 0), V3(0, -1, 0), V3(-1, 0, 0)}, false);
    bool flipped = false;
    auto v = similarity_between(c1, c2, {}, &flipped);
    EXPECT_TRUE(flipped);
    EXPECT_LE(comparison_residual(apply_versor(v, c1.blade), c2.blade), 1e-12);
    SimilarityOptions strict;
    strict.allow_flip = false;
    EXPECT_THROW(similarity_between(c1, c2, strict), AntipodalNormals);
}

TEST(Construct, EquivariantUnderSimilarity)
{
    std::mt19937 rng(25);
    for (auto k : kAllKinds)
        for (int t = 0; t < 30; ++t) {
            std::vector<V3> pts;
            for (int i = 0; i < point_count(k); ++i) pts.push_back(oracle::random_vec3(rng, 2.0));
            Versor v = exp_versor(GroupBivector(GroupKind::Similarity, oracle::random_bivector(rng)));
            std::vector<Multivector> moved;
            for (const auto& p : pts) moved.push_back(apply_versor(v, embed_point(p)));
            auto a = construct(moved, is_flat(k));
            Multivector b = apply_versor(v, construct(pts, is_flat(k)).blade);
            EXPECT_LE(comparison_residual(a.blade, b), 1e-9);
        }
}

TEST(UnitPrimitives, CanonicalForms)
{
    EXPECT_EQ((unit_primitive(PrimitiveKind::Point).blade - e0()).norm_inf(), 0.0);
    auto c = params(unit_primitive(PrimitiveKind::Circle));
    EXPECT_LE((c.normal - V3(0, 0, 1)).norm(), 1e-15);
    EXPECT_NEAR(c.radius, 1.0, 1e-15);
    auto pl = params(unit_primitive(PrimitiveKind::Plane));
    EXPECT_LE((pl.normal - V3(0, 0, 1)).norm(), 1e-15);
    auto s = params(unit_primitive(PrimitiveKind::Sphere));
    EXPECT_NEAR(s.radius, 1.0, 1e-15);
    EXPECT_LE(s.center.norm(), 1e-15);
    auto l = params(unit_primitive(PrimitiveKind::Line));
    EXPECT_LE((l.direction - V3(0, 1, 0)).norm(), 1e-15);
}
