#pragma once

#include <optional>
#include <string>
#include <vector>

#include "versor.hpp"

namespace coopga {

enum class PrimitiveKind { Point, PointPair, Line, Circle, Plane, Sphere };

inline std::string to_string(PrimitiveKind k)
{
    switch (k) {
    case PrimitiveKind::Point: return "point";
    case PrimitiveKind::PointPair: return "pointpair";
    case PrimitiveKind::Line: return "line";
    case PrimitiveKind::Circle: return "circle";
    case PrimitiveKind::Plane: return "plane";
    default: return "sphere";
    }
}

inline PrimitiveKind primitive_kind_from_string(const std::string& s)
{
    for (auto k : {PrimitiveKind::Point, PrimitiveKind::PointPair, PrimitiveKind::Line, PrimitiveKind::Circle,
                   PrimitiveKind::Plane, PrimitiveKind::Sphere})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown primitive kind '" + s + "'");
}

inline bool is_flat(PrimitiveKind k) { return k == PrimitiveKind::Line || k == PrimitiveKind::Plane; }
inline bool is_round(PrimitiveKind k)
{
    return k == PrimitiveKind::PointPair || k == PrimitiveKind::Circle || k == PrimitiveKind::Sphere;
}

inline int point_count(PrimitiveKind k)
{
    switch (k) {
    case PrimitiveKind::Point: return 1;
    case PrimitiveKind::PointPair:
    case PrimitiveKind::Line: return 2;
    case PrimitiveKind::Circle:
    case PrimitiveKind::Plane: return 3;
    default: return 4;
    }
}

inline int blade_grade(PrimitiveKind k) { return point_count(k) + (is_flat(k) ? 1 : 0); }

inline PrimitiveKind kind_for(int n, bool flat)
{
    if (flat) {
        if (n == 2) return PrimitiveKind::Line;
        if (n == 3) return PrimitiveKind::Plane;
        throw DegenerateInput("flat primitives take two or three points");
    }
    switch (n) {
    case 1: return PrimitiveKind::Point;
    case 2: return PrimitiveKind::PointPair;
    case 3: return PrimitiveKind::Circle;
    case 4: return PrimitiveKind::Sphere;
    default: throw DegenerateInput("primitives take one to four points");
    }
}

// The Table of controllable similarity rows, with the unit primitives below.
inline std::array<bool, 7> controllable_mask(PrimitiveKind k)
{
    switch (k) {
    case PrimitiveKind::Point: return {false, false, false, false, true, true, true};
    case PrimitiveKind::PointPair: return {true, false, true, true, true, true, true};
    case PrimitiveKind::Line: return {true, false, true, false, true, false, true};
    case PrimitiveKind::Circle: return {true, true, false, true, true, true, true};
    case PrimitiveKind::Plane: return {true, true, false, false, false, false, true};
    default: return {false, false, false, true, true, true, true};
    }
}

inline int mask_size(PrimitiveKind k)
{
    int n = 0;
    for (bool b : controllable_mask(k)) n += b;
    return n;
}

inline Eigen::Matrix<double, 7, 7> mask_matrix(PrimitiveKind k)
{
    Eigen::Matrix<double, 7, 7> m = Eigen::Matrix<double, 7, 7>::Zero();
    auto mask = controllable_mask(k);
    for (int i = 0; i < 7; ++i) m(i, i) = mask[i] ? 1.0 : 0.0;
    return m;
}

inline constexpr double kDegeneracyTol = 1e-9;

struct GeometricPrimitive {
    PrimitiveKind kind = PrimitiveKind::Point;
    Multivector blade;
    bool flat = false;
};

struct PrimitiveParams {
    PrimitiveKind kind = PrimitiveKind::Point;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 0.0;
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    Eigen::Vector3d direction = Eigen::Vector3d::Zero();
    std::array<Eigen::Vector3d, 2> endpoints{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
    double distance = 0.0;  // signed plane offset along the normal
};

// Squared weight of the carrier flat: vanishes for coincident, collinear or coplanar
// defining points. The round itself keeps a finite norm in those limits (it becomes a flat).
inline double degeneracy_measure(const Multivector& blade, bool flat)
{
    Multivector f = flat ? blade : (blade ^ einf());
    return std::abs((f * reverse(f)).c[0]);
}

inline Multivector normalize_point(const Multivector& p)
{
    double w = -scalar_product(p, einf());
    if (std::abs(w) < 1e-14) throw DegenerateInput("point at infinity");
    return p * (1.0 / w);
}

template <class M>
M wedge_points(const std::vector<M>& points, bool flat)
{
    M x = points.front();
    for (std::size_t i = 1; i < points.size(); ++i) x = x ^ points[i];
    if (flat) x = x ^ M(einf());
    return x;
}

inline GeometricPrimitive construct(const std::vector<Multivector>& points, bool flat)
{
    int n = static_cast<int>(points.size());
    if (n < 1 || n > 4) throw DegenerateInput("primitives take one to four points");
    PrimitiveKind k = kind_for(n, flat);
    std::vector<Multivector> pts;
    for (const auto& p : points) pts.push_back(normalize_point(p));
    Multivector x = wedge_points(pts, flat);
    if (k != PrimitiveKind::Point) {
        double m = degeneracy_measure(x, flat);
        if (m <= kDegeneracyTol) throw DegeneratePrimitive(to_string(k), m);
    }
    return {k, x, flat};
}

inline GeometricPrimitive construct(const std::vector<Eigen::Vector3d>& points, bool flat)
{
    std::vector<Multivector> p;
    for (const auto& x : points) p.push_back(embed_point(x));
    return construct(p, flat);
}

inline GeometricPrimitive unit_primitive(PrimitiveKind k)
{
    using V = Eigen::Vector3d;
    switch (k) {
    case PrimitiveKind::Point: return {k, e0(), false};
    case PrimitiveKind::PointPair: return construct(std::vector<V>{V(0, -1, 0), V(0, 1, 0)}, false);
    case PrimitiveKind::Line: return construct(std::vector<V>{V(0, 0, 0), V(0, 1, 0)}, true);
    case PrimitiveKind::Circle: return construct(std::vector<V>{V(1, 0, 0), V(0, 1, 0), V(-1, 0, 0)}, false);
    case PrimitiveKind::Plane: return construct(std::vector<V>{V(0, 0, 0), V(1, 0, 0), V(0, 1, 0)}, true);
    default: return construct(std::vector<V>{V(1, 0, 0), V(0, 1, 0), V(-1, 0, 0), V(0, 0, 1)}, false);
    }
}

// Scale so that the largest-magnitude coefficient is +1.
inline Multivector comparison_form(const Multivector& x)
{
    int best = 0;
    for (int i = 1; i < 32; ++i)
        if (std::abs(x.c[i]) > std::abs(x.c[best])) best = i;
    if (x.c[best] == 0.0) return x;
    return x * (1.0 / x.c[best]);
}

inline double comparison_residual(const Multivector& a, const Multivector& b)
{
    return (comparison_form(a) - comparison_form(b)).norm_inf();
}

// ---- metric queries, on jets ----

namespace geo {

// Euclidean location of a vector with nonzero e0 weight, as a Euclidean grade-1 jet
inline MvJet location(const MvJet& y)
{
    SJet w = y.coeff(blade::e0);
    if (std::abs(w.v) < 1e-14) throw DegenerateInput("vector has no finite location");
    return select(y, {blade::e1, blade::e2, blade::e3}) * (SJet(1.0) / w);
}

inline SJet norm3(const MvJet& v)
{
    SJet a = v.coeff(blade::e1), b = v.coeff(blade::e2), c = v.coeff(blade::e3);
    return sqrt(a * a + b * b + c * c);
}

inline MvJet unit3(const MvJet& v)
{
    SJet n = norm3(v);
    if (n.v < 1e-14) throw DegenerateInput("zero direction");
    return v * (SJet(1.0) / n);
}

// dual sphere through the round: proportional to P(center) + r^2/2 einf
inline MvJet infinity_projection(const MvJet& x) { return inner(MvJet(einf()), x) * inverse(x); }

inline SJet radius(const MvJet& x, const std::string& kind = "round")
{
    MvJet y = infinity_projection(x);
    SJet w = y.coeff(blade::e0);
    SJet sq = scalar_product(y, y);
    if (std::abs(w.v) < 1e-14) throw DegeneratePrimitive(kind, std::abs(w.v));
    SJet r2 = -(sq / (w * w));
    return sqrt(abs(r2));
}

inline MvJet center(const MvJet& x)
{
    MvJet c = x * MvJet(einf()) * x;
    return location(c);
}

// unit normal of a plane, or of the carrier plane of a circle
inline MvJet normal(const MvJet& x, bool flat)
{
    MvJet e = flat ? x : (x ^ MvJet(einf()));
    MvJet es = dual(e);
    MvJet n = es + MvJet(einf()) * scalar_product(es, MvJet(e0()));
    return unit3(select(n, {blade::e1, blade::e2, blade::e3}));
}

// signed offset of a plane from the origin along its unit normal
inline SJet plane_offset(const MvJet& x)
{
    MvJet es = dual(x);
    SJet lam = norm3(select(es, {blade::e1, blade::e2, blade::e3}));
    return es.coeff(blade::einf) / lam;
}

// direction of a line (from the e0 i einf coefficients) or a pointpair
inline MvJet direction(const MvJet& x, bool flat)
{
    if (flat) {
        MvJet d = inner(MvJet(e0()), -inner(MvJet(einf()), x));
        return unit3(select(d, {blade::e1, blade::e2, blade::e3}));
    }
    MvJet d = -inner(MvJet(einf()), x);
    return unit3(select(d, {blade::e1, blade::e2, blade::e3}));
}

// move coefficients between blades
inline MvJet remap(const MvJet& x, std::initializer_list<std::pair<int, int>> from_to)
{
    return detail::unary_linear(x, [&](const Multivector& m) {
        Multivector r;
        for (auto [f, t] : from_to) r.c[t] = m.c[f];
        return r;
    });
}

// point of a line closest to the origin
inline MvJet line_foot(const MvJet& x)
{
    // x = e0^d^einf + m^einf
    MvJet d = remap(x, {{blade::e01inf, blade::e1}, {blade::e02inf, blade::e2}, {blade::e03inf, blade::e3}});
    MvJet m = remap(x, {{blade::e12inf, blade::e12}, {blade::e13inf, blade::e13}, {blade::e23inf, blade::e23}});
    SJet dd = scalar_product(d, d);
    return -inner(d, m) * (SJet(1.0) / dd);
}

inline MvJet rotor_between(const MvJet& a, const MvJet& b)
{
    MvJet r = MvJet(Multivector(1.0)) + b * a;
    return normalize(r);
}

inline MvJet translator_jet(const MvJet& t)
{
    return MvJet(Multivector(1.0)) - (t ^ MvJet(einf())) * 0.5;
}

inline MvJet dilator_jet(const SJet& d)
{
    SJet sd = sqrt(d);
    SJet inv = SJet(1.0) / sd;
    SJet ch = (sd + inv) * SJet(0.5);
    SJet sh = (sd - inv) * SJet(0.5);
    return MvJet(Multivector(1.0)) * ch + MvJet(Multivector::basis_blade(blade::e0inf)) * sh;
}

}  // namespace geo

inline double radius(const GeometricPrimitive& x)
{
    if (!is_round(x.kind)) throw DegenerateInput("radius is defined for rounds");
    return geo::radius(MvJet(x.blade), to_string(x.kind)).v;
}

inline Multivector center(const GeometricPrimitive& x)
{
    if (!is_round(x.kind)) throw DegenerateInput("center is defined for rounds");
    return embed_point(euclidean_part(geo::center(MvJet(x.blade)).v));
}

// normal vector of a plane, or of the carrier plane of a circle
inline Multivector plane_normal(const GeometricPrimitive& x)
{
    if (x.kind != PrimitiveKind::Plane && x.kind != PrimitiveKind::Circle)
        throw DegenerateInput("normal is defined for planes and circles");
    return geo::normal(MvJet(x.blade), x.flat).v;
}

inline PrimitiveParams params(const GeometricPrimitive& x)
{
    PrimitiveParams p;
    p.kind = x.kind;
    MvJet j(x.blade);
    switch (x.kind) {
    case PrimitiveKind::Point: p.center = extract_point(x.blade); break;
    case PrimitiveKind::PointPair:
        p.center = euclidean_part(geo::center(j).v);
        p.radius = geo::radius(j).v;
        p.direction = euclidean_part(geo::direction(j, false).v);
        p.endpoints = {p.center - p.radius * p.direction, p.center + p.radius * p.direction};
        break;
    case PrimitiveKind::Line:
        p.center = euclidean_part(geo::line_foot(j).v);
        p.direction = euclidean_part(geo::direction(j, true).v);
        break;
    case PrimitiveKind::Circle:
        p.center = euclidean_part(geo::center(j).v);
        p.radius = geo::radius(j).v;
        p.normal = euclidean_part(geo::normal(j, false).v);
        break;
    case PrimitiveKind::Plane:
        p.normal = euclidean_part(geo::normal(j, true).v);
        p.distance = geo::plane_offset(j).v;
        p.center = p.distance * p.normal;
        break;
    case PrimitiveKind::Sphere:
        p.center = euclidean_part(geo::center(j).v);
        p.radius = geo::radius(j).v;
        break;
    }
    return p;
}

inline Multivector project_point(const Multivector& p, const GeometricPrimitive& x)
{
    Multivector pn = normalize_point(p);
    if (x.kind == PrimitiveKind::Point) return normalize_point(x.blade);
    double m = degeneracy_measure(x.blade, x.flat);
    if (m <= kDegeneracyTol) throw DegeneratePrimitive(to_string(x.kind), m);
    Multivector y = inner(pn, x.blade) * inverse(x.blade);
    if (x.flat) return embed_point(extract_point(y));
    PrimitiveParams prm = params(x);
    if (x.kind == PrimitiveKind::PointPair) {
        Eigen::Vector3d q = extract_point(pn);
        const auto& e = prm.endpoints;
        return embed_point((q - e[0]).norm() <= (q - e[1]).norm() ? e[0] : e[1]);
    }
    // the projected dual sphere is centered on the ray from the round's center toward the point
    Eigen::Vector3d v = extract_point(y) - prm.center;
    if (x.kind == PrimitiveKind::Circle) v -= v.dot(prm.normal) * prm.normal;
    if (v.norm() < 1e-12) throw DegeneratePrimitive(to_string(x.kind) + " projection from its axis", v.norm());
    return embed_point(prm.center + prm.radius * v.normalized());
}

inline Multivector meet(const Multivector& a, const Multivector& b) { return undual(dual(a) ^ dual(b)); }

// ---- similarity transformations between primitives ----

struct SimilarityResult {
    MvJet versor;
    bool flipped = false;  // second primitive's orientation was reversed
};

struct SimilarityOptions {
    bool allow_flip = true;
    double antipodal_tol = 1e-12;
};

namespace detail {

// rotor taking unit vector a onto b; flips b when antipodal and allowed
inline MvJet oriented_rotor(const MvJet& a, MvJet& b, bool& flipped, const SimilarityOptions& opt)
{
    double c = scalar_product(a.v, b.v);
    if (1.0 + c < opt.antipodal_tol) {
        if (!opt.allow_flip) throw AntipodalNormals("antipodal orientations");
        b = -b;
        flipped = true;
    }
    return geo::rotor_between(a, b);
}

}  // namespace detail

// Similarity versor V with V X1 V~ proportional to X2. Canonical T R D construction.
inline SimilarityResult similarity_between(PrimitiveKind kind, const MvJet& x1, const MvJet& x2,
                                           const SimilarityOptions& opt = {})
{
    using namespace geo;
    SimilarityResult res;
    MvJet one(Multivector(1.0));
    switch (kind) {
    case PrimitiveKind::Point: {
        res.versor = translator_jet(location(x2) - location(x1));
        break;
    }
    case PrimitiveKind::Sphere: {
        SJet d = radius(x2, "sphere") / radius(x1, "sphere");
        MvJet D = dilator_jet(d);
        MvJet T = translator_jet(center(x2) - center(x1) * d);
        res.versor = T * D;
        break;
    }
    case PrimitiveKind::Circle:
    case PrimitiveKind::PointPair: {
        const char* name = kind == PrimitiveKind::Circle ? "circle" : "pointpair";
        SJet d = radius(x2, name) / radius(x1, name);
        MvJet D = dilator_jet(d);
        MvJet a = kind == PrimitiveKind::Circle ? normal(x1, false) : direction(x1, false);
        MvJet b = kind == PrimitiveKind::Circle ? normal(x2, false) : direction(x2, false);
        MvJet R = detail::oriented_rotor(a, b, res.flipped, opt);
        MvJet c1 = R * (center(x1) * d) * reverse(R);
        c1 = select(c1, {blade::e1, blade::e2, blade::e3});
        MvJet T = translator_jet(center(x2) - c1);
        res.versor = T * R * D;
        break;
    }
    case PrimitiveKind::Plane: {
        MvJet a = normal(x1, true);
        MvJet b = normal(x2, true);
        MvJet R = detail::oriented_rotor(a, b, res.flipped, opt);
        SJet off2 = plane_offset(x2);
        if (res.flipped) off2 = -off2;
        MvJet T = translator_jet(b * (off2 - plane_offset(x1)));
        res.versor = T * R;
        break;
    }
    case PrimitiveKind::Line: {
        MvJet a = direction(x1, true);
        MvJet b = direction(x2, true);
        MvJet R = detail::oriented_rotor(a, b, res.flipped, opt);
        MvJet p1 = R * line_foot(x1) * reverse(R);
        p1 = select(p1, {blade::e1, blade::e2, blade::e3});
        MvJet T = translator_jet(line_foot(x2) - p1);
        res.versor = T * R;
        break;
    }
    }
    return res;
}

inline GroupKind similarity_group(PrimitiveKind k)
{
    switch (k) {
    case PrimitiveKind::Point: return GroupKind::Translation;
    case PrimitiveKind::Line:
    case PrimitiveKind::Plane: return GroupKind::Motor;
    default: return GroupKind::Similarity;
    }
}

inline Versor similarity_between(const GeometricPrimitive& x1, const GeometricPrimitive& x2,
                                 const SimilarityOptions& opt = {}, bool* flipped = nullptr)
{
    if (x1.kind != x2.kind) throw DegenerateInput("similarity_between needs primitives of the same kind");
    for (const auto* x : {&x1, &x2})
        if (x->kind != PrimitiveKind::Point) {
            double m = degeneracy_measure(x->blade, x->flat);
            if (m <= kDegeneracyTol) throw DegeneratePrimitive(to_string(x->kind), m);
        }
    auto r = similarity_between(x1.kind, MvJet(x1.blade), MvJet(x2.blade), opt);
    if (flipped) *flipped = r.flipped;
    return {similarity_group(x1.kind), r.versor.v};
}

}  // namespace coopga
