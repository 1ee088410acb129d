#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "jet.hpp"

namespace coopga {

enum class GroupKind { Rotation, Translation, Dilation, Motor, Similarity };

inline std::string to_string(GroupKind k)
{
    switch (k) {
    case GroupKind::Rotation: return "R";
    case GroupKind::Translation: return "T";
    case GroupKind::Dilation: return "D";
    case GroupKind::Motor: return "M";
    default: return "S";
    }
}

using Vector7d = Eigen::Matrix<double, 7, 1>;
using Matrix7d = Eigen::Matrix<double, 7, 7>;

// Coordinate rows of the similarity bivector space.
namespace row {
inline constexpr int e23 = 0, e13 = 1, e12 = 2, e0inf = 3, e1inf = 4, e2inf = 5, e3inf = 6;
inline constexpr const char* names[7] = {"e23", "e13", "e12", "e0inf", "e1inf", "e2inf", "e3inf"};
}  // namespace row

// Which of the seven rows a group kind uses.
inline std::array<bool, 7> group_rows(GroupKind k)
{
    switch (k) {
    case GroupKind::Rotation: return {true, true, true, false, false, false, false};
    case GroupKind::Translation: return {false, false, false, false, true, true, true};
    case GroupKind::Dilation: return {false, false, false, true, false, false, false};
    case GroupKind::Motor: return {true, true, true, false, true, true, true};
    default: return {true, true, true, true, true, true, true};
    }
}

struct GroupBivector {
    GroupKind kind = GroupKind::Similarity;
    Vector7d coords = Vector7d::Zero();

    GroupBivector() = default;
    GroupBivector(GroupKind k, const Vector7d& c) : kind(k), coords(c)
    {
        auto rows = group_rows(k);
        for (int i = 0; i < 7; ++i)
            if (!rows[i]) coords[i] = 0.0;
    }

    static GroupBivector rotation(const Eigen::Vector3d& b23_13_12)
    {
        Vector7d c = Vector7d::Zero();
        c.head<3>() = b23_13_12;
        return {GroupKind::Rotation, c};
    }
    static GroupBivector translation(const Eigen::Vector3d& t)
    {
        Vector7d c = Vector7d::Zero();
        c.tail<3>() = t;
        return {GroupKind::Translation, c};
    }
    // beta = ln(d); d > 1 enlarges
    static GroupBivector dilation(double beta)
    {
        Vector7d c = Vector7d::Zero();
        c[row::e0inf] = beta;
        return {GroupKind::Dilation, c};
    }
};

// The dilation row is carried by the generator einf^e0 = -e0inf, so that a
// positive coordinate enlarges and exp(B) ~ 1 - B/2 holds on every row.
inline Multivector to_multivector(const Vector7d& b)
{
    Multivector m;
    m.c[blade::e23] = b[row::e23];
    m.c[blade::e13] = b[row::e13];
    m.c[blade::e12] = b[row::e12];
    m.c[blade::e0inf] = -b[row::e0inf];
    m.c[blade::e1inf] = b[row::e1inf];
    m.c[blade::e2inf] = b[row::e2inf];
    m.c[blade::e3inf] = b[row::e3inf];
    return m;
}

inline Vector7d to_coords(const Multivector& m)
{
    Vector7d b;
    b << m.c[blade::e23], m.c[blade::e13], m.c[blade::e12], -m.c[blade::e0inf], m.c[blade::e1inf],
        m.c[blade::e2inf], m.c[blade::e3inf];
    return b;
}

inline Eigen::Matrix<double, 7, Eigen::Dynamic> to_coords(const MultivectorJacobian& j)
{
    Eigen::Matrix<double, 7, Eigen::Dynamic> m(7, static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = to_coords(j[k]);
    return m;
}

inline Multivector to_multivector(const GroupBivector& b) { return to_multivector(b.coords); }

struct Versor {
    GroupKind kind = GroupKind::Similarity;
    Multivector value{1.0};
    int compositions = 0;

    Versor() = default;
    Versor(GroupKind k, const Multivector& v) : kind(k), value(v) {}

    static Versor identity(GroupKind k = GroupKind::Similarity) { return {k, Multivector(1.0)}; }
};

inline GroupKind join(GroupKind a, GroupKind b)
{
    if (a == b) return a;
    auto rows_a = group_rows(a), rows_b = group_rows(b);
    bool dil = rows_a[3] || rows_b[3];
    bool rot = rows_a[0] || rows_b[0];
    bool tr = rows_a[4] || rows_b[4];
    if (dil && (rot || tr)) return GroupKind::Similarity;
    if (dil) return GroupKind::Dilation;
    return GroupKind::Motor;
}

inline constexpr int kRenormalizeEvery = 16;

inline Versor compose(const Versor& a, const Versor& b)
{
    Versor r(join(a.kind, b.kind), a.value * b.value);
    r.compositions = a.compositions + b.compositions + 1;
    if (r.compositions >= kRenormalizeEvery) {
        r.value = normalize(r.value);
        r.compositions = 0;
    }
    return r;
}

inline Versor operator*(const Versor& a, const Versor& b) { return compose(a, b); }

inline Versor reverse(const Versor& v) { return {v.kind, reverse(v.value)}; }

inline Multivector apply_versor(const Multivector& v, const Multivector& x) { return v * x * reverse(v); }
inline Multivector apply_versor(const Versor& v, const Multivector& x) { return apply_versor(v.value, x); }

inline double versor_constraint_error(const Multivector& v)
{
    Multivector e = v * reverse(v) - Multivector(1.0);
    return e.norm_inf();
}

// Blades spanned by each group, scalar included.
inline std::vector<int> group_span(GroupKind k)
{
    using namespace blade;
    switch (k) {
    case GroupKind::Rotation: return {s, e23, e13, e12};
    case GroupKind::Translation: return {s, e1inf, e2inf, e3inf};
    case GroupKind::Dilation: return {s, e0inf};
    case GroupKind::Motor: return {s, e23, e13, e12, e1inf, e2inf, e3inf, e123inf};
    default: return {s, e23, e13, e12, e0inf, e1inf, e2inf, e3inf, e012inf, e013inf, e023inf, e123inf};
    }
}

inline double outside_span(const Multivector& v, GroupKind k)
{
    std::array<bool, 32> in{};
    for (int b : group_span(k)) in[b] = true;
    double m = 0.0;
    for (int i = 0; i < 32; ++i)
        if (!in[i]) m = std::max(m, std::abs(v.c[i]));
    return m;
}

inline bool in_subgroup(const Multivector& v, GroupKind k, double tol = 1e-10)
{
    return outside_span(v, k) <= tol && versor_constraint_error(v) <= tol;
}

// ---- exponential maps ----

inline Multivector exp_rotor(const Eigen::Vector3d& b)
{
    double n = b.norm();
    Multivector r(std::cos(0.5 * n));
    if (n == 0.0) return r;
    double k = -std::sin(0.5 * n) / n;
    r.c[blade::e23] = k * b[0];
    r.c[blade::e13] = k * b[1];
    r.c[blade::e12] = k * b[2];
    return r;
}

inline Multivector exp_translator(const Eigen::Vector3d& t)
{
    Multivector r(1.0);
    r.c[blade::e1inf] = -0.5 * t[0];
    r.c[blade::e2inf] = -0.5 * t[1];
    r.c[blade::e3inf] = -0.5 * t[2];
    return r;
}

inline Multivector exp_dilator(double beta)
{
    Multivector r(std::cosh(0.5 * beta));
    r.c[blade::e0inf] = std::sinh(0.5 * beta);
    return r;
}

inline Multivector translator(const Eigen::Vector3d& t) { return exp_translator(t); }
inline Multivector dilator(double scale) { return exp_dilator(std::log(scale)); }

// rotation by angle about a unit axis (right-handed)
inline Multivector rotor(const Eigen::Vector3d& axis, double angle)
{
    Eigen::Vector3d a = axis.normalized() * angle;
    // the e23 plane is the rotation about e1, e31 = -e13 about e2, e12 about e3
    return exp_rotor(Eigen::Vector3d(a.x(), -a.y(), a.z()));
}

inline Versor exp_versor(const GroupBivector& b)
{
    const Vector7d& c = b.coords;
    Multivector R = exp_rotor(c.head<3>());
    Multivector T = exp_translator(c.tail<3>());
    Multivector D = exp_dilator(c[row::e0inf]);
    switch (b.kind) {
    case GroupKind::Rotation: return {b.kind, R};
    case GroupKind::Translation: return {b.kind, T};
    case GroupKind::Dilation: return {b.kind, D};
    case GroupKind::Motor: return {b.kind, T * R};
    default: return {b.kind, T * R * D};
    }
}

// ---- logarithms and decomposition, written on jets so derivatives come for free ----

inline constexpr double kRotationSingularityTol = 1e-9;

inline void log_rotor_coords(const MvJet& r, std::array<SJet, 3>& out)
{
    SJet r0 = r.scalar();
    SJet b[3] = {r.coeff(blade::e23), r.coeff(blade::e13), r.coeff(blade::e12)};
    SJet s2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
    double s = std::sqrt(s2.v);
    if (r0.v <= -1.0 + kRotationSingularityTol)
        throw RotationSingularity("rotor log undefined at a full turn (scalar part " + std::to_string(r0.v) + ")");
    if (s < 1e-12 && std::abs(r0.v - 1.0) < 1e-12 && r.cols() == 0) {
        out = {SJet(0.0), SJet(0.0), SJet(0.0)};
        return;
    }
    SJet factor;
    if (s < 1e-6) {
        // atan2(s, c)/s = (1/c)(1 - s^2/(3c^2)) + O(s^4)
        SJet inv = SJet(1.0) / r0;
        factor = inv * (SJet(1.0) - s2 * inv * inv * SJet(1.0 / 3.0));
    } else {
        SJet sj = sqrt(s2);
        factor = atan2(sj, r0) / sj;
    }
    for (int i = 0; i < 3; ++i) out[i] = SJet(-2.0) * factor * b[i];
}

inline SJet log_dilator_coord(const MvJet& d)
{
    SJet d0 = d.scalar();
    SJet d1 = d.coeff(blade::e0inf);
    if (d0.v <= 0.0 || std::abs(d1.v) >= std::abs(d0.v)) throw DegenerateInput("invalid dilator");
    return SJet(2.0) * atanh(d1 / d0);
}

inline std::array<SJet, 3> log_translator_coords(const MvJet& t)
{
    SJet w = t.scalar();
    return {SJet(-2.0) * t.coeff(blade::e1inf) / w, SJet(-2.0) * t.coeff(blade::e2inf) / w,
            SJet(-2.0) * t.coeff(blade::e3inf) / w};
}

struct SimilarityFactors {
    MvJet T, R, D;
};

// V = T R D with T a unit translator, R a unit rotor and D a dilator with positive scalar part.
inline SimilarityFactors decompose(const MvJet& v)
{
    MvJet c = v * MvJet(e0()) * reverse(v);
    SJet w = c.coeff(blade::e0);
    if (std::abs(w.v) < 1e-14) throw DegenerateInput("versor maps the origin to infinity");
    SJet inv_w = SJet(1.0) / w;
    MvJet t = select(c, {blade::e1, blade::e2, blade::e3}) * inv_w;
    MvJet T = MvJet(Multivector(1.0)) - (t ^ MvJet(einf())) * 0.5;
    MvJet rd = reverse(T) * v;
    MvJet r_part = select(rd, {blade::s, blade::e23, blade::e13, blade::e12});
    MvJet R = normalize(r_part);
    MvJet D = reverse(R) * rd;
    return {T, R, D};
}

inline std::array<Versor, 3> decompose_similarity(const Versor& v)
{
    auto f = decompose(MvJet(v.value));
    return {Versor(GroupKind::Translation, f.T.v), Versor(GroupKind::Rotation, f.R.v),
            Versor(GroupKind::Dilation, f.D.v)};
}

// similarity log coordinates (rotation, dilation, translation) with derivatives
inline std::array<SJet, 7> log_coords(const MvJet& v)
{
    auto f = decompose(v);
    std::array<SJet, 3> rot;
    log_rotor_coords(f.R, rot);
    SJet dil = log_dilator_coord(f.D);
    auto tr = log_translator_coords(f.T);
    return {rot[0], rot[1], rot[2], dil, tr[0], tr[1], tr[2]};
}

inline GroupBivector log_versor(const Versor& v)
{
    Vector7d c = Vector7d::Zero();
    MvJet x(v.value);
    switch (v.kind) {
    case GroupKind::Rotation: {
        std::array<SJet, 3> rot;
        log_rotor_coords(x, rot);
        for (int i = 0; i < 3; ++i) c[i] = rot[i].v;
        break;
    }
    case GroupKind::Translation: {
        auto tr = log_translator_coords(x);
        for (int i = 0; i < 3; ++i) c[4 + i] = tr[i].v;
        break;
    }
    case GroupKind::Dilation: c[row::e0inf] = log_dilator_coord(x).v; break;
    default: {
        auto all = log_coords(x);
        for (int i = 0; i < 7; ++i) c[i] = all[i].v;
    }
    }
    return {v.kind, c};
}

inline Vector7d log_coords(const Multivector& v)
{
    auto all = log_coords(MvJet(v));
    Vector7d c;
    for (int i = 0; i < 7; ++i) c[i] = all[i].v;
    return c;
}

// Sign representative with non-negative rotor scalar part, so that error logs
// take the short way round.
inline Multivector shortest(const Multivector& v)
{
    auto f = decompose(MvJet(v));
    return f.R.v.c[0] < 0.0 ? -v : v;
}

inline MvJet shortest(const MvJet& v)
{
    auto f = decompose(MvJet(v.v));
    return f.R.v.c[0] < 0.0 ? -v : v;
}

}  // namespace coopga
