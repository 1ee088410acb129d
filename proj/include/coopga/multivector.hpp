#pragma once

#include <array>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace coopga {

// Null basis of R(4,1): e0 (origin), e1, e2, e3, einf (infinity).
// Bit i of a blade mask selects basis vector i in the order (e0, e1, e2, e3, einf).
namespace basis {

inline constexpr int kBlades = 32;

struct Term {
    int blade;
    double coeff;
};

struct Tables {
    std::array<int, 32> mask_of{};   // blade index -> bit mask
    std::array<int, 32> index_of{};  // bit mask -> blade index
    std::array<int, 32> grade{};
    // geometric product of blades i, j as a short list of terms
    std::array<std::array<std::array<Term, 4>, 32>, 32> gp{};
    std::array<std::array<int, 32>, 32> gp_n{};
    std::array<std::string, 32> name{};
    // the same terms filtered per product: geometric, outer, left and right contraction
    struct OpTable {
        std::array<std::array<std::array<Term, 4>, 32>, 32> term{};
        std::array<std::array<int, 32>, 32> n{};
    };
    std::array<OpTable, 4> op{};
};

namespace detail {

inline int reorder_sign(int a, int b)
{
    // sign of moving the vectors of b past those of a to canonical order
    int s = 0;
    a >>= 1;
    while (a) {
        s += std::popcount(static_cast<unsigned>(a & b));
        a >>= 1;
    }
    return (s & 1) ? -1 : 1;
}

using Sparse = std::vector<std::pair<int, double>>;

inline void add(Sparse& s, int m, double c)
{
    for (auto& [k, v] : s)
        if (k == m) {
            v += c;
            return;
        }
    s.emplace_back(m, c);
}

// orthonormal basis o0..o4 = e1, e2, e3, e+, e- with metric (+,+,+,+,-)
inline double ortho_metric(int m)
{
    return (m & 16) ? -1.0 : 1.0;
}

// null vector k -> combination of orthonormal vectors
inline Sparse null_vec_to_ortho(int k)
{
    switch (k) {
    case 0: return {{1 << 4, 0.5}, {1 << 3, -0.5}};
    case 1: return {{1 << 0, 1.0}};
    case 2: return {{1 << 1, 1.0}};
    case 3: return {{1 << 2, 1.0}};
    default: return {{1 << 3, 1.0}, {1 << 4, 1.0}};
    }
}

inline Sparse ortho_vec_to_null(int k)
{
    switch (k) {
    case 0: return {{1 << 1, 1.0}};
    case 1: return {{1 << 2, 1.0}};
    case 2: return {{1 << 3, 1.0}};
    case 3: return {{1 << 4, 0.5}, {1 << 0, -1.0}};
    default: return {{1 << 0, 1.0}, {1 << 4, 0.5}};
    }
}

// wedge a blade of orthogonal-or-null vectors built vector by vector
template <class VecMap>
Sparse wedge_expand(int mask, VecMap vec)
{
    Sparse acc{{0, 1.0}};
    for (int k = 0; k < 5; ++k) {
        if (!(mask & (1 << k))) continue;
        Sparse next;
        for (auto [m, c] : acc)
            for (auto [v, vc] : vec(k)) {
                if (m & v) continue;
                add(next, m | v, c * vc * reorder_sign(m, v));
            }
        acc = std::move(next);
    }
    return acc;
}

inline Tables build()
{
    Tables t;
    int n = 0;
    for (int g = 0; g <= 5; ++g) {
        std::vector<int> masks;
        for (int m = 0; m < 32; ++m)
            if (std::popcount(static_cast<unsigned>(m)) == g) masks.push_back(m);
        // lexicographic over the ordered index tuples
        std::sort(masks.begin(), masks.end(), [](int a, int b) {
            for (int k = 0; k < 5; ++k) {
                bool ia = a & (1 << k), ib = b & (1 << k);
                if (ia != ib) return ia;
            }
            return false;
        });
        for (int m : masks) {
            t.mask_of[n] = m;
            t.index_of[m] = n;
            t.grade[n] = g;
            std::string s = g == 0 ? "1" : "e";
            const char* nm[5] = {"0", "1", "2", "3", "inf"};
            for (int k = 0; k < 5; ++k)
                if (m & (1 << k)) s += nm[k];
            t.name[n] = s;
            ++n;
        }
    }
    std::array<Sparse, 32> to_ortho;
    for (int m = 0; m < 32; ++m) to_ortho[m] = wedge_expand(m, null_vec_to_ortho);
    std::array<Sparse, 32> to_null;
    for (int m = 0; m < 32; ++m) to_null[m] = wedge_expand(m, ortho_vec_to_null);

    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            int mi = t.mask_of[i], mj = t.mask_of[j];
            Sparse ortho;
            for (auto [a, ca] : to_ortho[mi])
                for (auto [b, cb] : to_ortho[mj]) {
                    double c = ca * cb * reorder_sign(a, b);
                    int common = a & b;
                    for (int k = 0; k < 5; ++k)
                        if (common & (1 << k)) c *= ortho_metric(1 << k);
                    add(ortho, a ^ b, c);
                }
            Sparse res;
            for (auto [o, co] : ortho) {
                if (co == 0.0) continue;
                for (auto [m, cm] : to_null[o]) add(res, m, co * cm);
            }
            int cnt = 0;
            for (auto [m, c] : res) {
                if (c == 0.0) continue;
                if (cnt == 4) throw std::logic_error("product table overflow");
                t.gp[i][j][cnt++] = Term{t.index_of[m], c};
            }
            t.gp_n[i][j] = cnt;
        }
    for (int o = 0; o < 4; ++o)
        for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j) {
                int gi = t.grade[i], gj = t.grade[j], cnt = 0;
                for (int k = 0; k < t.gp_n[i][j]; ++k) {
                    const Term& term = t.gp[i][j][k];
                    int g = t.grade[term.blade];
                    bool keep = o == 0 || (o == 1 && g == gi + gj) || (o == 2 && gj >= gi && g == gj - gi) ||
                                (o == 3 && gi >= gj && g == gi - gj);
                    if (keep) t.op[o].term[i][j][cnt++] = term;
                }
                t.op[o].n[i][j] = cnt;
            }
    return t;
}

}  // namespace detail

inline const Tables& tables()
{
    static const Tables t = detail::build();
    return t;
}

inline constexpr int grade_start[7] = {0, 1, 6, 16, 26, 31, 32};

}  // namespace basis

// named blade indices
namespace blade {
inline constexpr int s = 0;
inline constexpr int e0 = 1, e1 = 2, e2 = 3, e3 = 4, einf = 5;
inline constexpr int e01 = 6, e02 = 7, e03 = 8, e0inf = 9, e12 = 10, e13 = 11, e1inf = 12, e23 = 13,
                     e2inf = 14, e3inf = 15;
inline constexpr int e012 = 16, e013 = 17, e01inf = 18, e023 = 19, e02inf = 20, e03inf = 21, e123 = 22,
                     e12inf = 23, e13inf = 24, e23inf = 25;
inline constexpr int e0123 = 26, e012inf = 27, e013inf = 28, e023inf = 29, e123inf = 30;
inline constexpr int e0123inf = 31;

inline constexpr const char* names[32] = {
    "1",      "e0",      "e1",      "e2",      "e3",      "einf",    "e01",     "e02",
    "e03",    "e0inf",   "e12",     "e13",     "e1inf",   "e23",     "e2inf",   "e3inf",
    "e012",   "e013",    "e01inf",  "e023",    "e02inf",  "e03inf",  "e123",    "e12inf",
    "e13inf", "e23inf",  "e0123",   "e012inf", "e013inf", "e023inf", "e123inf", "e0123inf"};

inline int from_name(const std::string& n)
{
    for (int i = 0; i < 32; ++i)
        if (n == names[i]) return i;
    return -1;
}
}  // namespace blade

class Multivector {
public:
    std::array<double, 32> c{};

    Multivector() = default;
    explicit Multivector(double s) { c[0] = s; }

    static Multivector basis_blade(int index, double value = 1.0)
    {
        Multivector m;
        m.c[index] = value;
        return m;
    }

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }

    double scalar() const { return c[0]; }

    Multivector& operator+=(const Multivector& o)
    {
        for (int i = 0; i < 32; ++i) c[i] += o.c[i];
        return *this;
    }
    Multivector& operator-=(const Multivector& o)
    {
        for (int i = 0; i < 32; ++i) c[i] -= o.c[i];
        return *this;
    }
    Multivector& operator*=(double s)
    {
        for (double& v : c) v *= s;
        return *this;
    }

    friend Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
    friend Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
    friend Multivector operator-(Multivector a)
    {
        for (double& v : a.c) v = -v;
        return a;
    }
    friend Multivector operator*(Multivector a, double s) { return a *= s; }
    friend Multivector operator*(double s, Multivector a) { return a *= s; }
    friend Multivector operator/(Multivector a, double s) { return a *= 1.0 / s; }

    double norm_inf() const
    {
        double m = 0.0;
        for (double v : c) m = std::max(m, std::abs(v));
        return m;
    }
    double coeff_norm() const
    {
        double s = 0.0;
        for (double v : c) s += v * v;
        return std::sqrt(s);
    }

    bool is_zero(double tol = 0.0) const { return norm_inf() <= tol; }
};

namespace detail {

enum ProductOp { kGeometric = 0, kOuter = 1, kLeftContraction = 2, kRightContraction = 3 };

inline int nonzeros(const Multivector& a, int* idx)
{
    int n = 0;
    for (int i = 0; i < 32; ++i)
        if (a.c[i] != 0.0) idx[n++] = i;
    return n;
}

inline void accumulate(Multivector& r, const Multivector& a, const int* ia, int na, const Multivector& b,
                       const int* ib, int nb, int op)
{
    const auto& t = basis::tables().op[op];
    for (int x = 0; x < na; ++x) {
        int i = ia[x];
        double ai = a.c[i];
        for (int y = 0; y < nb; ++y) {
            int j = ib[y];
            double abij = ai * b.c[j];
            int n = t.n[i][j];
            for (int k = 0; k < n; ++k) {
                const auto& term = t.term[i][j][k];
                r.c[term.blade] += abij * term.coeff;
            }
        }
    }
}

inline Multivector product(const Multivector& a, const Multivector& b, int op)
{
    int ia[32], ib[32];
    int na = nonzeros(a, ia);
    int nb = nonzeros(b, ib);
    Multivector r;
    accumulate(r, a, ia, na, b, ib, nb, op);
    return r;
}

}  // namespace detail

inline Multivector operator*(const Multivector& a, const Multivector& b)
{
    return detail::product(a, b, detail::kGeometric);
}

inline Multivector outer(const Multivector& a, const Multivector& b)
{
    return detail::product(a, b, detail::kOuter);
}

inline Multivector operator^(const Multivector& a, const Multivector& b) { return outer(a, b); }

// left contraction a _| b
inline Multivector inner(const Multivector& a, const Multivector& b)
{
    return detail::product(a, b, detail::kLeftContraction);
}

inline Multivector left_contract(const Multivector& a, const Multivector& b) { return inner(a, b); }

// right contraction a |_ b
inline Multivector right_contract(const Multivector& a, const Multivector& b)
{
    return detail::product(a, b, detail::kRightContraction);
}

inline double scalar_product(const Multivector& a, const Multivector& b)
{
    const auto& t = basis::tables().op[detail::kGeometric];
    double r = 0.0;
    for (int i = 0; i < 32; ++i) {
        if (a.c[i] == 0.0) continue;
        for (int j = 0; j < 32; ++j) {
            if (b.c[j] == 0.0) continue;
            for (int k = 0; k < t.n[i][j]; ++k)
                if (t.term[i][j][k].blade == 0) r += a.c[i] * b.c[j] * t.term[i][j][k].coeff;
        }
    }
    return r;
}

inline Multivector grade(const Multivector& a, int g)
{
    Multivector r;
    if (g < 0 || g > 5) return r;
    for (int i = basis::grade_start[g]; i < basis::grade_start[g + 1]; ++i) r.c[i] = a.c[i];
    return r;
}

inline Multivector reverse(Multivector a)
{
    for (int i = 0; i < 32; ++i) {
        int g = basis::tables().grade[i];
        if (g == 2 || g == 3) a.c[i] = -a.c[i];
    }
    return a;
}

inline Multivector involute(Multivector a)
{
    for (int i = 0; i < 32; ++i)
        if (basis::tables().grade[i] & 1) a.c[i] = -a.c[i];
    return a;
}

inline const Multivector& pseudoscalar()
{
    static const Multivector I = Multivector::basis_blade(blade::e0123inf);
    return I;
}

inline Multivector dual(const Multivector& a) { return a * pseudoscalar(); }
inline Multivector undual(const Multivector& a) { return -(a * pseudoscalar()); }

inline Multivector e0() { return Multivector::basis_blade(blade::e0); }
inline Multivector e1() { return Multivector::basis_blade(blade::e1); }
inline Multivector e2() { return Multivector::basis_blade(blade::e2); }
inline Multivector e3() { return Multivector::basis_blade(blade::e3); }
inline Multivector einf() { return Multivector::basis_blade(blade::einf); }

inline Multivector euclidean_vector(const Eigen::Vector3d& x)
{
    Multivector m;
    m.c[blade::e1] = x.x();
    m.c[blade::e2] = x.y();
    m.c[blade::e3] = x.z();
    return m;
}

inline Eigen::Vector3d euclidean_part(const Multivector& m)
{
    return {m.c[blade::e1], m.c[blade::e2], m.c[blade::e3]};
}

// conformal point x + 1/2 x^2 einf + e0
inline Multivector embed_point(const Eigen::Vector3d& x)
{
    Multivector m = euclidean_vector(x);
    m.c[blade::e0] = 1.0;
    m.c[blade::einf] = 0.5 * x.squaredNorm();
    return m;
}

inline Eigen::Vector3d extract_point(const Multivector& p)
{
    double w = -scalar_product(p, einf());
    if (std::abs(w) < 1e-14) throw DegenerateInput("point at infinity has no Euclidean location");
    return euclidean_part(p) / w;
}

// X X~ for versors and blades is a scalar; normalization divides by the root of its magnitude
inline Multivector normalize(const Multivector& x)
{
    double s = (x * reverse(x)).c[0];
    if (std::abs(s) < 1e-14) throw DegenerateInput("cannot normalize a null element");
    return x * (1.0 / std::sqrt(std::abs(s)));
}

inline Multivector inverse(const Multivector& x)
{
    double s = (x * reverse(x)).c[0];
    if (std::abs(s) < 1e-14) throw DegenerateInput("cannot invert a null element");
    return reverse(x) * (1.0 / s);
}

inline std::string to_string(const Multivector& m, double tol = 0.0)
{
    std::string out;
    for (int i = 0; i < 32; ++i) {
        if (std::abs(m.c[i]) <= tol) continue;
        if (!out.empty()) out += " + ";
        out += std::to_string(m.c[i]) + "*" + basis::tables().name[i];
    }
    return out.empty() ? "0" : out;
}

}  // namespace coopga
