#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "multivector.hpp"

namespace coopga {

// Columns of d(value)/dq, one multivector per joint.
using MultivectorJacobian = std::vector<Multivector>;

// Scalar with first derivatives. An empty gradient means a constant.
struct SJet {
    double v = 0.0;
    Eigen::VectorXd d;

    SJet() = default;
    SJet(double value) : v(value) {}
    SJet(double value, Eigen::VectorXd grad) : v(value), d(std::move(grad)) {}

    int cols() const { return static_cast<int>(d.size()); }
};

namespace detail {

inline Eigen::VectorXd combine(const Eigen::VectorXd& a, double wa, const Eigen::VectorXd& b, double wb)
{
    if (a.size() == 0 && b.size() == 0) return {};
    if (a.size() == 0) return wb * b;
    if (b.size() == 0) return wa * a;
    return wa * a + wb * b;
}

}  // namespace detail

inline SJet operator+(const SJet& a, const SJet& b) { return {a.v + b.v, detail::combine(a.d, 1.0, b.d, 1.0)}; }
inline SJet operator-(const SJet& a, const SJet& b) { return {a.v - b.v, detail::combine(a.d, 1.0, b.d, -1.0)}; }
inline SJet operator-(const SJet& a) { return {-a.v, detail::combine(a.d, -1.0, {}, 0.0)}; }
inline SJet operator*(const SJet& a, const SJet& b) { return {a.v * b.v, detail::combine(a.d, b.v, b.d, a.v)}; }
inline SJet operator/(const SJet& a, const SJet& b)
{
    return {a.v / b.v, detail::combine(a.d, 1.0 / b.v, b.d, -a.v / (b.v * b.v))};
}

// chain rule for f(a) with f'(a) = df
inline SJet apply_chain(const SJet& a, double f, double df) { return {f, detail::combine(a.d, df, {}, 0.0)}; }

inline SJet sqrt(const SJet& a)
{
    double s = std::sqrt(a.v);
    return apply_chain(a, s, 0.5 / s);
}
inline SJet abs(const SJet& a) { return apply_chain(a, std::abs(a.v), a.v < 0 ? -1.0 : 1.0); }
inline SJet log(const SJet& a) { return apply_chain(a, std::log(a.v), 1.0 / a.v); }
inline SJet exp(const SJet& a)
{
    double e = std::exp(a.v);
    return apply_chain(a, e, e);
}
inline SJet sin(const SJet& a) { return apply_chain(a, std::sin(a.v), std::cos(a.v)); }
inline SJet cos(const SJet& a) { return apply_chain(a, std::cos(a.v), -std::sin(a.v)); }
inline SJet sinh(const SJet& a) { return apply_chain(a, std::sinh(a.v), std::cosh(a.v)); }
inline SJet cosh(const SJet& a) { return apply_chain(a, std::cosh(a.v), std::sinh(a.v)); }
inline SJet atanh(const SJet& a) { return apply_chain(a, std::atanh(a.v), 1.0 / (1.0 - a.v * a.v)); }
inline SJet atan2(const SJet& y, const SJet& x)
{
    double r2 = x.v * x.v + y.v * y.v;
    return {std::atan2(y.v, x.v), detail::combine(y.d, x.v / r2, x.d, -y.v / r2)};
}

// Multivector with first derivatives. An empty column list means a constant.
struct MvJet {
    Multivector v;
    MultivectorJacobian d;

    MvJet() = default;
    MvJet(const Multivector& value) : v(value) {}
    MvJet(const Multivector& value, MultivectorJacobian cols) : v(value), d(std::move(cols)) {}

    int cols() const { return static_cast<int>(d.size()); }

    SJet coeff(int i) const
    {
        SJet s{v.c[i]};
        if (!d.empty()) {
            s.d.resize(cols());
            for (int k = 0; k < cols(); ++k) s.d[k] = d[k].c[i];
        }
        return s;
    }

    SJet scalar() const { return coeff(0); }

    // seed a jet whose k-th column is the k-th unit direction of the given coefficients
    static MvJet variable(const Multivector& value, const std::vector<int>& blades)
    {
        MvJet j(value);
        j.d.resize(blades.size());
        for (std::size_t k = 0; k < blades.size(); ++k) j.d[k].c[blades[k]] = 1.0;
        return j;
    }
};

namespace detail {

template <class Op>
MvJet linear_combine(const MvJet& a, const MvJet& b, Op op)
{
    MvJet r(op(a.v, b.v));
    int n = std::max(a.cols(), b.cols());
    if (n == 0) return r;
    r.d.resize(n);
    Multivector zero;
    for (int k = 0; k < n; ++k) r.d[k] = op(a.d.empty() ? zero : a.d[k], b.d.empty() ? zero : b.d[k]);
    return r;
}

template <class Op>
MvJet bilinear(const MvJet& a, const MvJet& b, Op op)
{
    MvJet r(op(a.v, b.v));
    int n = std::max(a.cols(), b.cols());
    if (n == 0) return r;
    r.d.assign(n, Multivector{});
    for (int k = 0; k < n; ++k) {
        if (!a.d.empty()) r.d[k] += op(a.d[k], b.v);
        if (!b.d.empty()) r.d[k] += op(a.v, b.d[k]);
    }
    return r;
}

// product rule with the nonzero patterns of the values gathered once
inline MvJet bilinear_op(const MvJet& a, const MvJet& b, int op)
{
    int ia[32], ib[32], ic[32];
    int na = nonzeros(a.v, ia), nb = nonzeros(b.v, ib);
    MvJet r;
    accumulate(r.v, a.v, ia, na, b.v, ib, nb, op);
    int n = std::max(a.cols(), b.cols());
    if (n == 0) return r;
    r.d.assign(n, Multivector{});
    for (int k = 0; k < n; ++k) {
        if (!a.d.empty()) {
            int nc = nonzeros(a.d[k], ic);
            accumulate(r.d[k], a.d[k], ic, nc, b.v, ib, nb, op);
        }
        if (!b.d.empty()) {
            int nc = nonzeros(b.d[k], ic);
            accumulate(r.d[k], a.v, ia, na, b.d[k], ic, nc, op);
        }
    }
    return r;
}

template <class Op>
MvJet unary_linear(const MvJet& a, Op op)
{
    MvJet r(op(a.v));
    r.d.reserve(a.d.size());
    for (const auto& c : a.d) r.d.push_back(op(c));
    return r;
}

}  // namespace detail

inline MvJet operator+(const MvJet& a, const MvJet& b)
{
    return detail::linear_combine(a, b, [](const Multivector& x, const Multivector& y) { return x + y; });
}
inline MvJet operator-(const MvJet& a, const MvJet& b)
{
    return detail::linear_combine(a, b, [](const Multivector& x, const Multivector& y) { return x - y; });
}
inline MvJet operator-(const MvJet& a)
{
    return detail::unary_linear(a, [](const Multivector& x) { return -x; });
}
inline MvJet operator*(const MvJet& a, double s)
{
    return detail::unary_linear(a, [s](const Multivector& x) { return x * s; });
}
inline MvJet operator*(double s, const MvJet& a) { return a * s; }

inline MvJet operator*(const MvJet& a, const SJet& s)
{
    MvJet r(a.v * s.v);
    int n = std::max(a.cols(), s.cols());
    if (n == 0) return r;
    r.d.assign(n, Multivector{});
    for (int k = 0; k < n; ++k) {
        if (!a.d.empty()) r.d[k] += a.d[k] * s.v;
        if (s.cols()) r.d[k] += a.v * s.d[k];
    }
    return r;
}
inline MvJet operator*(const SJet& s, const MvJet& a) { return a * s; }

inline MvJet operator*(const MvJet& a, const MvJet& b)
{
    return detail::bilinear_op(a, b, detail::kGeometric);
}
inline MvJet outer(const MvJet& a, const MvJet& b)
{
    return detail::bilinear_op(a, b, detail::kOuter);
}
inline MvJet operator^(const MvJet& a, const MvJet& b) { return outer(a, b); }
inline MvJet inner(const MvJet& a, const MvJet& b)
{
    return detail::bilinear_op(a, b, detail::kLeftContraction);
}
inline SJet scalar_product(const MvJet& a, const MvJet& b) { return (a * b).scalar(); }

inline MvJet reverse(const MvJet& a)
{
    return detail::unary_linear(a, [](const Multivector& x) { return reverse(x); });
}
inline MvJet grade(const MvJet& a, int g)
{
    return detail::unary_linear(a, [g](const Multivector& x) { return grade(x, g); });
}
inline MvJet dual(const MvJet& a)
{
    return detail::unary_linear(a, [](const Multivector& x) { return dual(x); });
}
inline MvJet undual(const MvJet& a)
{
    return detail::unary_linear(a, [](const Multivector& x) { return undual(x); });
}

// keep only the listed coefficients
inline MvJet select(const MvJet& a, std::initializer_list<int> blades)
{
    return detail::unary_linear(a, [&](const Multivector& x) {
        Multivector r;
        for (int b : blades) r.c[b] = x.c[b];
        return r;
    });
}

inline MvJet normalize(const MvJet& x)
{
    SJet s = (x * reverse(x)).scalar();
    if (std::abs(s.v) < 1e-14) throw DegenerateInput("cannot normalize a null element");
    return x * (SJet(1.0) / sqrt(abs(s)));
}

inline MvJet inverse(const MvJet& x)
{
    SJet s = (x * reverse(x)).scalar();
    if (std::abs(s.v) < 1e-14) throw DegenerateInput("cannot invert a null element");
    return reverse(x) * (SJet(1.0) / s);
}

// Closed-form derivatives of normalize and inverse for an element with X X~ scalar.
inline MultivectorJacobian jacobian_normalize(const Multivector& x, const MultivectorJacobian& jx)
{
    double s = (x * reverse(x)).c[0];
    if (std::abs(s) < 1e-14) throw DegenerateInput("cannot normalize a null element");
    double a = std::abs(s);
    double sg = s < 0 ? -1.0 : 1.0;
    MultivectorJacobian out;
    out.reserve(jx.size());
    for (const auto& j : jx) {
        double ds = (j * reverse(x) + x * reverse(j)).c[0];
        out.push_back(j * std::pow(a, -0.5) - x * (0.5 * sg * std::pow(a, -1.5) * ds));
    }
    return out;
}

inline MultivectorJacobian jacobian_inverse(const Multivector& x, const MultivectorJacobian& jx)
{
    double s = (x * reverse(x)).c[0];
    if (std::abs(s) < 1e-14) throw DegenerateInput("cannot invert a null element");
    Multivector xr = reverse(x);
    MultivectorJacobian out;
    out.reserve(jx.size());
    for (const auto& j : jx) {
        double xj = (x * reverse(j)).c[0];
        out.push_back(reverse(j) * (1.0 / s) - xr * (2.0 * xj / (s * s)));
    }
    return out;
}

inline Eigen::MatrixXd to_matrix(const MultivectorJacobian& j)
{
    Eigen::MatrixXd m(32, static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k)
        for (int i = 0; i < 32; ++i) m(i, static_cast<Eigen::Index>(k)) = j[k].c[i];
    return m;
}

}  // namespace coopga
