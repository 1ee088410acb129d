#pragma once

#include <map>
#include <optional>

#include "chain.hpp"
#include "linalg.hpp"
#include "primitive.hpp"

namespace coopga {

using Matrix7Xd = Eigen::Matrix<double, 7, Eigen::Dynamic>;

// Several chains sharing a world frame. Joints with the same name in different
// chains are one physical joint and share a slot of the stacked joint vector.
class CooperativeSystem {
public:
    std::string name;
    PrimitiveKind kind = PrimitiveKind::Point;
    std::vector<KinematicChain> chains;
    std::vector<std::vector<int>> index;  // chain joint -> stacked slot
    std::vector<std::string> joint_names;
    Eigen::VectorXd nominal;  // default configuration

    CooperativeSystem() = default;

    CooperativeSystem(std::string n, PrimitiveKind k, std::vector<KinematicChain> c) : name(std::move(n)), kind(k)
    {
        for (auto& ch : c) add_chain(std::move(ch));
        validate();
    }

    void add_chain(KinematicChain c)
    {
        std::vector<int> idx;
        for (const auto& j : c.joints) {
            auto it = std::find(joint_names.begin(), joint_names.end(), j.name);
            if (it != joint_names.end() && !j.name.empty()) {
                idx.push_back(static_cast<int>(it - joint_names.begin()));
            } else {
                idx.push_back(static_cast<int>(joint_names.size()));
                joint_names.push_back(j.name);
            }
        }
        index.push_back(std::move(idx));
        chains.push_back(std::move(c));
        nominal = Eigen::VectorXd::Zero(dof());
    }

    void validate() const
    {
        int n = static_cast<int>(chains.size());
        if (n < 1 || n > 4) throw ConfigError("a cooperative system has one to four chains");
        if (point_count(kind) != n)
            throw ConfigError(to_string(kind) + " needs " + std::to_string(point_count(kind)) + " chains, got " +
                              std::to_string(n));
        // shared joints must agree in every chain that uses them
        std::map<int, std::pair<int, int>> seen;
        for (int c = 0; c < n; ++c)
            for (int j = 0; j < chains[c].dof(); ++j) {
                int g = index[c][j];
                auto it = seen.find(g);
                if (it == seen.end()) {
                    seen[g] = {c, j};
                    continue;
                }
                const auto& other = chains[it->second.first];
                if ((other.joints[it->second.second].axis - chains[c].joints[j].axis).norm() > 1e-12 ||
                    (other.base - chains[c].base).norm_inf() > 1e-12)
                    throw ConfigError("shared joint '" + chains[c].joints[j].name + "' differs between chains");
            }
    }

    int dof() const { return static_cast<int>(joint_names.size()); }
    int chain_count() const { return static_cast<int>(chains.size()); }

    Eigen::VectorXd slice(const Eigen::VectorXd& q, int c) const
    {
        if (q.size() != dof()) throw DegenerateInput("joint vector has wrong size");
        Eigen::VectorXd s(chains[c].dof());
        for (int j = 0; j < chains[c].dof(); ++j) s[j] = q[index[c][j]];
        return s;
    }

    std::vector<Eigen::Vector3d> end_effector_positions(const Eigen::VectorXd& q) const
    {
        std::vector<Eigen::Vector3d> out;
        for (int c = 0; c < chain_count(); ++c)
            out.push_back(extract_point(chains[c].end_effector_point(slice(q, c))));
        return out;
    }
};

// Orientation memory along a trajectory: the previous normal (circle/plane) or
// direction (pointpair/line), used to keep the primitive's sign continuous.
struct OrientationContext {
    std::optional<Eigen::Vector3d> previous;
    bool flipped = false;
};

inline bool has_orientation(PrimitiveKind k)
{
    return k == PrimitiveKind::Circle || k == PrimitiveKind::Plane || k == PrimitiveKind::PointPair ||
           k == PrimitiveKind::Line;
}

inline Eigen::Vector3d orientation_vector(PrimitiveKind k, const Multivector& x)
{
    MvJet j(x);
    switch (k) {
    case PrimitiveKind::Circle: return euclidean_part(geo::normal(j, false).v);
    case PrimitiveKind::Plane: return euclidean_part(geo::normal(j, true).v);
    case PrimitiveKind::PointPair: return euclidean_part(geo::direction(j, false).v);
    case PrimitiveKind::Line: return euclidean_part(geo::direction(j, true).v);
    default: return Eigen::Vector3d::Zero();
    }
}

// X_c with derivative columns over the stacked joint vector
inline MvJet cooperative_primitive_jet(const CooperativeSystem& sys, const Eigen::VectorXd& q, bool with_jacobian = true)
{
    int m = sys.dof();
    std::vector<MvJet> points;
    for (int c = 0; c < sys.chain_count(); ++c) {
        Eigen::VectorXd qc = sys.slice(q, c);
        MvJet mc = with_jacobian ? sys.chains[c].forward_kinematics_jet(qc, sys.index[c], m)
                                 : MvJet(sys.chains[c].forward_kinematics(qc));
        points.push_back(mc * MvJet(e0()) * reverse(mc));
    }
    return wedge_points(points, is_flat(sys.kind));
}

// X_c with one derivative column, the rate along joint velocity qd
inline MvJet cooperative_primitive_directional(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                               const Eigen::VectorXd& qd)
{
    std::vector<MvJet> points;
    for (int c = 0; c < sys.chain_count(); ++c) {
        Eigen::VectorXd qc = sys.slice(q, c);
        auto cols = sys.chains[c].analytic_jacobian(qc);
        Multivector rate;
        for (int j = 0; j < sys.chains[c].dof(); ++j) rate += cols[j] * qd[sys.index[c][j]];
        MvJet mc(sys.chains[c].forward_kinematics(qc), {rate});
        points.push_back(mc * MvJet(e0()) * reverse(mc));
    }
    return wedge_points(points, is_flat(sys.kind));
}

inline void check_degeneracy(PrimitiveKind k, const Multivector& x)
{
    if (k == PrimitiveKind::Point) return;
    double m = degeneracy_measure(x, is_flat(k));
    if (m <= kDegeneracyTol) throw DegeneratePrimitive(to_string(k), m);
}

inline GeometricPrimitive cooperative_primitive(const CooperativeSystem& sys, const Eigen::VectorXd& q)
{
    MvJet x = cooperative_primitive_jet(sys, q, false);
    check_degeneracy(sys.kind, x.v);
    return {sys.kind, x.v, is_flat(sys.kind)};
}

inline MultivectorJacobian cooperative_primitive_jacobian(const CooperativeSystem& sys, const Eigen::VectorXd& q)
{
    MvJet x = cooperative_primitive_jet(sys, q);
    check_degeneracy(sys.kind, x.v);
    return x.d;
}

struct SimilarityEval {
    MvJet versor;  // V_Sc with columns dV/dq (the analytic similarity Jacobian)
    Multivector primitive;
    bool flipped = false;
    double degeneracy = 0.0;
};

// V_Sc = V_S(X_u, X_c) carrying the derivative columns of X_c
inline SimilarityEval similarity_from_primitive(PrimitiveKind kind, MvJet x, OrientationContext* ctx = nullptr)
{
    check_degeneracy(kind, x.v);
    SimilarityEval out;
    if (ctx && has_orientation(kind)) {
        Eigen::Vector3d o = orientation_vector(kind, x.v);
        if (ctx->previous && o.dot(*ctx->previous) < 0.0) {
            x = -x;
            o = -o;
        }
        ctx->previous = o;
    }
    out.primitive = x.v;
    out.degeneracy = kind == PrimitiveKind::Point ? 1.0 : degeneracy_measure(x.v, is_flat(kind));
    auto xu = unit_primitive(kind);
    auto r = similarity_between(kind, MvJet(xu.blade), x);
    out.versor = std::move(r.versor);
    out.flipped = r.flipped;
    if (ctx) ctx->flipped = r.flipped;
    return out;
}

// V_Sc and its analytic Jacobian
inline SimilarityEval cooperative_similarity_eval(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                                  OrientationContext* ctx = nullptr, bool with_jacobian = true)
{
    return similarity_from_primitive(sys.kind, cooperative_primitive_jet(sys, q, with_jacobian), ctx);
}

inline Versor cooperative_similarity(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                     OrientationContext* ctx = nullptr)
{
    return {similarity_group(sys.kind), cooperative_similarity_eval(sys, q, ctx, false).versor.v};
}

// ---- log-map Jacobian over the 12 similarity coefficients ----

inline const std::vector<int>& similarity_blades()
{
    static const std::vector<int> b = group_span(GroupKind::Similarity);
    return b;
}

inline Eigen::Matrix<double, 7, 12> log_jacobian_analytic(const Multivector& v)
{
    MvJet j = MvJet::variable(v, similarity_blades());
    auto c = log_coords(j);
    Eigen::Matrix<double, 7, 12> out;
    for (int i = 0; i < 7; ++i) out.row(i) = c[i].d.transpose();
    return out;
}

inline Eigen::Matrix<double, 7, 12> log_jacobian_fd(const Multivector& v, double h = 1e-7)
{
    Eigen::Matrix<double, 7, 12> out;
    const auto& b = similarity_blades();
    for (int k = 0; k < 12; ++k) {
        Multivector vp = v, vm = v;
        vp.c[b[k]] += h;
        vm.c[b[k]] -= h;
        out.col(k) = (log_coords(vp) - log_coords(vm)) / (2.0 * h);
    }
    return out;
}

inline Eigen::Matrix<double, 12, Eigen::Dynamic> restrict_to_similarity(const MultivectorJacobian& j)
{
    Eigen::Matrix<double, 12, Eigen::Dynamic> m(12, static_cast<Eigen::Index>(j.size()));
    const auto& b = similarity_blades();
    for (std::size_t k = 0; k < j.size(); ++k)
        for (int i = 0; i < 12; ++i) m(i, static_cast<Eigen::Index>(k)) = j[k].c[b[i]];
    return m;
}

enum class LogJacobianMethod { FiniteDifference, Analytic };

struct SimilarityJacobians {
    Multivector versor;
    MultivectorJacobian analytic;  // J_A
    Matrix7Xd geometric;           // J_G, body-frame twists
    Matrix7Xd bivector;            // J_B = J_{S->B} J_A
    Vector7d log;                  // log(V_Sc)
    double degeneracy = 0.0;
    double min_manipulability = 0.0;
    bool near_singular = false;
    bool flipped = false;
};

inline Matrix7Xd geometric_from_analytic(const Multivector& v, const MultivectorJacobian& ja)
{
    Multivector vr = reverse(v) * -2.0;
    Matrix7Xd jg(7, static_cast<Eigen::Index>(ja.size()));
    for (std::size_t k = 0; k < ja.size(); ++k) jg.col(static_cast<Eigen::Index>(k)) = to_coords(vr * ja[k]);
    return jg;
}

inline Eigen::VectorXd manipulability_eigenvalues(const Matrix7Xd& jg)
{
    Matrix7d m = jg * jg.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix7d> es(m);
    Eigen::VectorXd ev = es.eigenvalues().reverse();
    return ev.cwiseMax(0.0);
}

// The similarity section has as many directions as the controllable set, so the
// smallest meaningful eigenvalue is the mask_size-th one.
inline double effective_min_eigenvalue(PrimitiveKind k, const Eigen::VectorXd& ev)
{
    int r = std::min<int>(mask_size(k), static_cast<int>(ev.size()));
    return r > 0 ? ev[r - 1] : 0.0;
}

inline constexpr double kNearSingularEig = 1e-8;

inline SimilarityJacobians similarity_jacobians(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                                OrientationContext* ctx = nullptr,
                                                LogJacobianMethod method = LogJacobianMethod::FiniteDifference)
{
    auto ev = cooperative_similarity_eval(sys, q, ctx, true);
    SimilarityJacobians out;
    out.versor = ev.versor.v;
    out.analytic = ev.versor.d;
    out.geometric = geometric_from_analytic(out.versor, out.analytic);
    Eigen::Matrix<double, 7, 12> jl =
        method == LogJacobianMethod::Analytic ? log_jacobian_analytic(out.versor) : log_jacobian_fd(out.versor);
    out.bivector = jl * restrict_to_similarity(out.analytic);
    out.log = log_coords(out.versor);
    out.degeneracy = ev.degeneracy;
    out.min_manipulability = effective_min_eigenvalue(sys.kind, manipulability_eigenvalues(out.geometric));
    out.near_singular = out.min_manipulability < kNearSingularEig;
    out.flipped = ev.flipped;
    return out;
}

// ---- nullspace and manipulability ----

inline Eigen::MatrixXd nullspace_projector(const Matrix7Xd& jg, int rank_hint = -1)
{
    Eigen::MatrixXd j = jg;
    auto pi = pseudo_inverse(j, rank_hint);
    return Eigen::MatrixXd::Identity(j.cols(), j.cols()) - pi.pinv * j;
}

inline Eigen::MatrixXd nullspace_projector(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                           OrientationContext* ctx = nullptr)
{
    auto js = similarity_jacobians(sys, q, ctx);
    return nullspace_projector(js.geometric, mask_size(sys.kind));
}

struct Manipulability {
    Matrix7d matrix = Matrix7d::Zero();
    Eigen::VectorXd eigenvalues;  // descending
    double effective_min = 0.0;

    Matrix7d inverse() const
    {
        if (eigenvalues.size() == 0 || eigenvalues.minCoeff() <= 1e-12)
            throw SingularManipulability("manipulability matrix is singular");
        return matrix.inverse();
    }
};

inline Manipulability manipulability(PrimitiveKind k, const Matrix7Xd& jg)
{
    Manipulability m;
    m.matrix = jg * jg.transpose();
    m.eigenvalues = manipulability_eigenvalues(jg);
    m.effective_min = effective_min_eigenvalue(k, m.eigenvalues);
    return m;
}

inline Manipulability manipulability(const CooperativeSystem& sys, const Eigen::VectorXd& q,
                                     OrientationContext* ctx = nullptr)
{
    return manipulability(sys.kind, similarity_jacobians(sys, q, ctx).geometric);
}

}  // namespace coopga
