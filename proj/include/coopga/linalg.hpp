#pragma once

#include <algorithm>

#include <Eigen/Dense>

namespace coopga {

struct PseudoInverse {
    Eigen::MatrixXd pinv;
    double min_singular = 0.0;  // smallest singular value kept
    int rank = 0;
    bool damped = false;
};

inline constexpr double kDampingThreshold = 1e-6;
inline constexpr double kDampingLambda = 1e-6;

// Moore-Penrose inverse keeping at most max_rank singular directions; directions whose
// singular value is below kDampingThreshold are damped instead of inverted.
inline PseudoInverse pseudo_inverse(const Eigen::MatrixXd& a, int max_rank = -1, double rel_tol = 1e-12)
{
    PseudoInverse r;
    r.pinv = Eigen::MatrixXd::Zero(a.cols(), a.rows());
    if (a.size() == 0) return r;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    int n = static_cast<int>(s.size());
    if (max_rank >= 0) n = std::min(n, max_rank);
    double smax = s.size() ? s[0] : 0.0;
    int kept = 0;
    for (int i = 0; i < n; ++i) {
        if (s[i] <= rel_tol * smax && max_rank < 0) break;
        double inv;
        if (s[i] < kDampingThreshold) {
            inv = s[i] / (s[i] * s[i] + kDampingLambda * kDampingLambda);
            r.damped = true;
        } else {
            inv = 1.0 / s[i];
        }
        r.pinv += svd.matrixV().col(i) * inv * svd.matrixU().col(i).transpose();
        r.min_singular = s[i];
        ++kept;
    }
    r.rank = kept;
    return r;
}

inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& a, int max_rank = -1) { return pseudo_inverse(a, max_rank).pinv; }

}  // namespace coopga
