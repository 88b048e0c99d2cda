#include "parvi/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace parvi::kernel {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw InvalidParameterError("bandwidth h must be positive and finite");
}

// Squared pairwise distances, R2(i,j) = ||x_i - x_j||^2, clamped at 0.
Mat squared_distances(const Mat& x) {
    const Vec sq = x.rowwise().squaredNorm();
    Mat r2 = sq.replicate(1, x.rows());
    r2 += sq.transpose().replicate(x.rows(), 1);
    r2.noalias() -= 2.0 * x * x.transpose();
    return r2.cwiseMax(0.0);
}

}  // namespace

double self_value(double h, Index dim) {
    check_bandwidth(h);
    if (dim < 1) throw InvalidParameterError("dimension must be at least 1");
    return std::pow(kTwoPi * h, -0.5 * static_cast<double>(dim));
}

double eval_kernel(const Vec& x, const Vec& y, double h) {
    check_bandwidth(h);
    if (x.size() != y.size())
        throw InvalidInputError("eval_kernel: point dimensions differ");
    require_finite(x, "eval_kernel x");
    require_finite(y, "eval_kernel y");
    const double r2 = (x - y).squaredNorm();
    return self_value(h, x.size()) * std::exp(-r2 / (2.0 * h));
}

KernelMatrices kernel_matrices(const Mat& particles, double h) {
    check_bandwidth(h);
    if (particles.rows() < 1)
        throw InvalidInputError("kernel_matrices: empty ensemble");
    require_finite(particles, "kernel_matrices particles");

    const Index n = particles.rows();
    const Index d = particles.cols();
    KernelMatrices out;
    out.K = (squared_distances(particles) / (-2.0 * h)).array().exp().matrix()
            * self_value(h, d);
    // Row i of Kp_rows = sum_j (x_i - x_j)/h K_ij = (S_i x_i - (K X)_i)/h.
    const Vec row_sums = out.K.rowwise().sum();
    out.Kp_rows = (row_sums.asDiagonal() * particles - out.K * particles) / h;
    (void)n;
    return out;
}

double median_bandwidth(const Mat& particles) {
    const Index n = particles.rows();
    if (n < 2)
        throw InvalidInputError("median_bandwidth: need at least two particles");
    require_finite(particles, "median_bandwidth particles");

    std::vector<double> r2;
    r2.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            r2.push_back((particles.row(i) - particles.row(j)).squaredNorm());

    const std::size_t m = r2.size();
    const std::size_t mid = m / 2;
    std::nth_element(r2.begin(), r2.begin() + mid, r2.end());
    double med = r2[mid];
    if (m % 2 == 0) {
        const double lower = *std::max_element(r2.begin(), r2.begin() + mid);
        med = 0.5 * (med + lower);
    }
    if (med <= 0.0)
        throw DegenerateEnsembleError(
            "median_bandwidth: median pairwise distance is zero (coincident particles)");
    return med / (2.0 * std::log(static_cast<double>(n) + 1.0));
}

HeObjective he_objective(const Mat& particles, double h) {
    check_bandwidth(h);
    if (particles.rows() < 1)
        throw InvalidInputError("he_objective: empty ensemble");
    require_finite(particles, "he_objective particles");

    const Index n = particles.rows();
    const double dd = static_cast<double>(particles.cols());
    const Mat& x = particles;

    const Mat r2 = squared_distances(x);
    // e_ij = exp(-r2_ij/(2h) - (D/2) ln h); symmetric.
    const Mat e = ((r2 / (-2.0 * h)).array() - 0.5 * dd * std::log(h)).exp().matrix();
    const Mat er2 = e.cwiseProduct(r2);

    // Aggregates over the first index, one value (or D-vector) per particle:
    //   S_j = sum_i e_ij              U_j = sum_i e_ij r2_ij
    //   T_j = sum_i e_ij (x_i - x_j)  V_j = sum_i e_ij r2_ij (x_i - x_j)
    //   Q_k = sum_j e_jk r2_jk^2
    const Vec s = e.colwise().sum().transpose();
    const Vec u = er2.colwise().sum().transpose();
    const Vec q = er2.cwiseProduct(r2).colwise().sum().transpose();
    const Mat t = e * x - s.asDiagonal() * x;
    const Mat v = er2 * x - u.asDiagonal() * x;

    // Mixed sums over j, using d_jk . A_j = x_j . A_j - x_k . A_j:
    //   A0_k = sum_j e_jk (d_jk . T_j) / S_j        (this is C_k)
    //   A1_k = sum_j e_jk (d_jk . V_j) / S_j
    //   A2_k = sum_j e_jk r2_jk (d_jk . T_j) / S_j
    //   A3_k = sum_j e_jk U_j (d_jk . T_j) / S_j^2
    const Vec inv_s = s.cwiseInverse();
    const Vec pt = (x.cwiseProduct(t)).rowwise().sum();  // x_j . T_j
    const Vec pv = (x.cwiseProduct(v)).rowwise().sum();  // x_j . V_j

    const auto mixed = [&](const Mat& weight, const Vec& scalar_j, const Mat& vec_j) -> Vec {
        const Vec direct = weight.transpose() * scalar_j;
        const Mat carried = weight.transpose() * vec_j;
        return direct - (x.cwiseProduct(carried)).rowwise().sum();
    };

    const Vec a0 = mixed(e, pt.cwiseProduct(inv_s), inv_s.asDiagonal() * t);
    const Vec a1 = mixed(e, pv.cwiseProduct(inv_s), inv_s.asDiagonal() * v);
    const Vec a2 = mixed(er2, pt.cwiseProduct(inv_s), inv_s.asDiagonal() * t);
    const Vec u_inv_s2 = u.cwiseProduct(inv_s).cwiseProduct(inv_s);  // U_j / S_j^2
    const Vec a3 = mixed(e, pt.cwiseProduct(u_inv_s2), u_inv_s2.asDiagonal() * t);

    const Vec g = u - h * dd * s - a0;
    const Vec gp = q / (2.0 * h * h) - (dd / h) * u + (0.5 * dd * dd - dd) * s
                   - (a1 + a2 - a3) / (2.0 * h * h) + (dd / (2.0 * h)) * a0;

    HeObjective out;
    out.J = g.squaredNorm();
    out.Jprime = 2.0 * g.dot(gp);
    (void)n;
    return out;
}

double select_bandwidth_he(const Mat& particles, double h_prev, const KernelConfig& cfg) {
    check_bandwidth(h_prev);
    if (!(cfg.he_trust_ratio > 1.0))
        throw InvalidParameterError("he_trust_ratio must exceed 1");
    if (!(cfg.he_probe_delta > 0.0))
        throw InvalidParameterError("he_probe_delta must be positive");

    const HeObjective at_prev = he_objective(particles, h_prev);
    const double u0 = std::log(h_prev);
    const double slope = h_prev * at_prev.Jprime;  // dJ/du at u0
    const double du = std::log1p(cfg.he_probe_delta);
    const double j_probe = he_objective(particles, h_prev * (1.0 + cfg.he_probe_delta)).J;
    const double curv = (j_probe - at_prev.J - slope * du) / (du * du);

    if (!std::isfinite(curv) || !std::isfinite(slope) || curv <= 0.0) return h_prev;

    const double span = std::log(cfg.he_trust_ratio);
    double u_star = u0 - slope / (2.0 * curv);
    u_star = std::clamp(u_star, u0 - span, u0 + span);
    const double h_star = std::exp(u_star);
    if (h_star == h_prev) return h_prev;
    return he_objective(particles, h_star).J < at_prev.J ? h_star : h_prev;
}

}  // namespace parvi::kernel
