#include "parvi/fields.hpp"

#include <cmath>
#include <string>

#include "parvi/kernel.hpp"

namespace parvi::fields {

namespace {

void check_inputs(const Mat& particles, const Mat& grad_log_p, double h) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw InvalidParameterError("bandwidth h must be positive and finite");
    if (particles.rows() < 1)
        throw InvalidInputError("field estimator: empty ensemble");
    require_finite(particles, "field estimator particles");
    if (grad_log_p.rows() != particles.rows() || grad_log_p.cols() != particles.cols())
        throw InvalidInputError("field estimator: grad_log_p shape does not match particles");
    if (!grad_log_p.allFinite()) {
        for (Index i = 0; i < grad_log_p.rows(); ++i)
            if (!grad_log_p.row(i).allFinite())
                throw NumericBlowupError("grad_log_p is non-finite at particle " +
                                         std::to_string(i));
    }
}

// Row i = sum_j (x_i - x_j)/h K_ij / S_j  (the Blob term smoothed by the
// neighbor's density), computed as (1/h)((K s)_i x_i - (K diag(s) X)_i)
// with s_j = 1 / S_j.
Mat neighbor_smoothed_term(const Mat& particles, const Mat& k, double h) {
    const Vec inv_col = k.rowwise().sum().cwiseInverse();
    const Vec weights = k * inv_col;
    return (weights.asDiagonal() * particles - k * (inv_col.asDiagonal() * particles)) / h;
}

}  // namespace

double gfsf_default_gamma(double h, Index dim) {
    return 1e-5 * kernel::self_value(h, dim);
}

Mat eval_oracle(const Mat& particles, const GradOracle& grad_log_p) {
    Mat g(particles.rows(), particles.cols());
    for (Index i = 0; i < particles.rows(); ++i) {
        const Vec gi = grad_log_p(particles.row(i).transpose());
        if (gi.size() != particles.cols())
            throw InvalidInputError("grad_log_p returned a vector of wrong dimension");
        if (!gi.allFinite())
            throw NumericBlowupError("grad_log_p is non-finite at particle " +
                                     std::to_string(i));
        g.row(i) = gi.transpose();
    }
    return g;
}

Mat svgd_field(const Mat& particles, const Mat& grad_log_p, double h) {
    check_inputs(particles, grad_log_p, h);
    const auto km = kernel::kernel_matrices(particles, h);
    return (km.K * grad_log_p + km.Kp_rows) / static_cast<double>(particles.rows());
}

Mat gfsd_field(const Mat& particles, const Mat& grad_log_p, double h) {
    check_inputs(particles, grad_log_p, h);
    const auto km = kernel::kernel_matrices(particles, h);
    const Vec inv_s = km.K.rowwise().sum().cwiseInverse();
    return grad_log_p + inv_s.asDiagonal() * km.Kp_rows;
}

Mat blob_field(const Mat& particles, const Mat& grad_log_p, double h) {
    check_inputs(particles, grad_log_p, h);
    const auto km = kernel::kernel_matrices(particles, h);
    const Vec inv_s = km.K.rowwise().sum().cwiseInverse();
    return grad_log_p + inv_s.asDiagonal() * km.Kp_rows +
           neighbor_smoothed_term(particles, km.K, h);
}

Mat gfsf_field(const Mat& particles, const Mat& grad_log_p, double h, double gamma) {
    check_inputs(particles, grad_log_p, h);
    if (gamma < 0.0 || !std::isfinite(gamma))
        throw InvalidParameterError("gfsf gamma must be nonnegative and finite");
    const auto km = kernel::kernel_matrices(particles, h);
    Mat reg = km.K;
    reg.diagonal().array() += gamma;
    const Eigen::LDLT<Mat> solver(reg);
    if (solver.info() != Eigen::Success || !(solver.rcond() > 1e-12))
        throw LinearSolveError(
            "gfsf_field: kernel matrix numerically singular; increase gamma or jitter "
            "duplicate particles");
    return grad_log_p + solver.solve(km.Kp_rows);
}

Mat svgd_field(const Mat& particles, const GradOracle& grad_log_p, double h) {
    return svgd_field(particles, eval_oracle(particles, grad_log_p), h);
}

Mat gfsd_field(const Mat& particles, const GradOracle& grad_log_p, double h) {
    return gfsd_field(particles, eval_oracle(particles, grad_log_p), h);
}

Mat blob_field(const Mat& particles, const GradOracle& grad_log_p, double h) {
    return blob_field(particles, eval_oracle(particles, grad_log_p), h);
}

Mat gfsf_field(const Mat& particles, const GradOracle& grad_log_p, double h, double gamma) {
    return gfsf_field(particles, eval_oracle(particles, grad_log_p), h, gamma);
}

}  // namespace parvi::fields
