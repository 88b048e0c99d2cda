#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "parvi/rng.hpp"
#include "parvi/types.hpp"

namespace parvi::targets {

// grad log N(mu, sigma): x -> -sigma^{-1} (x - mu). Throws
// InvalidParameterError unless sigma is symmetric positive definite.
GradOracle gaussian_grad_log_p(const Vec& mu, const Mat& sigma);
double gaussian_log_density(const Vec& mu, const Mat& sigma, const Vec& x);

// 2-D bimodal toy density:
//   log p(z) = -2 (||z||^2 - 3)^2 + log(exp(-2(z1-3)^2) + exp(-2(z1+3)^2))
// up to an additive constant.
Vec toy_bimodal_grad_log_p(const Vec& z);
double toy_bimodal_log_density(const Vec& z);
GradOracle toy_bimodal_oracle();

// Feature matrix with the bias column 1.0 already appended; labels in {0,1}.
struct Dataset {
    Mat features;                // M x (d+1)
    Eigen::VectorXi labels;      // M
    Index size() const { return features.rows(); }
    Index feature_dim() const { return features.cols(); }
};

// Bayesian logistic regression with a Gamma(a0, scale b0) prior on the
// weight precision alpha. Particle layout: theta = (w in R^d, zeta = ln alpha),
// so particle dimension is d + 1 (d already includes the bias feature).
struct BlrModel {
    Dataset train;
    double a0 = 1.0;
    double b0 = 100.0;  // scale parameter, not rate
    Index batch_size = 0;

    Index particle_dim() const { return train.feature_dim() + 1; }
};

// Gradient of the log joint at theta, with the likelihood term scaled by
// M / |batch|:
//   grad_w    = (M/|B|) sum_{m in B} (y_m - sigmoid(w . f_m)) f_m - alpha w
//   grad_zeta = a0 - alpha (1/b0 + ||w||^2 / 2) + d/2,  alpha = exp(zeta)
Vec blr_grad_log_p(const BlrModel& model, const std::vector<Index>& batch, const Vec& theta);
// The returned oracle holds a reference to model; keep the model alive.
GradOracle blr_oracle(const BlrModel& model, std::vector<Index> batch);

// Explicit log joint (full data) for finite-difference validation.
double blr_log_joint(const BlrModel& model, const Vec& theta);

// Prior sample for one particle: alpha ~ Gamma(a0, scale b0),
// w ~ Normal(0, alpha^{-1} I), theta = (w, ln alpha).
Mat blr_init_particles(const BlrModel& model, Index n, Rng& rng);

struct BlrMetrics {
    double accuracy;
    double mean_log_likelihood;
};

// Predictive probability per test point = mean over particles of
// sigmoid(w . f); prediction is 1 when the probability is >= 0.5.
BlrMetrics blr_metrics(const Mat& particles, const Dataset& test);

// CSV ingestion: comma-separated, final column = label in {0,1}, optional
// single header line. Bias 1.0 appended; deterministic shuffled split.
std::pair<Dataset, Dataset> load_dataset(const std::string& path, std::uint64_t split_seed,
                                         double train_fraction, bool skip_header = false);

// Split an in-memory dataset the same way load_dataset does.
std::pair<Dataset, Dataset> split_dataset(const Dataset& full, std::uint64_t split_seed,
                                          double train_fraction);

// Synthetic logistic data: features ~ Normal(0, I), labels ~
// Bernoulli(sigmoid(f . w_star + intercept)). Bias column appended.
Dataset synthetic_logistic(Index m, Index d, const Vec& w_star, double intercept,
                           std::uint64_t seed);

}  // namespace parvi::targets
