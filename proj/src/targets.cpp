#include "parvi/targets.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace parvi::targets {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) {
    if (t > 0.0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

Eigen::LLT<Mat> checked_llt(const Mat& sigma) {
    if (sigma.rows() != sigma.cols())
        throw InvalidParameterError("covariance must be square");
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw InvalidParameterError("covariance must be symmetric");
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw InvalidParameterError("covariance must be positive definite");
    return llt;
}

void check_theta(const BlrModel& model, const Vec& theta) {
    if (theta.size() != model.particle_dim())
        throw InvalidInputError("blr particle has wrong dimension (expect d + 1)");
    require_finite(theta, "blr particle");
}

}  // namespace

GradOracle gaussian_grad_log_p(const Vec& mu, const Mat& sigma) {
    if (mu.size() != sigma.rows())
        throw InvalidParameterError("gaussian mean/covariance dimensions differ");
    const auto llt = checked_llt(sigma);
    const Vec mean = mu;
    return [llt, mean](const Vec& x) -> Vec {
        if (x.size() != mean.size())
            throw InvalidInputError("gaussian_grad_log_p: point has wrong dimension");
        return -llt.solve(x - mean);
    };
}

double gaussian_log_density(const Vec& mu, const Mat& sigma, const Vec& x) {
    if (mu.size() != sigma.rows() || x.size() != mu.size())
        throw InvalidParameterError("gaussian_log_density: dimension mismatch");
    const auto llt = checked_llt(sigma);
    const Vec diff = x - mu;
    const double quad = diff.dot(llt.solve(diff));
    const double logdet =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (quad + logdet + static_cast<double>(mu.size()) * kLogTwoPi);
}

double toy_bimodal_log_density(const Vec& z) {
    if (z.size() != 2) throw InvalidInputError("toy bimodal target is 2-D");
    const double r2 = z.squaredNorm();
    const double ap = -2.0 * (z(0) - 3.0) * (z(0) - 3.0);
    const double am = -2.0 * (z(0) + 3.0) * (z(0) + 3.0);
    const double m = std::max(ap, am);
    return -2.0 * (r2 - 3.0) * (r2 - 3.0) + m +
           std::log(std::exp(ap - m) + std::exp(am - m));
}

Vec toy_bimodal_grad_log_p(const Vec& z) {
    if (z.size() != 2) throw InvalidInputError("toy bimodal target is 2-D");
    require_finite(z, "toy bimodal point");
    const double r2 = z.squaredNorm();
    Vec g = -8.0 * (r2 - 3.0) * z;
    const double ap = -2.0 * (z(0) - 3.0) * (z(0) - 3.0);
    const double am = -2.0 * (z(0) + 3.0) * (z(0) + 3.0);
    const double m = std::max(ap, am);
    const double wp = std::exp(ap - m);
    const double wm = std::exp(am - m);
    g(0) += (wp * (-4.0 * (z(0) - 3.0)) + wm * (-4.0 * (z(0) + 3.0))) / (wp + wm);
    return g;
}

GradOracle toy_bimodal_oracle() {
    return [](const Vec& z) { return toy_bimodal_grad_log_p(z); };
}

Vec blr_grad_log_p(const BlrModel& model, const std::vector<Index>& batch, const Vec& theta) {
    check_theta(model, theta);
    if (batch.empty()) throw InvalidInputError("blr gradient: empty batch");
    const Index m_total = model.train.size();
    for (const Index m : batch)
        if (m < 0 || m >= m_total)
            throw InvalidInputError("blr gradient: batch index out of range");

    const Index d = model.train.feature_dim();
    const Vec w = theta.head(d);
    const double alpha = std::exp(theta(d));
    const double scale = static_cast<double>(m_total) / static_cast<double>(batch.size());

    Vec grad(d + 1);
    Vec gw = Vec::Zero(d);
    for (const Index m : batch) {
        const auto f = model.train.features.row(m);
        const double resid = static_cast<double>(model.train.labels(m)) - sigmoid(f.dot(w));
        gw += resid * f.transpose();
    }
    grad.head(d) = scale * gw - alpha * w;
    grad(d) = model.a0 - alpha * (1.0 / model.b0 + 0.5 * w.squaredNorm()) +
              0.5 * static_cast<double>(d);
    return grad;
}

GradOracle blr_oracle(const BlrModel& model, std::vector<Index> batch) {
    return [&model, batch = std::move(batch)](const Vec& theta) {
        return blr_grad_log_p(model, batch, theta);
    };
}

double blr_log_joint(const BlrModel& model, const Vec& theta) {
    check_theta(model, theta);
    const Index d = model.train.feature_dim();
    const Vec w = theta.head(d);
    const double zeta = theta(d);
    const double alpha = std::exp(zeta);

    double loglik = 0.0;
    for (Index m = 0; m < model.train.size(); ++m) {
        const double t = model.train.features.row(m).dot(w);
        loglik += static_cast<double>(model.train.labels(m)) * t - softplus(t);
    }
    const double logprior_w = 0.5 * static_cast<double>(d) * zeta - 0.5 * alpha * w.squaredNorm();
    const double logprior_alpha = model.a0 * zeta - alpha / model.b0;
    return loglik + logprior_w + logprior_alpha;
}

Mat blr_init_particles(const BlrModel& model, Index n, Rng& rng) {
    if (n < 1) throw InvalidParameterError("blr init: need at least one particle");
    const Index d = model.train.feature_dim();
    Vec alpha(n);
    for (Index i = 0; i < n; ++i) alpha(i) = rng.gamma(model.a0, model.b0);
    Mat theta(n, d + 1);
    const Mat raw = rng.normal_matrix(n, d);
    for (Index i = 0; i < n; ++i) {
        theta.row(i).head(d) = raw.row(i) / std::sqrt(alpha(i));
        theta(i, d) = std::log(alpha(i));
    }
    return theta;
}

BlrMetrics blr_metrics(const Mat& particles, const Dataset& test) {
    if (test.size() < 1) throw InvalidInputError("blr metrics: empty test set");
    const Index d = test.feature_dim();
    if (particles.cols() != d + 1)
        throw InvalidInputError("blr metrics: particles have wrong dimension");

    const Mat logits = test.features * particles.leftCols(d).transpose();  // M x P
    Vec prob(test.size());
    for (Index m = 0; m < test.size(); ++m) {
        double acc = 0.0;
        for (Index i = 0; i < particles.rows(); ++i) acc += sigmoid(logits(m, i));
        prob(m) = acc / static_cast<double>(particles.rows());
    }

    double correct = 0.0;
    double ll = 0.0;
    for (Index m = 0; m < test.size(); ++m) {
        const int pred = prob(m) >= 0.5 ? 1 : 0;
        if (pred == test.labels(m)) correct += 1.0;
        ll += std::log(test.labels(m) == 1 ? prob(m) : 1.0 - prob(m));
    }
    BlrMetrics out;
    out.accuracy = correct / static_cast<double>(test.size());
    out.mean_log_likelihood = ll / static_cast<double>(test.size());
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& full, std::uint64_t split_seed,
                                          double train_fraction) {
    if (!(train_fraction > 0.0) || train_fraction > 1.0)
        throw InvalidParameterError("train_fraction must lie in (0, 1]");
    const Index m = full.size();
    if (m < 1) throw InvalidInputError("split: empty dataset");
    const Index n_train = static_cast<Index>(train_fraction * static_cast<double>(m));
    if (n_train < 1) throw InvalidParameterError("train_fraction leaves an empty train set");

    std::vector<Index> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), Index{0});
    Rng rng(split_seed);
    rng.shuffle(idx);

    const auto take = [&](Index begin, Index count) {
        Dataset part;
        part.features.resize(count, full.feature_dim());
        part.labels.resize(count);
        for (Index i = 0; i < count; ++i) {
            part.features.row(i) = full.features.row(idx[static_cast<std::size_t>(begin + i)]);
            part.labels(i) = full.labels(idx[static_cast<std::size_t>(begin + i)]);
        }
        return part;
    };
    return {take(0, n_train), take(n_train, m - n_train)};
}

std::pair<Dataset, Dataset> load_dataset(const std::string& path, std::uint64_t split_seed,
                                         double train_fraction, bool skip_header) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("dataset file not found: " + path);

    Dataset full;
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    Index n_cols = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_header && line_no == 1) continue;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;

        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument("trailing characters");
                vals.push_back(v);
            } catch (const std::exception&) {
                throw ParseError("dataset " + path + " line " + std::to_string(line_no) +
                                 ": cannot parse '" + cell + "' as a number");
            }
        }
        if (vals.size() < 2)
            throw ParseError("dataset " + path + " line " + std::to_string(line_no) +
                             ": need at least one feature and a label");
        if (n_cols < 0) n_cols = static_cast<Index>(vals.size());
        if (static_cast<Index>(vals.size()) != n_cols)
            throw ParseError("dataset " + path + " line " + std::to_string(line_no) +
                             ": inconsistent column count");
        const double label = vals.back();
        if (label != 0.0 && label != 1.0)
            throw InvalidInputError("dataset " + path + " line " + std::to_string(line_no) +
                                    ": label must be 0 or 1");
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ParseError("dataset " + path + ": no data rows");

    const Index m = static_cast<Index>(rows.size());
    const Index d = n_cols - 1;
    full.features.resize(m, d + 1);
    full.labels.resize(m);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < d; ++j)
            full.features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        full.features(i, d) = 1.0;
        full.labels(i) = static_cast<int>(rows[static_cast<std::size_t>(i)].back());
    }
    return split_dataset(full, split_seed, train_fraction);
}

Dataset synthetic_logistic(Index m, Index d, const Vec& w_star, double intercept,
                           std::uint64_t seed) {
    if (m < 1 || d < 1) throw InvalidParameterError("synthetic_logistic: m and d must be positive");
    if (w_star.size() != d)
        throw InvalidParameterError("synthetic_logistic: w_star has wrong dimension");

    Rng rng(seed);
    const Mat raw = rng.normal_matrix(m, d);
    Dataset data;
    data.features.resize(m, d + 1);
    data.features.leftCols(d) = raw;
    data.features.col(d).setOnes();
    data.labels.resize(m);
    for (Index i = 0; i < m; ++i) {
        const double p = sigmoid(raw.row(i).dot(w_star) + intercept);
        data.labels(i) = rng.uniform() < p ? 1 : 0;
    }
    return data;
}

}  // namespace parvi::targets
