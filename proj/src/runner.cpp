#include "parvi/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "parvi/fields.hpp"
#include "parvi/targets.hpp"

namespace parvi::runner {

namespace {

using nlohmann::ordered_json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_vec(const Vec& v) {
    std::string out;
    for (Index i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(v(i));
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

// Key=value accessor that accumulates violations instead of failing fast, so
// validation can report every problem at once.
class ConfigReader {
public:
    ConfigReader(const std::string& text, std::vector<std::string>& errors) : errors_(errors) {
        std::istringstream in(text);
        std::string line;
        long line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string stripped = trim(line);
            if (stripped.empty() || stripped[0] == '#') continue;
            const auto eq = stripped.find('=');
            if (eq == std::string::npos) {
                fail("line " + std::to_string(line_no) + ": expected 'key = value'");
                continue;
            }
            const std::string key = trim(stripped.substr(0, eq));
            const std::string value = trim(stripped.substr(eq + 1));
            if (key.empty()) {
                fail("line " + std::to_string(line_no) + ": empty key");
                continue;
            }
            if (kv_.count(key)) {
                fail("duplicate key '" + key + "'");
                continue;
            }
            kv_[key] = value;
        }
    }

    bool has(const std::string& key) {
        used_.insert(key);
        return kv_.count(key) > 0;
    }

    std::string get_string(const std::string& key, const std::string& def) {
        used_.insert(key);
        const auto it = kv_.find(key);
        return it == kv_.end() ? def : it->second;
    }

    double get_double(const std::string& key, double def) {
        used_.insert(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        return parse_double(key, it->second, def);
    }

    long get_long(const std::string& key, long def) {
        used_.insert(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        try {
            std::size_t used = 0;
            const long v = std::stol(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail("key '" + key + "': cannot parse '" + it->second + "' as an integer");
            return def;
        }
    }

    std::uint64_t get_seed(const std::string& key, std::uint64_t def) {
        used_.insert(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
            return static_cast<std::uint64_t>(v);
        } catch (const std::exception&) {
            fail("key '" + key + "': cannot parse '" + it->second + "' as a seed");
            return def;
        }
    }

    bool get_bool(const std::string& key, bool def) {
        used_.insert(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        fail("key '" + key + "': expected true/false, got '" + it->second + "'");
        return def;
    }

    Vec get_vec(const std::string& key) {
        used_.insert(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return Vec();
        std::vector<double> vals;
        std::stringstream ss(it->second);
        std::string cell;
        while (std::getline(ss, cell, ','))
            vals.push_back(parse_double(key, trim(cell), 0.0));
        Vec out(static_cast<Index>(vals.size()));
        for (std::size_t i = 0; i < vals.size(); ++i) out(static_cast<Index>(i)) = vals[i];
        return out;
    }

    void fail(const std::string& msg) { errors_.push_back(msg); }

    void check_unknown() {
        for (const auto& [key, value] : kv_)
            if (!used_.count(key)) fail("unknown key '" + key + "'");
    }

private:
    double parse_double(const std::string& key, const std::string& text, double def) {
        try {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail("key '" + key + "': cannot parse '" + text + "' as a number");
            return def;
        }
    }

    std::map<std::string, std::string> kv_;
    std::set<std::string> used_;
    std::vector<std::string>& errors_;
};

Vec broadcast(const Vec& raw, Index dim, const std::string& what) {
    if (raw.size() == 0) return Vec::Zero(dim);
    if (raw.size() == 1) return Vec::Constant(dim, raw(0));
    if (raw.size() == dim) return raw;
    throw ValidationError(what + " must be a scalar or a list of length " + std::to_string(dim));
}

void write_csv(const std::filesystem::path& path, const Mat& x) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot open output file " + path.string());
    for (Index i = 0; i < x.rows(); ++i) {
        std::string line;
        for (Index j = 0; j < x.cols(); ++j) {
            if (j) line += ",";
            line += fmt_double(x(i, j));
        }
        out << line << "\n";
    }
}

ordered_json record_to_json(const MetricRecord& rec, bool record_timing) {
    ordered_json j;
    j["iter"] = rec.iter;
    j["h"] = rec.h;
    j["field_norm"] = rec.field_norm;
    for (const auto& [name, value] : rec.values) j[name] = value;
    if (rec.w2_jitter) j["w2_jitter"] = true;
    if (record_timing) j["wall_ms"] = rec.wall_ms;
    return j;
}

const char* estimator_name(Estimator e) {
    switch (e) {
        case Estimator::Svgd: return "svgd";
        case Estimator::Blob: return "blob";
        case Estimator::Gfsd: return "gfsd";
        case Estimator::Gfsf: return "gfsf";
    }
    return "?";
}

const char* method_name(dynamics::Method m) {
    switch (m) {
        case dynamics::Method::WGD: return "wgd";
        case dynamics::Method::PO: return "po";
        case dynamics::Method::WAG: return "wag";
        case dynamics::Method::WNes: return "wnes";
    }
    return "?";
}

const char* target_name(TargetKind t) {
    switch (t) {
        case TargetKind::Gaussian: return "gaussian";
        case TargetKind::ToyBimodal: return "toy_bimodal";
        case TargetKind::Blr: return "blr";
        case TargetKind::BlrSynthetic: return "blr_synthetic";
    }
    return "?";
}

const char* policy_name(kernel::BandwidthPolicy p) {
    switch (p) {
        case kernel::BandwidthPolicy::Fixed: return "fixed";
        case kernel::BandwidthPolicy::Median: return "median";
        case kernel::BandwidthPolicy::HE: return "he";
    }
    return "?";
}

}  // namespace

RunConfig validate_config(const std::string& text) {
    std::vector<std::string> errors;
    ConfigReader rd(text, errors);
    RunConfig cfg;

    const std::string est = rd.get_string("estimator", "");
    if (est == "svgd") cfg.estimator = Estimator::Svgd;
    else if (est == "blob") cfg.estimator = Estimator::Blob;
    else if (est == "gfsd") cfg.estimator = Estimator::Gfsd;
    else if (est == "gfsf") cfg.estimator = Estimator::Gfsf;
    else rd.fail(est.empty() ? "missing required key 'estimator'"
                             : "estimator must be one of svgd|blob|gfsd|gfsf");

    const std::string dyn = rd.get_string("dynamics", "");
    if (dyn == "wgd") cfg.method = dynamics::Method::WGD;
    else if (dyn == "po") cfg.method = dynamics::Method::PO;
    else if (dyn == "wag") cfg.method = dynamics::Method::WAG;
    else if (dyn == "wnes") cfg.method = dynamics::Method::WNes;
    else rd.fail(dyn.empty() ? "missing required key 'dynamics'"
                             : "dynamics must be one of wgd|po|wag|wnes");

    const std::string tgt = rd.get_string("target", "");
    if (tgt == "gaussian") cfg.target = TargetKind::Gaussian;
    else if (tgt == "toy_bimodal") cfg.target = TargetKind::ToyBimodal;
    else if (tgt == "blr") cfg.target = TargetKind::Blr;
    else if (tgt == "blr_synthetic") cfg.target = TargetKind::BlrSynthetic;
    else rd.fail(tgt.empty() ? "missing required key 'target'"
                             : "target must be one of gaussian|toy_bimodal|blr|blr_synthetic");

    const std::string pol = rd.get_string("bandwidth_policy", "median");
    if (pol == "fixed") cfg.bandwidth_policy = kernel::BandwidthPolicy::Fixed;
    else if (pol == "median") cfg.bandwidth_policy = kernel::BandwidthPolicy::Median;
    else if (pol == "he") cfg.bandwidth_policy = kernel::BandwidthPolicy::HE;
    else rd.fail("bandwidth_policy must be one of fixed|median|he");

    cfg.h_init = rd.get_double("h_init", 0.0);
    if (rd.has("h_init") && !(cfg.h_init > 0.0)) rd.fail("h_init must be positive");
    if (cfg.bandwidth_policy == kernel::BandwidthPolicy::Fixed && !rd.has("h_init"))
        rd.fail("bandwidth_policy=fixed requires h_init");
    cfg.he_trust_ratio = rd.get_double("he_trust_ratio", 2.0);
    if (!(cfg.he_trust_ratio > 1.0)) rd.fail("he_trust_ratio must exceed 1");
    cfg.he_probe_delta = rd.get_double("he_probe_delta", 0.1);
    if (!(cfg.he_probe_delta > 0.0)) rd.fail("he_probe_delta must be positive");
    cfg.gfsf_gamma = rd.get_double("gfsf_gamma", 1e-5);
    if (cfg.gfsf_gamma < 0.0) rd.fail("gfsf_gamma must be nonnegative");

    cfg.accel.method = cfg.method;
    cfg.accel.eps0 = rd.get_double("step_size", 0.0);
    if (!(cfg.accel.eps0 > 0.0)) rd.fail("step_size is required and must be positive");
    cfg.accel.schedule_exponent = rd.get_double("schedule_exponent", 0.0);
    if (cfg.accel.schedule_exponent < 0.0) rd.fail("schedule_exponent must be nonnegative");
    cfg.accel.schedule_burn_in = rd.get_long("schedule_burn_in", 0);
    if (cfg.accel.schedule_burn_in < 0) rd.fail("schedule_burn_in must be nonnegative");

    cfg.accel.alpha = rd.get_double("alpha", 0.0);
    if (cfg.method == dynamics::Method::WAG && !(cfg.accel.alpha > 3.0))
        rd.fail("dynamics=wag requires alpha > 3");
    cfg.accel.mu = rd.get_double("mu", 0.0);
    cfg.accel.beta = rd.get_double("beta", 0.0);
    if (cfg.method == dynamics::Method::WNes) {
        if (!(cfg.accel.mu > 0.0)) rd.fail("dynamics=wnes requires mu > 0");
        if (!(cfg.accel.beta > 0.0)) rd.fail("dynamics=wnes requires beta > 0");
    }
    cfg.accel.po_momentum = rd.get_double("po_momentum", 0.0);
    if (cfg.accel.po_momentum < 0.0 || cfg.accel.po_momentum >= 1.0)
        rd.fail("po_momentum must lie in [0, 1)");
    cfg.accel.po_noise_std = rd.get_double("po_noise_std", 0.0);
    if (cfg.accel.po_noise_std < 0.0) rd.fail("po_noise_std must be nonnegative");
    cfg.accel.freeze_coefficients = rd.get_bool("wnes_freeze_coefficients", false);

    cfg.gaussian_dim = rd.get_long("gaussian_dim", 1);
    if (cfg.gaussian_dim < 1) rd.fail("gaussian_dim must be at least 1");
    cfg.gaussian_std = rd.get_double("gaussian_std", 1.0);
    if (!(cfg.gaussian_std > 0.0)) rd.fail("gaussian_std must be positive");
    cfg.gaussian_mean = rd.get_vec("gaussian_mean");
    if (cfg.target == TargetKind::Gaussian && cfg.gaussian_mean.size() > 1 &&
        cfg.gaussian_mean.size() != cfg.gaussian_dim)
        rd.fail("gaussian_mean must be a scalar or a list of length gaussian_dim");

    const std::string init = rd.get_string("init", "");
    const bool is_blr_target =
        cfg.target == TargetKind::Blr || cfg.target == TargetKind::BlrSynthetic;
    if (init.empty()) cfg.init = is_blr_target ? InitKind::Prior : InitKind::Gaussian;
    else if (init == "gaussian") cfg.init = InitKind::Gaussian;
    else if (init == "prior") cfg.init = InitKind::Prior;
    else rd.fail("init must be one of gaussian|prior");
    if (cfg.init == InitKind::Prior && !is_blr_target)
        rd.fail("init=prior is only available for blr targets");
    cfg.init_mean = rd.get_vec("init_mean");
    cfg.init_std = rd.get_double("init_std", 1.0);
    if (!(cfg.init_std > 0.0)) rd.fail("init_std must be positive");
    if (cfg.target == TargetKind::ToyBimodal && cfg.init_mean.size() > 2)
        rd.fail("init_mean must be a scalar or a list of length 2 for toy_bimodal");
    if (cfg.target == TargetKind::Gaussian && cfg.init_mean.size() > 1 &&
        cfg.init_mean.size() != cfg.gaussian_dim)
        rd.fail("init_mean must be a scalar or a list of length gaussian_dim");

    cfg.dataset_path = rd.get_string("dataset", "");
    cfg.csv_has_header = rd.get_bool("csv_has_header", false);
    cfg.blr_batch_size = rd.get_long("blr_batch_size", 50);
    if (cfg.blr_batch_size < 1) rd.fail("blr_batch_size must be at least 1");
    cfg.blr_a0 = rd.get_double("blr_a0", 1.0);
    if (!(cfg.blr_a0 > 0.0)) rd.fail("blr_a0 must be positive");
    cfg.blr_b0 = rd.get_double("blr_b0", 100.0);
    if (!(cfg.blr_b0 > 0.0)) rd.fail("blr_b0 must be positive");
    cfg.split_seed = rd.get_seed("split_seed", 0);
    cfg.train_fraction = rd.get_double("train_fraction", 0.8);
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        rd.fail("train_fraction must lie in (0, 1)");
    if (cfg.target == TargetKind::Blr) {
        if (cfg.dataset_path.empty()) rd.fail("target=blr requires dataset");
        else if (!std::filesystem::exists(cfg.dataset_path))
            rd.fail("dataset file does not exist: " + cfg.dataset_path);
    }
    cfg.blr_m = rd.get_long("blr_m", 0);
    cfg.blr_dim = rd.get_long("blr_dim", 0);
    cfg.blr_w_scale = rd.get_double("blr_w_scale", 2.0);
    cfg.blr_intercept = rd.get_double("blr_intercept", 0.3);
    cfg.blr_data_seed = rd.get_seed("blr_data_seed", 0);
    if (cfg.target == TargetKind::BlrSynthetic) {
        if (cfg.blr_m < 2) rd.fail("target=blr_synthetic requires blr_m >= 2");
        if (cfg.blr_dim < 1) rd.fail("target=blr_synthetic requires blr_dim >= 1");
    }

    cfg.n_particles = rd.get_long("n_particles", 0);
    if (cfg.n_particles < 1) rd.fail("n_particles is required and must be at least 1");
    cfg.n_iterations = rd.get_long("n_iterations", -1);
    if (cfg.n_iterations < 0) rd.fail("n_iterations is required and must be nonnegative");
    cfg.seed = rd.get_seed("seed", 0);
    cfg.snapshot_stride = rd.get_long("snapshot_stride", 0);
    if (cfg.snapshot_stride < 0) rd.fail("snapshot_stride must be nonnegative");
    cfg.metrics_stride = rd.get_long("metrics_stride", 1);
    if (cfg.metrics_stride < 1) rd.fail("metrics_stride must be at least 1");
    cfg.out_dir = rd.get_string("out_dir", "out");
    cfg.record_timing = rd.get_bool("record_timing", false);

    if (cfg.target == TargetKind::Gaussian && cfg.n_particles >= 1 &&
        cfg.n_particles <= cfg.gaussian_dim)
        rd.fail("gaussian target needs n_particles > gaussian_dim for the W2 diagnostic");
    if (cfg.bandwidth_policy == kernel::BandwidthPolicy::Median && cfg.n_particles == 1)
        rd.fail("bandwidth_policy=median needs at least two particles");
    if (cfg.bandwidth_policy == kernel::BandwidthPolicy::HE && cfg.n_particles == 1 &&
        !rd.has("h_init"))
        rd.fail("bandwidth_policy=he with one particle requires h_init");

    rd.check_unknown();
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ValidationError(msg);
    }
    return cfg;
}

RunConfig validate_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return validate_config(ss.str());
}

std::string resolved_config_text(const RunConfig& cfg) {
    std::ostringstream out;
    out << "estimator = " << estimator_name(cfg.estimator) << "\n";
    out << "dynamics = " << method_name(cfg.method) << "\n";
    out << "target = " << target_name(cfg.target) << "\n";
    out << "bandwidth_policy = " << policy_name(cfg.bandwidth_policy) << "\n";
    if (cfg.h_init > 0.0) out << "h_init = " << fmt_double(cfg.h_init) << "\n";
    if (cfg.bandwidth_policy == kernel::BandwidthPolicy::HE) {
        out << "he_trust_ratio = " << fmt_double(cfg.he_trust_ratio) << "\n";
        out << "he_probe_delta = " << fmt_double(cfg.he_probe_delta) << "\n";
    }
    if (cfg.estimator == Estimator::Gfsf)
        out << "gfsf_gamma = " << fmt_double(cfg.gfsf_gamma) << "\n";

    out << "step_size = " << fmt_double(cfg.accel.eps0) << "\n";
    out << "schedule_exponent = " << fmt_double(cfg.accel.schedule_exponent) << "\n";
    out << "schedule_burn_in = " << cfg.accel.schedule_burn_in << "\n";
    switch (cfg.method) {
        case dynamics::Method::WAG:
            out << "alpha = " << fmt_double(cfg.accel.alpha) << "\n";
            break;
        case dynamics::Method::WNes:
            out << "mu = " << fmt_double(cfg.accel.mu) << "\n";
            out << "beta = " << fmt_double(cfg.accel.beta) << "\n";
            out << "wnes_freeze_coefficients = "
                << (cfg.accel.freeze_coefficients ? "true" : "false") << "\n";
            break;
        case dynamics::Method::PO:
            out << "po_momentum = " << fmt_double(cfg.accel.po_momentum) << "\n";
            out << "po_noise_std = " << fmt_double(cfg.accel.po_noise_std) << "\n";
            break;
        case dynamics::Method::WGD:
            break;
    }

    switch (cfg.target) {
        case TargetKind::Gaussian:
            out << "gaussian_dim = " << cfg.gaussian_dim << "\n";
            out << "gaussian_mean = "
                << fmt_vec(broadcast(cfg.gaussian_mean, cfg.gaussian_dim, "gaussian_mean"))
                << "\n";
            out << "gaussian_std = " << fmt_double(cfg.gaussian_std) << "\n";
            break;
        case TargetKind::ToyBimodal:
            break;
        case TargetKind::Blr:
            out << "dataset = " << cfg.dataset_path << "\n";
            out << "csv_has_header = " << (cfg.csv_has_header ? "true" : "false") << "\n";
            break;
        case TargetKind::BlrSynthetic:
            out << "blr_m = " << cfg.blr_m << "\n";
            out << "blr_dim = " << cfg.blr_dim << "\n";
            out << "blr_w_scale = " << fmt_double(cfg.blr_w_scale) << "\n";
            out << "blr_intercept = " << fmt_double(cfg.blr_intercept) << "\n";
            out << "blr_data_seed = " << cfg.blr_data_seed << "\n";
            break;
    }
    if (cfg.target == TargetKind::Blr || cfg.target == TargetKind::BlrSynthetic) {
        out << "blr_batch_size = " << cfg.blr_batch_size << "\n";
        out << "blr_a0 = " << fmt_double(cfg.blr_a0) << "\n";
        out << "blr_b0 = " << fmt_double(cfg.blr_b0) << "\n";
        out << "split_seed = " << cfg.split_seed << "\n";
        out << "train_fraction = " << fmt_double(cfg.train_fraction) << "\n";
    }

    out << "init = " << (cfg.init == InitKind::Prior ? "prior" : "gaussian") << "\n";
    if (cfg.init == InitKind::Gaussian) {
        if (cfg.init_mean.size() > 0) out << "init_mean = " << fmt_vec(cfg.init_mean) << "\n";
        else out << "init_mean = 0\n";
        out << "init_std = " << fmt_double(cfg.init_std) << "\n";
    }

    out << "n_particles = " << cfg.n_particles << "\n";
    out << "n_iterations = " << cfg.n_iterations << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "snapshot_stride = " << cfg.snapshot_stride << "\n";
    out << "metrics_stride = " << cfg.metrics_stride << "\n";
    out << "out_dir = " << cfg.out_dir << "\n";
    out << "record_timing = " << (cfg.record_timing ? "true" : "false") << "\n";
    return out.str();
}

double mode_balance(const Mat& particles) {
    if (particles.rows() < 1 || particles.cols() < 1)
        throw InvalidInputError("mode_balance: empty ensemble");
    double count = 0.0;
    for (Index i = 0; i < particles.rows(); ++i)
        if (particles(i, 0) >= 0.0) count += 1.0;
    return count / static_cast<double>(particles.rows());
}

double mean_nn_distance(const Mat& particles) {
    const Index n = particles.rows();
    if (n < 2) throw InvalidInputError("mean_nn_distance: need at least two particles");
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            best = std::min(best, (particles.row(i) - particles.row(j)).norm());
        }
        total += best;
    }
    return total / static_cast<double>(n);
}

double gaussian_w2_proxy(const Mat& particles, const Vec& mu, const Mat& sigma,
                         bool* jittered) {
    const Index n = particles.rows();
    const Index d = particles.cols();
    if (jittered) *jittered = false;
    if (mu.size() != d || sigma.rows() != d || sigma.cols() != d)
        throw InvalidInputError("gaussian_w2_proxy: dimension mismatch");
    if (n <= d)
        throw InvalidInputError("gaussian_w2_proxy: need more particles than dimensions");
    require_finite(particles, "gaussian_w2_proxy particles");

    const Eigen::SelfAdjointEigenSolver<Mat> sig_eig(sigma);
    if (sig_eig.info() != Eigen::Success || sig_eig.eigenvalues().minCoeff() <= 0.0)
        throw InvalidParameterError("gaussian_w2_proxy: sigma must be positive definite");

    const RowVec mean = particles.colwise().mean();
    const Mat centered = particles.rowwise() - mean;
    Mat cov = centered.transpose() * centered / static_cast<double>(n);

    const Eigen::SelfAdjointEigenSolver<Mat> cov_probe(cov);
    const double cov_max = std::max(cov_probe.eigenvalues().maxCoeff(), 0.0);
    if (cov_probe.eigenvalues().minCoeff() < 1e-12 * std::max(1.0, cov_max)) {
        cov.diagonal().array() += 1e-8;
        if (jittered) *jittered = true;
    }

    const Mat sig_sqrt = sig_eig.eigenvectors() *
                         sig_eig.eigenvalues().cwiseSqrt().asDiagonal() *
                         sig_eig.eigenvectors().transpose();
    Mat inner = sig_sqrt * cov * sig_sqrt;
    inner = 0.5 * (inner + inner.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Mat> inner_eig(inner);
    const double tr_cross = inner_eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double d2 = (mean.transpose() - mu).squaredNorm() + cov.trace() + sigma.trace() -
                      2.0 * tr_cross;
    return std::sqrt(std::max(d2, 0.0));
}

RunResult run_experiment(const RunConfig& cfg) {
    // Target assembly.
    const bool is_blr =
        cfg.target == TargetKind::Blr || cfg.target == TargetKind::BlrSynthetic;
    targets::BlrModel model;
    targets::Dataset test;
    Vec gauss_mu;
    Mat gauss_sigma;
    GradOracle oracle;
    std::vector<Index> batch;
    Index dim = 0;

    switch (cfg.target) {
        case TargetKind::Gaussian: {
            dim = cfg.gaussian_dim;
            gauss_mu = broadcast(cfg.gaussian_mean, dim, "gaussian_mean");
            gauss_sigma = Mat::Identity(dim, dim) * (cfg.gaussian_std * cfg.gaussian_std);
            oracle = targets::gaussian_grad_log_p(gauss_mu, gauss_sigma);
            break;
        }
        case TargetKind::ToyBimodal: {
            dim = 2;
            oracle = targets::toy_bimodal_oracle();
            break;
        }
        case TargetKind::Blr: {
            auto [train, test_part] = targets::load_dataset(
                cfg.dataset_path, cfg.split_seed, cfg.train_fraction, cfg.csv_has_header);
            model.train = std::move(train);
            test = std::move(test_part);
            break;
        }
        case TargetKind::BlrSynthetic: {
            const Vec w_star = Vec::Constant(
                cfg.blr_dim, cfg.blr_w_scale / std::sqrt(static_cast<double>(cfg.blr_dim)));
            const targets::Dataset full = targets::synthetic_logistic(
                cfg.blr_m, cfg.blr_dim, w_star, cfg.blr_intercept, cfg.blr_data_seed);
            auto [train, test_part] =
                targets::split_dataset(full, cfg.split_seed, cfg.train_fraction);
            model.train = std::move(train);
            test = std::move(test_part);
            break;
        }
    }
    if (is_blr) {
        model.a0 = cfg.blr_a0;
        model.b0 = cfg.blr_b0;
        model.batch_size = cfg.blr_batch_size;
        dim = model.particle_dim();
        if (cfg.blr_batch_size > model.train.size())
            throw ValidationError("blr_batch_size exceeds the training set size");
        oracle = [&model, &batch](const Vec& theta) {
            return targets::blr_grad_log_p(model, batch, theta);
        };
    }

    // Initialization; the same generator stream continues into the dynamics.
    Rng rng(cfg.seed);
    Mat x0;
    if (cfg.init == InitKind::Prior) {
        x0 = targets::blr_init_particles(model, cfg.n_particles, rng);
    } else {
        const Vec mean0 = broadcast(cfg.init_mean, dim, "init_mean");
        x0 = cfg.init_std * rng.normal_matrix(cfg.n_particles, dim);
        x0.rowwise() += mean0.transpose();
    }

    auto state = dynamics::make_state(x0, cfg.seed);
    state.rng = rng;

    // Bandwidth policy state.
    kernel::KernelConfig kcfg;
    kcfg.policy = cfg.bandwidth_policy;
    kcfg.he_trust_ratio = cfg.he_trust_ratio;
    kcfg.he_probe_delta = cfg.he_probe_delta;
    double h_he = 0.0;
    if (cfg.bandwidth_policy == kernel::BandwidthPolicy::HE)
        h_he = cfg.h_init > 0.0 ? cfg.h_init : kernel::median_bandwidth(x0);

    // The field closure: resolves the bandwidth for the evaluation ensemble,
    // evaluates the score oracle, applies the estimator. The svgd step size
    // and the gfsf ridge are stated in unit-diagonal kernel units in the
    // config, so both are rescaled by the kernel diagonal (2*pi*h)^(-D/2).
    double cur_h = 0.0;
    double cur_field_norm = 0.0;
    const dynamics::FieldFn field = [&](const Mat& z) -> Mat {
        double h = 0.0;
        switch (cfg.bandwidth_policy) {
            case kernel::BandwidthPolicy::Fixed: h = cfg.h_init; break;
            case kernel::BandwidthPolicy::Median: h = kernel::median_bandwidth(z); break;
            case kernel::BandwidthPolicy::HE: h = h_he; break;
        }
        cur_h = h;
        const Mat grads = fields::eval_oracle(z, oracle);
        Mat v;
        switch (cfg.estimator) {
            case Estimator::Svgd:
                v = fields::svgd_field(z, grads, h) / kernel::self_value(h, z.cols());
                break;
            case Estimator::Blob:
                v = fields::blob_field(z, grads, h);
                break;
            case Estimator::Gfsd:
                v = fields::gfsd_field(z, grads, h);
                break;
            case Estimator::Gfsf:
                v = fields::gfsf_field(z, grads, h,
                                       cfg.gfsf_gamma * kernel::self_value(h, z.cols()));
                break;
        }
        cur_field_norm = v.rowwise().norm().mean();
        return v;
    };

    // Output sinks.
    const bool writing = !cfg.out_dir.empty();
    std::ofstream metrics_out;
    std::filesystem::path out_root;
    if (writing) {
        out_root = cfg.out_dir;
        std::filesystem::create_directories(out_root);
        std::ofstream resolved(out_root / "resolved.cfg");
        resolved << resolved_config_text(cfg);
        metrics_out.open(out_root / "metrics.jsonl");
        if (!metrics_out)
            throw InvalidInputError("cannot open metrics file in " + cfg.out_dir);
        if (cfg.snapshot_stride > 0) write_csv(out_root / "snap_0.csv", state.x);
    }

    const auto fill_metrics = [&](const Mat& x, MetricRecord& rec) {
        switch (cfg.target) {
            case TargetKind::Gaussian: {
                bool jit = false;
                rec.values.emplace_back("w2",
                                        gaussian_w2_proxy(x, gauss_mu, gauss_sigma, &jit));
                rec.w2_jitter = jit;
                break;
            }
            case TargetKind::ToyBimodal: {
                rec.values.emplace_back("mode_balance", mode_balance(x));
                if (x.rows() >= 2)
                    rec.values.emplace_back("mean_nn_dist", mean_nn_distance(x));
                break;
            }
            case TargetKind::Blr:
            case TargetKind::BlrSynthetic: {
                const auto m = targets::blr_metrics(x, test);
                rec.values.emplace_back("accuracy", m.accuracy);
                rec.values.emplace_back("log_likelihood", m.mean_log_likelihood);
                break;
            }
        }
    };

    RunResult res;
    for (long k = 1; k <= cfg.n_iterations; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (is_blr)
                batch = state.rng.sample_without_replacement(model.train.size(),
                                                             cfg.blr_batch_size);
            if (cfg.bandwidth_policy == kernel::BandwidthPolicy::HE)
                h_he = kernel::select_bandwidth_he(state.x, h_he, kcfg);
            dynamics::step(state, field, cfg.accel);
        } catch (const NumericBlowupError& e) {
            res.status = RunResult::Status::BlowUp;
            res.message = e.what();
            break;
        }
        res.completed_iterations = k;

        if (k % cfg.metrics_stride == 0) {
            MetricRecord rec;
            rec.iter = k;
            rec.h = cur_h;
            rec.field_norm = cur_field_norm;
            fill_metrics(state.x, rec);
            if (cfg.record_timing) {
                const auto t1 = std::chrono::steady_clock::now();
                rec.wall_ms =
                    std::chrono::duration<double, std::milli>(t1 - t0).count();
            }
            res.metrics.push_back(rec);
            if (writing) {
                metrics_out << record_to_json(rec, cfg.record_timing).dump() << "\n";
                metrics_out.flush();
            }
        }
        if (writing && cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0)
            write_csv(out_root / ("snap_" + std::to_string(k) + ".csv"), state.x);
    }

    res.final_particles = state.x;
    if (res.completed_iterations > 0) {
        res.final_h = cur_h;
    } else {
        switch (cfg.bandwidth_policy) {
            case kernel::BandwidthPolicy::Fixed: res.final_h = cfg.h_init; break;
            case kernel::BandwidthPolicy::HE: res.final_h = h_he; break;
            case kernel::BandwidthPolicy::Median:
                res.final_h =
                    state.x.rows() >= 2 ? kernel::median_bandwidth(state.x) : 0.0;
                break;
        }
    }

    if (writing) {
        write_csv(out_root / "final.csv", state.x);
        ordered_json status;
        status["status"] =
            res.status == RunResult::Status::Success ? "success" : "blowup";
        status["completed_iterations"] = res.completed_iterations;
        if (!res.message.empty()) status["message"] = res.message;
        std::ofstream status_out(out_root / "status.json");
        status_out << status.dump(2) << "\n";
    }
    return res;
}

}  // namespace parvi::runner
