#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "parvi/dynamics.hpp"
#include "parvi/kernel.hpp"
#include "parvi/types.hpp"

namespace parvi::runner {

enum class Estimator { Svgd, Blob, Gfsd, Gfsf };
enum class TargetKind { Gaussian, ToyBimodal, Blr, BlrSynthetic };
enum class InitKind { Gaussian, Prior };

struct RunConfig {
    Estimator estimator = Estimator::Blob;
    dynamics::Method method = dynamics::Method::WGD;
    dynamics::AccelParams accel;

    kernel::BandwidthPolicy bandwidth_policy = kernel::BandwidthPolicy::Median;
    double h_init = 0.0;  // required for fixed; optional HE warm start (default: median at start)
    double he_trust_ratio = 2.0;
    double he_probe_delta = 0.1;
    double gfsf_gamma = 1e-5;  // ridge relative to the kernel diagonal (2*pi*h)^(-D/2)

    TargetKind target = TargetKind::Gaussian;
    Index gaussian_dim = 1;
    Vec gaussian_mean;   // broadcast to gaussian_dim at validation
    double gaussian_std = 1.0;

    InitKind init = InitKind::Gaussian;  // Prior is valid (and default) for BLR only
    Vec init_mean;       // broadcast to the particle dimension
    double init_std = 1.0;

    std::string dataset_path;
    bool csv_has_header = false;
    Index blr_batch_size = 50;
    double blr_a0 = 1.0;
    double blr_b0 = 100.0;
    std::uint64_t split_seed = 0;
    double train_fraction = 0.8;
    Index blr_m = 0;              // synthetic target: rows
    Index blr_dim = 0;            // synthetic target: raw feature dim (before bias)
    double blr_w_scale = 2.0;     // ground truth w* = w_scale / sqrt(d) per coordinate
    double blr_intercept = 0.3;
    std::uint64_t blr_data_seed = 0;

    Index n_particles = 0;
    long n_iterations = 0;
    std::uint64_t seed = 0;
    long snapshot_stride = 0;  // 0 disables snapshots
    long metrics_stride = 1;
    std::string out_dir;       // empty: no files written
    bool record_timing = false;  // adds wall_ms to records; breaks byte-reproducibility
};

struct MetricRecord {
    long iter = 0;
    double h = 0.0;
    double field_norm = 0.0;
    std::vector<std::pair<std::string, double>> values;  // target metrics, fixed order
    bool w2_jitter = false;
    double wall_ms = 0.0;  // populated only when record_timing
};

struct RunResult {
    enum class Status { Success, BlowUp };
    Status status = Status::Success;
    long completed_iterations = 0;
    Mat final_particles;
    double final_h = 0.0;
    std::vector<MetricRecord> metrics;
    std::string message;
};

// Parse + validate the flat key=value config format ('#' comments, blank
// lines allowed). Throws ValidationError listing every violation.
RunConfig validate_config(const std::string& text);
RunConfig validate_config_file(const std::string& path);

// Resolved key=value echo of a validated config, defaults applied.
std::string resolved_config_text(const RunConfig& cfg);

// Execute the configured run. Writes (when out_dir is set) metrics.jsonl,
// snap_{iter}.csv at iteration 0 and every snapshot_stride steps, final.csv,
// resolved.cfg, and status.json. Numeric blow-up flushes partial output and
// is reported through the returned status, not an exception.
RunResult run_experiment(const RunConfig& cfg);

// Bures-Wasserstein distance between the ensemble's moment-matched Gaussian
// and N(mu, sigma). A degenerate empirical covariance is jittered by 1e-8
// and flagged through *jittered when provided.
double gaussian_w2_proxy(const Mat& particles, const Vec& mu, const Mat& sigma,
                         bool* jittered = nullptr);

// Fraction of particles with first coordinate >= 0 (ties count as positive).
double mode_balance(const Mat& particles);

// Mean over particles of the distance to the nearest other particle.
double mean_nn_distance(const Mat& particles);

}  // namespace parvi::runner
