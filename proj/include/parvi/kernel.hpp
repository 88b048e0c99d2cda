#pragma once

#include "parvi/types.hpp"

namespace parvi::kernel {

// Single kernel convention used throughout the library:
//   K_h(x, y) = (2*pi*h)^(-D/2) * exp(-||x - y||^2 / (2h))
// h is the Gaussian variance (units of squared length).

enum class BandwidthPolicy { Fixed, Median, HE };

struct KernelConfig {
    double h = 1.0;
    BandwidthPolicy policy = BandwidthPolicy::Median;
    double he_trust_ratio = 2.0;   // per-update clip: h stays in [h/ratio, h*ratio]
    double he_probe_delta = 0.1;   // probe point at ln(h) + ln(1 + delta)
};

struct KernelMatrices {
    Mat K;        // N x N, K(i,j) = K_h(x_i, x_j)
    Mat Kp_rows;  // N x D, row i = sum_j (x_i - x_j)/h * K(i,j)
                  // (transpose of the D x N gradient-sum matrix K')
};

// Normalizing factor (2*pi*h)^(-D/2), the kernel's value at zero distance.
double self_value(double h, Index dim);

double eval_kernel(const Vec& x, const Vec& y, double h);

KernelMatrices kernel_matrices(const Mat& particles, double h);

// h = median(pairwise squared distances) / (2 * ln(N + 1)).
double median_bandwidth(const Mat& particles);

struct HeObjective {
    double J;       // sum_k g_k(h)^2
    double Jprime;  // dJ/dh = sum_k 2 g_k g'_k
};

// Consistency of the smoothed-density dynamics with heat-equation density
// evolution, as a function of the bandwidth. Smaller is better.
HeObjective he_objective(const Mat& particles, double h);

// One quadratic-interpolation descent update on J in u = ln h: slope from
// J', curvature from a probe at u + ln(1 + delta), candidate clipped to
// [h/ratio, h*ratio]. Falls back to h_prev unless the candidate strictly
// decreases J.
double select_bandwidth_he(const Mat& particles, double h_prev, const KernelConfig& cfg = {});

}  // namespace parvi::kernel
