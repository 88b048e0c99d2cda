#pragma once

#include <cstdint>

#include "parvi/rng.hpp"
#include "parvi/types.hpp"

namespace parvi::dynamics {

// A field function maps the evaluation ensemble (N x D) to an update
// direction per particle (N x D).
using FieldFn = std::function<Mat(const Mat&)>;

enum class Method { WGD, PO, WAG, WNes };

struct AccelParams {
    Method method = Method::WGD;
    double eps0 = 0.0;              // base step size, > 0
    double schedule_exponent = 0.0; // power-decay exponent, >= 0
    long schedule_burn_in = 0;      // steps at eps0 before decay starts
    double alpha = 0.0;             // WAG acceleration factor, > 3
    double mu = 0.0;                // WNes gradient-Lipschitz bound, > 0
    double beta = 0.0;              // WNes shrinkage, > 0
    double po_momentum = 0.0;       // PO momentum coefficient, in [0, 1)
    double po_noise_std = 0.0;      // PO injected-noise std, >= 0
    double adagrad_rho = 0.9;       // AdaGrad-momentum remember rate, in [0, 1]
    // Recompute WNes c1, c2 from the decayed step each iteration (default)
    // or freeze them at eps0.
    bool freeze_coefficients = false;
    // Test hook: zero the WAG/WNes acceleration terms and re-sync y = x,
    // which must reproduce the WGD trajectory bitwise.
    bool disable_acceleration = false;
};

struct DynamicsState {
    Mat x;            // current ensemble
    Mat y;            // auxiliary ensemble (WAG/WNes); kept equal to x otherwise
    Mat x_prev;       // previous ensemble (PO/WAG/WNes momentum)
    long k = 0;       // completed steps
    Mat adagrad_acc;  // squared-field accumulator, empty until first use
    Rng rng;          // run-owned generator (PO noise, minibatch sampling)

    DynamicsState() = default;
};

DynamicsState make_state(const Mat& x0, std::uint64_t seed);

// eps_k = eps0 for k < burn_in, else eps0 * (k - burn_in + 1)^(-exponent).
// k counts completed steps, so the first step uses k = 0.
double step_size(const AccelParams& params, long k);

struct WnesCoefficients {
    double c1;
    double c2;
    double combined;  // c1 * (c2 - 1)
};

// Coefficients from (eps, beta, mu):
//   s  = sqrt(beta^2 + 4(1+beta) mu eps)
//   a  = (s - beta)/2,  g = mu (s - beta)/(s + beta)
//   c1 = a g / (g + a mu),  c2 = 1/a
// `combined` is the composed product c1 (c2 - 1); the equivalent closed form
//   1 + beta - 2(1+beta)(2+beta) mu eps / (s - beta + 2(1+beta) mu eps)
// is exposed separately for cross-checking.
WnesCoefficients wnes_coefficients(double eps, double beta, double mu);
double wnes_combined_closed_form(double eps, double beta, double mu);

// One step each. All steppers evaluate the field exactly once, validate it
// (and the updated ensemble) for finiteness, then commit; on non-finite
// values they throw NumericBlowupError and leave the state untouched.
void wgd_step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params);
void po_step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params);
void wag_step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params);
void wnes_step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params);
void adagrad_momentum_step(DynamicsState& state, const FieldFn& field_fn,
                           const AccelParams& params);

// Dispatch on params.method.
void step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params);

}  // namespace parvi::dynamics
