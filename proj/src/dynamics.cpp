#include "parvi/dynamics.hpp"

#include <cmath>

namespace parvi::dynamics {

namespace {

void check_common(const AccelParams& params) {
    if (!(params.eps0 > 0.0) || !std::isfinite(params.eps0))
        throw InvalidParameterError("step size eps0 must be positive and finite");
    if (params.schedule_exponent < 0.0)
        throw InvalidParameterError("schedule_exponent must be nonnegative");
    if (params.schedule_burn_in < 0)
        throw InvalidParameterError("schedule_burn_in must be nonnegative");
}

Mat eval_field(const Mat& at, const FieldFn& field_fn) {
    Mat v = field_fn(at);
    if (v.rows() != at.rows() || v.cols() != at.cols())
        throw InvalidInputError("field function returned a mismatched shape");
    if (!v.allFinite())
        throw NumericBlowupError("field evaluation produced non-finite values");
    return v;
}

void require_finite_update(const Mat& x) {
    if (!x.allFinite())
        throw NumericBlowupError("particle update produced non-finite values");
}

}  // namespace

DynamicsState make_state(const Mat& x0, std::uint64_t seed) {
    require_finite(x0, "initial ensemble");
    DynamicsState state;
    state.x = x0;
    state.y = x0;
    state.x_prev = x0;
    state.k = 0;
    state.rng = Rng(seed);
    return state;
}

double step_size(const AccelParams& params, long k) {
    check_common(params);
    if (k < 0) throw InvalidParameterError("step index must be nonnegative");
    if (k < params.schedule_burn_in) return params.eps0;
    const double t = static_cast<double>(k - params.schedule_burn_in + 1);
    return params.eps0 * std::pow(t, -params.schedule_exponent);
}

WnesCoefficients wnes_coefficients(double eps, double beta, double mu) {
    if (!(eps > 0.0) || !(beta > 0.0) || !(mu > 0.0) || !std::isfinite(eps) ||
        !std::isfinite(beta) || !std::isfinite(mu))
        throw InvalidParameterError("wnes_coefficients requires positive finite (eps, beta, mu)");
    const double s = std::sqrt(beta * beta + 4.0 * (1.0 + beta) * mu * eps);
    // s - beta evaluated as (s^2 - beta^2)/(s + beta); the direct difference
    // cancels catastrophically when mu*eps << beta^2.
    const double s_minus_beta = 4.0 * (1.0 + beta) * mu * eps / (s + beta);
    const double a = 0.5 * s_minus_beta;
    const double g = mu * s_minus_beta / (s + beta);
    WnesCoefficients out;
    out.c1 = a * g / (g + a * mu);
    out.c2 = 1.0 / a;
    out.combined = out.c1 * (out.c2 - 1.0);
    return out;
}

double wnes_combined_closed_form(double eps, double beta, double mu) {
    const double s = std::sqrt(beta * beta + 4.0 * (1.0 + beta) * mu * eps);
    const double me = mu * eps;
    const double s_minus_beta = 4.0 * (1.0 + beta) * me / (s + beta);
    return 1.0 + beta -
           2.0 * (1.0 + beta) * (2.0 + beta) * me / (s_minus_beta + 2.0 * (1.0 + beta) * me);
}

void wgd_step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params) {
    check_common(params);
    const double eps = step_size(params, state.k);
    const Mat v = eval_field(state.x, field_fn);
    Mat xn = state.x + eps * v;
    require_finite_update(xn);
    state.x_prev = std::move(state.x);
    state.x = std::move(xn);
    state.y = state.x;
    state.k += 1;
}

void po_step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params) {
    check_common(params);
    if (params.po_momentum < 0.0 || params.po_momentum >= 1.0)
        throw InvalidParameterError("po_momentum must lie in [0, 1)");
    if (params.po_noise_std < 0.0)
        throw InvalidParameterError("po_noise_std must be nonnegative");

    const double eps = step_size(params, state.k);
    const Mat v = eval_field(state.x, field_fn);
    Rng rng_next = state.rng;
    Mat perturbed = v;
    if (params.po_noise_std > 0.0)
        perturbed += params.po_noise_std * rng_next.normal_matrix(v.rows(), v.cols());
    Mat xn = state.x + eps * perturbed + params.po_momentum * (state.x - state.x_prev);
    require_finite_update(xn);
    state.rng = rng_next;
    state.x_prev = std::move(state.x);
    state.x = std::move(xn);
    state.y = state.x;
    state.k += 1;
}

void wag_step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params) {
    check_common(params);
    if (!(params.alpha > 3.0))
        throw InvalidParameterError("wag requires acceleration factor alpha > 3");

    const double eps = step_size(params, state.k);
    const double kn = static_cast<double>(state.k + 1);
    const Mat v = eval_field(state.y, field_fn);
    Mat xn = state.y + eps * v;
    Mat yn;
    if (params.disable_acceleration) {
        yn = xn;
    } else {
        yn = xn + ((kn - 1.0) / kn) * (state.y - state.x) +
             ((kn + params.alpha - 2.0) / kn) * eps * v;
    }
    require_finite_update(xn);
    require_finite_update(yn);
    state.x_prev = std::move(state.x);
    state.x = std::move(xn);
    state.y = std::move(yn);
    state.k += 1;
}

void wnes_step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params) {
    check_common(params);
    const double eps = step_size(params, state.k);
    const double eps_coeff = params.freeze_coefficients ? params.eps0 : eps;
    const double combined =
        params.disable_acceleration
            ? 0.0
            : wnes_coefficients(eps_coeff, params.beta, params.mu).combined;

    const Mat v = eval_field(state.y, field_fn);
    Mat xn = state.y + eps * v;
    Mat yn = params.disable_acceleration ? xn : (xn + combined * (xn - state.x)).eval();
    require_finite_update(xn);
    require_finite_update(yn);
    state.x_prev = std::move(state.x);
    state.x = std::move(xn);
    state.y = std::move(yn);
    state.k += 1;
}

void adagrad_momentum_step(DynamicsState& state, const FieldFn& field_fn,
                           const AccelParams& params) {
    check_common(params);
    if (params.adagrad_rho < 0.0 || params.adagrad_rho > 1.0)
        throw InvalidParameterError("adagrad_rho must lie in [0, 1]");

    const double eps = step_size(params, state.k);
    const Mat v = eval_field(state.x, field_fn);
    Mat acc;
    if (state.k == 0 || state.adagrad_acc.size() == 0)
        acc = v.cwiseProduct(v);
    else
        acc = params.adagrad_rho * state.adagrad_acc +
              (1.0 - params.adagrad_rho) * v.cwiseProduct(v);
    const Mat denom = acc.cwiseSqrt().array() + 1e-6;
    Mat xn = state.x + eps * v.cwiseQuotient(denom);
    require_finite_update(xn);
    state.adagrad_acc = std::move(acc);
    state.x_prev = std::move(state.x);
    state.x = std::move(xn);
    state.y = state.x;
    state.k += 1;
}

void step(DynamicsState& state, const FieldFn& field_fn, const AccelParams& params) {
    switch (params.method) {
        case Method::WGD: wgd_step(state, field_fn, params); break;
        case Method::PO: po_step(state, field_fn, params); break;
        case Method::WAG: wag_step(state, field_fn, params); break;
        case Method::WNes: wnes_step(state, field_fn, params); break;
    }
}

}  // namespace parvi::dynamics
