#include <cmath>
#include <limits>

#include "doctest.h"
#include "parvi/dynamics.hpp"
#include "parvi/rng.hpp"

using namespace parvi;

namespace {

Mat random_ensemble(std::uint64_t seed, Index n, Index d) {
    Rng rng(seed);
    return rng.normal_matrix(n, d);
}

const dynamics::FieldFn kContraction = [](const Mat& z) { return Mat(-z); };
const dynamics::FieldFn kZeroField = [](const Mat& z) {
    return Mat(Mat::Zero(z.rows(), z.cols()));
};

dynamics::AccelParams base_params(dynamics::Method m, double eps0) {
    dynamics::AccelParams p;
    p.method = m;
    p.eps0 = eps0;
    return p;
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("step_size schedule") {
    dynamics::AccelParams p = base_params(dynamics::Method::WGD, 0.2);
    p.schedule_burn_in = 2;
    p.schedule_exponent = 0.5;

    CHECK(dynamics::step_size(p, 0) == doctest::Approx(0.2));
    CHECK(dynamics::step_size(p, 1) == doctest::Approx(0.2));
    CHECK(dynamics::step_size(p, 2) == doctest::Approx(0.2));
    CHECK(dynamics::step_size(p, 3) == doctest::Approx(0.2 / std::sqrt(2.0)));
    CHECK(dynamics::step_size(p, 11) == doctest::Approx(0.2 / std::sqrt(10.0)));

    p.schedule_exponent = 0.0;
    CHECK(dynamics::step_size(p, 1000) == doctest::Approx(0.2));
}

TEST_CASE("wgd_step is explicit Euler on the field") {
    const Mat x0 = random_ensemble(1, 4, 2);
    auto state = dynamics::make_state(x0, 0);
    const auto p = base_params(dynamics::Method::WGD, 0.1);

    dynamics::wgd_step(state, kContraction, p);
    CHECK(state.x.isApprox(0.9 * x0, 1e-15));
    CHECK(state.y.isApprox(state.x, 0.0));
    CHECK(state.x_prev.isApprox(x0, 0.0));
    CHECK(state.k == 1);

    dynamics::wgd_step(state, kContraction, p);
    CHECK(state.x.isApprox(0.81 * x0, 1e-15));
    CHECK(state.k == 2);
}

TEST_CASE("po_step with zero noise adds heavy-ball momentum") {
    const Mat x0 = random_ensemble(2, 3, 2);
    auto state = dynamics::make_state(x0, 0);
    auto p = base_params(dynamics::Method::PO, 0.1);
    p.po_momentum = 0.5;

    // First step: x_prev == x0, so the momentum term vanishes.
    dynamics::po_step(state, kContraction, p);
    const Mat x1 = 0.9 * x0;
    CHECK(state.x.isApprox(x1, 1e-15));

    dynamics::po_step(state, kContraction, p);
    const Mat x2 = x1 - 0.1 * x1 + 0.5 * (x1 - x0);
    CHECK(state.x.isApprox(x2, 1e-14));
}

TEST_CASE("po_step leaves the generator untouched when noise is disabled") {
    auto state = dynamics::make_state(random_ensemble(3, 3, 2), 42);
    auto p = base_params(dynamics::Method::PO, 0.05);
    p.po_noise_std = 0.0;
    dynamics::po_step(state, kContraction, p);
    dynamics::po_step(state, kContraction, p);

    Rng fresh(42);
    CHECK(state.rng.raw() == fresh.raw());
}

TEST_CASE("po_step noise is reproducible by seed") {
    auto p = base_params(dynamics::Method::PO, 0.05);
    p.po_noise_std = 0.3;

    auto run = [&](std::uint64_t seed) {
        auto state = dynamics::make_state(random_ensemble(4, 5, 2), seed);
        for (int i = 0; i < 3; ++i) dynamics::po_step(state, kContraction, p);
        return state.x;
    };
    CHECK(run(7).isApprox(run(7), 0.0));
    CHECK_FALSE(run(7).isApprox(run(8), 1e-12));
}

TEST_CASE("wag_step follows the lookahead recurrence") {
    const Mat x0 = random_ensemble(5, 4, 2);
    auto state = dynamics::make_state(x0, 0);
    auto p = base_params(dynamics::Method::WAG, 0.05);
    p.alpha = 4.0;

    Mat x = x0, y = x0;
    for (long k = 0; k < 5; ++k) {
        dynamics::wag_step(state, kContraction, p);
        const double kn = static_cast<double>(k + 1);
        const Mat v = -y;
        const Mat xn = y + p.eps0 * v;
        const Mat yn = xn + (kn - 1.0) / kn * (y - x) +
                       (kn + p.alpha - 2.0) / kn * p.eps0 * v;
        x = xn;
        y = yn;
        CHECK(state.x.isApprox(x, 1e-13));
        CHECK(state.y.isApprox(y, 1e-13));
    }
}

TEST_CASE("wag_step requires alpha above three") {
    auto state = dynamics::make_state(random_ensemble(6, 3, 2), 0);
    auto p = base_params(dynamics::Method::WAG, 0.05);
    p.alpha = 3.0;
    CHECK_THROWS_AS(dynamics::wag_step(state, kContraction, p), InvalidParameterError);
    p.alpha = 2.5;
    CHECK_THROWS_AS(dynamics::wag_step(state, kContraction, p), InvalidParameterError);
}

TEST_CASE("wnes_coefficients composed and closed forms agree") {
    for (const double eps : {1e-6, 1e-3, 0.05, 0.5}) {
        for (const double beta : {0.1, 1.0, 5.0}) {
            for (const double mu : {0.1, 1.0, 50.0}) {
                const auto c = dynamics::wnes_coefficients(eps, beta, mu);
                const double closed = dynamics::wnes_combined_closed_form(eps, beta, mu);
                CHECK(std::abs(c.combined - closed) <=
                      1e-12 * std::max(1.0, std::abs(closed)));
                CHECK(c.c1 > 0.0);
                CHECK(c.c1 < 1.0);
                if (mu * eps < 1.0) CHECK(c.c2 > 1.0);
                else CHECK(c.c2 <= 1.0);
            }
        }
    }
}

TEST_CASE("wnes_coefficients vanishing step size limit") {
    for (const double beta : {0.2, 1.0, 3.0}) {
        const double limit = 1.0 / (1.0 + beta);
        const auto c = dynamics::wnes_coefficients(1e-12, beta, 10.0);
        CHECK(std::abs(c.combined - limit) <= 1e-6);
    }
}

TEST_CASE("wnes_coefficients rejects non-positive parameters") {
    CHECK_THROWS_AS(dynamics::wnes_coefficients(0.0, 0.5, 1.0), InvalidParameterError);
    CHECK_THROWS_AS(dynamics::wnes_coefficients(0.1, 0.0, 1.0), InvalidParameterError);
    CHECK_THROWS_AS(dynamics::wnes_coefficients(0.1, 0.5, -1.0), InvalidParameterError);
}

TEST_CASE("wnes_step follows the lookahead recurrence") {
    const Mat x0 = random_ensemble(7, 4, 2);
    auto state = dynamics::make_state(x0, 0);
    auto p = base_params(dynamics::Method::WNes, 0.05);
    p.mu = 10.0;
    p.beta = 0.2;

    Mat x = x0, y = x0;
    for (long k = 0; k < 5; ++k) {
        dynamics::wnes_step(state, kContraction, p);
        const double combined = dynamics::wnes_coefficients(0.05, 0.2, 10.0).combined;
        const Mat xn = y + 0.05 * (-y);
        const Mat yn = xn + combined * (xn - x);
        x = xn;
        y = yn;
        CHECK(state.x.isApprox(x, 1e-13));
        CHECK(state.y.isApprox(y, 1e-13));
    }
}

TEST_CASE("wnes_step recomputes coefficients when the schedule decays") {
    const Mat x0 = random_ensemble(8, 3, 2);
    auto p = base_params(dynamics::Method::WNes, 0.05);
    p.mu = 10.0;
    p.beta = 0.2;
    p.schedule_exponent = 0.7;

    auto frozen = p;
    frozen.freeze_coefficients = true;

    auto s1 = dynamics::make_state(x0, 0);
    auto s2 = dynamics::make_state(x0, 0);
    for (int i = 0; i < 6; ++i) {
        dynamics::wnes_step(s1, kContraction, p);
        dynamics::wnes_step(s2, kContraction, frozen);
    }
    CHECK_FALSE(s1.x.isApprox(s2.x, 1e-12));
}

TEST_CASE("accelerated methods with acceleration disabled reduce to wgd bitwise") {
    const Mat x0 = random_ensemble(9, 6, 3);

    auto reference = dynamics::make_state(x0, 0);
    const auto wgd = base_params(dynamics::Method::WGD, 0.07);
    for (int i = 0; i < 10; ++i) dynamics::wgd_step(reference, kContraction, wgd);

    auto check_matches = [&](dynamics::AccelParams p) {
        p.eps0 = 0.07;
        p.disable_acceleration = true;
        auto state = dynamics::make_state(x0, 0);
        for (int i = 0; i < 10; ++i) dynamics::step(state, kContraction, p);
        for (Index r = 0; r < x0.rows(); ++r)
            for (Index c = 0; c < x0.cols(); ++c)
                CHECK(state.x(r, c) == reference.x(r, c));
    };

    auto wag = base_params(dynamics::Method::WAG, 0.07);
    wag.alpha = 6.0;
    check_matches(wag);

    auto wnes = base_params(dynamics::Method::WNes, 0.07);
    wnes.mu = 10.0;
    wnes.beta = 0.2;
    check_matches(wnes);

    auto po = base_params(dynamics::Method::PO, 0.07);
    po.po_momentum = 0.0;
    po.po_noise_std = 0.0;
    check_matches(po);
}

TEST_CASE("zero field leaves every method stationary") {
    const Mat x0 = random_ensemble(10, 5, 2);

    auto check_stationary = [&](dynamics::AccelParams p) {
        auto state = dynamics::make_state(x0, 3);
        for (int i = 0; i < 4; ++i) dynamics::step(state, kZeroField, p);
        CHECK(state.x.isApprox(x0, 0.0));
    };

    check_stationary(base_params(dynamics::Method::WGD, 0.1));
    auto po = base_params(dynamics::Method::PO, 0.1);
    po.po_momentum = 0.6;
    check_stationary(po);
    auto wag = base_params(dynamics::Method::WAG, 0.1);
    wag.alpha = 5.0;
    check_stationary(wag);
    auto wnes = base_params(dynamics::Method::WNes, 0.1);
    wnes.mu = 1.0;
    wnes.beta = 0.3;
    check_stationary(wnes);
}

TEST_CASE("adagrad_momentum_step normalizes per coordinate") {
    Mat x0(1, 2);
    x0 << 1.0, -2.0;
    auto state = dynamics::make_state(x0, 0);
    auto p = base_params(dynamics::Method::WGD, 0.1);
    p.adagrad_rho = 0.9;

    dynamics::adagrad_momentum_step(state, kContraction, p);
    // k = 0: acc = v^2, so each coordinate moves by eps * v / (1e-6 + |v|).
    const double d0 = 0.1 * (-1.0) / (1e-6 + 1.0);
    const double d1 = 0.1 * (2.0) / (1e-6 + 2.0);
    CHECK(state.x(0, 0) == doctest::Approx(1.0 + d0).epsilon(1e-12));
    CHECK(state.x(0, 1) == doctest::Approx(-2.0 + d1).epsilon(1e-12));

    const Mat x1 = state.x;
    dynamics::adagrad_momentum_step(state, kContraction, p);
    const Mat v = -x1;
    const Mat acc = 0.9 * (x0.cwiseProduct(x0)) + 0.1 * v.cwiseProduct(v);
    const Mat denom = acc.cwiseSqrt() + Mat::Constant(1, 2, 1e-6);
    const Mat expect = x1 + 0.1 * v.cwiseQuotient(denom);
    CHECK(state.x.isApprox(expect, 1e-12));
}

TEST_CASE("non-finite fields abort without committing state") {
    const Mat x0 = random_ensemble(11, 3, 2);
    auto state = dynamics::make_state(x0, 0);
    const dynamics::FieldFn bad = [](const Mat& z) {
        Mat v = z;
        v(0, 0) = std::numeric_limits<double>::quiet_NaN();
        return v;
    };
    CHECK_THROWS_AS(dynamics::step(state, bad, base_params(dynamics::Method::WGD, 0.1)),
                    NumericBlowupError);
    CHECK(state.x.isApprox(x0, 0.0));
    CHECK(state.k == 0);
}

TEST_CASE("step dispatches on the configured method") {
    const Mat x0 = random_ensemble(12, 3, 2);
    auto p = base_params(dynamics::Method::WNes, 0.05);
    p.mu = 10.0;
    p.beta = 0.2;

    auto via_dispatch = dynamics::make_state(x0, 0);
    auto direct = dynamics::make_state(x0, 0);
    dynamics::step(via_dispatch, kContraction, p);
    dynamics::wnes_step(direct, kContraction, p);
    CHECK(via_dispatch.x.isApprox(direct.x, 0.0));
    CHECK(via_dispatch.y.isApprox(direct.y, 0.0));
}

}  // TEST_SUITE
