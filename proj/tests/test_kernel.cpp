#include <cmath>

#include "doctest.h"
#include "parvi/kernel.hpp"
#include "parvi/rng.hpp"

using namespace parvi;

namespace {

Mat random_ensemble(std::uint64_t seed, Index n, Index d, double scale = 1.0) {
    Rng rng(seed);
    return scale * rng.normal_matrix(n, d);
}

// Independent reference for the bandwidth objective, written as plain loops
// against the definition: per particle, the squared mismatch between the
// kernel density estimate's diffusion term and its transport term.
//   u(x)      = sum_j e(x, x_j),  e(x, y) = h^{-D/2} exp(-||x-y||^2 / (2h))
//   lap_k     = sum_j e_kj (r2_kj / h^2 - D / h)
//   T_j       = sum_l (x_l - x_j) e_jl
//   dot_k     = sum_j e_kj (x_k - x_j) . T_j / (h^2 S_j)
//   g_k       = h^2 (lap_k + dot_k),  J = sum_k g_k^2
double reference_he_j(const Mat& x, double h) {
    const Index n = x.rows();
    const Index d = x.cols();
    const auto e = [&](Index i, Index j) {
        return std::pow(h, -0.5 * static_cast<double>(d)) *
               std::exp(-(x.row(i) - x.row(j)).squaredNorm() / (2.0 * h));
    };
    Vec s = Vec::Zero(n);
    Mat t = Mat::Zero(n, d);
    for (Index j = 0; j < n; ++j) {
        for (Index l = 0; l < n; ++l) {
            const double w = e(j, l);
            s(j) += w;
            t.row(j) += w * (x.row(l) - x.row(j));
        }
    }
    double j_total = 0.0;
    for (Index k = 0; k < n; ++k) {
        double lap = 0.0;
        double dot = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double w = e(k, j);
            const double r2 = (x.row(k) - x.row(j)).squaredNorm();
            lap += w * (r2 / (h * h) - static_cast<double>(d) / h);
            dot += w * (x.row(k) - x.row(j)).dot(t.row(j)) / (h * h * s(j));
        }
        const double g = h * h * (lap + dot);
        j_total += g * g;
    }
    return j_total;
}

}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("eval_kernel matches hand values") {
    CHECK(kernel::eval_kernel(Vec::Zero(1), Vec::Zero(1), 1.0) ==
          doctest::Approx(0.3989422804014327).epsilon(1e-12));

    Vec x(1), y(1);
    x << 0.0;
    y << 1.0;
    CHECK(kernel::eval_kernel(x, y, 0.5) ==
          doctest::Approx(0.2075537487102974).epsilon(1e-12));
    CHECK(kernel::eval_kernel(x, y, 0.5) == kernel::eval_kernel(y, x, 0.5));

    CHECK(kernel::self_value(0.5, 1) ==
          doctest::Approx(std::pow(2.0 * M_PI * 0.5, -0.5)).epsilon(1e-14));
    CHECK(kernel::self_value(2.0, 3) ==
          doctest::Approx(std::pow(4.0 * M_PI, -1.5)).epsilon(1e-14));
}

TEST_CASE("eval_kernel rejects bad inputs") {
    CHECK_THROWS_AS(kernel::eval_kernel(Vec::Zero(2), Vec::Zero(2), 0.0),
                    InvalidParameterError);
    CHECK_THROWS_AS(kernel::eval_kernel(Vec::Zero(2), Vec::Zero(2), -1.0),
                    InvalidParameterError);
    CHECK_THROWS_AS(kernel::eval_kernel(Vec::Zero(2), Vec::Zero(3), 1.0),
                    InvalidInputError);
}

TEST_CASE("kernel_matrices single particle") {
    Mat x(1, 3);
    x << 0.4, -1.0, 2.0;
    const auto km = kernel::kernel_matrices(x, 0.7);
    CHECK(km.K.rows() == 1);
    CHECK(km.K(0, 0) == doctest::Approx(kernel::self_value(0.7, 3)).epsilon(1e-14));
    CHECK(km.Kp_rows.row(0).norm() == 0.0);
}

TEST_CASE("kernel_matrices mirror pair") {
    const double a = 0.5;
    const double h = 0.8;
    Mat x(2, 1);
    x << a, -a;
    const auto km = kernel::kernel_matrices(x, h);
    const double k12 = kernel::eval_kernel(x.row(0).transpose(), x.row(1).transpose(), h);
    CHECK(km.K(0, 1) == doctest::Approx(k12).epsilon(1e-14));
    CHECK(km.K(0, 0) == doctest::Approx(kernel::self_value(h, 1)).epsilon(1e-14));
    CHECK(km.Kp_rows(0, 0) == doctest::Approx(2.0 * a / h * k12).epsilon(1e-12));
    CHECK(km.Kp_rows(1, 0) == doctest::Approx(-km.Kp_rows(0, 0)).epsilon(1e-12));
}

TEST_CASE("kernel_matrices gradient sums agree with finite differences") {
    const Mat x = random_ensemble(11, 6, 3);
    const double h = 0.9;
    const auto km = kernel::kernel_matrices(x, h);

    // Kp_rows(i) = -grad_y sum_j K(y, x_j) at y = x_i.
    const double fd_eps = 1e-6;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index dcoord = 0; dcoord < x.cols(); ++dcoord) {
            const auto total = [&](double shift) {
                Vec y = x.row(i).transpose();
                y(dcoord) += shift;
                double sum = 0.0;
                for (Index j = 0; j < x.rows(); ++j)
                    sum += kernel::eval_kernel(y, x.row(j).transpose(), h);
                return sum;
            };
            const double fd = (total(fd_eps) - total(-fd_eps)) / (2.0 * fd_eps);
            CHECK(km.Kp_rows(i, dcoord) == doctest::Approx(-fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("median_bandwidth two-particle formula") {
    Mat x(2, 1);
    x << 0.0, 2.0;
    CHECK(kernel::median_bandwidth(x) ==
          doctest::Approx(4.0 / (2.0 * std::log(3.0))).epsilon(1e-14));
}

TEST_CASE("median_bandwidth averages the middle pair for even counts") {
    Mat x(4, 1);
    x << 0.0, 1.0, 3.0, 7.0;
    // Squared distances: 1, 9, 49, 4, 36, 16 -> middle pair (9, 16).
    CHECK(kernel::median_bandwidth(x) ==
          doctest::Approx(12.5 / (2.0 * std::log(5.0))).epsilon(1e-14));
}

TEST_CASE("median_bandwidth invariances") {
    const Mat x = random_ensemble(5, 9, 2);
    const double h = kernel::median_bandwidth(x);

    Mat shifted = x;
    shifted.rowwise() += RowVec::Constant(2, 4.2);
    CHECK(kernel::median_bandwidth(shifted) == doctest::Approx(h).epsilon(1e-12));

    const double c = 1.7;
    CHECK(kernel::median_bandwidth(Mat(c * x)) ==
          doctest::Approx(c * c * h).epsilon(1e-12));
}

TEST_CASE("median_bandwidth degenerate inputs") {
    Mat coincident = Mat::Ones(3, 2);
    CHECK_THROWS_AS(kernel::median_bandwidth(coincident), DegenerateEnsembleError);
    CHECK_THROWS_AS(kernel::median_bandwidth(Mat::Zero(1, 2)), InvalidInputError);
}

TEST_CASE("he_objective value matches the loop reference") {
    for (const auto& [seed, n, d] : {std::tuple<int, int, int>{1, 7, 1},
                                     {2, 10, 2},
                                     {3, 6, 3}}) {
        const Mat x = random_ensemble(seed, n, d);
        for (const double h : {0.2, 0.7, 1.5}) {
            const auto obj = kernel::he_objective(x, h);
            const double ref = reference_he_j(x, h);
            CHECK(obj.J == doctest::Approx(ref).epsilon(1e-10));
        }
    }
}

TEST_CASE("he_objective derivative matches finite differences") {
    const Mat x = random_ensemble(21, 12, 2);
    for (const double h : {0.3, 0.8, 2.0}) {
        const auto obj = kernel::he_objective(x, h);
        const double dh = 1e-5 * h;
        const double jp = kernel::he_objective(x, h + dh).J;
        const double jm = kernel::he_objective(x, h - dh).J;
        const double fd = (jp - jm) / (2.0 * dh);
        CHECK(obj.Jprime == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("he_objective is translation invariant") {
    const Mat x = random_ensemble(31, 8, 3);
    Mat shifted = x;
    shifted.rowwise() += RowVec::Constant(3, -2.5);
    const auto a = kernel::he_objective(x, 0.6);
    const auto b = kernel::he_objective(shifted, 0.6);
    CHECK(a.J == doctest::Approx(b.J).epsilon(1e-12));
    CHECK(a.Jprime == doctest::Approx(b.Jprime).epsilon(1e-12));
}

TEST_CASE("he_objective scaling law J(cx, c^2 h) = c^(4-2D) J(x, h)") {
    const double c = 1.7;
    for (const Index d : {Index(1), Index(2), Index(3)}) {
        const Mat x = random_ensemble(40 + d, 9, d);
        const double h = 0.5;
        const double j0 = kernel::he_objective(x, h).J;
        const double j1 = kernel::he_objective(Mat(c * x), c * c * h).J;
        const double expected = std::pow(c, 4.0 - 2.0 * static_cast<double>(d)) * j0;
        CHECK(j1 == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("select_bandwidth_he never increases the objective") {
    const Mat x = random_ensemble(51, 30, 2);
    for (const double h0 : {0.01, 0.1, 1.0, 10.0}) {
        const double h1 = kernel::select_bandwidth_he(x, h0);
        CHECK(h1 > 0.0);
        CHECK(std::isfinite(h1));
        CHECK(h1 >= h0 / 2.0 - 1e-15);
        CHECK(h1 <= h0 * 2.0 + 1e-15);
        CHECK(kernel::he_objective(x, h1).J <= kernel::he_objective(x, h0).J + 1e-12);
    }
}

TEST_CASE("select_bandwidth_he repeated application descends monotonically") {
    const Mat x = random_ensemble(52, 25, 3);
    double h = 5.0;
    double j_prev = kernel::he_objective(x, h).J;
    for (int it = 0; it < 40; ++it) {
        h = kernel::select_bandwidth_he(x, h);
        const double j = kernel::he_objective(x, h).J;
        CHECK(j <= j_prev + 1e-12);
        j_prev = j;
    }
}

TEST_CASE("select_bandwidth_he honors the trust region setting") {
    const Mat x = random_ensemble(53, 20, 2);
    kernel::KernelConfig cfg;
    cfg.he_trust_ratio = 1.3;
    const double h0 = 8.0;
    const double h1 = kernel::select_bandwidth_he(x, h0, cfg);
    CHECK(h1 >= h0 / 1.3 - 1e-12);
    CHECK(h1 <= h0 * 1.3 + 1e-12);
}

TEST_CASE("select_bandwidth_he rejects bad inputs") {
    const Mat x = random_ensemble(54, 5, 2);
    CHECK_THROWS_AS(kernel::select_bandwidth_he(x, 0.0), InvalidParameterError);
    CHECK_THROWS_AS(kernel::select_bandwidth_he(x, -1.0), InvalidParameterError);
}

}  // TEST_SUITE
