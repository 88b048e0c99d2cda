#pragma once

#include "parvi/types.hpp"

namespace parvi::fields {

// Vector-field estimators. Each returns an N x D matrix whose row i is the
// update direction at particle i. grad_log_p may be passed either as an
// oracle (evaluated once per particle, result checked finite) or as a
// precomputed N x D matrix of scores.

Mat svgd_field(const Mat& particles, const Mat& grad_log_p, double h);
Mat svgd_field(const Mat& particles, const GradOracle& grad_log_p, double h);

Mat blob_field(const Mat& particles, const Mat& grad_log_p, double h);
Mat blob_field(const Mat& particles, const GradOracle& grad_log_p, double h);

Mat gfsd_field(const Mat& particles, const Mat& grad_log_p, double h);
Mat gfsd_field(const Mat& particles, const GradOracle& grad_log_p, double h);

Mat gfsf_field(const Mat& particles, const Mat& grad_log_p, double h, double gamma);
Mat gfsf_field(const Mat& particles, const GradOracle& grad_log_p, double h, double gamma);

// Default GFSF ridge, scaled to the kernel's diagonal so conditioning stays
// uniform across bandwidths: 1e-5 * (2*pi*h)^(-D/2).
double gfsf_default_gamma(double h, Index dim);

// Evaluate an oracle at every particle, checking each row for finiteness.
Mat eval_oracle(const Mat& particles, const GradOracle& grad_log_p);

}  // namespace parvi::fields
