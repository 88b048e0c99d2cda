#pragma once

#include "parvi/types.hpp"

namespace parvi::geometry {

// Finite-particle primitives on the space of particle ensembles, with the
// index-i <-> index-i pairing between two ensembles of equal shape.

struct PairedEnsembles {
    Mat source;  // N x D
    Mat dest;    // N x D
};

struct GeometryOptions {
    // Pairwise-close threshold: max_i ||x_i - y_i|| must be at most
    // close_threshold times the smaller of the two ensembles' minimum
    // nearest-neighbor distances. Violations warn, they do not fail.
    double close_threshold = 0.5;
    // Warning sink; defaults to stderr when empty.
    std::function<void(const std::string&)> warn;
};

// True iff the pairing passes the pairwise-close check.
bool pairwise_close(const PairedEnsembles& pair, double threshold = 0.5);

// Row i of output = x_i + eps * v_i.
Mat exp_map(const Mat& particles, const Mat& field, double eps);

// Row i = y_i - x_i. Warns through opts if the pair is not pairwise close.
Mat inverse_exp(const PairedEnsembles& pair, const GeometryOptions& opts = {});

// Index-preserving carry of a velocity field from source to dest.
Mat parallel_transport(const Mat& field, const PairedEnsembles& pair,
                       const GeometryOptions& opts = {});

}  // namespace parvi::geometry
