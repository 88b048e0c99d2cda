#include "parvi/geometry.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace parvi::geometry {

namespace {

void check_pair(const PairedEnsembles& pair) {
    if (pair.source.rows() != pair.dest.rows() || pair.source.cols() != pair.dest.cols())
        throw InvalidInputError("paired ensembles have mismatched shapes");
    require_finite(pair.source, "paired source");
    require_finite(pair.dest, "paired dest");
}

double min_nn_distance(const Mat& x) {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = i + 1; j < x.rows(); ++j)
            best = std::min(best, (x.row(i) - x.row(j)).norm());
    return best;
}

void warn_if_far(const PairedEnsembles& pair, const GeometryOptions& opts) {
    if (pairwise_close(pair, opts.close_threshold)) return;
    const std::string msg =
        "pairwise-close check failed: paired particles are far apart relative to "
        "nearest-neighbor spacing; transport approximations may be inaccurate";
    if (opts.warn)
        opts.warn(msg);
    else
        std::cerr << "warning: " << msg << "\n";
}

}  // namespace

bool pairwise_close(const PairedEnsembles& pair, double threshold) {
    check_pair(pair);
    if (pair.source.rows() < 2) return true;
    const double max_gap = (pair.source - pair.dest).rowwise().norm().maxCoeff();
    const double spacing =
        std::min(min_nn_distance(pair.source), min_nn_distance(pair.dest));
    return max_gap <= threshold * spacing;
}

Mat exp_map(const Mat& particles, const Mat& field, double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw InvalidParameterError("exp_map step size must be positive and finite");
    if (particles.rows() != field.rows() || particles.cols() != field.cols())
        throw InvalidInputError("exp_map: field shape does not match particles");
    return particles + eps * field;
}

Mat inverse_exp(const PairedEnsembles& pair, const GeometryOptions& opts) {
    check_pair(pair);
    warn_if_far(pair, opts);
    return pair.dest - pair.source;
}

Mat parallel_transport(const Mat& field, const PairedEnsembles& pair,
                       const GeometryOptions& opts) {
    check_pair(pair);
    if (field.rows() != pair.source.rows() || field.cols() != pair.source.cols())
        throw InvalidInputError("parallel_transport: field shape does not match pair");
    warn_if_far(pair, opts);
    return field;
}

}  // namespace parvi::geometry
