#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>

namespace parvi {

// Particles are stored one per row: X is N x D.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Index = Eigen::Index;

// Score oracle: x (D-vector) -> grad log p(x) (D-vector).
using GradOracle = std::function<Vec(const Vec&)>;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidParameterError : public Error {
public:
    using Error::Error;
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

class DegenerateEnsembleError : public Error {
public:
    using Error::Error;
};

class LinearSolveError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericBlowupError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline void require_finite(const Mat& m, const char* what) {
    if (!m.allFinite())
        throw InvalidInputError(std::string(what) + " contains non-finite values");
}

}  // namespace parvi
