#pragma once

#include <stdexcept>
#include <string>

namespace fat {

/// Incompatible tensor shapes or layout/partition mismatches.
class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf encountered where finite values are required.
class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Malformed dataset directories, checkpoints or config files.
class FormatError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Non-finite training loss; the fold is aborted.
class DivergenceError : public NumericalError {
   public:
    using NumericalError::NumericalError;
};

}  // namespace fat
