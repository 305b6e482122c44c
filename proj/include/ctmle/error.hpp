#pragma once

#include <stdexcept>
#include <string>

namespace ctmle {

/// Bad user input: malformed data, invalid configuration, violated preconditions.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce an estimate.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Logistic coefficients diverged (perfect or quasi-complete separation).
class SeparationError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

/// A cross-validation fold could not be fit; the message names the fold.
class FoldError : public EstimationError {
public:
    FoldError(int fold, const std::string& what)
        : EstimationError("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}
    int fold() const noexcept { return fold_; }

private:
    int fold_;
};

}  // namespace ctmle
