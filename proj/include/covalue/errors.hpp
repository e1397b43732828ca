#pragma once

#include <stdexcept>
#include <string>

namespace covalue {

// Exit codes used by the command line driver.  Library code throws; the
// driver maps the exception class to one of these.
enum class ExitCode : int {
    ok = 0,
    config = 1,
    io = 2,
    numeric = 3,
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, out-of-range parameter, inconsistent
// shapes between declared parties and supplied data.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem problems: missing input, unreadable CSV, refusing to clobber
// an existing output directory.
struct IoError : Error {
    using Error::Error;
};

// Numerical failure: Cholesky that stays indefinite after jitter
// escalation, non-finite intermediate, root bracket that cannot close.
struct NumericError : Error {
    using Error::Error;
};

// A violated mathematical premise, e.g. a characteristic function that is
// not monotone where monotonicity is required, or a negative value where
// the quantity is provably nonnegative.
struct PremiseError : Error {
    using Error::Error;
};

// A reward target outside the attainable [v_i, v_N] band.
struct InfeasibleTargetError : NumericError {
    using NumericError::NumericError;
};

// Root-finding ran out of iterations or could not close a bracket.
struct ConvergenceError : NumericError {
    using NumericError::NumericError;
};

// phi_i = 0 but v_i > 0: the game cannot be both consistent and monotone,
// so threshold computation refuses to proceed.
struct InconsistentGameError : PremiseError {
    using PremiseError::PremiseError;
};

// Party count too large for an exhaustive enumeration (exact Shapley,
// axiom checkers).  The message names the sampling alternative.
struct EnumerationLimitError : ConfigError {
    using ConfigError::ConfigError;
};

// Absolute tolerance for equality comparisons in axiom and incentive
// checks (symmetry, null-player, efficiency residuals).
inline constexpr double kAxiomTol = 1e-9;

// Largest party count for which exhaustive coalition enumeration is
// allowed.  2^20 doubles is 8 MiB; beyond that callers must sample.
inline constexpr int kMaxExactParties = 20;

}  // namespace covalue
