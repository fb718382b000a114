#pragma once

#include <stdexcept>
#include <string>

namespace stockloan {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A type invariant on MarketParams/LoanTerms/SimConfig is violated.
struct InvalidParams : Error {
    using Error::Error;
};

// mu^2 - 2(gamma - r) < 0: inadmissible parameters escaped validation.
struct NegativeDiscriminant : Error {
    using Error::Error;
};

// Margin fraction k exceeds the admissible bound h(q/a).
struct MarginTooLarge : Error {
    using Error::Error;
};

// Root bracketing failed: no sign change below the expansion cap.
struct BracketFailure : Error {
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Target value outside the achievable interval of an inverse solver.
struct OutOfRange : Error {
    using Error::Error;
};

// Endpoint ordering contradicts the monotonicity an inverse solver relies on.
struct MonotonicityViolation : Error {
    using Error::Error;
};

// Config document parse/schema failure (usage-level error).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace stockloan
