#pragma once

#include <stdexcept>
#include <string>

namespace nlmarkov {

// Every failure mode the library can signal. Call sites catch by code when
// they care about the kind, or by Error when they only need the message.
enum class ErrorCode {
    InvalidInput,
    InvalidParameters,
    BoundaryProximity,
    NotIrreducible,
    SolverSingular,
    StepTooLarge,
    NoConvergence,
    SupportViolation,
    QuadratureFailure,
    OverflowGuard,
    Infeasible,
    MaxIterations,
    NotStationary,
    NotReversible,
    NotFixedPoint,
    ZeroMass,
    TooLarge,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace nlmarkov
