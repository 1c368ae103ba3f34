#include "nlmarkov/errors.hpp"

namespace nlmarkov {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::InvalidParameters: return "InvalidParameters";
        case ErrorCode::BoundaryProximity: return "BoundaryProximity";
        case ErrorCode::NotIrreducible: return "NotIrreducible";
        case ErrorCode::SolverSingular: return "SolverSingular";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::SupportViolation: return "SupportViolation";
        case ErrorCode::QuadratureFailure: return "QuadratureFailure";
        case ErrorCode::OverflowGuard: return "OverflowGuard";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::MaxIterations: return "MaxIterations";
        case ErrorCode::NotStationary: return "NotStationary";
        case ErrorCode::NotReversible: return "NotReversible";
        case ErrorCode::NotFixedPoint: return "NotFixedPoint";
        case ErrorCode::ZeroMass: return "ZeroMass";
        case ErrorCode::TooLarge: return "TooLarge";
    }
    return "Unknown";
}

}  // namespace nlmarkov
