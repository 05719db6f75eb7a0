#include "irlvla/common/error.hpp"

namespace irlvla {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ExpertInfeasible: return "ExpertInfeasible";
    case ErrorCode::HorizonMismatch: return "HorizonMismatch";
    case ErrorCode::TooFewDemos: return "TooFewDemos";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TapeReused: return "TapeReused";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::MissingDataset: return "MissingDataset";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace irlvla
