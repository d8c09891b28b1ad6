#include "fpe/error.hpp"

namespace fpe {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::DegenerateHistogram: return "degenerate-histogram";
    case ErrorKind::FovEstimation: return "fov-estimation";
    case ErrorKind::EmptyMask: return "empty-mask";
    case ErrorKind::DegenerateLabels: return "degenerate-labels";
    case ErrorKind::ResamplingFailure: return "resampling-failure";
    case ErrorKind::Reconciliation: return "reconciliation";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace fpe
