#include "fairkit/error.hpp"

namespace fairkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::DegenerateWeights: return "degenerate-weights error";
    case ErrorKind::TrainingDiverged: return "training-diverged error";
    case ErrorKind::ContrastiveDegenerate: return "contrastive-degenerate error";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::LabelDomain: return "label-domain error";
    case ErrorKind::Spec: return "spec error";
    case ErrorKind::EmptyCell: return "empty-cell error";
    case ErrorKind::FairBatchCollapse: return "fairbatch-collapse error";
    case ErrorKind::DegenerateProbe: return "degenerate-probe error";
    case ErrorKind::MethodInapplicable: return "method-inapplicable error";
    case ErrorKind::EvaluationDegenerate: return "evaluation-degenerate error";
    case ErrorKind::EmptyInput: return "empty-input error";
    case ErrorKind::IndexSchema: return "index-schema error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

}  // namespace fairkit
