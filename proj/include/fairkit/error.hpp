#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairkit {

enum class ErrorKind {
  Shape,
  DegenerateWeights,
  TrainingDiverged,
  ContrastiveDegenerate,
  Schema,
  Parse,
  LabelDomain,
  Spec,
  EmptyCell,
  FairBatchCollapse,
  DegenerateProbe,
  MethodInapplicable,
  EvaluationDegenerate,
  EmptyInput,
  IndexSchema,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the toolkit carries a kind so callers (and the CLI
/// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace fairkit
