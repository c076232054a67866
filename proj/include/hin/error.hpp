#pragma once

#include <stdexcept>
#include <string>

namespace hin {

enum class ErrorKind {
  MalformedLine,
  DanglingFeature,
  DanglingLabel,
  EmptyGraph,
  UnknownRelation,
  UnknownNode,
  NoBuckets,
  NoCrossPartitionNodes,
  DegenerateDenominator,
  ShapeMismatch,
  NonFinite,
  NonFiniteLoss,
  TooFewAnchors,
  EmptyContextList,
  InsufficientLabels,
  TooFewEdges,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers and tests can
// dispatch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hin
