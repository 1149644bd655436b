#ifndef REMARK_ERROR_H_
#define REMARK_ERROR_H_

#include <stdexcept>
#include <string>

namespace remark {

// Raised for contract violations on public operations (bad shapes, invalid
// ids, out-of-range parameters, malformed files).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an artifact (checkpoint, vocabulary) was produced by an
// incompatible format version or for a different model shape.
class IncompatibleArtifact : public Error {
 public:
  explicit IncompatibleArtifact(const std::string& what) : Error(what) {}
};

}  // namespace remark

#endif  // REMARK_ERROR_H_
