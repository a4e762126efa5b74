#ifndef FAS_ERROR_HPP_
#define FAS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace fas {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on caller-supplied input was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Stored data contradicts a domain invariant (overlapping masks, bad dims).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow its declared binary or text layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Segmenter service unreachable, timed out, or spoke a broken protocol.
/// Callers may retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Landmark correspondences too degenerate for a similarity fit.
class SingularFitError : public Error {
 public:
  using Error::Error;
};

/// A metric was requested over an empty class.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or another unrecoverable runtime condition occurred.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace fas

#endif  // FAS_ERROR_HPP_
