#ifndef SPF_ERROR_HPP_
#define SPF_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace spf {

// Failure classes map onto CLI exit codes (config=2, data=3, runtime=4).
enum class ErrorKind { kConfig, kData, kRuntime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

// Tensor extents that do not fit an operation's contract.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kRuntime, what) {}
};

// Parameter outside its mathematical domain (e.g. a non-positive sigma).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::kRuntime, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kRuntime, what) {}
};

// Checkpoint container problems (bad magic, version mismatch, truncation).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::kRuntime, what) {}
};

}  // namespace spf

#endif  // SPF_ERROR_HPP_
