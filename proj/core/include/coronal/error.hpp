#pragma once

#include <stdexcept>
#include <string>

namespace coronal {

/// Stable machine-readable category carried by every library error.
enum class ErrorCode {
  ContractViolation,
  Io,
  Config,
  MissingInput,
  NumericalFailure,
  ModelFit,
  Training,
  SensitivityUndefined,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct ContractViolation : Error {
  explicit ContractViolation(const std::string& what)
      : Error(ErrorCode::ContractViolation, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what)
      : Error(ErrorCode::Config, what) {}
};

struct MissingInput : Error {
  explicit MissingInput(const std::string& what)
      : Error(ErrorCode::MissingInput, what) {}
};

struct NumericalFailure : Error {
  NumericalFailure(const std::string& what, int iteration)
      : Error(ErrorCode::NumericalFailure, what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

struct ModelFitError : Error {
  explicit ModelFitError(const std::string& what)
      : Error(ErrorCode::ModelFit, what) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& what)
      : Error(ErrorCode::Training, what) {}
};

struct SensitivityUndefined : Error {
  explicit SensitivityUndefined(const std::string& what)
      : Error(ErrorCode::SensitivityUndefined, what) {}
};

#define CORONAL_EXPECTS(cond, msg)                          \
  do {                                                      \
    if (!(cond)) throw ::coronal::ContractViolation(msg);   \
  } while (0)

}  // namespace coronal
