#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dalmp {

enum class ErrorCode {
  shape_mismatch,
  unknown_primitive,
  non_scalar_loss,
  non_deterministic,
  invalid_config,
  empty_dataset,
  divergence,
  io,
  parse,
  missing_column,
  unknown_column,
  gap,
  duplicate_timestamp,
  non_positive_price,
  negative_demand,
  domain,
  insufficient_history,
  insufficient_data,
  rank_deficient,
  non_convergence,
  missing_exogenous,
  length_mismatch,
  empty_input,
  zero_actual,
  invalid_spec,
  invalid_hours,
  insufficient_residuals,
  version_mismatch,
  checksum_mismatch,
  shape_audit,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::unknown_primitive: return "unknown primitive";
    case ErrorCode::non_scalar_loss: return "non-scalar loss";
    case ErrorCode::non_deterministic: return "non-deterministic builder";
    case ErrorCode::invalid_config: return "invalid config";
    case ErrorCode::empty_dataset: return "empty dataset";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::missing_column: return "missing column";
    case ErrorCode::unknown_column: return "unknown column";
    case ErrorCode::gap: return "gap";
    case ErrorCode::duplicate_timestamp: return "duplicate timestamp";
    case ErrorCode::non_positive_price: return "non-positive price";
    case ErrorCode::negative_demand: return "negative demand";
    case ErrorCode::domain: return "domain error";
    case ErrorCode::insufficient_history: return "insufficient history";
    case ErrorCode::insufficient_data: return "insufficient data";
    case ErrorCode::rank_deficient: return "rank deficient";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::missing_exogenous: return "missing exogenous";
    case ErrorCode::length_mismatch: return "length mismatch";
    case ErrorCode::empty_input: return "empty input";
    case ErrorCode::zero_actual: return "zero actual";
    case ErrorCode::invalid_spec: return "invalid spec";
    case ErrorCode::invalid_hours: return "invalid hours";
    case ErrorCode::insufficient_residuals: return "insufficient residuals";
    case ErrorCode::version_mismatch: return "version mismatch";
    case ErrorCode::checksum_mismatch: return "checksum mismatch";
    case ErrorCode::shape_audit: return "shape audit failure";
  }
  return "error";
}

/// Every failure raised by the library carries a stable code so callers
/// (and the CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dalmp
