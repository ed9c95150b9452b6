#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace catbench {

// Mirrors cb_status in the C API; keep the numeric values in sync.
enum class ErrorCode : int {
  invalid_argument = 1,
  malformed_space = 2,
  infeasible_space = 3,
  too_large = 4,
  malformed_problem = 5,
  invalid_config = 6,
  insufficient_data = 7,
  undefined_score = 8,
  io = 9,
  parse = 10,
  protocol = 11,
  transport = 12,
  timeout = 13,
  unsupported_version = 14,
  no_records = 15,
  internal = 16,
};

// Stable snake_case name, used in wire error bodies.
std::string_view to_string(ErrorCode code) noexcept;
// Unknown names map to internal.
ErrorCode parse_error_code(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A configuration rejected before evaluation: known-constraint violation or
/// out-of-domain values. Distinct from hidden infeasibility, which is a
/// successful evaluation with feasible=false.
class InvalidConfigError : public Error {
 public:
  InvalidConfigError(const std::string &message, std::vector<int> violated = {})
      : Error(ErrorCode::invalid_config, message), violated_(std::move(violated)) {}

  const std::vector<int> &violated() const noexcept { return violated_; }

 private:
  std::vector<int> violated_;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string &message, int retries = 0)
      : Error(ErrorCode::transport, message), retries_(retries) {}

  int retries() const noexcept { return retries_; }

 private:
  int retries_;
};

}  // namespace catbench
