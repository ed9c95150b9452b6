#include "catbench/error.hpp"

#include <array>
#include <utility>

namespace catbench {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 16> kNames{{
    {ErrorCode::invalid_argument, "invalid_argument"},
    {ErrorCode::malformed_space, "malformed_space"},
    {ErrorCode::infeasible_space, "infeasible_space"},
    {ErrorCode::too_large, "too_large"},
    {ErrorCode::malformed_problem, "malformed_problem"},
    {ErrorCode::invalid_config, "invalid_config"},
    {ErrorCode::insufficient_data, "insufficient_data"},
    {ErrorCode::undefined_score, "undefined_score"},
    {ErrorCode::io, "io"},
    {ErrorCode::parse, "parse"},
    {ErrorCode::protocol, "protocol"},
    {ErrorCode::transport, "transport"},
    {ErrorCode::timeout, "timeout"},
    {ErrorCode::unsupported_version, "unsupported_version"},
    {ErrorCode::no_records, "no_records"},
    {ErrorCode::internal, "internal"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto &[c, name] : kNames)
    if (c == code) return name;
  return "internal";
}

ErrorCode parse_error_code(std::string_view name) noexcept {
  for (const auto &[c, n] : kNames)
    if (n == name) return c;
  return ErrorCode::internal;
}

}  // namespace catbench
