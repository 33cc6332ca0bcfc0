#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace divsat {

enum class Errc {
  malformed_line,
  non_finite_value,
  empty_vector,
  io_error,
  dimension_mismatch,
  empty_set,
  unknown_id,
  duplicate_id,
  size_mismatch,
  invalid_repetitions,
  invalid_argument,
  provider_error,
  embedder_error,
  spawn_error,
  protocol_error,
  timeout,
  empty_input,
  count_mismatch,
  unparseable_line,
  missing_verdict,
  unknown_verdict_id,
  label_mismatch,
  judge_error,
  degenerate_series,
  length_mismatch,
  insufficient_samples,
};

constexpr std::string_view to_string(Errc c) noexcept {
  switch (c) {
    case Errc::malformed_line: return "malformed_line";
    case Errc::non_finite_value: return "non_finite_value";
    case Errc::empty_vector: return "empty_vector";
    case Errc::io_error: return "io_error";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::empty_set: return "empty_set";
    case Errc::unknown_id: return "unknown_id";
    case Errc::duplicate_id: return "duplicate_id";
    case Errc::size_mismatch: return "size_mismatch";
    case Errc::invalid_repetitions: return "invalid_repetitions";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::provider_error: return "provider_error";
    case Errc::embedder_error: return "embedder_error";
    case Errc::spawn_error: return "spawn_error";
    case Errc::protocol_error: return "protocol_error";
    case Errc::timeout: return "timeout";
    case Errc::empty_input: return "empty_input";
    case Errc::count_mismatch: return "count_mismatch";
    case Errc::unparseable_line: return "unparseable_line";
    case Errc::missing_verdict: return "missing_verdict";
    case Errc::unknown_verdict_id: return "unknown_verdict_id";
    case Errc::label_mismatch: return "label_mismatch";
    case Errc::judge_error: return "judge_error";
    case Errc::degenerate_series: return "degenerate_series";
    case Errc::length_mismatch: return "length_mismatch";
    case Errc::insufficient_samples: return "insufficient_samples";
  }
  return "unknown";
}

/// Domain error carrying a stable machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace divsat
