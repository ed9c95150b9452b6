#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace catbench::wire {

using json = nlohmann::json;

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxPayloadBytes = 16u << 20;

// Message kinds.
inline constexpr const char *kHello = "hello";
inline constexpr const char *kStudyDefinition = "study_definition";
inline constexpr const char *kQuery = "query";
inline constexpr const char *kResult = "result";
inline constexpr const char *kInvalidConfig = "invalid_config";
inline constexpr const char *kError = "error";
inline constexpr const char *kShutdown = "shutdown";

bool is_known_kind(std::string_view kind);

struct Envelope {
  int protocol_version = kProtocolVersion;
  json message_id;  // integer or string chosen by the client; null on error replies to undecodable frames
  std::string kind;
  json body = json::object();

  friend bool operator==(const Envelope &, const Envelope &) = default;
};

// Frame = 4-byte big-endian payload length, then the UTF-8 JSON payload.
std::string encode_payload(const Envelope &e);
std::string encode_frame(const Envelope &e);

// Throws protocol errors for non-JSON payloads, missing or mistyped fields
// and unknown kinds.
Envelope decode_payload(std::string_view payload);

std::uint32_t read_length(const unsigned char *header);
void write_length(std::uint32_t length, unsigned char *header);

// Incremental decoder for a byte stream. next() yields complete payloads;
// a declared length above kMaxPayloadBytes throws a protocol error.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  std::optional<std::string> next();
  std::size_t buffered() const noexcept { return buffer_.size() - offset_; }

 private:
  std::string buffer_;
  std::size_t offset_ = 0;
};

}  // namespace catbench::wire
