#include "catbench/frame.hpp"

#include "catbench/error.hpp"

namespace catbench::wire {

namespace {

[[noreturn]] void protocol(const std::string &what) {
  throw Error(ErrorCode::protocol, "protocol: " + what);
}

}  // namespace

bool is_known_kind(std::string_view kind) {
  for (const char *k : {kHello, kStudyDefinition, kQuery, kResult, kInvalidConfig, kError, kShutdown})
    if (kind == k) return true;
  return false;
}

std::string encode_payload(const Envelope &e) {
  json j{{"protocol_version", e.protocol_version},
         {"message_id", e.message_id},
         {"kind", e.kind},
         {"body", e.body}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::uint32_t read_length(const unsigned char *h) {
  return (std::uint32_t{h[0]} << 24) | (std::uint32_t{h[1]} << 16) | (std::uint32_t{h[2]} << 8) |
         std::uint32_t{h[3]};
}

void write_length(std::uint32_t length, unsigned char *h) {
  h[0] = static_cast<unsigned char>(length >> 24);
  h[1] = static_cast<unsigned char>(length >> 16);
  h[2] = static_cast<unsigned char>(length >> 8);
  h[3] = static_cast<unsigned char>(length);
}

std::string encode_frame(const Envelope &e) {
  const auto payload = encode_payload(e);
  if (payload.size() > kMaxPayloadBytes) protocol("payload exceeds 16 MiB");
  std::string frame(4, '\0');
  write_length(static_cast<std::uint32_t>(payload.size()), reinterpret_cast<unsigned char *>(frame.data()));
  frame += payload;
  return frame;
}

Envelope decode_payload(std::string_view payload) {
  if (payload.size() > kMaxPayloadBytes) protocol("payload exceeds 16 MiB");
  json j = json::parse(payload.begin(), payload.end(), nullptr, false);
  if (j.is_discarded()) protocol("payload is not valid JSON");
  if (!j.is_object()) protocol("envelope must be an object");
  for (const char *field : {"protocol_version", "message_id", "kind", "body"})
    if (!j.contains(field)) protocol(std::string("envelope lacks '") + field + "'");
  if (j.size() != 4) protocol("envelope has unexpected fields");
  const auto &version = j["protocol_version"];
  if (!version.is_number_integer()) protocol("protocol_version must be an integer");
  if (!j["kind"].is_string()) protocol("kind must be a string");
  // Error replies to undecodable requests carry a null id.
  const auto &id = j["message_id"];
  const bool null_error_id = id.is_null() && j["kind"] == kError;
  if (!(id.is_number_integer() || id.is_string() || null_error_id))
    protocol("message_id must be an integer or string");
  Envelope e;
  const auto v = version.get<std::int64_t>();
  if (v < INT32_MIN || v > INT32_MAX) protocol("protocol_version out of range");
  e.protocol_version = static_cast<int>(v);
  e.message_id = id;
  e.kind = j["kind"].get<std::string>();
  if (!is_known_kind(e.kind)) protocol("unknown kind '" + e.kind + "'");
  e.body = std::move(j["body"]);
  return e;
}

void FrameDecoder::feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> FrameDecoder::next() {
  if (buffered() < 4) return std::nullopt;
  const auto length = read_length(reinterpret_cast<const unsigned char *>(buffer_.data() + offset_));
  if (length > kMaxPayloadBytes) protocol("declared frame length " + std::to_string(length) + " exceeds 16 MiB");
  if (buffered() < 4 + std::size_t{length}) return std::nullopt;
  std::string payload = buffer_.substr(offset_ + 4, length);
  offset_ += 4 + length;
  if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  return payload;
}

}  // namespace catbench::wire
