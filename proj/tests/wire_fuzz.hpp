#pragma once

#include <string>

#include "catbench/frame.hpp"
#include "catbench/rng.hpp"

namespace testing_support {

using catbench::Rng;
namespace wire = catbench::wire;
using wire::Envelope;

inline std::string random_utf8(Rng &rng) {
  static const char32_t ranges[][2] = {{0x20, 0x7e}, {0xa0, 0x7ff}, {0x800, 0xd7ff}, {0xe000, 0xfffd}, {0x10000, 0x10ffff}};
  std::string out;
  const auto n = rng.index(12);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto &r = ranges[rng.index(5)];
    char32_t cp = static_cast<char32_t>(r[0] + rng.index(r[1] - r[0] + 1));
    if (rng.bernoulli(0.1)) cp = static_cast<char32_t>(rng.index(0x20));  // control characters
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xc0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xe0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
      out += static_cast<char>(0xf0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    }
  }
  return out;
}

inline wire::json random_value(Rng &rng, int depth) {
  switch (rng.index(depth > 2 ? 5 : 7)) {
    case 0: return nullptr;
    case 1: return rng.bernoulli(0.5);
    case 2: return static_cast<std::int64_t>(rng.next());
    case 3: return rng.uniform(-1e300, 1e300) * (rng.bernoulli(0.5) ? 1e-300 : 1.0);
    case 4: return random_utf8(rng);
    case 5: {
      auto a = wire::json::array();
      for (std::uint64_t i = rng.index(4); i > 0; --i) a.push_back(random_value(rng, depth + 1));
      return a;
    }
    default: {
      auto o = wire::json::object();
      for (std::uint64_t i = rng.index(4); i > 0; --i) o[random_utf8(rng)] = random_value(rng, depth + 1);
      return o;
    }
  }
}

inline Envelope random_envelope(Rng &rng) {
  static const char *kinds[] = {wire::kHello, wire::kStudyDefinition, wire::kQuery, wire::kResult,
                                wire::kInvalidConfig, wire::kError, wire::kShutdown};
  Envelope e;
  e.protocol_version = static_cast<int>(rng.index(3));
  e.message_id = rng.bernoulli(0.5) ? wire::json(static_cast<std::int64_t>(rng.next() >> 1)) : wire::json(random_utf8(rng));
  e.kind = kinds[rng.index(7)];
  e.body = wire::json::object();
  for (std::uint64_t i = rng.index(5); i > 0; --i) e.body[random_utf8(rng)] = random_value(rng, 0);
  return e;
}

}  // namespace testing_support
