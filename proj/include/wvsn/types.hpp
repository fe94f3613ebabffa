#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace wvsn {

using Vec2 = Eigen::Vector2d;

inline double dist(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// The two service-differentiated traffic classes. Standby-mode traffic is
/// carried in the Bkgd class; Rush mode produces both.
enum class TrafficClass : uint8_t { Roi = 0, Bkgd = 1 };
constexpr int kClassCount = 2;

enum class Mode : uint8_t { Standby = 0, Rush = 1 };
constexpr int kModeCount = 2;

enum class Protocol : uint8_t { Mmspeed = 0, Qbsa = 1, Eqbsa = 2 };

inline const char* to_string(TrafficClass c) {
  return c == TrafficClass::Roi ? "roi" : "bkgd";
}
inline const char* to_string(Mode m) {
  return m == Mode::Standby ? "standby" : "rush";
}
inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::Mmspeed: return "mmspeed";
    case Protocol::Qbsa: return "qbsa";
    case Protocol::Eqbsa: return "eqbsa";
  }
  return "?";
}

Protocol protocol_from_string(const std::string& s);

/// Scenario/config problems: parse errors carry file:line, validation errors
/// name the violated invariant.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Engine-internal contract violations (scheduling into the past, etc.).
class SimError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Bitstream decode failures (truncated or corrupt input).
class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wvsn
