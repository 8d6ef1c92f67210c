#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "plr/env.hpp"

namespace plr {

enum class InputEncoding {
  kFlat,        // the raw grid observation, as is
  kEgocentric,  // the grid shifted so the agent sits at the centre
};

std::string_view to_string(InputEncoding encoding);
InputEncoding parse_encoding(std::string_view name);

/// Turns raw grid observations into network inputs.
///
/// The egocentric encoding places the full grid in a (2H-1) x (2W-1) window
/// centred on the agent, with one binary channel each for wall, closed door,
/// open door and goal. Nothing is cropped, so no information is lost; an MLP
/// just no longer has to relearn every layout at every absolute position.
class ObservationEncoder {
 public:
  static constexpr int kEgoChannels = 4;

  ObservationEncoder(EnvConfig env, InputEncoding encoding);

  const EnvConfig& env() const { return env_; }
  InputEncoding encoding() const { return encoding_; }
  int size() const;

  void encode(std::span<const uint8_t> obs, std::span<uint8_t> out) const;

 private:
  EnvConfig env_;
  InputEncoding encoding_;
};

}  // namespace plr
