#include "plr/features.hpp"

#include <algorithm>
#include <string>

#include "plr/error.hpp"

namespace plr {

std::string_view to_string(InputEncoding encoding) {
  return encoding == InputEncoding::kFlat ? "flat" : "egocentric";
}

InputEncoding parse_encoding(std::string_view name) {
  if (name == "flat") return InputEncoding::kFlat;
  if (name == "egocentric") return InputEncoding::kEgocentric;
  throw ContractViolation("unknown input encoding: " + std::string(name));
}

ObservationEncoder::ObservationEncoder(EnvConfig env, InputEncoding encoding) : env_(env), encoding_(encoding) {}

int ObservationEncoder::size() const {
  if (encoding_ == InputEncoding::kFlat) return env_.obs_size();
  return (2 * env_.obs_height() - 1) * (2 * env_.obs_width() - 1) * kEgoChannels;
}

void ObservationEncoder::encode(std::span<const uint8_t> obs, std::span<uint8_t> out) const {
  require(obs.size() == static_cast<size_t>(env_.obs_size()), "observation has wrong size");
  require(out.size() == static_cast<size_t>(size()), "encoded buffer has wrong size");
  if (encoding_ == InputEncoding::kFlat) {
    std::copy(obs.begin(), obs.end(), out.begin());
    return;
  }
  const int height = env_.obs_height();
  const int width = env_.obs_width();
  int agent = -1;
  for (int cell = 0; cell < height * width; ++cell) {
    if (obs[static_cast<size_t>(cell * kObsChannels + 2)] != 0) {
      agent = cell;
      break;
    }
  }
  require(agent >= 0, "observation has no agent");
  const int agent_row = agent / width;
  const int agent_col = agent % width;
  const int window_width = 2 * width - 1;

  std::fill(out.begin(), out.end(), uint8_t{0});
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const uint8_t* cell = obs.data() + (r * width + c) * kObsChannels;
      int channel = -1;
      switch (static_cast<Cell>(cell[0])) {
        case Cell::kWall:
          channel = 0;
          break;
        case Cell::kDoor:
          channel = cell[1] != 0 ? 2 : 1;
          break;
        case Cell::kGoal:
          channel = 3;
          break;
        default:
          break;
      }
      if (channel < 0) continue;
      const int wr = r - agent_row + height - 1;
      const int wc = c - agent_col + width - 1;
      out[static_cast<size_t>((wr * window_width + wc) * kEgoChannels + channel)] = 1;
    }
  }
}

}  // namespace plr
