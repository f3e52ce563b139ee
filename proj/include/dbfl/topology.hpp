#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbfl/errors.hpp"
#include "dbfl/rng.hpp"

namespace dbfl {

using DeviceId = int;

struct Position {
  double x = 0.0;  // meters
  double y = 0.0;  // meters

  friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(const Position& a, const Position& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

struct DeviceNode {
  DeviceId id = 0;
  Position pos;
  bool mobile = false;
  double battery = 100.0;  // energy units, [0, 100]
  // Manually assigned latency of the device -> base station link. When unset
  // the delay is derived from the distance to the base station.
  std::optional<double> bs_latency_s;
  int partition_id = 0;
  int feature_dim = 1;
};

inline void validate(const DeviceNode& d) {
  if (!std::isfinite(d.pos.x) || !std::isfinite(d.pos.y)) {
    throw InvalidArgument("device " + std::to_string(d.id) + ": non-finite position");
  }
  if (!(d.battery >= 0.0 && d.battery <= 100.0)) {
    throw InvalidArgument("device " + std::to_string(d.id) + ": battery outside [0, 100]");
  }
  if (d.bs_latency_s && !(std::isfinite(*d.bs_latency_s) && *d.bs_latency_s >= 0.0)) {
    throw InvalidArgument("device " + std::to_string(d.id) + ": bs latency must be finite and >= 0");
  }
  if (d.feature_dim <= 0) {
    throw InvalidArgument("device " + std::to_string(d.id) + ": feature_dim must be positive");
  }
}

struct LinkModel {
  double max_transmission_time_s = 0.1;
  double delay_per_meter_s = 1e-3;

  // Distance at which a distance-derived delay reaches the cutoff.
  double range_m() const { return max_transmission_time_s / delay_per_meter_s; }
};

inline void validate(const LinkModel& link) {
  if (!(link.max_transmission_time_s > 0.0) || !(link.delay_per_meter_s > 0.0) ||
      !std::isfinite(link.max_transmission_time_s) || !std::isfinite(link.delay_per_meter_s)) {
    throw InvalidArgument("link model parameters must be finite and strictly positive");
  }
}

// Delay of a transmission from `from` to `to_pos`. A manual override wins;
// otherwise the delay is proportional to euclidean distance.
inline double transmission_delay(const LinkModel& link, const DeviceNode& from, const Position& to_pos,
                                 std::optional<double> override_latency_s = std::nullopt) {
  if (override_latency_s) return *override_latency_s;
  return distance(from.pos, to_pos) * link.delay_per_meter_s;
}

// Inclusive at the boundary: a delay equal to the cutoff still connects.
inline bool can_connect(const LinkModel& link, double delay_s) {
  return delay_s <= link.max_transmission_time_s;
}

// Random waypoint mobility. Each mobile node walks toward a waypoint drawn
// uniformly from a square around its home position, moving at most
// `max_step_m` per round, and draws a new waypoint on arrival.
struct MobilityModel {
  double max_step_m = 5.0;
  double roam_half_width_m = 10.0;
};

class MobilityState {
 public:
  MobilityState() = default;
  MobilityState(const DeviceNode& node, std::uint64_t seed)
      : home_(node.pos), waypoint_(node.pos), rng_(seed) {}

  Position step(const MobilityModel& model, const Position& current) {
    if (distance(current, waypoint_) <= 1e-12) {
      waypoint_ = {home_.x + rng_.uniform(-model.roam_half_width_m, model.roam_half_width_m),
                   home_.y + rng_.uniform(-model.roam_half_width_m, model.roam_half_width_m)};
    }
    const double d = distance(current, waypoint_);
    if (d <= model.max_step_m) return waypoint_;
    const double f = model.max_step_m / d;
    return {current.x + (waypoint_.x - current.x) * f, current.y + (waypoint_.y - current.y) * f};
  }

 private:
  Position home_;
  Position waypoint_;
  Rng rng_{0};
};

}  // namespace dbfl
