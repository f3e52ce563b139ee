#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "dbfl/errors.hpp"
#include "dbfl/topology.hpp"

namespace dbfl {

struct HeadCandidateView {
  DeviceId device_id = 0;
  bool bs_connectable = false;
  double aggregated_distance_m = 0.0;  // summed distance to the other cluster members
  double battery = 0.0;                // remaining charge
  bool mobile = false;
  double bs_latency_s = 0.0;
};

struct HeadPolicy {
  int reselect_interval_rounds = 5;
};

// True when `a` beats `b` under the ordered election rules: lower aggregated
// distance, then more battery, then stationary over mobile, then lower base
// station latency, then lower id. Connectability is a filter, not a rule here.
inline bool head_preferred(const HeadCandidateView& a, const HeadCandidateView& b) {
  if (a.aggregated_distance_m != b.aggregated_distance_m) return a.aggregated_distance_m < b.aggregated_distance_m;
  if (a.battery != b.battery) return a.battery > b.battery;
  if (a.mobile != b.mobile) return !a.mobile;
  if (a.bs_latency_s != b.bs_latency_s) return a.bs_latency_s < b.bs_latency_s;
  return a.device_id < b.device_id;
}

inline DeviceId select_head(std::span<const HeadCandidateView> candidates) {
  const HeadCandidateView* best = nullptr;
  for (const auto& c : candidates) {
    if (!c.bs_connectable) continue;
    if (!best || head_preferred(c, *best)) best = &c;
  }
  if (!best) throw NoEligibleHead("no candidate can reach the base station");
  return best->device_id;
}

// Builds election views for one cluster. `members` indexes into `devices`;
// `connectable` and `bs_latency_s` are per device in the same indexing.
inline std::vector<HeadCandidateView> head_candidates(std::span<const DeviceNode> devices,
                                                      std::span<const std::size_t> members,
                                                      const std::vector<bool>& connectable,
                                                      std::span<const double> bs_latency_s) {
  std::vector<HeadCandidateView> out;
  out.reserve(members.size());
  for (std::size_t m : members) {
    double agg = 0.0;
    for (std::size_t o : members) {
      if (o != m) agg += distance(devices[m].pos, devices[o].pos);
    }
    out.push_back({devices[m].id, connectable[m], agg, devices[m].battery, devices[m].mobile, bs_latency_s[m]});
  }
  return out;
}

}  // namespace dbfl
