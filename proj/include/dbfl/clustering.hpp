#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dbfl/errors.hpp"
#include "dbfl/topology.hpp"

namespace dbfl {

struct ClusterPolicy {
  int max_size = 3;
  bool require_bs_member = true;
};

// Feature dimensionality plus the ordered set of class labels a device's data
// uses. Two devices are homogeneous when both agree.
struct DataSignature {
  int feature_dim = 1;
  std::vector<int> label_set;

  friend bool operator==(const DataSignature&, const DataSignature&) = default;
};

inline DataSignature make_signature(int feature_dim, std::vector<int> labels) {
  if (feature_dim <= 0) throw InvalidArgument("signature feature_dim must be positive");
  if (labels.empty()) throw InvalidArgument("signature label set must be non-empty");
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
    throw InvalidArgument("signature label set contains duplicates");
  }
  return {feature_dim, std::move(labels)};
}

inline DataSignature make_signature(int feature_dim, int num_classes) {
  std::vector<int> labels(static_cast<std::size_t>(num_classes));
  std::iota(labels.begin(), labels.end(), 0);
  return make_signature(feature_dim, std::move(labels));
}

inline bool check_homogeneity(const DataSignature& a, const DataSignature& b) {
  return a.feature_dim == b.feature_dim && a.label_set == b.label_set;
}

struct Cluster {
  int id = 0;
  std::vector<DeviceId> members;  // ascending
  DeviceId seed = 0;
  // False for isolated devices that could not join any cluster holding a
  // base-station-connectable member. They are excluded from aggregation.
  bool participating = true;
};

struct ClusterAssignment {
  std::vector<Cluster> clusters;

  const Cluster* cluster_of(DeviceId id) const {
    for (const auto& c : clusters) {
      if (std::find(c.members.begin(), c.members.end(), id) != c.members.end()) return &c;
    }
    return nullptr;
  }

  std::vector<DeviceId> participants() const {
    std::vector<DeviceId> out;
    for (const auto& c : clusters) {
      if (c.participating) out.insert(out.end(), c.members.begin(), c.members.end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

namespace detail {

// Everything form_clusters needs, indexed by position in the input list.
struct ClusterProblem {
  std::size_t n = 0;
  std::vector<DeviceId> ids;
  std::vector<bool> connectable;
  std::vector<bool> seed_eligible;
  std::vector<std::vector<double>> dist;
  std::vector<std::vector<bool>> joinable;  // joinable[i][s]: i may join a cluster seeded by s
  ClusterPolicy policy;
};

// Objective, compared lexicographically: fewest non-participating devices,
// then fewest clusters, then smallest total member-to-seed distance (summed in
// input order), then the smallest per-device seed-id vector.
struct ClusterScore {
  std::size_t nonparticipating = 0;
  std::size_t clusters = 0;
  double cost = 0.0;
  std::vector<DeviceId> seed_ids;

  friend bool operator<(const ClusterScore& a, const ClusterScore& b) {
    if (a.nonparticipating != b.nonparticipating) return a.nonparticipating < b.nonparticipating;
    if (a.clusters != b.clusters) return a.clusters < b.clusters;
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.seed_ids < b.seed_ids;
  }
};

inline ClusterProblem make_problem(const std::vector<DeviceNode>& devices, const std::vector<bool>& connectable,
                                   const std::vector<DataSignature>& signatures, const ClusterPolicy& policy,
                                   const LinkModel& link) {
  ClusterProblem p;
  p.n = devices.size();
  p.policy = policy;
  p.connectable = connectable;
  p.ids.reserve(p.n);
  for (const auto& d : devices) p.ids.push_back(d.id);
  p.seed_eligible.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) p.seed_eligible[i] = !policy.require_bs_member || connectable[i];
  p.dist.assign(p.n, std::vector<double>(p.n, 0.0));
  p.joinable.assign(p.n, std::vector<bool>(p.n, false));
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t j = 0; j < p.n; ++j) {
      p.dist[i][j] = i == j ? 0.0 : distance(devices[i].pos, devices[j].pos);
      p.joinable[i][j] = check_homogeneity(signatures[i], signatures[j]) &&
                         can_connect(link, transmission_delay(link, devices[i], devices[j].pos));
    }
  }
  return p;
}

// Canonical seed of a set of member indices: the eligible member that every
// other member can join and that minimizes the summed distance, lower input
// index on ties. Returns nullopt when no member qualifies.
inline std::optional<std::size_t> canonical_seed(const ClusterProblem& p, const std::vector<std::size_t>& members) {
  std::optional<std::size_t> best;
  double best_cost = 0.0;
  for (std::size_t s : members) {
    if (!p.seed_eligible[s]) continue;
    bool ok = true;
    double c = 0.0;
    for (std::size_t m : members) {
      if (m == s) continue;
      if (!p.joinable[m][s]) {
        ok = false;
        break;
      }
      c += p.dist[m][s];
    }
    if (!ok) continue;
    if (!best || c < best_cost) {
      best = s;
      best_cost = c;
    }
  }
  return best;
}

// Scores a complete assignment given as per-device group labels.
inline ClusterScore score_groups(const ClusterProblem& p, const std::vector<std::size_t>& group_of) {
  std::size_t groups = 0;
  for (std::size_t g : group_of) groups = std::max(groups, g + 1);
  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t i = 0; i < p.n; ++i) members[group_of[i]].push_back(i);

  std::vector<std::size_t> seed_of(p.n);
  ClusterScore score;
  score.seed_ids.resize(p.n);
  for (const auto& g : members) {
    if (g.empty()) continue;
    ++score.clusters;
    const auto seed = g.size() == 1 ? std::optional<std::size_t>(g.front()) : canonical_seed(p, g);
    const bool has_connectable = std::any_of(g.begin(), g.end(), [&](std::size_t m) { return p.connectable[m]; });
    if (!has_connectable) score.nonparticipating += g.size();
    for (std::size_t m : g) seed_of[m] = *seed;
  }
  for (std::size_t i = 0; i < p.n; ++i) {
    score.cost += p.dist[i][seed_of[i]];
    score.seed_ids[i] = p.ids[seed_of[i]];
  }
  return score;
}

class SeedSearch {
 public:
  explicit SeedSearch(const ClusterProblem& p) : p_(p) {}

  std::vector<std::size_t> solve() {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < p_.n; ++i) {
      if (p_.seed_eligible[i]) eligible.push_back(i);
    }
    const std::size_t subsets = std::size_t{1} << eligible.size();
    for (std::size_t mask = 1; mask < subsets; ++mask) {
      is_seed_.assign(p_.n, false);
      seeds_.clear();
      for (std::size_t b = 0; b < eligible.size(); ++b) {
        if (mask & (std::size_t{1} << b)) {
          is_seed_[eligible[b]] = true;
          seeds_.push_back(eligible[b]);
        }
      }
      load_.assign(p_.n, 1);
      group_.assign(p_.n, kUnassigned);
      for (std::size_t s : seeds_) group_[s] = s;
      isolated_ = 0;
      descend(0, 0.0);
    }
    return best_groups_;
  }

 private:
  static constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

  bool bound_exceeds(double cost) const {
    if (!best_) return false;
    // Seeded clusters always participate when a connectable member is
    // required, so only isolated devices count as non-participating here.
    const std::size_t nonpart = p_.policy.require_bs_member ? isolated_ : 0;
    const std::size_t clusters = seeds_.size() + isolated_;
    if (nonpart != best_->nonparticipating) return nonpart > best_->nonparticipating;
    if (clusters != best_->clusters) return clusters > best_->clusters && p_.policy.require_bs_member;
    return cost > best_->cost && p_.policy.require_bs_member;
  }

  void descend(std::size_t i, double cost) {
    if (bound_exceeds(cost)) return;
    while (i < p_.n && is_seed_[i]) ++i;
    if (i == p_.n) {
      finish();
      return;
    }
    // Nearest seed first, then the next nearest, isolation last.
    std::vector<std::size_t> options;
    for (std::size_t s : seeds_) {
      if (load_[s] < static_cast<std::size_t>(p_.policy.max_size) && p_.joinable[i][s]) options.push_back(s);
    }
    std::sort(options.begin(), options.end(), [&](std::size_t a, std::size_t b) {
      if (p_.dist[i][a] != p_.dist[i][b]) return p_.dist[i][a] < p_.dist[i][b];
      return p_.ids[a] < p_.ids[b];
    });
    for (std::size_t s : options) {
      group_[i] = s;
      ++load_[s];
      descend(i + 1, cost + p_.dist[i][s]);
      --load_[s];
    }
    // A connectable non-seed that cannot join anything is covered by a seed
    // subset containing it, so only non-eligible devices are isolated here.
    if (!p_.seed_eligible[i]) {
      group_[i] = i;
      ++isolated_;
      descend(i + 1, cost);
      --isolated_;
    }
    group_[i] = kUnassigned;
  }

  void finish() {
    // Relabel groups densely so score_groups sees 0..k-1.
    std::vector<std::size_t> label(p_.n, kUnassigned);
    std::vector<std::size_t> groups(p_.n);
    std::size_t next = 0;
    for (std::size_t i = 0; i < p_.n; ++i) {
      const std::size_t g = group_[i];
      if (label[g] == kUnassigned) label[g] = next++;
      groups[i] = label[g];
    }
    ClusterScore s = score_groups(p_, groups);
    if (!best_ || s < *best_) {
      best_ = std::move(s);
      best_groups_ = std::move(groups);
    }
  }

  const ClusterProblem& p_;
  std::vector<bool> is_seed_;
  std::vector<std::size_t> seeds_;
  std::vector<std::size_t> load_;
  std::vector<std::size_t> group_;
  std::size_t isolated_ = 0;
  std::optional<ClusterScore> best_;
  std::vector<std::size_t> best_groups_;
};

// Greedy assignment for inputs too large for the exact search: every eligible
// device seeds a cluster and the rest join their nearest joinable seed with
// free capacity, falling back to the next nearest, then to isolation.
inline std::vector<std::size_t> greedy_groups(const ClusterProblem& p) {
  std::vector<std::size_t> group(p.n);
  std::vector<std::size_t> load(p.n, 1);
  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < p.n; ++i) {
    if (p.seed_eligible[i]) seeds.push_back(i);
  }
  for (std::size_t i = 0; i < p.n; ++i) {
    group[i] = i;
    if (p.seed_eligible[i]) continue;
    std::optional<std::size_t> pick;
    for (std::size_t s : seeds) {
      if (load[s] >= static_cast<std::size_t>(p.policy.max_size) || !p.joinable[i][s]) continue;
      if (!pick || p.dist[i][s] < p.dist[i][*pick] ||
          (p.dist[i][s] == p.dist[i][*pick] && p.ids[s] < p.ids[*pick])) {
        pick = s;
      }
    }
    if (pick) {
      group[i] = *pick;
      ++load[*pick];
    }
  }
  return group;
}

}  // namespace detail

// Inputs above this size use the greedy assignment instead of the exact search.
inline constexpr std::size_t kExactClusteringLimit = 12;

// Partitions devices into device-to-device clusters. Each cluster has at most
// `policy.max_size` members, holds a base-station-connectable seed (when
// required), and every member is homogeneous with the seed and within the
// link's delay cutoff of it. Among feasible partitions the one with the best
// detail::ClusterScore is returned; devices that fit nowhere become
// non-participating singletons.
inline ClusterAssignment form_clusters(const std::vector<DeviceNode>& devices, const std::vector<bool>& connectable,
                                       const std::vector<DataSignature>& signatures, const ClusterPolicy& policy,
                                       const LinkModel& link = {}) {
  if (policy.max_size < 1) throw InvalidArgument("cluster max_size must be >= 1");
  if (connectable.size() != devices.size() || signatures.size() != devices.size()) {
    throw DimensionMismatch("form_clusters: per-device inputs must match the device count");
  }
  if (std::none_of(connectable.begin(), connectable.end(), [](bool c) { return c; })) {
    throw NoConnectableDevice("no device can reach the base station");
  }
  const auto problem = detail::make_problem(devices, connectable, signatures, policy, link);
  const std::vector<std::size_t> groups = devices.size() <= kExactClusteringLimit
                                              ? detail::SeedSearch(problem).solve()
                                              : detail::greedy_groups(problem);

  std::size_t count = 0;
  for (std::size_t g : groups) count = std::max(count, g + 1);
  std::vector<std::vector<std::size_t>> members(count);
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);

  ClusterAssignment out;
  for (auto& g : members) {
    if (g.empty()) continue;
    Cluster c;
    const auto seed = g.size() == 1 ? std::optional<std::size_t>(g.front()) : detail::canonical_seed(problem, g);
    c.seed = problem.ids[*seed];
    c.participating = std::any_of(g.begin(), g.end(), [&](std::size_t m) { return problem.connectable[m]; });
    for (std::size_t m : g) c.members.push_back(problem.ids[m]);
    std::sort(c.members.begin(), c.members.end());
    out.clusters.push_back(std::move(c));
  }
  std::sort(out.clusters.begin(), out.clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.members.front() < b.members.front(); });
  for (std::size_t k = 0; k < out.clusters.size(); ++k) out.clusters[k].id = static_cast<int>(k);
  return out;
}

}  // namespace dbfl
