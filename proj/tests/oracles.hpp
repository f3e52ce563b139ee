#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance gate. Nothing here calls the library routine it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dbfl/clustering.hpp"
#include "dbfl/head_selection.hpp"
#include "dbfl/network.hpp"
#include "dbfl/rng.hpp"
#include "dbfl/topology.hpp"

namespace oracle {

using dbfl::DeviceNode;

// ---- clustering ---------------------------------------------------------

struct ClusterInput {
  std::vector<DeviceNode> devices;
  std::vector<bool> connectable;
  std::vector<dbfl::DataSignature> signatures;
  dbfl::ClusterPolicy policy;
  dbfl::LinkModel link;
};

inline bool may_join(const ClusterInput& in, std::size_t member, std::size_t seed) {
  const auto& a = in.devices[member];
  const auto& b = in.devices[seed];
  const double delay = dbfl::distance(a.pos, b.pos) * in.link.delay_per_meter_s;
  return in.signatures[member] == in.signatures[seed] && delay <= in.link.max_transmission_time_s;
}

inline bool seed_ok(const ClusterInput& in, std::size_t s) {
  return !in.policy.require_bs_member || in.connectable[s];
}

// Seed of a group under the decided rule, or nullopt if the group is not a
// valid cluster. Singletons are always allowed (an isolated device).
inline std::optional<std::size_t> group_seed(const ClusterInput& in, const std::vector<std::size_t>& g) {
  if (g.size() == 1) return g.front();
  if (g.size() > static_cast<std::size_t>(in.policy.max_size)) return std::nullopt;
  std::optional<std::size_t> best;
  double best_cost = 0.0;
  for (std::size_t s : g) {
    if (!seed_ok(in, s)) continue;
    double c = 0.0;
    bool ok = true;
    for (std::size_t m : g) {
      if (m == s) continue;
      if (!may_join(in, m, s)) ok = false;
      c += dbfl::distance(in.devices[m].pos, in.devices[s].pos);
    }
    if (ok && (!best || c < best_cost)) {
      best = s;
      best_cost = c;
    }
  }
  return best;
}

struct PartitionScore {
  std::size_t nonparticipating = 0;
  std::size_t clusters = 0;
  double cost = 0.0;
  std::vector<int> seed_ids;

  auto key() const { return std::tie(nonparticipating, clusters, cost, seed_ids); }
  bool operator<(const PartitionScore& o) const { return key() < o.key(); }
};

struct Partition {
  std::vector<std::vector<int>> groups;  // device ids, each sorted, groups sorted by first id
  PartitionScore score;
};

inline std::vector<std::vector<int>> canonical_groups(std::vector<std::vector<int>> g) {
  for (auto& x : g) std::sort(x.begin(), x.end());
  std::sort(g.begin(), g.end());
  return g;
}

// Every set partition of the devices via restricted growth strings, keeping
// the feasible one with the best score.
inline std::optional<Partition> best_partition(const ClusterInput& in) {
  const std::size_t n = in.devices.size();
  std::vector<std::size_t> label(n, 0);
  std::optional<Partition> best;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
    if (i == n) {
      std::vector<std::vector<std::size_t>> groups(used);
      for (std::size_t k = 0; k < n; ++k) groups[label[k]].push_back(k);
      std::vector<std::size_t> seed_of(n);
      PartitionScore sc;
      for (const auto& g : groups) {
        const auto s = group_seed(in, g);
        if (!s) return;
        bool any_conn = false;
        for (std::size_t m : g) any_conn = any_conn || in.connectable[m];
        if (!any_conn) sc.nonparticipating += g.size();
        for (std::size_t m : g) seed_of[m] = *s;
      }
      sc.clusters = groups.size();
      for (std::size_t k = 0; k < n; ++k) {
        sc.cost += k == seed_of[k] ? 0.0 : dbfl::distance(in.devices[k].pos, in.devices[seed_of[k]].pos);
        sc.seed_ids.push_back(in.devices[seed_of[k]].id);
      }
      if (!best || sc < best->score) {
        Partition p;
        for (const auto& g : groups) {
          std::vector<int> ids;
          for (std::size_t m : g) ids.push_back(in.devices[m].id);
          p.groups.push_back(ids);
        }
        p.groups = canonical_groups(p.groups);
        p.score = sc;
        best = p;
      }
      return;
    }
    for (std::size_t g = 0; g <= used; ++g) {
      label[i] = g;
      rec(i + 1, std::max(used, g + 1));
    }
  };
  rec(0, 0);
  return best;
}

// Empty string when the assignment satisfies every structural constraint.
inline std::string constraint_violation(const ClusterInput& in, const dbfl::ClusterAssignment& a) {
  std::vector<int> seen;
  for (const auto& c : a.clusters) {
    if (c.members.empty()) return "empty cluster";
    for (int id : c.members) seen.push_back(id);
    if (c.members.size() > static_cast<std::size_t>(in.policy.max_size)) return "cluster too large";
    auto idx = [&](int id) {
      for (std::size_t k = 0; k < in.devices.size(); ++k) {
        if (in.devices[k].id == id) return k;
      }
      return in.devices.size();
    };
    bool any_conn = false;
    for (int id : c.members) any_conn = any_conn || in.connectable[idx(id)];
    if (c.participating != any_conn) return "participating flag wrong";
    if (c.members.size() > 1) {
      const std::size_t s = idx(c.seed);
      if (std::find(c.members.begin(), c.members.end(), c.seed) == c.members.end()) return "seed not a member";
      if (!seed_ok(in, s)) return "seed cannot reach the base station";
      if (in.policy.require_bs_member && !any_conn) return "multi-member cluster without base-station member";
      for (int id : c.members) {
        if (id != c.seed && !may_join(in, idx(id), s)) return "member cannot reach its seed";
      }
    }
  }
  std::sort(seen.begin(), seen.end());
  std::vector<int> all;
  for (const auto& d : in.devices) all.push_back(d.id);
  std::sort(all.begin(), all.end());
  if (seen != all) return "not a partition of the devices";
  return {};
}

inline std::vector<std::vector<int>> groups_of(const dbfl::ClusterAssignment& a) {
  std::vector<std::vector<int>> g;
  for (const auto& c : a.clusters) g.push_back(c.members);
  return canonical_groups(g);
}

// Random topology with at least one connectable device.
inline ClusterInput random_cluster_input(dbfl::Rng& rng, std::size_t n) {
  ClusterInput in;
  in.policy = {};
  in.link = {};
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    DeviceNode d;
    d.id = static_cast<int>(i) * 3 + 1;  // ids differ from indices
    d.pos = {rng.uniform(-150.0, 150.0), rng.uniform(-150.0, 150.0)};
    in.devices.push_back(d);
    const bool c = rng.uniform() < 0.45;
    in.connectable.push_back(c);
    any = any || c;
    // Mostly one signature, occasionally a second one.
    in.signatures.push_back(dbfl::make_signature(rng.uniform() < 0.15 ? 7 : 5, 3));
  }
  if (!any) in.connectable[rng.below(n)] = true;
  return in;
}

// ---- head selection -----------------------------------------------------

// Winner by sorting all connectable candidates on the rule tuple.
inline std::optional<int> head_oracle(const std::vector<dbfl::HeadCandidateView>& c) {
  std::vector<dbfl::HeadCandidateView> ok;
  for (const auto& v : c) {
    if (v.bs_connectable) ok.push_back(v);
  }
  if (ok.empty()) return std::nullopt;
  auto key = [](const dbfl::HeadCandidateView& v) {
    return std::make_tuple(v.aggregated_distance_m, -v.battery, v.mobile ? 1 : 0, v.bs_latency_s, v.device_id);
  };
  std::sort(ok.begin(), ok.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  return ok.front().device_id;
}

inline std::vector<dbfl::HeadCandidateView> random_candidates(dbfl::Rng& rng) {
  const std::size_t n = 1 + rng.below(6);
  std::vector<dbfl::HeadCandidateView> out;
  for (std::size_t i = 0; i < n; ++i) {
    dbfl::HeadCandidateView v;
    v.device_id = static_cast<int>(rng.below(1000));
    v.bs_connectable = rng.uniform() < 0.6;
    // Coarse values so that ties on every rule actually occur.
    v.aggregated_distance_m = static_cast<double>(rng.below(4)) * 10.0;
    v.battery = 80.0 + static_cast<double>(rng.below(3)) * 10.0;
    v.mobile = rng.uniform() < 0.5;
    v.bs_latency_s = static_cast<double>(rng.below(3)) * 0.02;
    out.push_back(v);
  }
  return out;
}

// ---- neural network gradients --------------------------------------------

// Central finite-difference estimate of d loss / d parameter for every
// parameter of `net`.
inline dbfl::Gradients numeric_gradients(const dbfl::DenseNetwork& net,
                                         const std::function<double(const dbfl::DenseNetwork&)>& loss,
                                         double h = 1e-5) {
  dbfl::Gradients g;
  dbfl::DenseNetwork work = net;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto probe = [&](double& p) {
      const double orig = p;
      p = orig + h;
      const double up = loss(work);
      p = orig - h;
      const double down = loss(work);
      p = orig;
      return (up - down) / (2.0 * h);
    };
    g.weights.emplace_back();
    g.bias.emplace_back();
    for (auto& w : work.layers[k].weights) g.weights.back().push_back(probe(w));
    for (auto& b : work.layers[k].bias) g.bias.back().push_back(probe(b));
  }
  return g;
}

// max over parameters of |a - n| / max(|a| + |n|, floor)
inline double max_relative_error(const dbfl::Gradients& analytic, const dbfl::Gradients& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  auto cmp = [&](const std::vector<double>& a, const std::vector<double>& n) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double denom = std::max(std::abs(a[i]) + std::abs(n[i]), floor);
      worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
    }
  };
  for (std::size_t k = 0; k < analytic.weights.size(); ++k) {
    cmp(analytic.weights[k], numeric.weights[k]);
    cmp(analytic.bias[k], numeric.bias[k]);
  }
  return worst;
}

// Small random network: 1-2 layers, at most 10 units per layer. Smooth
// activations keep the finite differences away from ReLU kinks.
inline dbfl::DenseNetwork random_small_net(dbfl::Rng& rng, std::size_t in, std::size_t out, dbfl::Activation last) {
  dbfl::DenseNetwork net;
  const bool hidden = rng.uniform() < 0.7;
  if (hidden) {
    const std::size_t h = 2 + rng.below(8);
    net.layers.push_back(dbfl::init_layer(in, h, rng.uniform() < 0.5 ? dbfl::Activation::Sigmoid : dbfl::Activation::Linear, rng));
    net.layers.push_back(dbfl::init_layer(h, out, last, rng));
  } else {
    net.layers.push_back(dbfl::init_layer(in, out, last, rng));
  }
  for (auto& l : net.layers) {
    for (auto& b : l.bias) b = rng.uniform(-0.5, 0.5);
  }
  return net;
}

// ---- aggregation ----------------------------------------------------------

inline dbfl::Matrix random_probability_rows(dbfl::Rng& rng, std::size_t rows, std::size_t cols) {
  dbfl::Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (m(r, c) = rng.uniform() + 1e-3);
    for (std::size_t c = 0; c < cols; ++c) m(r, c) /= s;
  }
  return m;
}

inline double frobenius(const dbfl::Matrix& a, const dbfl::Matrix& b) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double d = a(r, c) - b(r, c);
      s += d * d;
    }
  }
  return std::sqrt(s);
}

// Exhaustive recomputation: average the member matrices with the given
// weights and return the index at minimum distance, lower id on ties.
inline std::size_t weighted_selection(const std::vector<dbfl::Matrix>& probs, const std::vector<double>& w,
                                      const std::vector<int>& ids) {
  dbfl::Matrix avg(probs[0].rows(), probs[0].cols());
  for (std::size_t r = 0; r < avg.rows(); ++r) {
    for (std::size_t c = 0; c < avg.cols(); ++c) {
      for (std::size_t m = 0; m < probs.size(); ++m) avg(r, c) += w[m] * probs[m](r, c);
    }
  }
  std::vector<std::pair<double, int>> key;
  for (std::size_t m = 0; m < probs.size(); ++m) key.emplace_back(frobenius(probs[m], avg), ids[m]);
  return static_cast<std::size_t>(std::min_element(key.begin(), key.end()) - key.begin());
}

// Probe accuracy of per-class weights W (classes x members); argmax takes
// the first maximum.
inline double per_class_weighted_accuracy(const std::vector<dbfl::Matrix>& probs, const dbfl::Matrix& W,
                                          const std::vector<int>& labels) {
  std::size_t hit = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t c = 0; c < W.rows(); ++c) {
      double v = 0.0;
      for (std::size_t m = 0; m < probs.size(); ++m) v += W(c, m) * probs[m](r, c);
      if (v > best) {
        best = v;
        arg = c;
      }
    }
    hit += static_cast<int>(arg) == labels[r];
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace oracle
