#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbfl/clustering.hpp"
#include "dbfl/errors.hpp"
#include "dbfl/network.hpp"

namespace dbfl {

enum class AggregationMethod { WeightedAveraging, AdaptiveWeightedAveraging, MetaLearning, Retraining };

inline const char* to_string(AggregationMethod m) {
  switch (m) {
    case AggregationMethod::WeightedAveraging: return "weighted";
    case AggregationMethod::AdaptiveWeightedAveraging: return "adaptive";
    case AggregationMethod::MetaLearning: return "meta";
    case AggregationMethod::Retraining: return "retraining";
  }
  return "?";
}

inline AggregationMethod aggregation_method_from_string(const std::string& s) {
  if (s == "weighted") return AggregationMethod::WeightedAveraging;
  if (s == "adaptive") return AggregationMethod::AdaptiveWeightedAveraging;
  if (s == "meta") return AggregationMethod::MetaLearning;
  if (s == "retraining") return AggregationMethod::Retraining;
  throw ConfigError("unknown aggregation method '" + s + "'");
}

struct ModelArtifact {
  DenseNetwork network;
  std::optional<DenseNetwork> encoder;
  int source_id = 0;  // device or head that submitted the artifact
  int origin_id = 0;  // device whose local training produced the network
  int round = 0;
  DataSignature signature;
  // A meta artifact's network consumes the concatenated outputs of
  // `meta_members` and cannot run on its own.
  bool is_meta = false;
  std::vector<ModelArtifact> meta_members;

  std::size_t parameter_count() const {
    std::size_t n = network.parameter_count();
    for (const auto& m : meta_members) n += m.parameter_count();
    return n;
  }
};

inline void validate(const ModelArtifact& a) {
  if (a.signature.label_set.size() != a.network.output_dim()) {
    throw DimensionMismatch("artifact " + std::to_string(a.source_id) + ": label set size " +
                            std::to_string(a.signature.label_set.size()) + " != network output " +
                            std::to_string(a.network.output_dim()));
  }
}

struct ProbeSet {
  Matrix features;
  std::vector<int> labels;  // may be empty for plain averaging

  bool has_labels() const { return !labels.empty(); }
};

inline void validate(const ProbeSet& p) {
  if (p.features.rows() == 0) throw EmptyDataset("probe set is empty");
  if (p.has_labels() && p.labels.size() != p.features.rows()) {
    throw DimensionMismatch("probe label count does not match its rows");
  }
}

inline ProbabilityMatrix artifact_proba(const ModelArtifact& a, const Matrix& x) {
  if (!a.is_meta) return predict_proba(a.network, x);
  std::vector<ProbabilityMatrix> parts;
  for (const auto& m : a.meta_members) parts.push_back(artifact_proba(m, x));
  std::size_t cols = 0;
  for (const auto& p : parts) cols += p.cols();
  Matrix joined(x.rows(), cols);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::size_t c = 0;
    for (const auto& p : parts) {
      for (double v : p.row(r)) joined(r, c++) = v;
    }
  }
  return predict_proba(a.network, joined);
}

namespace detail {

inline void check_members(std::span<const ModelArtifact> members) {
  if (members.empty()) throw EmptyMemberList("no member models to aggregate");
  for (const auto& m : members) {
    validate(m);
    if (!check_homogeneity(m.signature, members.front().signature)) {
      throw SignatureMismatch("member " + std::to_string(m.source_id) + " signature differs from member " +
                              std::to_string(members.front().source_id));
    }
  }
}

inline double frobenius_distance(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.rows() * a.cols(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// Index of the member whose matrix is closest to `target`; ties go to the
// lower source id.
inline std::size_t closest_member(std::span<const ModelArtifact> members, std::span<const ProbabilityMatrix> probs,
                                  const Matrix& target) {
  std::size_t best = 0;
  double best_d = frobenius_distance(probs[0].matrix(), target);
  for (std::size_t i = 1; i < members.size(); ++i) {
    const double d = frobenius_distance(probs[i].matrix(), target);
    if (d < best_d || (d == best_d && members[i].source_id < members[best].source_id)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

inline std::vector<ProbabilityMatrix> member_probas(std::span<const ModelArtifact> members, const ProbeSet& probe) {
  std::vector<ProbabilityMatrix> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(artifact_proba(m, probe.features));
  return out;
}

}  // namespace detail

struct WeightedResult {
  std::size_t selected_index = 0;
  ModelArtifact selected;
  ProbabilityMatrix avg;
};

inline std::vector<double> uniform_weights(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

// Averages member class probabilities on the probe and selects the member
// closest to the average in Frobenius distance.
inline WeightedResult aggregate_weighted(std::span<const ModelArtifact> members, const ProbeSet& probe,
                                         std::span<const double> weights) {
  detail::check_members(members);
  validate(probe);
  if (weights.size() != members.size()) throw InvalidArgument("one weight per member required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be finite and nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("weights must sum to 1");

  const auto probs = detail::member_probas(members, probe);
  Matrix avg(probe.features.rows(), probs.front().cols());
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double w = weights[i];
    const Matrix& p = probs[i].matrix();
    for (std::size_t k = 0; k < avg.rows() * avg.cols(); ++k) avg.data()[k] += w * p.data()[k];
  }
  // A convex combination of stochastic rows is stochastic up to rounding.
  const std::size_t best = detail::closest_member(members, probs, avg);
  return {best, members[best], ProbabilityMatrix(std::move(avg), 1e-6)};
}

inline WeightedResult aggregate_weighted(std::span<const ModelArtifact> members, const ProbeSet& probe) {
  const auto w = uniform_weights(members.size());
  return aggregate_weighted(members, probe, w);
}

// Per-class scores sum_m W[c][m] * p_m[r][c].
inline Matrix class_weighted_scores(std::span<const ProbabilityMatrix> probs, const Matrix& weights) {
  const std::size_t R = probs.front().rows();
  const std::size_t C = probs.front().cols();
  Matrix s(R, C);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      double v = 0.0;
      for (std::size_t m = 0; m < probs.size(); ++m) v += weights(c, m) * probs[m](r, c);
      s(r, c) = v;
    }
  }
  return s;
}

inline double class_weighted_accuracy(std::span<const ProbabilityMatrix> probs, const Matrix& weights,
                                      std::span<const int> labels) {
  return accuracy(argmax_rows(class_weighted_scores(probs, weights)), labels);
}

struct AdaptiveOptions {
  double grid_step = 0.05;
  int max_sweeps = 50;
  // Rows with at most this many grid points are searched exhaustively; larger
  // member counts fall back to pairwise weight transfers of one grid step.
  std::size_t exhaustive_row_limit = 2000;
};

namespace detail {

inline std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > (std::size_t{1} << 40)) return r;
  }
  return r;
}

// Enumerates compositions of `units` into `parts` nonnegative integers in
// lexicographic order.
inline void compositions(std::size_t units, std::size_t parts, std::vector<std::vector<std::size_t>>& out) {
  std::vector<std::size_t> cur(parts, 0);
  auto rec = [&](auto& self, std::size_t pos, std::size_t left) -> void {
    if (pos + 1 == parts) {
      cur[pos] = left;
      out.push_back(cur);
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      cur[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, units);
}

// Probe accuracy as a function of one class's weight row with the other
// columns held fixed.
class ClassRowEvaluator {
 public:
  ClassRowEvaluator(std::span<const ProbabilityMatrix> probs, std::span<const int> labels, const Matrix& scores,
                    std::size_t c)
      : probs_(probs), labels_(labels), c_(c) {
    const std::size_t R = scores.rows();
    other_best_.resize(R);
    other_arg_.resize(R);
    for (std::size_t r = 0; r < R; ++r) {
      std::size_t arg = SIZE_MAX;
      double best = 0.0;
      for (std::size_t k = 0; k < scores.cols(); ++k) {
        if (k == c) continue;
        if (arg == SIZE_MAX || scores(r, k) > best) {
          best = scores(r, k);
          arg = k;
        }
      }
      other_best_[r] = best;
      other_arg_[r] = arg;
    }
  }

  std::size_t correct(std::span<const double> row) const {
    std::size_t hit = 0;
    for (std::size_t r = 0; r < labels_.size(); ++r) {
      double v = 0.0;
      for (std::size_t m = 0; m < probs_.size(); ++m) v += row[m] * probs_[m](r, c_);
      std::size_t pred;
      if (other_arg_[r] == SIZE_MAX) {
        pred = c_;
      } else if (v > other_best_[r] || (v == other_best_[r] && c_ < other_arg_[r])) {
        pred = c_;
      } else {
        pred = other_arg_[r];
      }
      hit += pred == static_cast<std::size_t>(labels_[r]);
    }
    return hit;
  }

 private:
  std::span<const ProbabilityMatrix> probs_;
  std::span<const int> labels_;
  std::size_t c_;
  std::vector<double> other_best_;
  std::vector<std::size_t> other_arg_;
};

}  // namespace detail

// Per-class member weights (classes x members, each row on the simplex)
// found by coordinate ascent on probe accuracy. Starts from uniform weights
// and only accepts strict improvements, so the result never scores below
// uniform.
inline Matrix optimize_adaptive_weights(std::span<const ModelArtifact> members, const ProbeSet& probe,
                                        const AdaptiveOptions& opt = {}) {
  detail::check_members(members);
  validate(probe);
  if (!probe.has_labels()) throw MissingLabels("adaptive weighting needs probe labels");
  const std::size_t M = members.size();
  const std::size_t C = members.front().network.output_dim();
  Matrix W(C, M, 1.0 / static_cast<double>(M));
  if (M == 1) return W;

  const auto probs = detail::member_probas(members, probe);
  const std::size_t units = static_cast<std::size_t>(std::llround(1.0 / opt.grid_step));
  std::vector<std::vector<std::size_t>> grid;
  if (detail::binomial(units + M - 1, M - 1) <= opt.exhaustive_row_limit) detail::compositions(units, M, grid);

  Matrix scores = class_weighted_scores(probs, W);
  std::vector<double> row(M);
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    bool improved = false;
    for (std::size_t c = 0; c < C; ++c) {
      const detail::ClassRowEvaluator eval(probs, probe.labels, scores, c);
      for (std::size_t m = 0; m < M; ++m) row[m] = W(c, m);
      std::size_t best = eval.correct(row);
      std::vector<double> best_row = row;
      if (!grid.empty()) {
        for (const auto& g : grid) {
          for (std::size_t m = 0; m < M; ++m) row[m] = static_cast<double>(g[m]) * opt.grid_step;
          const std::size_t hit = eval.correct(row);
          if (hit > best) {
            best = hit;
            best_row = row;
          }
        }
      } else {
        for (std::size_t i = 0; i < M; ++i) {
          for (std::size_t j = 0; j < M; ++j) {
            if (i == j || best_row[j] <= 0.0) continue;
            row = best_row;
            const double step = std::min(opt.grid_step, row[j]);
            row[j] -= step;
            row[i] += step;
            const std::size_t hit = eval.correct(row);
            if (hit > best) {
              best = hit;
              best_row = row;
            }
          }
        }
      }
      bool changed = false;
      for (std::size_t m = 0; m < M; ++m) changed |= best_row[m] != W(c, m);
      if (changed) {
        improved = true;
        for (std::size_t m = 0; m < M; ++m) W(c, m) = best_row[m];
        for (std::size_t r = 0; r < scores.rows(); ++r) {
          double v = 0.0;
          for (std::size_t m = 0; m < M; ++m) v += W(c, m) * probs[m](r, c);
          scores(r, c) = v;
        }
      }
    }
    if (!improved) break;
  }
  return W;
}

// Adaptive counterpart of aggregate_weighted: the per-class weighted scores
// are renormalized per row and the closest member is selected.
inline WeightedResult aggregate_adaptive(std::span<const ModelArtifact> members, const ProbeSet& probe,
                                         const AdaptiveOptions& opt = {}) {
  const Matrix W = optimize_adaptive_weights(members, probe, opt);
  const auto probs = detail::member_probas(members, probe);
  Matrix avg = class_weighted_scores(probs, W);
  for (std::size_t r = 0; r < avg.rows(); ++r) {
    auto row = avg.row(r);
    double s = 0.0;
    for (double v : row) s += v;
    if (s > 0.0) {
      for (double& v : row) v /= s;
    } else {
      for (double& v : row) v = 1.0 / static_cast<double>(row.size());
    }
  }
  const std::size_t best = detail::closest_member(members, probs, avg);
  return {best, members[best], ProbabilityMatrix(std::move(avg), 1e-6)};
}

// Shallow stacking model: a single softmax layer over the concatenated member
// probabilities. `config.input_dim` and `config.hidden_units` are overridden.
inline ModelArtifact train_meta(std::span<const ModelArtifact> members, const ProbeSet& probe, ClassifierConfig config,
                                int aggregator_id = -1) {
  detail::check_members(members);
  validate(probe);
  if (!probe.has_labels()) throw MissingLabels("meta-learning needs probe labels");
  const auto probs = detail::member_probas(members, probe);
  const std::size_t C = probs.front().cols();
  Matrix x(probe.features.rows(), C * members.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t m = 0; m < members.size(); ++m) {
      for (std::size_t c = 0; c < C; ++c) x(r, m * C + c) = probs[m](r, c);
    }
  }
  config.input_dim = x.cols();
  config.hidden_units = 0;
  config.num_classes = C;
  ModelArtifact out;
  out.network = train_classifier(config, x, probe.labels);
  out.source_id = aggregator_id;
  out.origin_id = aggregator_id;
  out.round = members.front().round;
  out.signature = members.front().signature;
  out.is_meta = true;
  out.meta_members.assign(members.begin(), members.end());
  return out;
}

struct LabeledData {
  Matrix features;
  std::vector<int> labels;
  DataSignature signature;
};

// Trains one classifier on the concatenation of all member datasets. With a
// warm start the given network is trained further instead of a fresh one.
inline ModelArtifact retrain_pooled(std::span<const LabeledData> member_data, const ClassifierConfig& config,
                                    const DenseNetwork* warm_start = nullptr, int aggregator_id = -1) {
  if (member_data.empty()) throw EmptyDataset("retrain_pooled: no member datasets");
  for (const auto& d : member_data) {
    if (!check_homogeneity(d.signature, member_data.front().signature)) {
      throw SignatureMismatch("member datasets do not share a signature");
    }
  }
  std::vector<Matrix> parts;
  std::vector<int> labels;
  for (const auto& d : member_data) {
    parts.push_back(d.features);
    labels.insert(labels.end(), d.labels.begin(), d.labels.end());
  }
  const Matrix x = vstack(parts);
  if (x.rows() == 0) throw EmptyDataset("retrain_pooled: member datasets are empty");
  ModelArtifact out;
  if (warm_start) {
    out.network = *warm_start;
    fit_classifier(out.network, x, labels, sgd_options(config));
  } else {
    out.network = train_classifier(config, x, labels);
  }
  out.source_id = aggregator_id;
  out.origin_id = aggregator_id;
  out.signature = member_data.front().signature;
  return out;
}

// Plain (non-meta) networks reachable from an artifact, depth first.
inline void collect_leaves(const ModelArtifact& a, std::vector<ModelArtifact>& out) {
  if (!a.is_meta) {
    out.push_back(a);
    return;
  }
  for (const auto& m : a.meta_members) collect_leaves(m, out);
}

// A meta artifact cannot be retrained locally; broadcast instead the leaf
// network whose probe output is closest to the meta model's output.
inline ModelArtifact broadcastable(const ModelArtifact& a, const ProbeSet& probe) {
  if (!a.is_meta) return a;
  std::vector<ModelArtifact> leaves;
  collect_leaves(a, leaves);
  const auto probs = detail::member_probas(leaves, probe);
  const ProbabilityMatrix target = artifact_proba(a, probe.features);
  return leaves[detail::closest_member(leaves, probs, target.matrix())];
}

}  // namespace dbfl
