#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dbfl/aggregation.hpp"
#include "dbfl/clustering.hpp"
#include "dbfl/data.hpp"
#include "dbfl/energy.hpp"
#include "dbfl/head_selection.hpp"
#include "dbfl/network.hpp"
#include "dbfl/topology.hpp"

namespace dbfl {

enum class ScenarioKind { CVFL, DBFL_Homogeneous, DBFL_Heterogeneous };

inline constexpr ScenarioKind kAllScenarios[] = {ScenarioKind::CVFL, ScenarioKind::DBFL_Homogeneous,
                                                 ScenarioKind::DBFL_Heterogeneous};

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::CVFL: return "cvfl";
    case ScenarioKind::DBFL_Homogeneous: return "dbfl-homo";
    case ScenarioKind::DBFL_Heterogeneous: return "dbfl-hetero";
  }
  return "?";
}

inline ScenarioKind scenario_from_string(const std::string& s) {
  if (s == "cvfl") return ScenarioKind::CVFL;
  if (s == "dbfl-homo") return ScenarioKind::DBFL_Homogeneous;
  if (s == "dbfl-hetero") return ScenarioKind::DBFL_Heterogeneous;
  throw ConfigError("unknown scenario '" + s + "' (expected cvfl, dbfl-homo or dbfl-hetero)");
}

struct TrainingParams {
  std::size_t hidden_units = 80;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  int local_epochs = 1;
  bool shuffle = true;
  int meta_epochs = 20;
};

struct DataPlan {
  DatasetSchema schema;
  SyntheticParams synthetic;
  std::size_t samples_per_device = 3500;
  std::size_t test_samples = 2000;
  double probe_fraction = 0.1;
  // Heterogeneous pipeline.
  std::size_t subset_size = 50;
  std::size_t latent_dim = 25;
  int autoencoder_epochs = 10;
  double autoencoder_learning_rate = 0.01;
  // Devices keep refining their encoder jointly with the global classifier
  // during local training. When false the pretrained encoders stay frozen.
  bool finetune_encoder = true;
  // Loaded dataset; a synthetic one is generated from the run seed when null.
  std::shared_ptr<const Dataset> dataset;
};

struct EnergySetup {
  EnergyParams params;  // `cycle` is drawn per node from [cycle_min, cycle_max]
  double cycle_min = 0.2;
  double cycle_max = 0.35;
  bool randomize_battery = true;  // otherwise DeviceNode::battery is used
  double battery_min = 80.0;
  double battery_max = 100.0;
  double head_battery = 100.0;
  double aggregation_epochs = 0.1;  // head aggregation work, in local epochs
  // Multiplies every distance entering the transmission term. Connectivity is
  // unaffected.
  double distance_scale = 1.0;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::DBFL_Homogeneous;
  std::vector<DeviceNode> devices;
  Position base_station;
  int rounds = 100;
  LinkModel link;
  MobilityModel mobility;
  ClusterPolicy cluster_policy;
  HeadPolicy head_policy;
  AggregationMethod aggregation = AggregationMethod::WeightedAveraging;
  EnergySetup energy;
  DataPlan data;
  TrainingParams training;
  std::uint64_t seed = 0;
  // Energy-only runs skip data, training and evaluation; accuracy is reported
  // as 0. Energy never depends on learned weights, so totals are unchanged.
  bool train_models = true;
};

inline void validate(const ScenarioConfig& c) {
  if (c.rounds < 0) throw ConfigError("rounds must be >= 0");
  if (c.devices.empty()) throw ConfigError("at least one device is required");
  for (std::size_t i = 0; i < c.devices.size(); ++i) {
    try {
      validate(c.devices[i]);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (c.devices[j].id == c.devices[i].id) throw ConfigError("duplicate device id " + std::to_string(c.devices[i].id));
    }
  }
  try {
    validate(c.link);
    validate(c.data.schema);
    validate(c.data.synthetic);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (c.cluster_policy.max_size < 1) throw ConfigError("cluster max_size must be >= 1");
  if (c.head_policy.reselect_interval_rounds < 1) throw ConfigError("head reselect interval must be >= 1");
  if (c.data.samples_per_device < 2) throw ConfigError("samples_per_device must be >= 2");
  if (!(c.data.probe_fraction > 0.0 && c.data.probe_fraction < 1.0)) throw ConfigError("probe_fraction must be in (0, 1)");
  if (c.data.test_samples == 0) throw ConfigError("test_samples must be positive");
  if (c.kind == ScenarioKind::DBFL_Heterogeneous) {
    if (c.data.subset_size == 0 || c.data.subset_size > c.data.schema.num_features) {
      throw ConfigError("subset_size must be in [1, num_features]");
    }
    if (c.data.latent_dim == 0 || c.data.latent_dim > c.data.subset_size) {
      throw ConfigError("latent_dim must be in [1, subset_size]");
    }
    if (c.data.autoencoder_epochs < 0) throw ConfigError("autoencoder_epochs must be >= 0");
  }
  const auto& e = c.energy;
  if (!(e.cycle_min >= 0.2 && e.cycle_max <= 0.35 && e.cycle_min <= e.cycle_max)) {
    throw ConfigError("consumption cycle range must lie within [0.2, 0.35]");
  }
  if (!(e.battery_min >= 0.0 && e.battery_max <= 100.0 && e.battery_min <= e.battery_max)) {
    throw ConfigError("battery range must lie within [0, 100]");
  }
  if (!(e.head_battery >= 0.0 && e.head_battery <= 100.0)) throw ConfigError("head_battery must be in [0, 100]");
  if (!(e.distance_scale > 0.0) || !std::isfinite(e.distance_scale)) throw ConfigError("distance_scale must be > 0");
  if (!(e.aggregation_epochs >= 0.0)) throw ConfigError("aggregation_epochs must be >= 0");
  if (!(e.params.attenuation > 0.0) || !(e.params.compute_coeff >= 0.0) || !(e.params.payload_scale >= 0.0)) {
    throw ConfigError("energy coefficients must be nonnegative and attenuation positive");
  }
  const auto& t = c.training;
  if (t.hidden_units == 0 || t.batch_size == 0 || !(t.learning_rate > 0.0) || t.local_epochs < 0 || t.meta_epochs < 0) {
    throw ConfigError("training parameters must be positive");
  }
}

inline constexpr int kBaseStation = -1;

struct LinkUse {
  DeviceId from = 0;
  int to = kBaseStation;  // device id, or kBaseStation
  double delay_s = 0.0;
  bool connected = false;
};

struct RoundTrace {
  int round = 0;
  std::vector<DeviceId> participants;          // ascending
  std::vector<std::vector<DeviceId>> clusters;  // empty for CVFL
  std::vector<DeviceId> heads;                  // one per participating cluster
  double accuracy = 0.0;
  std::vector<EnergyTicks> node_energy;  // debits this round, config device order
  std::vector<LinkUse> links;

  EnergyTicks total_energy() const {
    EnergyTicks s = 0;
    for (auto e : node_energy) s += e;
    return s;
  }
};

struct ScenarioResult {
  ScenarioKind kind = ScenarioKind::CVFL;
  std::vector<DeviceId> device_ids;
  std::vector<RoundTrace> rounds;
  std::vector<EnergyTicks> initial_energy;
  std::vector<EnergyTicks> remaining_energy;

  EnergyTicks total_energy() const {
    EnergyTicks s = 0;
    for (const auto& r : rounds) s += r.total_energy();
    return s;
  }
  double final_accuracy() const { return rounds.empty() ? 0.0 : rounds.back().accuracy; }
};

// Reference topology: base station at the origin and five devices with
// manual base-station latencies of 0.05, 0.08, 0.09, 0.12 and 0.15 s. The two
// slowest exceed the 0.1 s cutoff. Positions agree with the latencies at the
// default 1 ms per meter.
inline std::vector<DeviceNode> reference_devices() {
  const double a = 40.0 * std::numbers::pi / 180.0;
  auto node = [](DeviceId id, double r, double angle, bool mobile, double latency) {
    DeviceNode d;
    d.id = id;
    d.pos = {r * std::cos(angle), r * std::sin(angle)};
    d.mobile = mobile;
    d.bs_latency_s = latency;
    d.partition_id = id;
    d.feature_dim = 274;
    return d;
  };
  return {node(0, 50.0, 0.0, false, 0.05), node(1, 80.0, 0.0, true, 0.08), node(2, 90.0, a, false, 0.09),
          node(3, 120.0, a, false, 0.12), node(4, 150.0, a, true, 0.15)};
}

inline ScenarioConfig reference_scenario(ScenarioKind kind, std::uint64_t seed = 0) {
  ScenarioConfig c;
  c.kind = kind;
  c.devices = reference_devices();
  c.seed = seed;
  // Small enough that no node runs flat within 100 rounds on this topology.
  c.energy.params.payload_scale = 2e-5;
  return c;
}

namespace detail {

struct DeviceData {
  Matrix train_in;  // model input space (standardized, or encoded for the heterogeneous scenario)
  std::vector<int> train_labels;
  Matrix probe_in;
  std::vector<int> probe_labels;
  Matrix test_in;
  // Heterogeneous only: standardized raw subsets and the device's encoder.
  Matrix train_raw, probe_raw, test_raw;
  std::optional<DenseNetwork> encoder;
  std::size_t train_count = 0;
};

class ScenarioRunner {
 public:
  explicit ScenarioRunner(const ScenarioConfig& cfg) : cfg_(cfg) {
    validate(cfg_);
    n_ = cfg_.devices.size();
    hetero_ = cfg_.kind == ScenarioKind::DBFL_Heterogeneous;
    dbfl_ = cfg_.kind != ScenarioKind::CVFL;
    classes_ = cfg_.data.schema.num_classes;
    input_dim_ = hetero_ ? cfg_.data.latent_dim : cfg_.data.schema.num_features;
    probe_count_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg_.data.probe_fraction * static_cast<double>(cfg_.data.samples_per_device))));
    train_count_ = cfg_.data.samples_per_device - probe_count_;
    signature_ = make_signature(static_cast<int>(input_dim_), static_cast<int>(classes_));
    classifier_ = {input_dim_,
                   cfg_.training.hidden_units,
                   classes_,
                   cfg_.training.learning_rate,
                   cfg_.training.local_epochs,
                   cfg_.training.batch_size,
                   cfg_.seed};
    reference_params_ = static_cast<double>(input_dim_ * classifier_.hidden_units + classifier_.hidden_units +
                                            classifier_.hidden_units * classes_ + classes_);
    devices_ = cfg_.devices;
    init_energy();
    for (std::size_t i = 0; i < n_; ++i) {
      mobility_.emplace_back(devices_[i], derive_seed(cfg_.seed, Stream::Mobility, static_cast<std::uint64_t>(devices_[i].id)));
    }
    if (cfg_.train_models) {
      init_data();
      global_ = init_classifier(classifier_);
    }
  }

  ScenarioResult run() {
    ScenarioResult out;
    out.kind = cfg_.kind;
    for (const auto& d : devices_) out.device_ids.push_back(d.id);
    for (int r = 0; r < cfg_.rounds; ++r) out.rounds.push_back(step(r));
    for (std::size_t i = 0; i < n_; ++i) {
      out.initial_energy.push_back(energy_.initial_ticks(i));
      out.remaining_energy.push_back(energy_.remaining_ticks(i));
    }
    return out;
  }

  const DenseNetwork& global_model() const { return global_; }

 private:
  void init_energy() {
    Rng battery_rng(derive_seed(cfg_.seed, Stream::Battery));
    Rng cycle_rng(derive_seed(cfg_.seed, Stream::Cycle));
    std::vector<double> initial(n_);
    cycles_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double b = battery_rng.uniform(cfg_.energy.battery_min, cfg_.energy.battery_max);
      initial[i] = cfg_.energy.randomize_battery ? b : devices_[i].battery;
      cycles_[i] = cycle_rng.uniform(cfg_.energy.cycle_min, cfg_.energy.cycle_max);
    }
    energy_ = EnergyState(initial);
  }

  void init_data() {
    const auto& plan = cfg_.data;
    const std::size_t needed = n_ * plan.samples_per_device + plan.test_samples;
    Dataset generated;
    const Dataset* full = plan.dataset.get();
    if (!full) {
      generated = gen_synthetic(plan.schema, needed, cfg_.seed, plan.synthetic);
      full = &generated;
    }
    if (full->features.cols() != plan.schema.num_features) {
      throw SchemaMismatch("dataset has " + std::to_string(full->features.cols()) + " features, schema expects " +
                           std::to_string(plan.schema.num_features));
    }
    if (full->size() <= plan.test_samples) throw EmptyDataset("dataset too small for the requested test split");
    auto [pool, test] = split_holdout(*full, plan.test_samples, cfg_.seed);
    test_labels_ = test.labels;
    const auto parts = partition(pool, {n_, plan.samples_per_device, cfg_.seed});
    FeatureSubsetPlan subsets;
    if (hetero_) subsets = random_subset_plan(plan.schema.num_features, n_, plan.subset_size, cfg_.seed);

    data_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      Dataset local = parts.parts[i];
      Matrix test_x = test.features;
      if (hetero_) {
        local = select_features(local, subsets, i);
        test_x = select_columns(test_x, subsets.columns[i]);
      }
      std::vector<std::size_t> tr(train_count_), pr(probe_count_);
      for (std::size_t k = 0; k < train_count_; ++k) tr[k] = k;
      for (std::size_t k = 0; k < probe_count_; ++k) pr[k] = train_count_ + k;
      const Dataset train = take(local, tr);
      const Dataset probe = take(local, pr);
      const auto z = Standardizer::fit(train.features);
      auto& d = data_[i];
      d.train_count = train_count_;
      d.train_labels = train.labels;
      d.probe_labels = probe.labels;
      if (hetero_) {
        d.train_raw = z.apply(train.features);
        d.probe_raw = z.apply(probe.features);
        d.test_raw = z.apply(test_x);
        AutoencoderConfig ae{plan.subset_size,
                             plan.latent_dim,
                             plan.autoencoder_learning_rate,
                             plan.autoencoder_epochs,
                             cfg_.training.batch_size,
                             derive_seed(cfg_.seed, static_cast<std::uint64_t>(devices_[i].id))};
        d.encoder = train_autoencoder(ae, d.train_raw).encoder;
        refresh_encoded(d);
      } else {
        d.train_in = z.apply(train.features);
        d.probe_in = z.apply(probe.features);
        d.test_in = z.apply(test_x);
      }
    }
  }

  static void refresh_encoded(DeviceData& d) {
    d.train_in = encode(*d.encoder, d.train_raw);
    d.probe_in = encode(*d.encoder, d.probe_raw);
    d.test_in = encode(*d.encoder, d.test_raw);
  }

  double bs_delay(std::size_t i) const {
    return transmission_delay(cfg_.link, devices_[i], cfg_.base_station, devices_[i].bs_latency_s);
  }

  // Uplink of every alive device this round, kBaseStation or a device index.
  struct Topology {
    std::vector<bool> alive, connectable, participant, is_head;
    std::vector<int> uplink;
    std::vector<std::vector<std::size_t>> groups;  // participating clusters, device indices
    std::vector<std::size_t> heads;                // per participating cluster
    std::vector<std::vector<DeviceId>> cluster_ids;
  };

  Topology build_topology(int r) {
    Topology t;
    t.alive.resize(n_);
    t.connectable.resize(n_);
    t.participant.assign(n_, false);
    t.is_head.assign(n_, false);
    t.uplink.assign(n_, kBaseStation);
    std::vector<double> delays(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      t.alive[i] = !energy_.dead(i);
      delays[i] = bs_delay(i);
      t.connectable[i] = t.alive[i] && can_connect(cfg_.link, delays[i]);
    }
    const bool any = std::any_of(t.connectable.begin(), t.connectable.end(), [](bool b) { return b; });
    if (!any) {
      if (r == 0) throw NoConnectableDevice("no device can reach the base station");
      return t;
    }
    if (!dbfl_) {
      t.participant = t.connectable;
      return t;
    }

    std::vector<std::size_t> alive_idx;
    std::vector<DeviceNode> nodes;
    std::vector<bool> conn;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!t.alive[i]) continue;
      alive_idx.push_back(i);
      nodes.push_back(devices_[i]);
      conn.push_back(t.connectable[i]);
    }
    const std::vector<DataSignature> sigs(nodes.size(), signature_);
    const ClusterAssignment assignment = form_clusters(nodes, conn, sigs, cfg_.cluster_policy, cfg_.link);

    const bool reselect = r % cfg_.head_policy.reselect_interval_rounds == 0;
    std::vector<std::size_t> new_heads;
    for (const auto& cl : assignment.clusters) {
      t.cluster_ids.push_back(cl.members);
      if (!cl.participating) continue;
      std::vector<std::size_t> members;
      for (DeviceId id : cl.members) members.push_back(index_of(id));
      auto views = head_candidates(devices_, members, t.connectable, delays);
      if (!reselect) {
        std::vector<HeadCandidateView> kept;
        for (const auto& v : views) {
          if (v.bs_connectable && std::find(heads_.begin(), heads_.end(), index_of(v.device_id)) != heads_.end()) {
            kept.push_back(v);
          }
        }
        if (!kept.empty()) views = kept;
      }
      const std::size_t head = index_of(select_head(views));
      new_heads.push_back(head);
      t.groups.push_back(members);
      t.heads.push_back(head);
      t.is_head[head] = true;
      for (std::size_t m : members) {
        t.participant[m] = true;
        t.uplink[m] = m == head ? kBaseStation : static_cast<int>(head);
      }
    }
    heads_ = new_heads;
    return t;
  }

  std::size_t index_of(DeviceId id) const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (devices_[i].id == id) return i;
    }
    throw InvalidArgument("unknown device id " + std::to_string(id));
  }

  ModelArtifact local_update(std::size_t i, int r) {
    auto& d = data_[i];
    const SgdOptions opt{cfg_.training.learning_rate, cfg_.training.batch_size, cfg_.training.local_epochs,
                         derive_seed(cfg_.seed, Stream::LocalTraining, static_cast<std::uint64_t>(devices_[i].id),
                                     static_cast<std::uint64_t>(r)),
                         cfg_.training.shuffle};
    ModelArtifact a;
    if (hetero_ && cfg_.data.finetune_encoder) {
      const std::size_t enc_layers = d.encoder->layers.size();
      DenseNetwork joint = stack(*d.encoder, global_);
      fit_classifier(joint, d.train_raw, d.train_labels, opt);
      auto [enc, head] = split(joint, enc_layers);
      d.encoder = std::move(enc);
      refresh_encoded(d);
      a.network = std::move(head);
    } else {
      a.network = global_;
      fit_classifier(a.network, d.train_in, d.train_labels, opt);
    }
    if (hetero_) a.encoder = d.encoder;
    a.source_id = a.origin_id = devices_[i].id;
    a.round = r;
    a.signature = signature_;
    return a;
  }

  ProbeSet probe_of(std::span<const std::size_t> idx) const {
    std::vector<Matrix> parts;
    ProbeSet p;
    for (std::size_t i : idx) {
      parts.push_back(data_[i].probe_in);
      p.labels.insert(p.labels.end(), data_[i].probe_labels.begin(), data_[i].probe_labels.end());
    }
    p.features = vstack(parts);
    return p;
  }

  std::vector<double> sample_weights(std::span<const double> counts) const {
    double total = 0.0;
    for (double c : counts) total += c;
    std::vector<double> w;
    for (double c : counts) w.push_back(c / total);
    // Force an exact simplex point.
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < w.size(); ++k) s += w[k];
    if (!w.empty()) w.back() = std::max(0.0, 1.0 - s);
    return w;
  }

  // One aggregation step at any level. `data_idx[k]` lists the devices whose
  // probe and training data stand behind member k.
  ModelArtifact aggregate(std::span<const ModelArtifact> members, const std::vector<std::vector<std::size_t>>& data_idx,
                          int aggregator_id) {
    std::vector<std::size_t> all;
    std::vector<double> counts;
    for (const auto& g : data_idx) {
      all.insert(all.end(), g.begin(), g.end());
      double c = 0.0;
      for (std::size_t i : g) c += static_cast<double>(data_[i].train_count);
      counts.push_back(c);
    }
    const ProbeSet probe = probe_of(all);
    ModelArtifact out;
    if (members.size() == 1) {
      out = members.front();
    } else {
      switch (cfg_.aggregation) {
        case AggregationMethod::WeightedAveraging:
          out = aggregate_weighted(members, probe, sample_weights(counts)).selected;
          break;
        case AggregationMethod::AdaptiveWeightedAveraging:
          out = aggregate_adaptive(members, probe).selected;
          break;
        case AggregationMethod::MetaLearning: {
          ClassifierConfig mc = classifier_;
          mc.epochs = cfg_.training.meta_epochs;
          mc.seed = derive_seed(cfg_.seed, Stream::Aggregation, static_cast<std::uint64_t>(aggregator_id + 1),
                                static_cast<std::uint64_t>(members.front().round));
          out = train_meta(members, probe, mc, aggregator_id);
          break;
        }
        case AggregationMethod::Retraining: {
          std::vector<LabeledData> pooled;
          for (std::size_t i : all) pooled.push_back({data_[i].train_in, data_[i].train_labels, signature_});
          out = retrain_pooled(pooled, classifier_, &global_, aggregator_id);
          out.round = members.front().round;
          break;
        }
      }
    }
    out.source_id = aggregator_id;
    return out;
  }

  // Payload of an aggregated artifact in reference-model units, derived from
  // structure alone so that energy-only runs charge the same amounts.
  double aggregated_payload(std::span<const double> member_payloads) const {
    if (cfg_.aggregation != AggregationMethod::MetaLearning || member_payloads.size() == 1) return 1.0;
    double p = 0.0;
    for (double m : member_payloads) p += m;
    const double meta = static_cast<double>(member_payloads.size() * classes_ * classes_ + classes_);
    return p + meta / reference_params_;
  }

  RoundTrace step(int r) {
    if (r > 0) {
      for (std::size_t i = 0; i < n_; ++i) {
        if (devices_[i].mobile && !energy_.dead(i)) devices_[i].pos = mobility_[i].step(cfg_.mobility, devices_[i].pos);
      }
    }
    Topology t = build_topology(r);
    if (r == 0 && dbfl_) {
      for (std::size_t h : t.heads) energy_.reset_initial(h, cfg_.energy.head_battery);
    }

    RoundTrace trace;
    trace.round = r;
    for (std::size_t i = 0; i < n_; ++i) {
      if (t.participant[i]) trace.participants.push_back(devices_[i].id);
    }
    std::sort(trace.participants.begin(), trace.participants.end());
    trace.clusters = t.cluster_ids;
    for (std::size_t h : t.heads) trace.heads.push_back(devices_[h].id);

    // Learning.
    if (cfg_.train_models) {
      std::vector<std::optional<ModelArtifact>> local(n_);
      for (std::size_t i = 0; i < n_; ++i) {
        if (t.participant[i]) local[i] = local_update(i, r);
      }
      std::optional<ModelArtifact> result;
      if (dbfl_ && !t.groups.empty()) {
        std::vector<ModelArtifact> head_models;
        std::vector<std::vector<std::size_t>> head_data;
        for (std::size_t g = 0; g < t.groups.size(); ++g) {
          std::vector<ModelArtifact> members;
          std::vector<std::vector<std::size_t>> idx;
          for (std::size_t m : t.groups[g]) {
            members.push_back(*local[m]);
            idx.push_back({m});
          }
          head_models.push_back(aggregate(members, idx, devices_[t.heads[g]].id));
          head_data.push_back(t.groups[g]);
        }
        result = aggregate(head_models, head_data, kBaseStation);
      } else if (!dbfl_) {
        std::vector<ModelArtifact> members;
        std::vector<std::vector<std::size_t>> idx;
        for (std::size_t i = 0; i < n_; ++i) {
          if (!t.participant[i]) continue;
          members.push_back(*local[i]);
          idx.push_back({i});
        }
        if (!members.empty()) result = aggregate(members, idx, kBaseStation);
      }
      if (result) {
        std::vector<std::size_t> all;
        for (std::size_t i = 0; i < n_; ++i) {
          if (t.participant[i]) all.push_back(i);
        }
        global_ = broadcastable(*result, probe_of(all)).network;
      }
      double acc = 0.0;
      for (std::size_t i = 0; i < n_; ++i) acc += accuracy(global_, data_[i].test_in, test_labels_);
      trace.accuracy = acc / static_cast<double>(n_);
    }

    // Energy. Every alive device trains and transmits to its uplink; a failed
    // transmission still costs energy.
    std::vector<double> cost(n_, 0.0);
    const auto& ep = cfg_.energy;
    auto tx_distance = [&](std::size_t i) {
      const Position to = t.uplink[i] == kBaseStation ? cfg_.base_station
                                                      : devices_[static_cast<std::size_t>(t.uplink[i])].pos;
      return distance(devices_[i].pos, to) * ep.distance_scale;
    };
    for (std::size_t i = 0; i < n_; ++i) {
      if (!t.alive[i]) continue;
      EnergyParams p = ep.params;
      p.cycle = cycles_[i];
      double epochs = cfg_.training.local_epochs;
      if (hetero_ && r == 0) epochs += cfg_.data.autoencoder_epochs;
      if (t.is_head[i]) epochs += ep.aggregation_epochs;
      const double samples = static_cast<double>(train_count_);
      if (t.is_head[i]) {
        // The head forwards the cluster result, not its own local model.
        cost[i] = round_energy(p, 0.0, 0.0, samples, epochs);
      } else {
        cost[i] = round_energy(p, tx_distance(i), 1.0, samples, epochs);
      }
      LinkUse link{devices_[i].id, t.uplink[i] == kBaseStation ? kBaseStation : devices_[static_cast<std::size_t>(t.uplink[i])].id,
                   0.0, false};
      if (!t.is_head[i]) {
        link.delay_s = t.uplink[i] == kBaseStation
                           ? bs_delay(i)
                           : transmission_delay(cfg_.link, devices_[i], devices_[static_cast<std::size_t>(t.uplink[i])].pos);
        link.connected = can_connect(cfg_.link, link.delay_s) && (t.uplink[i] != kBaseStation || t.connectable[i]);
        trace.links.push_back(link);
      }
    }
    for (std::size_t g = 0; g < t.heads.size(); ++g) {
      const std::size_t h = t.heads[g];
      EnergyParams p = ep.params;
      p.cycle = cycles_[h];
      const std::vector<double> member_payloads(t.groups[g].size(), 1.0);
      cost[h] += round_energy(p, tx_distance(h), aggregated_payload(member_payloads), 0.0, 0.0);
      trace.links.push_back({devices_[h].id, kBaseStation, bs_delay(h), true});
    }
    trace.node_energy = energy_.apply_round(cost);
    return trace;
  }

  ScenarioConfig cfg_;
  std::size_t n_ = 0;
  bool hetero_ = false;
  bool dbfl_ = false;
  std::size_t classes_ = 0;
  std::size_t input_dim_ = 0;
  std::size_t probe_count_ = 0;
  std::size_t train_count_ = 0;
  DataSignature signature_;
  ClassifierConfig classifier_;
  double reference_params_ = 1.0;
  std::vector<DeviceNode> devices_;
  std::vector<MobilityState> mobility_;
  std::vector<double> cycles_;
  EnergyState energy_;
  std::vector<DeviceData> data_;
  std::vector<int> test_labels_;
  DenseNetwork global_;
  std::vector<std::size_t> heads_;
};

}  // namespace detail

inline ScenarioResult run_scenario(const ScenarioConfig& config) { return detail::ScenarioRunner(config).run(); }

// Runs independent configurations on up to `jobs` threads; results keep the
// input order.
inline std::vector<ScenarioResult> run_scenarios(const std::vector<ScenarioConfig>& configs, unsigned jobs = 1) {
  std::vector<ScenarioResult> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < configs.size();) {
      try {
        out[k] = run_scenario(configs[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct SweepRow {
  double delay_per_meter_s = 0.0;
  ScenarioKind kind = ScenarioKind::CVFL;
  EnergyTicks total_energy = 0;
};

// Total energy of each scenario kind at each delay-per-meter value. A sweep
// value scales transmission distances by value / base delay-per-meter; the
// designed connectivity is kept so that every point compares the same
// participation structure.
inline std::vector<SweepRow> delay_sweep(const ScenarioConfig& base, std::span<const double> sweep,
                                         std::span<const ScenarioKind> kinds = kAllScenarios, unsigned jobs = 1) {
  if (sweep.empty()) throw ConfigError("delay sweep needs at least one value");
  std::vector<ScenarioConfig> configs;
  std::vector<SweepRow> rows;
  for (double v : sweep) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("delay sweep values must be positive");
    for (ScenarioKind k : kinds) {
      ScenarioConfig c = base;
      c.kind = k;
      c.energy.distance_scale = base.energy.distance_scale * v / base.link.delay_per_meter_s;
      c.train_models = false;
      configs.push_back(std::move(c));
      rows.push_back({v, k, 0});
    }
  }
  const auto results = run_scenarios(configs, jobs);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].total_energy = results[i].total_energy();
  return rows;
}

}  // namespace dbfl
