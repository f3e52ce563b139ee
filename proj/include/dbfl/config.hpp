#pragma once

// JSON mapping of ScenarioConfig. Keys mirror the struct field names; any key
// missing from a file keeps its default, unknown keys are rejected.

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "dbfl/scenarios.hpp"

namespace dbfl {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace detail

inline json device_to_json(const DeviceNode& d) {
  json j{{"id", d.id}, {"x", d.pos.x}, {"y", d.pos.y}, {"mobile", d.mobile}, {"battery", d.battery}};
  j["bs_latency_s"] = d.bs_latency_s ? json(*d.bs_latency_s) : json(nullptr);
  return j;
}

inline DeviceNode device_from_json(const json& j, const std::string& where) {
  detail::check_keys(j, where, {"id", "x", "y", "mobile", "battery", "bs_latency_s"});
  DeviceNode d;
  detail::read(j, "id", d.id, where);
  detail::read(j, "x", d.pos.x, where);
  detail::read(j, "y", d.pos.y, where);
  detail::read(j, "mobile", d.mobile, where);
  detail::read(j, "battery", d.battery, where);
  if (j.contains("bs_latency_s") && !j.at("bs_latency_s").is_null()) {
    double v = 0.0;
    detail::read(j, "bs_latency_s", v, where);
    d.bs_latency_s = v;
  }
  d.partition_id = d.id;
  return d;
}

inline json to_json(const ScenarioConfig& c) {
  json devices = json::array();
  for (const auto& d : c.devices) devices.push_back(device_to_json(d));
  const auto& e = c.energy;
  const auto& dp = c.data;
  const auto& s = dp.synthetic;
  const auto& t = c.training;
  return {
      {"kind", to_string(c.kind)},
      {"rounds", c.rounds},
      {"seed", c.seed},
      {"train_models", c.train_models},
      {"base_station", {{"x", c.base_station.x}, {"y", c.base_station.y}}},
      {"devices", devices},
      {"link", {{"max_transmission_time_s", c.link.max_transmission_time_s}, {"delay_per_meter_s", c.link.delay_per_meter_s}}},
      {"mobility", {{"max_step_m", c.mobility.max_step_m}, {"roam_half_width_m", c.mobility.roam_half_width_m}}},
      {"cluster_policy", {{"max_size", c.cluster_policy.max_size}, {"require_bs_member", c.cluster_policy.require_bs_member}}},
      {"head_policy", {{"reselect_interval_rounds", c.head_policy.reselect_interval_rounds}}},
      {"aggregation", to_string(c.aggregation)},
      {"energy",
       {{"attenuation", e.params.attenuation},
        {"compute_coeff", e.params.compute_coeff},
        {"payload_scale", e.params.payload_scale},
        {"cycle_min", e.cycle_min},
        {"cycle_max", e.cycle_max},
        {"randomize_battery", e.randomize_battery},
        {"battery_min", e.battery_min},
        {"battery_max", e.battery_max},
        {"head_battery", e.head_battery},
        {"aggregation_epochs", e.aggregation_epochs},
        {"distance_scale", e.distance_scale}}},
      {"data",
       {{"num_features", dp.schema.num_features},
        {"num_classes", dp.schema.num_classes},
        {"label_column", dp.schema.label_column},
        {"samples_per_device", dp.samples_per_device},
        {"test_samples", dp.test_samples},
        {"probe_fraction", dp.probe_fraction},
        {"subset_size", dp.subset_size},
        {"latent_dim", dp.latent_dim},
        {"autoencoder_epochs", dp.autoencoder_epochs},
        {"autoencoder_learning_rate", dp.autoencoder_learning_rate},
        {"finetune_encoder", dp.finetune_encoder},
        {"synthetic",
         {{"latent_dim", s.latent_dim},
          {"class_separation", s.class_separation},
          {"spread", s.spread},
          {"informative_fraction", s.informative_fraction},
          {"feature_noise", s.feature_noise},
          {"modes_per_class", s.modes_per_class}}}}},
      {"training",
       {{"hidden_units", t.hidden_units},
        {"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"local_epochs", t.local_epochs},
        {"shuffle", t.shuffle},
        {"meta_epochs", t.meta_epochs}}},
  };
}

// Overwrites the fields present in `j`.
inline void apply_json(ScenarioConfig& c, const json& j) {
  using detail::read;
  detail::check_keys(j, "config",
                     {"kind", "rounds", "seed", "train_models", "base_station", "devices", "link", "mobility",
                      "cluster_policy", "head_policy", "aggregation", "energy", "data", "training"});
  if (j.contains("kind")) {
    std::string k;
    read(j, "kind", k, "config");
    c.kind = scenario_from_string(k);
  }
  read(j, "rounds", c.rounds, "config");
  read(j, "seed", c.seed, "config");
  read(j, "train_models", c.train_models, "config");
  if (j.contains("base_station")) {
    const auto& b = j.at("base_station");
    detail::check_keys(b, "base_station", {"x", "y"});
    read(b, "x", c.base_station.x, "base_station");
    read(b, "y", c.base_station.y, "base_station");
  }
  if (j.contains("devices")) {
    const auto& ds = j.at("devices");
    if (!ds.is_array()) throw ConfigError("devices: expected an array");
    c.devices.clear();
    for (std::size_t k = 0; k < ds.size(); ++k) c.devices.push_back(device_from_json(ds[k], "devices[" + std::to_string(k) + "]"));
  }
  if (j.contains("link")) {
    const auto& l = j.at("link");
    detail::check_keys(l, "link", {"max_transmission_time_s", "delay_per_meter_s"});
    read(l, "max_transmission_time_s", c.link.max_transmission_time_s, "link");
    read(l, "delay_per_meter_s", c.link.delay_per_meter_s, "link");
  }
  if (j.contains("mobility")) {
    const auto& m = j.at("mobility");
    detail::check_keys(m, "mobility", {"max_step_m", "roam_half_width_m"});
    read(m, "max_step_m", c.mobility.max_step_m, "mobility");
    read(m, "roam_half_width_m", c.mobility.roam_half_width_m, "mobility");
  }
  if (j.contains("cluster_policy")) {
    const auto& p = j.at("cluster_policy");
    detail::check_keys(p, "cluster_policy", {"max_size", "require_bs_member"});
    read(p, "max_size", c.cluster_policy.max_size, "cluster_policy");
    read(p, "require_bs_member", c.cluster_policy.require_bs_member, "cluster_policy");
  }
  if (j.contains("head_policy")) {
    const auto& p = j.at("head_policy");
    detail::check_keys(p, "head_policy", {"reselect_interval_rounds"});
    read(p, "reselect_interval_rounds", c.head_policy.reselect_interval_rounds, "head_policy");
  }
  if (j.contains("aggregation")) {
    std::string m;
    read(j, "aggregation", m, "config");
    c.aggregation = aggregation_method_from_string(m);
  }
  if (j.contains("energy")) {
    const auto& e = j.at("energy");
    detail::check_keys(e, "energy",
                       {"attenuation", "compute_coeff", "payload_scale", "cycle_min", "cycle_max", "randomize_battery",
                        "battery_min", "battery_max", "head_battery", "aggregation_epochs", "distance_scale"});
    read(e, "attenuation", c.energy.params.attenuation, "energy");
    read(e, "compute_coeff", c.energy.params.compute_coeff, "energy");
    read(e, "payload_scale", c.energy.params.payload_scale, "energy");
    read(e, "cycle_min", c.energy.cycle_min, "energy");
    read(e, "cycle_max", c.energy.cycle_max, "energy");
    read(e, "randomize_battery", c.energy.randomize_battery, "energy");
    read(e, "battery_min", c.energy.battery_min, "energy");
    read(e, "battery_max", c.energy.battery_max, "energy");
    read(e, "head_battery", c.energy.head_battery, "energy");
    read(e, "aggregation_epochs", c.energy.aggregation_epochs, "energy");
    read(e, "distance_scale", c.energy.distance_scale, "energy");
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::check_keys(d, "data",
                       {"num_features", "num_classes", "label_column", "samples_per_device", "test_samples",
                        "probe_fraction", "subset_size", "latent_dim", "autoencoder_epochs",
                        "autoencoder_learning_rate", "finetune_encoder", "synthetic"});
    read(d, "num_features", c.data.schema.num_features, "data");
    read(d, "num_classes", c.data.schema.num_classes, "data");
    read(d, "label_column", c.data.schema.label_column, "data");
    read(d, "samples_per_device", c.data.samples_per_device, "data");
    read(d, "test_samples", c.data.test_samples, "data");
    read(d, "probe_fraction", c.data.probe_fraction, "data");
    read(d, "subset_size", c.data.subset_size, "data");
    read(d, "latent_dim", c.data.latent_dim, "data");
    read(d, "autoencoder_epochs", c.data.autoencoder_epochs, "data");
    read(d, "autoencoder_learning_rate", c.data.autoencoder_learning_rate, "data");
    read(d, "finetune_encoder", c.data.finetune_encoder, "data");
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      detail::check_keys(s, "data.synthetic",
                         {"latent_dim", "class_separation", "spread", "informative_fraction", "feature_noise",
                          "modes_per_class"});
      auto& p = c.data.synthetic;
      read(s, "latent_dim", p.latent_dim, "data.synthetic");
      read(s, "class_separation", p.class_separation, "data.synthetic");
      read(s, "spread", p.spread, "data.synthetic");
      read(s, "informative_fraction", p.informative_fraction, "data.synthetic");
      read(s, "feature_noise", p.feature_noise, "data.synthetic");
      read(s, "modes_per_class", p.modes_per_class, "data.synthetic");
    }
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    detail::check_keys(t, "training",
                       {"hidden_units", "learning_rate", "batch_size", "local_epochs", "shuffle", "meta_epochs"});
    read(t, "hidden_units", c.training.hidden_units, "training");
    read(t, "learning_rate", c.training.learning_rate, "training");
    read(t, "batch_size", c.training.batch_size, "training");
    read(t, "local_epochs", c.training.local_epochs, "training");
    read(t, "shuffle", c.training.shuffle, "training");
    read(t, "meta_epochs", c.training.meta_epochs, "training");
  }
}

inline json parse_config_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace dbfl
