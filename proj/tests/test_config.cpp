#include <gtest/gtest.h>

#include "dbfl/config.hpp"

using namespace dbfl;

TEST(Config, JsonRoundTrip) {
  auto c = reference_scenario(ScenarioKind::DBFL_Heterogeneous, 42);
  c.rounds = 17;
  c.aggregation = AggregationMethod::MetaLearning;
  c.energy.distance_scale = 1.5;
  c.data.synthetic.modes_per_class = 2;
  c.training.hidden_units = 33;
  const json j = to_json(c);
  ScenarioConfig back;
  apply_json(back, j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.kind, ScenarioKind::DBFL_Heterogeneous);
  EXPECT_EQ(back.seed, 42u);
  ASSERT_EQ(back.devices.size(), 5u);
  EXPECT_EQ(back.devices[3].bs_latency_s, c.devices[3].bs_latency_s);
  EXPECT_EQ(back.devices[4].mobile, c.devices[4].mobile);
}

TEST(Config, PartialDocumentKeepsDefaults) {
  auto c = reference_scenario(ScenarioKind::CVFL);
  apply_json(c, parse_config_text(R"({"rounds": 5, "energy": {"head_battery": 90}})"));
  EXPECT_EQ(c.rounds, 5);
  EXPECT_EQ(c.energy.head_battery, 90.0);
  EXPECT_EQ(c.kind, ScenarioKind::CVFL);
  EXPECT_EQ(c.devices.size(), 5u);
}

TEST(Config, DeviceWithoutLatencyUsesDistance) {
  ScenarioConfig c;
  apply_json(c, parse_config_text(R"({"devices": [{"id": 7, "x": 3, "y": 4}]})"));
  ASSERT_EQ(c.devices.size(), 1u);
  EXPECT_FALSE(c.devices[0].bs_latency_s.has_value());
  EXPECT_EQ(c.devices[0].pos, (Position{3.0, 4.0}));
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  ScenarioConfig c;
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"round": 5})")), ConfigError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"energy": {"cycle": 0.3}})")), ConfigError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"rounds": "many"})")), ConfigError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"devices": {}})")), ConfigError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"kind": "centralized"})")), ConfigError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"aggregation": "fedavg"})")), ConfigError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"([1, 2])")), ConfigError);
  EXPECT_THROW(parse_config_text("{not json"), ConfigError);
}
