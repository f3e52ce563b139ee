#include <gtest/gtest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "dbfl/data.hpp"

using namespace dbfl;

namespace {

DatasetSchema small_schema(std::size_t features = 3, std::size_t classes = 2) {
  DatasetSchema s;
  s.num_features = features;
  s.num_classes = classes;
  return s;
}

}  // namespace

TEST(LoadCsv, ParsesHeaderQuotesAndLabelNames) {
  std::istringstream in(
      "a,\"b\",label,c\n"
      "1,2,dog,3\n"
      "\n"
      "4,\"5\",cat, 6\n");
  const auto ds = load_csv(in, small_schema());
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.features, Matrix(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(ds.labels, (std::vector<int>{1, 0}));
}

TEST(LoadCsv, LabelColumnByIndex) {
  auto schema = small_schema(2, 2);
  schema.label_column = "0";
  std::istringstream in("y,x1,x2\nb,1,2\na,3,4\n");
  const auto ds = load_csv(in, schema);
  EXPECT_EQ(ds.labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(ds.features(1, 1), 4.0);
}

TEST(LoadCsv, ReportsRowAndColumnOfBadCell) {
  std::istringstream in("a,b,c,label\n1,2,3,x\n1,oops,3,y\n");
  try {
    load_csv(in, small_schema());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3, column 2"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, Errors) {
  std::istringstream empty("");
  EXPECT_THROW(load_csv(empty, small_schema()), ParseError);
  std::istringstream no_label("a,b,c,d\n1,2,3,4\n");
  EXPECT_THROW(load_csv(no_label, small_schema()), SchemaMismatch);
  std::istringstream wrong_width("a,b,label\n1,2,x\n");
  EXPECT_THROW(load_csv(wrong_width, small_schema()), SchemaMismatch);
  std::istringstream ragged("a,b,c,label\n1,2,3\n");
  EXPECT_THROW(load_csv(ragged, small_schema()), ParseError);
  std::istringstream too_many("a,b,c,label\n1,2,3,x\n1,2,3,y\n1,2,3,z\n");
  EXPECT_THROW(load_csv(too_many, small_schema()), SchemaMismatch);
  std::istringstream nan("a,b,c,label\n1,nan,3,x\n");
  EXPECT_THROW(load_csv(nan, small_schema()), ParseError);
  EXPECT_THROW(load_csv("/nonexistent/file.csv", small_schema()), ParseError);
}

TEST(LoadCsv, WriteThenLoadRoundTrips) {
  const DatasetSchema schema = small_schema(5, 12);
  const auto ds = gen_synthetic(schema, 60, 4);
  std::stringstream ss;
  write_csv(ss, ds, schema);
  const auto back = load_csv(ss, schema);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.labels, ds.labels);
}

TEST(Synthetic, DeterministicPerSeed) {
  const DatasetSchema s;
  const auto a = gen_synthetic(s, 100, 5);
  const auto b = gen_synthetic(s, 100, 5);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(gen_synthetic(s, 100, 6).features, a.features);
}

TEST(Synthetic, BalancedClasses) {
  const auto ds = gen_synthetic({}, 9000, 1);
  std::vector<int> count(9, 0);
  for (int y : ds.labels) ++count[static_cast<std::size_t>(y)];
  for (int c : count) EXPECT_EQ(c, 1000);
}

TEST(Synthetic, ZeroSpreadIsNearestCentroidSeparable) {
  SyntheticParams p;
  p.spread = 0.0;
  const DatasetSchema s;
  const auto ds = gen_synthetic(s, 450, 2, p);
  Matrix centroid(s.num_classes, s.num_features);
  std::vector<double> n(s.num_classes, 0.0);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto y = static_cast<std::size_t>(ds.labels[r]);
    n[y] += 1.0;
    for (std::size_t c = 0; c < s.num_features; ++c) centroid(y, c) += ds.features(r, c);
  }
  for (std::size_t y = 0; y < s.num_classes; ++y) {
    for (std::size_t c = 0; c < s.num_features; ++c) centroid(y, c) /= n[y];
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t y = 0; y < s.num_classes; ++y) {
      double d = 0.0;
      for (std::size_t c = 0; c < s.num_features; ++c) d += std::pow(ds.features(r, c) - centroid(y, c), 2);
      if (d < best_d) {
        best_d = d;
        best = y;
      }
    }
    correct += static_cast<int>(best) == ds.labels[r];
  }
  EXPECT_EQ(correct, ds.size());
}

TEST(Synthetic, RejectsBadParams) {
  SyntheticParams p;
  p.informative_fraction = 0.0;
  EXPECT_THROW(gen_synthetic({}, 10, 1, p), InvalidArgument);
  EXPECT_THROW(gen_synthetic({}, 0, 1), InvalidArgument);
}

TEST(Partition, DisjointSlicesOfOnePermutation) {
  Dataset ds{Matrix(100, 1), std::vector<int>(100)};
  for (std::size_t i = 0; i < 100; ++i) {
    ds.features(i, 0) = static_cast<double>(i);
    ds.labels[i] = static_cast<int>(i % 3);
  }
  const auto p = partition(ds, {5, 20, 9});
  EXPECT_FALSE(p.with_replacement);
  std::multiset<double> seen;
  for (const auto& part : p.parts) {
    ASSERT_EQ(part.size(), 20u);
    for (std::size_t r = 0; r < 20; ++r) {
      seen.insert(part.features(r, 0));
      EXPECT_EQ(part.labels[r], static_cast<int>(part.features(r, 0)) % 3);
    }
  }
  std::multiset<double> all;
  for (std::size_t i = 0; i < 100; ++i) all.insert(static_cast<double>(i));
  EXPECT_EQ(seen, all);
}

TEST(Partition, FallsBackToSamplingWithReplacement) {
  const auto ds = gen_synthetic(small_schema(), 30, 1);
  const auto p = partition(ds, {3, 20, 2});
  EXPECT_TRUE(p.with_replacement);
  for (const auto& part : p.parts) EXPECT_EQ(part.size(), 20u);
}

TEST(Partition, ClassProportionsStayNearGlobalProportions) {
  const auto ds = gen_synthetic({}, 18000, 8);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = partition(ds, {5, 3500, seed});
    ASSERT_FALSE(p.with_replacement);
    for (const auto& part : p.parts) {
      std::vector<double> share(9, 0.0);
      for (int y : part.labels) share[static_cast<std::size_t>(y)] += 1.0 / 3500.0;
      for (double v : share) EXPECT_NEAR(v, 1.0 / 9.0, 0.05);
    }
  }
}

TEST(Partition, SingleFullSizePartIsAPermutation) {
  Dataset ds{Matrix(30, 1), std::vector<int>(30, 0)};
  for (std::size_t i = 0; i < 30; ++i) ds.features(i, 0) = static_cast<double>(i);
  const auto p = partition(ds, {1, 30, 4});
  ASSERT_EQ(p.parts.size(), 1u);
  std::vector<double> v(p.parts[0].features.values());
  EXPECT_NE(v, ds.features.values());
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, ds.features.values());
}

TEST(Holdout, SplitsIntoComplementaryParts) {
  Dataset ds{Matrix(50, 1), std::vector<int>(50, 0)};
  for (std::size_t i = 0; i < 50; ++i) ds.features(i, 0) = static_cast<double>(i);
  const auto [rest, held] = split_holdout(ds, 10, 3);
  EXPECT_EQ(held.size(), 10u);
  EXPECT_EQ(rest.size(), 40u);
  std::set<double> v;
  for (const auto* d : {&rest, &held}) {
    for (std::size_t r = 0; r < d->size(); ++r) v.insert(d->features(r, 0));
  }
  EXPECT_EQ(v.size(), 50u);
  EXPECT_THROW(split_holdout(ds, 51, 3), InvalidArgument);
}

TEST(FeatureSubsets, SelectsRequestedColumnsInOrder) {
  Matrix m(2, 4, std::vector<double>{0, 1, 2, 3, 10, 11, 12, 13});
  const std::vector<std::size_t> cols{3, 1};
  EXPECT_EQ(select_columns(m, cols), Matrix(2, 2, std::vector<double>{3, 1, 13, 11}));
  const std::vector<std::size_t> bad{4};
  EXPECT_THROW(select_columns(m, bad), IndexOutOfRange);
  const Dataset ds{m, {0, 1}};
  EXPECT_THROW(select_features(ds, identity_subset_plan(4, 2), 2), IndexOutOfRange);
  EXPECT_EQ(select_features(ds, identity_subset_plan(4, 2), 1).features, m);
}

TEST(FeatureSubsets, RandomPlanIsSortedDistinctAndSeeded) {
  const auto plan = random_subset_plan(274, 5, 50, 7);
  ASSERT_EQ(plan.columns.size(), 5u);
  for (const auto& cols : plan.columns) {
    ASSERT_EQ(cols.size(), 50u);
    EXPECT_TRUE(std::is_sorted(cols.begin(), cols.end()));
    EXPECT_EQ(std::set<std::size_t>(cols.begin(), cols.end()).size(), 50u);
    EXPECT_LT(cols.back(), 274u);
  }
  EXPECT_NE(plan.columns[0], plan.columns[1]);
  EXPECT_EQ(random_subset_plan(274, 5, 50, 7).columns, plan.columns);
  EXPECT_THROW(random_subset_plan(10, 1, 11, 0), InvalidArgument);
}

TEST(Standardizer, ZeroMeanUnitVarianceAndConstantColumns) {
  Matrix x(4, 2, std::vector<double>{1, 5, 2, 5, 3, 5, 4, 5});
  const auto s = Standardizer::fit(x);
  const auto z = s.apply(x);
  double mean = 0.0, var = 0.0;
  for (std::size_t r = 0; r < 4; ++r) mean += z(r, 0) / 4.0;
  for (std::size_t r = 0; r < 4; ++r) var += z(r, 0) * z(r, 0) / 4.0;
  EXPECT_NEAR(mean, 0.0, 1e-15);
  EXPECT_NEAR(var, 1.0, 1e-12);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(z(r, 1), 0.0);
  EXPECT_THROW(s.apply(Matrix(1, 3)), DimensionMismatch);
}
