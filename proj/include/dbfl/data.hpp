#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dbfl/errors.hpp"
#include "dbfl/matrix.hpp"
#include "dbfl/rng.hpp"

namespace dbfl {

struct DatasetSchema {
  std::size_t num_features = 274;
  std::size_t num_classes = 9;
  // Header name of the label column, or its zero-based position written as
  // a decimal string when no header cell carries that name.
  std::string label_column = "label";
};

inline void validate(const DatasetSchema& s) {
  if (s.num_features == 0 || s.num_classes == 0) throw InvalidArgument("schema counts must be positive");
}

struct Dataset {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& v) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto r = std::from_chars(first, last, v);
  return r.ec == std::errc() && r.ptr == last && std::isfinite(v);
}

}  // namespace detail

// Reads a comma-separated file with one header row. Every column except the
// label column is a numeric feature, kept in file order. Label names are
// mapped to class ids by their sorted order.
inline Dataset load_csv(std::istream& in, const DatasetSchema& schema) {
  validate(schema);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("row 1: missing header");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (detail::trim(header[c]) == schema.label_column) label_col = c;
  }
  if (label_col == header.size()) {
    std::size_t idx = 0;
    const auto& s = schema.label_column;
    auto r = std::from_chars(s.data(), s.data() + s.size(), idx);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || idx >= header.size()) {
      throw SchemaMismatch("label column '" + s + "' not found in header");
    }
    label_col = idx;
  }
  if (header.size() - 1 != schema.num_features) {
    throw SchemaMismatch("header has " + std::to_string(header.size() - 1) + " feature columns, schema expects " +
                         std::to_string(schema.num_features));
  }

  std::vector<double> values;
  std::vector<std::string> names;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                       " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = detail::trim(cells[c]);
      if (c == label_col) {
        names.push_back(cell);
        continue;
      }
      double v = 0.0;
      if (!detail::parse_double(cell, v)) {
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(c + 1) + " ('" +
                         detail::trim(header[c]) + "'): not a finite number: '" + cell + "'");
      }
      values.push_back(v);
    }
  }

  std::vector<std::string> sorted = names;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.size() > schema.num_classes) {
    throw SchemaMismatch("found " + std::to_string(sorted.size()) + " distinct labels, schema allows " +
                         std::to_string(schema.num_classes));
  }
  std::map<std::string, int> code;
  for (std::size_t k = 0; k < sorted.size(); ++k) code[sorted[k]] = static_cast<int>(k);
  Dataset ds{Matrix(names.size(), schema.num_features, std::move(values)), {}};
  ds.labels.reserve(names.size());
  for (const auto& n : names) ds.labels.push_back(code[n]);
  return ds;
}

inline Dataset load_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open '" + path + "'");
  return load_csv(f, schema);
}

// Zero-padded names so that lexicographic order matches class order and the
// file reloads with identical ids.
inline std::string class_name(int label, std::size_t num_classes) {
  const std::size_t width = std::to_string(num_classes > 0 ? num_classes - 1 : 0).size();
  std::string digits = std::to_string(label);
  return "class_" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

inline void write_csv(std::ostream& os, const Dataset& ds, const DatasetSchema& schema) {
  for (std::size_t c = 0; c < ds.features.cols(); ++c) os << 'f' << c << ',';
  os << schema.label_column << '\n';
  char buf[64];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (double v : ds.features.row(r)) {
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      os.write(buf, res.ptr - buf);
      os << ',';
    }
    os << class_name(ds.labels[r], schema.num_classes) << '\n';
  }
}

// Generator for a surrogate tabular dataset. Each class has a mean in a
// low-dimensional latent space; an informative fraction of the features are
// noisy linear views of the latent point and the remaining features are pure
// noise. `spread` scales every noise source, so spread 0 puts each sample
// exactly on its class mean.
struct SyntheticParams {
  std::size_t latent_dim = 8;
  double class_separation = 2.0;
  double spread = 1.0;
  double informative_fraction = 0.4;
  double feature_noise = 0.5;
  std::size_t modes_per_class = 1;
};

inline void validate(const SyntheticParams& p) {
  if (p.latent_dim == 0 || p.modes_per_class == 0) throw InvalidArgument("synthetic latent_dim and modes must be positive");
  if (!(p.class_separation > 0.0) || !(p.spread >= 0.0) || !(p.feature_noise >= 0.0)) {
    throw InvalidArgument("synthetic separation must be > 0 and noise scales >= 0");
  }
  if (!(p.informative_fraction > 0.0 && p.informative_fraction <= 1.0)) {
    throw InvalidArgument("synthetic informative_fraction must be in (0, 1]");
  }
}

inline Dataset gen_synthetic(const DatasetSchema& schema, std::size_t samples, std::uint64_t seed,
                             const SyntheticParams& p = {}) {
  validate(schema);
  validate(p);
  if (samples == 0) throw InvalidArgument("gen_synthetic: samples must be positive");
  Rng rng(derive_seed(seed, Stream::Data));
  const std::size_t D = schema.num_features;
  const std::size_t C = schema.num_classes;
  const std::size_t k = p.latent_dim;
  const std::size_t informative =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(p.informative_fraction * static_cast<double>(D))));

  std::vector<double> A(informative * k);
  const double a_scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (double& v : A) v = rng.normal() * a_scale;
  std::vector<double> mu(C * p.modes_per_class * k);
  for (double& v : mu) v = rng.normal() * p.class_separation;
  const auto columns = rng.permutation(D);

  std::vector<int> labels(samples);
  for (std::size_t i = 0; i < samples; ++i) labels[i] = static_cast<int>(i % C);
  const auto order = rng.permutation(samples);

  Dataset ds{Matrix(samples, D), std::vector<int>(samples)};
  std::vector<double> z(k);
  for (std::size_t i = 0; i < samples; ++i) {
    const int y = labels[order[i]];
    ds.labels[i] = y;
    const std::size_t mode = p.modes_per_class > 1 ? static_cast<std::size_t>(rng.below(p.modes_per_class)) : 0;
    const double* m = mu.data() + (static_cast<std::size_t>(y) * p.modes_per_class + mode) * k;
    for (std::size_t j = 0; j < k; ++j) z[j] = m[j] + p.spread * rng.normal();
    auto row = ds.features.row(i);
    for (std::size_t f = 0; f < D; ++f) {
      double v = 0.0;
      if (f < informative) {
        const double* a = A.data() + f * k;
        for (std::size_t j = 0; j < k; ++j) v += a[j] * z[j];
        v += p.spread * p.feature_noise * rng.normal();
      } else {
        v = p.spread * rng.normal();
      }
      row[columns[f]] = v;
    }
  }
  return ds;
}

inline Dataset take(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out{take_rows(ds.features, rows), {}};
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(ds.labels[r]);
  return out;
}

// Splits off `held_out` random rows. Returns {remaining, held_out}.
inline std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, std::size_t held_out, std::uint64_t seed) {
  if (held_out > ds.size()) throw InvalidArgument("holdout larger than dataset");
  Rng rng(derive_seed(seed, Stream::TestSplit));
  const auto perm = rng.permutation(ds.size());
  const std::span<const std::size_t> all(perm);
  return {take(ds, all.subspan(held_out)), take(ds, all.first(held_out))};
}

struct PartitionPlan {
  std::size_t devices = 5;
  std::size_t samples_per_device = 3500;
  std::uint64_t seed = 0;
};

struct Partitioning {
  std::vector<Dataset> parts;
  bool with_replacement = false;
};

// IID split. Disjoint slices of one permutation when the data suffices,
// otherwise each device draws its rows independently with replacement.
inline Partitioning partition(const Dataset& ds, const PartitionPlan& plan) {
  if (plan.devices == 0 || plan.samples_per_device == 0) throw InvalidArgument("partition plan counts must be positive");
  if (ds.size() == 0) throw EmptyDataset("partition: dataset is empty");
  Rng rng(derive_seed(plan.seed, Stream::Partition));
  Partitioning out;
  const std::size_t s = plan.samples_per_device;
  if (s * plan.devices <= ds.size()) {
    const auto perm = rng.permutation(ds.size());
    for (std::size_t d = 0; d < plan.devices; ++d) {
      out.parts.push_back(take(ds, std::span<const std::size_t>(perm).subspan(d * s, s)));
    }
  } else {
    out.with_replacement = true;
    std::vector<std::size_t> rows(s);
    for (std::size_t d = 0; d < plan.devices; ++d) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(ds.size()));
      out.parts.push_back(take(ds, rows));
    }
  }
  return out;
}

struct FeatureSubsetPlan {
  std::vector<std::vector<std::size_t>> columns;  // per device, in output order
};

inline FeatureSubsetPlan identity_subset_plan(std::size_t num_features, std::size_t devices) {
  std::vector<std::size_t> all(num_features);
  for (std::size_t i = 0; i < num_features; ++i) all[i] = i;
  return {std::vector<std::vector<std::size_t>>(devices, all)};
}

// Independent random subsets of `subset_size` distinct columns per device,
// each kept in ascending column order.
inline FeatureSubsetPlan random_subset_plan(std::size_t num_features, std::size_t devices, std::size_t subset_size,
                                            std::uint64_t seed) {
  if (subset_size == 0 || subset_size > num_features) throw InvalidArgument("subset size must be in [1, num_features]");
  FeatureSubsetPlan plan;
  for (std::size_t d = 0; d < devices; ++d) {
    Rng rng(derive_seed(seed, Stream::FeatureSubset, d));
    auto perm = rng.permutation(num_features);
    perm.resize(subset_size);
    std::sort(perm.begin(), perm.end());
    plan.columns.push_back(std::move(perm));
  }
  return plan;
}

inline Matrix select_columns(const Matrix& m, std::span<const std::size_t> cols) {
  for (std::size_t c : cols) {
    if (c >= m.cols()) {
      throw IndexOutOfRange("feature index " + std::to_string(c) + " outside " + std::to_string(m.cols()) + " columns");
    }
  }
  Matrix out(m.rows(), cols.size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto src = m.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < cols.size(); ++j) dst[j] = src[cols[j]];
  }
  return out;
}

inline Dataset select_features(const Dataset& ds, const FeatureSubsetPlan& plan, std::size_t device_index) {
  if (device_index >= plan.columns.size()) {
    throw IndexOutOfRange("device index " + std::to_string(device_index) + " outside plan of " +
                          std::to_string(plan.columns.size()) + " devices");
  }
  return {select_columns(ds.features, plan.columns[device_index]), ds.labels};
}

// Per-column z-score with statistics from the data it was fitted on.
// Constant columns are centred but not scaled.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x) {
    if (x.rows() == 0) throw EmptyDataset("standardizer: no rows");
    Standardizer s{std::vector<double>(x.cols(), 0.0), std::vector<double>(x.cols(), 0.0)};
    const double n = static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) s.mean[c] += x(r, c);
    }
    for (double& m : s.mean) m /= n;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double d = x(r, c) - s.mean[c];
        s.scale[c] += d * d;
      }
    }
    for (double& v : s.scale) {
      v = std::sqrt(v / n);
      if (!(v > 1e-12)) v = 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw DimensionMismatch("standardizer column count mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) / scale[c];
    }
    return out;
  }
};

}  // namespace dbfl
