#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "agglearn/core.hpp"
#include "agglearn/rng.hpp"

// Dataset ingestion and preprocessing: CSV loading with a simple schema,
// one-hot encoding, train-statistics standardization, seeded splits, and
// synthetic Gaussian blobs.

namespace agglearn {

enum class ColumnRole { Numeric, Categorical, Target };

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::Numeric;
};

/// One line per column: name TAB {numeric|categorical|target}.
struct Schema {
  std::vector<ColumnSpec> columns;

  static Schema read(std::istream& is) {
    Schema schema;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      require(tab != std::string::npos, "Schema: expected name<TAB>role, got: " + line);
      ColumnSpec spec;
      spec.name = line.substr(0, tab);
      const std::string role = line.substr(tab + 1);
      if (role == "numeric") {
        spec.role = ColumnRole::Numeric;
      } else if (role == "categorical") {
        spec.role = ColumnRole::Categorical;
      } else if (role == "target") {
        spec.role = ColumnRole::Target;
      } else {
        throw std::invalid_argument("Schema: unknown role: " + role);
      }
      schema.columns.push_back(std::move(spec));
    }
    return schema;
  }

  static Schema read(const std::filesystem::path& path) {
    std::ifstream is(path);
    require(is.good(), "Schema: cannot open " + path.string());
    return read(is);
  }
};

struct TabularDataset {
  std::string name;
  Matrix features;
  std::vector<double> targets;
  std::vector<std::string> feature_names;
  std::size_t dropped_rows = 0;
  std::vector<std::string> warnings;  // one entry per rejected row, with line number

  std::size_t size() const { return targets.size(); }
  std::size_t dim() const { return features.cols(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    // trim surrounding spaces
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? std::string{} : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses a comma-separated file (first line header). Categorical columns are
/// one-hot expanded with deterministically (lexicographically) ordered levels;
/// rows with missing or malformed values are dropped and recorded.
inline TabularDataset load_csv(std::istream& is, const Schema& schema, const std::string& name) {
  require(!schema.columns.empty(), "load_csv: empty schema");
  std::size_t target_count = 0;
  for (const auto& col : schema.columns) target_count += col.role == ColumnRole::Target;
  require(target_count == 1, "load_csv: schema must declare exactly one target column");

  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "load_csv: missing header line");
  const auto header = detail::split_csv_line(line);
  require(header.size() == schema.columns.size(), "load_csv: header does not match schema");
  for (std::size_t i = 0; i < header.size(); ++i) {
    require(header[i] == schema.columns[i].name,
            "load_csv: header column '" + header[i] + "' does not match schema '" +
                schema.columns[i].name + "'");
  }

  struct RawRow {
    std::vector<double> numeric;
    std::vector<std::string> categorical;
    double target = 0.0;
  };
  std::vector<RawRow> rows;
  std::vector<std::set<std::string>> levels;  // per categorical column, ordered
  for (const auto& col : schema.columns) {
    if (col.role == ColumnRole::Categorical) levels.emplace_back();
  }

  TabularDataset out;
  out.name = name;
  std::size_t line_number = 1;
  while (std::getline(is, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    RawRow row;
    bool ok = fields.size() == schema.columns.size();
    std::string reason = ok ? "" : "wrong field count";
    if (ok) {
      std::size_t cat = 0;
      for (std::size_t c = 0; c < fields.size() && ok; ++c) {
        switch (schema.columns[c].role) {
          case ColumnRole::Numeric: {
            double v;
            ok = detail::parse_double(fields[c], v);
            if (ok) {
              row.numeric.push_back(v);
            } else {
              reason = "bad numeric value '" + fields[c] + "' in column " + schema.columns[c].name;
            }
            break;
          }
          case ColumnRole::Categorical:
            ok = !fields[c].empty();
            if (ok) {
              row.categorical.push_back(fields[c]);
              levels[cat].insert(fields[c]);
            } else {
              reason = "missing value in column " + schema.columns[c].name;
            }
            ++cat;
            break;
          case ColumnRole::Target: {
            ok = detail::parse_double(fields[c], row.target);
            if (!ok) reason = "bad target value '" + fields[c] + "'";
            break;
          }
        }
      }
    }
    if (ok) {
      rows.push_back(std::move(row));
    } else {
      ++out.dropped_rows;
      out.warnings.push_back("line " + std::to_string(line_number) + ": " + reason);
    }
  }
  require(!rows.empty(), "load_csv: no usable rows");

  // Column layout: numeric columns in schema order, then one-hot blocks.
  std::vector<std::vector<std::string>> level_list;
  for (const auto& s : levels) level_list.emplace_back(s.begin(), s.end());
  std::size_t width = 0;
  std::size_t cat = 0;
  for (const auto& col : schema.columns) {
    if (col.role == ColumnRole::Numeric) {
      out.feature_names.push_back(col.name);
      ++width;
    } else if (col.role == ColumnRole::Categorical) {
      for (const auto& level : level_list[cat]) {
        out.feature_names.push_back(col.name + "=" + level);
      }
      width += level_list[cat].size();
      ++cat;
    }
  }

  out.features = Matrix(rows.size(), width);
  out.targets.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t w = 0;
    std::size_t num = 0;
    std::size_t catcol = 0;
    for (const auto& col : schema.columns) {
      if (col.role == ColumnRole::Numeric) {
        out.features(r, w++) = rows[r].numeric[num++];
      } else if (col.role == ColumnRole::Categorical) {
        const auto& values = level_list[catcol];
        const auto it = std::find(values.begin(), values.end(), rows[r].categorical[catcol]);
        out.features(r, w + static_cast<std::size_t>(it - values.begin())) = 1.0;
        w += values.size();
        ++catcol;
      }
    }
    out.targets[r] = rows[r].target;
  }
  return out;
}

inline TabularDataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream is(path);
  require(is.good(), "load_csv: cannot open " + path.string());
  return load_csv(is, schema, path.stem().string());
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    require(train > 0.0 && validation > 0.0 && test > 0.0, "SplitSpec: fractions must be positive");
    require(std::fabs(train + validation + test - 1.0) <= 1e-12, "SplitSpec: fractions must sum to 1");
  }
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seed-deterministic permutation partitioned by the fractions; validation and
/// test sizes round down, the remainder goes to train.
inline SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  require(n >= 3, "split_indices: need at least 3 rows");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);
  const auto nd = static_cast<double>(n);
  const std::size_t n_validation = static_cast<std::size_t>(std::floor(spec.validation * nd));
  const std::size_t n_test = static_cast<std::size_t>(std::floor(spec.test * nd));
  const std::size_t n_train = n - n_validation - n_test;
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.validation.assign(order.begin() + n_train, order.begin() + n_train + n_validation);
  out.test.assign(order.begin() + n_train + n_validation, order.end());
  return out;
}

inline TabularDataset subset(const TabularDataset& data, std::span<const std::size_t> indices) {
  TabularDataset out;
  out.name = data.name;
  out.feature_names = data.feature_names;
  out.features = Matrix(indices.size(), data.features.cols());
  out.targets.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto row = data.features.row(indices[i]);
    std::copy(row.begin(), row.end(), out.features.row(i).begin());
    out.targets[i] = data.targets[indices[i]];
  }
  return out;
}

inline std::array<TabularDataset, 3> split(const TabularDataset& data, const SplitSpec& spec) {
  const SplitIndices idx = split_indices(data.size(), spec);
  return {subset(data, idx.train), subset(data, idx.validation), subset(data, idx.test)};
}

// ---------------------------------------------------------------------------
// Standardization (statistics always come from the training split)

struct Standardizer {
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;  // 1.0 for constant columns: center only
  double target_mean = 0.0;
  bool center_targets = false;

  static Standardizer fit(const TabularDataset& train, bool center_targets) {
    require(train.size() > 0, "Standardizer: empty training split");
    const std::size_t n = train.size();
    const std::size_t d = train.dim();
    Standardizer s;
    s.center_targets = center_targets;
    s.feature_mean.assign(d, 0.0);
    s.feature_scale.assign(d, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) s.feature_mean[j] += train.features(i, j);
    }
    for (double& m : s.feature_mean) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double c = train.features(i, j) - s.feature_mean[j];
        var[j] += c * c;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      if (sd > 0.0) s.feature_scale[j] = sd;
    }
    if (center_targets) {
      for (double t : train.targets) s.target_mean += t;
      s.target_mean /= static_cast<double>(n);
    }
    return s;
  }

  TabularDataset apply(const TabularDataset& data) const {
    require(data.dim() == feature_mean.size(), "Standardizer: dimension mismatch");
    TabularDataset out = data;
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = 0; j < out.dim(); ++j) {
        out.features(i, j) = (out.features(i, j) - feature_mean[j]) / feature_scale[j];
      }
    }
    if (center_targets) {
      for (double& t : out.targets) t -= target_mean;
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Synthetic blobs (desk-scale stand-in for image benchmarks)

struct BlobDataset {
  TabularDataset data;
  Matrix centers;  // classes x dim
};

/// Isotropic Gaussian clusters around seed-drawn centers in
/// [-spread, spread]^dim; class counts differ by at most one.
inline BlobDataset make_blobs(std::size_t classes, std::size_t count, std::size_t dim, double spread,
                              double noise, std::uint64_t seed) {
  require(classes >= 2, "make_blobs: need at least 2 classes");
  require(count >= classes, "make_blobs: need at least one point per class");
  require(dim >= 1 && spread > 0.0 && noise >= 0.0, "make_blobs: invalid geometry");
  Rng rng(seed);
  BlobDataset out;
  out.centers = Matrix(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < dim; ++j) out.centers(c, j) = rng.next_uniform(-spread, spread);
  }
  out.data.name = "blobs";
  out.data.features = Matrix(count, dim);
  out.data.targets.resize(count);
  for (std::size_t j = 0; j < dim; ++j) out.data.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = i % classes;  // balanced round-robin labels
    out.data.targets[i] = static_cast<double>(c);
    for (std::size_t j = 0; j < dim; ++j) {
      out.data.features(i, j) = out.centers(c, j) + noise * rng.next_gaussian();
    }
  }
  return out;
}

}  // namespace agglearn
