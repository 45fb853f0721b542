#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "agglearn/core.hpp"
#include "agglearn/rng.hpp"

// Aggregate functions T: Z^K -> Y and synthesis of aggregate datasets from
// individually labeled data. Class indices are 0-based throughout.

namespace agglearn {

enum class AggregationTag { Similarity, Triplet, MultiInstance, Mean, Sum, RankPair, RankList };

inline const char* to_string(AggregationTag tag) {
  switch (tag) {
    case AggregationTag::Similarity: return "similarity";
    case AggregationTag::Triplet: return "triplet";
    case AggregationTag::MultiInstance: return "multi_instance";
    case AggregationTag::Mean: return "mean";
    case AggregationTag::Sum: return "sum";
    case AggregationTag::RankPair: return "rank_pair";
    case AggregationTag::RankList: return "rank_list";
  }
  return "?";
}

inline std::optional<AggregationTag> parse_aggregation_tag(const std::string& name) {
  for (AggregationTag tag : {AggregationTag::Similarity, AggregationTag::Triplet,
                             AggregationTag::MultiInstance, AggregationTag::Mean, AggregationTag::Sum,
                             AggregationTag::RankPair, AggregationTag::RankList}) {
    if (name == to_string(tag)) return tag;
  }
  return std::nullopt;
}

inline bool is_classification(AggregationTag tag) {
  return tag == AggregationTag::Similarity || tag == AggregationTag::Triplet ||
         tag == AggregationTag::MultiInstance;
}

/// Similarity measure between classes; zero diagonal required so that
/// same-class pairs are strictly most similar under the indicator default.
class ClassDistanceMatrix {
 public:
  ClassDistanceMatrix() = default;

  ClassDistanceMatrix(std::size_t classes, std::vector<double> values)
      : classes_(classes), values_(std::move(values)) {
    require(values_.size() == classes_ * classes_, "ClassDistanceMatrix: size mismatch");
    for (std::size_t i = 0; i < classes_; ++i) {
      require(values_[i * classes_ + i] == 0.0, "ClassDistanceMatrix: diagonal must be zero");
    }
  }

  /// d(i, j) = [i != j], the default used throughout the experiments.
  static ClassDistanceMatrix indicator(std::size_t classes) {
    std::vector<double> v(classes * classes, 1.0);
    for (std::size_t i = 0; i < classes; ++i) v[i * classes + i] = 0.0;
    return {classes, std::move(v)};
  }

  std::size_t classes() const { return classes_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * classes_ + j]; }

 private:
  std::size_t classes_ = 0;
  std::vector<double> values_;
};

struct AggregationKind {
  AggregationTag tag = AggregationTag::Mean;
  std::size_t set_size = 2;
  std::size_t positive_class = 0;                 // MultiInstance only
  std::optional<ClassDistanceMatrix> distance;    // Triplet only

  static AggregationKind similarity() { return {AggregationTag::Similarity, 2, 0, std::nullopt}; }
  static AggregationKind triplet(ClassDistanceMatrix d) {
    return {AggregationTag::Triplet, 3, 0, std::move(d)};
  }
  static AggregationKind multi_instance(std::size_t set_size, std::size_t positive_class) {
    return {AggregationTag::MultiInstance, set_size, positive_class, std::nullopt};
  }
  static AggregationKind mean(std::size_t set_size = 4) {
    return {AggregationTag::Mean, set_size, 0, std::nullopt};
  }
  static AggregationKind sum(std::size_t set_size) {
    return {AggregationTag::Sum, set_size, 0, std::nullopt};
  }
  static AggregationKind rank_pair() { return {AggregationTag::RankPair, 2, 0, std::nullopt}; }
  static AggregationKind rank_list(std::size_t set_size) {
    return {AggregationTag::RankList, set_size, 0, std::nullopt};
  }

  void validate() const {
    switch (tag) {
      case AggregationTag::Similarity:
        require(set_size == 2, "similarity requires K = 2");
        break;
      case AggregationTag::Triplet:
        require(set_size == 3, "triplet requires K = 3");
        require(distance.has_value(), "triplet requires a class distance matrix");
        break;
      case AggregationTag::RankPair:
        require(set_size == 2, "rank_pair requires K = 2");
        break;
      default:
        require(set_size >= 2, "aggregation requires K >= 2");
        break;
    }
    require(tag == AggregationTag::Triplet || !distance.has_value(),
            "distance matrix only valid for triplet");
  }
};

/// Bit for similarity/triplet/multi-instance/rank-pair, real value for
/// mean/sum, 0-based index permutation (decreasing target order) for rank-list.
using Observation = std::variant<int, double, std::vector<std::size_t>>;

struct AggregateExample {
  std::vector<std::vector<double>> features;  // K vectors of length D
  Observation observation;
};

struct AggregateDataset {
  AggregationKind kind;
  std::size_t feature_dim = 0;
  std::size_t class_count = 0;  // classification kinds only
  std::uint64_t generator_seed = 0;
  std::vector<AggregateExample> examples;
  /// Which labeled rows formed each set; retained so generated observations
  /// can be re-derived and audited.
  std::vector<std::vector<std::size_t>> source_indices;

  std::size_t size() const { return examples.size(); }
};

// ---------------------------------------------------------------------------
// Aggregate functions

inline int agg_similarity(std::size_t z1, std::size_t z2, std::size_t class_count) {
  require(z1 < class_count && z2 < class_count, "agg_similarity: class index out of range");
  return z1 == z2 ? 1 : 0;
}

/// 1 iff d(z1, z2) < d(z1, z3); ties count as 0.
inline int agg_triplet(std::size_t z1, std::size_t z2, std::size_t z3, const ClassDistanceMatrix& d) {
  const std::size_t c = d.classes();
  require(z1 < c && z2 < c && z3 < c, "agg_triplet: class index out of range");
  return d(z1, z2) < d(z1, z3) ? 1 : 0;
}

inline int agg_multi_instance(std::span<const std::size_t> zs, std::size_t positive_class) {
  require(!zs.empty(), "agg_multi_instance: empty set");
  for (std::size_t z : zs) {
    if (z == positive_class) return 1;
  }
  return 0;
}

inline double agg_mean(std::span<const double> zs) {
  require(!zs.empty(), "agg_mean: empty set");
  double sum = 0.0;
  for (double z : zs) sum += z;
  return sum / static_cast<double>(zs.size());
}

inline double agg_sum(std::span<const double> zs) {
  require(!zs.empty(), "agg_sum: empty set");
  double sum = 0.0;
  for (double z : zs) sum += z;
  return sum;
}

inline int agg_rank_pair(double z1, double z2) {
  if (z1 == z2) throw ResampleError("agg_rank_pair: tie");
  return z1 > z2 ? 1 : 0;
}

/// Permutation of 0..K-1 sorting zs in strictly decreasing order.
inline std::vector<std::size_t> agg_rank_list(std::span<const double> zs) {
  require(!zs.empty(), "agg_rank_list: empty set");
  std::vector<std::size_t> order(zs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return zs[a] > zs[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (zs[order[i - 1]] == zs[order[i]]) throw ResampleError("agg_rank_list: tie");
  }
  return order;
}

// ---------------------------------------------------------------------------
// Dataset synthesis

namespace detail {

inline std::vector<std::size_t> class_targets(std::span<const double> targets) {
  std::vector<std::size_t> zs(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double t = targets[i];
    require(t >= 0.0 && t == std::floor(t), "classification targets must be nonnegative integers");
    zs[i] = static_cast<std::size_t>(t);
  }
  return zs;
}

}  // namespace detail

/// Draws `count` sets of K indices uniformly with replacement from the labeled
/// source, applies the aggregate function, and retries whole sets on rank
/// ties. Deterministic given the seed.
inline AggregateDataset make_aggregate_dataset(const Matrix& features, std::span<const double> targets,
                                               const AggregationKind& kind, std::size_t count,
                                               std::uint64_t seed) {
  kind.validate();
  require(features.rows() == targets.size(), "make_aggregate_dataset: feature/target size mismatch");
  require(features.rows() > 0, "make_aggregate_dataset: empty labeled source");

  AggregateDataset out;
  out.kind = kind;
  out.feature_dim = features.cols();
  out.generator_seed = seed;
  out.examples.reserve(count);
  out.source_indices.reserve(count);

  std::vector<std::size_t> class_z;
  if (is_classification(kind.tag)) {
    class_z = detail::class_targets(targets);
    std::size_t max_class = 0;
    for (std::size_t z : class_z) max_class = std::max(max_class, z);
    out.class_count = max_class + 1;
    if (kind.tag == AggregationTag::Triplet) {
      require(kind.distance->classes() >= out.class_count,
              "make_aggregate_dataset: distance matrix smaller than class count");
    }
    if (kind.tag == AggregationTag::MultiInstance) {
      require(kind.positive_class < out.class_count,
              "make_aggregate_dataset: positive class out of range");
    }
  }

  Rng rng(seed);
  const std::size_t n = features.rows();
  const std::size_t k = kind.set_size;
  constexpr int max_retries = 1000;

  std::vector<std::size_t> idx(k);
  std::vector<double> zvals(k);
  for (std::size_t e = 0; e < count; ++e) {
    int retries = 0;
    while (true) {
      for (std::size_t j = 0; j < k; ++j) idx[j] = static_cast<std::size_t>(rng.next_below(n));
      try {
        Observation obs;
        switch (kind.tag) {
          case AggregationTag::Similarity:
            obs = agg_similarity(class_z[idx[0]], class_z[idx[1]], out.class_count);
            break;
          case AggregationTag::Triplet:
            obs = agg_triplet(class_z[idx[0]], class_z[idx[1]], class_z[idx[2]], *kind.distance);
            break;
          case AggregationTag::MultiInstance: {
            std::vector<std::size_t> zs(k);
            for (std::size_t j = 0; j < k; ++j) zs[j] = class_z[idx[j]];
            obs = agg_multi_instance(zs, kind.positive_class);
            break;
          }
          case AggregationTag::Mean:
          case AggregationTag::Sum:
            for (std::size_t j = 0; j < k; ++j) zvals[j] = targets[idx[j]];
            obs = (kind.tag == AggregationTag::Mean) ? agg_mean(zvals) : agg_sum(zvals);
            break;
          case AggregationTag::RankPair:
            obs = agg_rank_pair(targets[idx[0]], targets[idx[1]]);
            break;
          case AggregationTag::RankList:
            for (std::size_t j = 0; j < k; ++j) zvals[j] = targets[idx[j]];
            obs = agg_rank_list(zvals);
            break;
        }
        AggregateExample ex;
        ex.features.reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
          auto row = features.row(idx[j]);
          ex.features.emplace_back(row.begin(), row.end());
        }
        ex.observation = std::move(obs);
        out.examples.push_back(std::move(ex));
        out.source_indices.push_back(idx);
        break;
      } catch (const ResampleError&) {
        if (++retries >= max_retries) {
          throw RetryExhaustedError("make_aggregate_dataset: " + std::to_string(max_retries) +
                                    " consecutive resamples failed");
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Debug dump: one record per line, tab-separated fields
// <comma-joined set indices> TAB <observation> TAB <kind tag>.
// Rank-list observations are written as a comma-joined index permutation.

inline void write_debug_dump(const AggregateDataset& dataset, std::ostream& os) {
  char buf[64];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& idx = dataset.source_indices[i];
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (j > 0) os << ',';
      os << idx[j];
    }
    os << '\t';
    const Observation& obs = dataset.examples[i].observation;
    if (const int* bit = std::get_if<int>(&obs)) {
      os << *bit;
    } else if (const double* value = std::get_if<double>(&obs)) {
      std::snprintf(buf, sizeof(buf), "%.17g", *value);
      os << buf;
    } else {
      const auto& order = std::get<std::vector<std::size_t>>(obs);
      for (std::size_t j = 0; j < order.size(); ++j) {
        if (j > 0) os << ',';
        os << order[j];
      }
    }
    os << '\t' << to_string(dataset.kind.tag) << '\n';
  }
}

struct DumpRecord {
  std::vector<std::size_t> indices;
  Observation observation;
  AggregationTag tag = AggregationTag::Mean;

  bool operator==(const DumpRecord&) const = default;
};

inline std::vector<DumpRecord> read_debug_dump(std::istream& is) {
  std::vector<DumpRecord> records;
  std::string line;
  auto split_sizes = [](const std::string& field) {
    std::vector<std::size_t> out;
    std::stringstream ss(field);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(static_cast<std::size_t>(std::stoull(tok)));
    return out;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string idx_field, obs_field, tag_field;
    if (!std::getline(ss, idx_field, '\t') || !std::getline(ss, obs_field, '\t') ||
        !std::getline(ss, tag_field)) {
      throw std::invalid_argument("read_debug_dump: malformed line: " + line);
    }
    DumpRecord rec;
    rec.indices = split_sizes(idx_field);
    const auto tag = parse_aggregation_tag(tag_field);
    require(tag.has_value(), "read_debug_dump: unknown kind tag: " + tag_field);
    rec.tag = *tag;
    if (is_classification(rec.tag) || rec.tag == AggregationTag::RankPair) {
      rec.observation = std::stoi(obs_field);
    } else if (rec.tag == AggregationTag::RankList) {
      rec.observation = split_sizes(obs_field);
    } else {
      rec.observation = std::stod(obs_field);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<DumpRecord> dump_records(const AggregateDataset& dataset) {
  std::vector<DumpRecord> records(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    records[i] = {dataset.source_indices[i], dataset.examples[i].observation, dataset.kind.tag};
  }
  return records;
}

}  // namespace agglearn
