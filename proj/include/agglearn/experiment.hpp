#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agglearn/aggregate.hpp"
#include "agglearn/core.hpp"
#include "agglearn/data.hpp"
#include "agglearn/eval.hpp"
#include "agglearn/likelihood.hpp"
#include "agglearn/model.hpp"
#include "agglearn/oracle.hpp"
#include "agglearn/train.hpp"

// Experiment runner: generate aggregate supervision from a labeled dataset,
// train, evaluate on individually labeled test data over repeated trials, and
// emit a deterministic result table. Also the verify suite of oracle
// cross-checks behind the CLI `verify` subcommand.

namespace agglearn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration: line-oriented `key = value`

struct ExperimentConfig {
  std::string dataset;             // "blobs(...)" or a CSV path
  std::string aggregation;         // similarity|triplet|multi_instance|mean|sum|rank_pair|rank_list
  std::size_t k = 0;               // 0 = per-aggregation default
  std::string model = "linear";    // linear|mlp
  std::size_t hidden = 64;         // mlp hidden width
  std::string loss = "auto";       // auto|gauss|cauchy|poisson|gumbel|exponential
  std::string optimizer = "auto";  // auto|sgd|adamw
  double lr = 0.0;                 // 0 = per-model default
  std::size_t epochs = 0;          // 0 = per-model default
  std::size_t batch_size = 0;      // 0 = per-model default
  double weight_decay = 0.0;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  double sigma = 1.0;
  std::string metric = "auto";
  std::size_t count = 0;  // aggregate examples; 0 = per-aggregation default
  std::size_t positive_class = 0;

  static ExperimentConfig parse(std::istream& is) {
    ExperimentConfig config;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(is, line)) {
      ++line_number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line_number) + ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      try {
        if (key == "dataset") config.dataset = value;
        else if (key == "aggregation") config.aggregation = value;
        else if (key == "k") config.k = std::stoull(value);
        else if (key == "model") config.model = value;
        else if (key == "hidden") config.hidden = std::stoull(value);
        else if (key == "loss") config.loss = value;
        else if (key == "optimizer") config.optimizer = value;
        else if (key == "lr") config.lr = std::stod(value);
        else if (key == "epochs") config.epochs = std::stoull(value);
        else if (key == "batch_size") config.batch_size = std::stoull(value);
        else if (key == "weight_decay") config.weight_decay = std::stod(value);
        else if (key == "trials") config.trials = std::stoull(value);
        else if (key == "seed") config.seed = std::stoull(value);
        else if (key == "sigma") config.sigma = std::stod(value);
        else if (key == "metric") config.metric = value;
        else if (key == "count") config.count = std::stoull(value);
        else if (key == "positive_class") config.positive_class = std::stoull(value);
        else throw ConfigError("config line " + std::to_string(line_number) + ": unknown key '" + key + "'");
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(line_number) + ": bad value for '" + key + "'");
      }
    }
    if (config.dataset.empty()) throw ConfigError("config: missing 'dataset'");
    if (config.aggregation.empty()) throw ConfigError("config: missing 'aggregation'");
    if (config.trials == 0) throw ConfigError("config: trials must be >= 1");
    if (config.sigma <= 0.0) throw ConfigError("config: sigma must be positive");
    return config;
  }

  static ExperimentConfig parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is.good()) throw ConfigError("config: cannot open " + path.string());
    return parse(is);
  }
};

// ---------------------------------------------------------------------------
// Resolution of defaults

namespace detail {

struct ResolvedPlan {
  AggregationTag tag;
  LossFamily family;
  TargetFamily target;
  std::size_t set_size;
  std::size_t count_factor;  // default count = factor * labeled train size
  bool classification;
};

inline ResolvedPlan resolve_plan(const ExperimentConfig& config) {
  const auto tag = parse_aggregation_tag(config.aggregation);
  if (!tag) throw ConfigError("config: unknown aggregation '" + config.aggregation + "'");
  ResolvedPlan plan{};
  plan.tag = *tag;
  plan.classification = is_classification(*tag);
  const std::string& loss = config.loss;
  auto reject_loss = [&] {
    throw ConfigError("config: loss '" + loss + "' invalid for aggregation '" + config.aggregation + "'");
  };
  switch (*tag) {
    case AggregationTag::Similarity:
      if (loss != "auto") reject_loss();
      plan.family = LossFamily::Similarity;
      plan.target = TargetFamily::ClassProbs;
      plan.set_size = 2;
      plan.count_factor = 2;
      break;
    case AggregationTag::Triplet:
      if (loss != "auto") reject_loss();
      plan.family = LossFamily::Triplet;
      plan.target = TargetFamily::ClassProbs;
      plan.set_size = 3;
      plan.count_factor = 3;
      break;
    case AggregationTag::MultiInstance:
      if (loss != "auto") reject_loss();
      plan.family = LossFamily::MultiInstance;
      plan.target = TargetFamily::ClassProbs;
      plan.set_size = 4;
      plan.count_factor = 1;
      break;
    case AggregationTag::Mean:
      if (loss == "auto" || loss == "gauss") {
        plan.family = LossFamily::MeanGauss;
        plan.target = TargetFamily::GaussLoc;
      } else if (loss == "cauchy") {
        plan.family = LossFamily::MeanCauchy;
        plan.target = TargetFamily::CauchyLoc;
      } else {
        reject_loss();
      }
      plan.set_size = 4;
      plan.count_factor = 1;
      break;
    case AggregationTag::Sum:
      if (loss != "auto" && loss != "poisson") reject_loss();
      plan.family = LossFamily::SumPoisson;
      plan.target = TargetFamily::PoissonRate;
      plan.set_size = 4;
      plan.count_factor = 1;
      break;
    case AggregationTag::RankPair:
      if (loss == "auto" || loss == "gauss") {
        plan.family = LossFamily::RankGauss;
        plan.target = TargetFamily::GaussLoc;
      } else if (loss == "gumbel") {
        plan.family = LossFamily::RankGumbel;
        plan.target = TargetFamily::GumbelScore;
      } else if (loss == "cauchy") {
        plan.family = LossFamily::RankCauchy;
        plan.target = TargetFamily::CauchyLoc;
      } else if (loss == "exponential") {
        plan.family = LossFamily::RankExponential;
        plan.target = TargetFamily::ExpRate;
      } else {
        reject_loss();
      }
      plan.set_size = 2;
      plan.count_factor = 10;
      break;
    case AggregationTag::RankList:
      if (loss != "auto" && loss != "gumbel") reject_loss();
      plan.family = LossFamily::ListGumbel;
      plan.target = TargetFamily::GumbelScore;
      plan.set_size = 4;
      plan.count_factor = 1;
      break;
  }
  if (config.k != 0) plan.set_size = config.k;
  return plan;
}

inline TrainConfig resolve_train_config(const ExperimentConfig& config) {
  TrainConfig train;
  train.sigma = config.sigma;
  const bool mlp = config.model == "mlp";
  if (!mlp && config.model != "linear") {
    throw ConfigError("config: unknown model '" + config.model + "'");
  }
  std::string optimizer = config.optimizer;
  if (optimizer == "auto") optimizer = mlp ? "adamw" : "sgd";
  if (optimizer == "sgd") {
    SgdConfig sgd;
    sgd.lr = config.lr > 0.0 ? config.lr : 0.1;
    train.optimizer = sgd;
    train.epochs = config.epochs > 0 ? config.epochs : 20;
    train.batch_size = config.batch_size > 0 ? config.batch_size : 256;
  } else if (optimizer == "adamw") {
    AdamWConfig adam;
    adam.lr = config.lr > 0.0 ? config.lr : 1e-3;
    adam.weight_decay = config.weight_decay;
    train.optimizer = adam;
    train.epochs = config.epochs > 0 ? config.epochs : 10;
    train.batch_size = config.batch_size > 0 ? config.batch_size : 128;
  } else {
    throw ConfigError("config: unknown optimizer '" + config.optimizer + "'");
  }
  return train;
}

/// Parses "blobs(classes=3,count=3000,dim=2,spread=6,noise=0.5)".
inline std::optional<BlobDataset> parse_blob_dataset(const std::string& spec, std::uint64_t seed) {
  if (spec.rfind("blobs", 0) != 0) return std::nullopt;
  std::size_t classes = 3, count = 3000, dim = 2;
  double spread = 6.0, noise = 0.5;
  const auto open = spec.find('(');
  if (open != std::string::npos) {
    const auto close = spec.rfind(')');
    if (close == std::string::npos || close < open) {
      throw ConfigError("config: malformed blobs spec '" + spec + "'");
    }
    std::stringstream args(spec.substr(open + 1, close - open - 1));
    std::string item;
    while (std::getline(args, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("config: malformed blobs argument '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      try {
        if (key == "classes") classes = std::stoull(value);
        else if (key == "count") count = std::stoull(value);
        else if (key == "dim") dim = std::stoull(value);
        else if (key == "spread") spread = std::stod(value);
        else if (key == "noise") noise = std::stod(value);
        else throw ConfigError("config: unknown blobs argument '" + key + "'");
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError("config: bad blobs value '" + item + "'");
      }
    }
  }
  return make_blobs(classes, count, dim, spread, noise, seed);
}

inline TabularDataset load_experiment_dataset(const ExperimentConfig& config) {
  if (auto blobs = parse_blob_dataset(config.dataset, config.seed)) return std::move(blobs->data);
  const std::filesystem::path csv(config.dataset);
  if (!std::filesystem::exists(csv)) throw DataError("dataset file not found: " + csv.string());
  std::filesystem::path schema_path = csv;
  schema_path.replace_extension(".schema");
  if (!std::filesystem::exists(schema_path)) {
    throw DataError("schema file not found: " + schema_path.string());
  }
  try {
    return load_csv(csv, Schema::read(schema_path));
  } catch (const std::exception& e) {
    throw DataError(std::string("failed to load dataset: ") + e.what());
  }
}

inline double point_prediction(TargetFamily family, const TargetParams& theta) {
  switch (family) {
    case TargetFamily::GaussLoc: return std::get<GaussLoc>(theta).mu;
    case TargetFamily::CauchyLoc: return std::get<CauchyLoc>(theta).a;
    case TargetFamily::GumbelScore: return std::get<GumbelScore>(theta).s;
    case TargetFamily::PoissonRate: return std::get<PoissonRate>(theta).rate;
    case TargetFamily::ExpRate: return -std::log(std::get<ExpRate>(theta).rate);
    case TargetFamily::ClassProbs: break;
  }
  throw std::invalid_argument("point_prediction: classification family");
}

inline std::size_t argmax_class(const ClassProbs& probs) {
  return static_cast<std::size_t>(
      std::max_element(probs.p.begin(), probs.p.end()) - probs.p.begin());
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Runner

struct MetricRow {
  std::string dataset;
  std::string method;
  std::string metric;
  TrialStats stats;
};

struct ExperimentResult {
  std::vector<MetricRow> rows;

  /// dataset TAB method TAB metric TAB mean TAB std, one row per metric,
  /// sorted by metric name; byte-stable for fixed inputs.
  std::string table() const {
    std::string out;
    for (const auto& row : rows) {
      out += row.dataset + '\t' + row.method + '\t' + row.metric + '\t' +
             detail::format_double(row.stats.mean) + '\t' + detail::format_double(row.stats.stddev) +
             '\n';
    }
    return out;
  }
};

/// Runs the full protocol: per trial, split 60/20/20, standardize with train
/// statistics, aggregate the training split, fit, and evaluate on the
/// individually labeled test split. Writes per-trial predictions and metadata
/// into out_dir when provided.
inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       const std::filesystem::path& out_dir = {}) {
  const detail::ResolvedPlan plan = detail::resolve_plan(config);
  const TrainConfig base_train = detail::resolve_train_config(config);
  const TabularDataset full = detail::load_experiment_dataset(config);

  std::size_t class_count = 0;
  if (plan.classification) {
    for (double t : full.targets) {
      if (t < 0.0 || t != std::floor(t)) {
        throw DataError("classification aggregation needs nonnegative integer targets");
      }
      class_count = std::max(class_count, static_cast<std::size_t>(t) + 1);
    }
    if (class_count < 2) throw DataError("classification needs at least two classes");
    if (config.positive_class >= class_count) throw DataError("positive_class out of range");
  }

  const bool writing = !out_dir.empty();
  if (writing) std::filesystem::create_directories(out_dir);

  std::map<std::string, std::vector<double>> metric_values;
  std::ostringstream metadata;
  metadata << "dataset=" << config.dataset << "\naggregation=" << config.aggregation
           << "\nmodel=" << config.model << "\nloss=" << to_string(plan.family)
           << "\ntrials=" << config.trials << "\nseed=" << config.seed << "\n";

  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    const std::uint64_t trial_seed = config.seed + trial;

    SplitSpec split_spec;
    split_spec.seed = mix_seed(trial_seed, 1);
    const SplitIndices idx = split_indices(full.size(), split_spec);
    TabularDataset train_split = subset(full, idx.train);
    TabularDataset test_split = subset(full, idx.test);

    // Count targets stay raw: the Poisson likelihood needs nonnegative
    // integer observations, so only the regression families get centering.
    const bool center_targets = !plan.classification && plan.tag != AggregationTag::Sum;
    const Standardizer standardizer = Standardizer::fit(train_split, center_targets);
    train_split = standardizer.apply(train_split);
    test_split = standardizer.apply(test_split);

    AggregationKind kind;
    kind.tag = plan.tag;
    kind.set_size = plan.set_size;
    kind.positive_class = config.positive_class;
    if (plan.tag == AggregationTag::Triplet) kind.distance = ClassDistanceMatrix::indicator(class_count);
    const std::size_t count =
        config.count > 0 ? config.count : plan.count_factor * train_split.size();

    AggregateDataset aggregated;
    try {
      aggregated = make_aggregate_dataset(train_split.features, train_split.targets, kind, count,
                                          mix_seed(trial_seed, 2));
    } catch (const RetryExhaustedError& e) {
      throw DataError(e.what());
    }

    const std::size_t out_dim = plan.classification ? class_count : 1;
    ParamMap map = (config.model == "mlp")
                       ? ParamMap::mlp(train_split.dim(), config.hidden, out_dim, plan.target)
                       : ParamMap::linear(train_split.dim(), out_dim, plan.target);
    map.weights = init_weights(map, mix_seed(trial_seed, 3));

    AggregateLoss loss;
    loss.family = plan.family;
    loss.positive_class = config.positive_class;
    if (plan.tag == AggregationTag::Triplet) loss.distance = kind.distance;

    TrainConfig train_config = base_train;
    train_config.seed = mix_seed(trial_seed, 4);
    const TrainReport report = fit(map, loss, aggregated, train_config);
    for (double l : report.loss_per_epoch) {
      if (!std::isfinite(l)) throw NumericError("non-finite training loss");
    }
    for (double w : map.weights) {
      if (!std::isfinite(w)) throw NumericError("non-finite weights after training");
    }

    metadata << "trial " << trial << " final_train_loss "
             << (report.loss_per_epoch.empty() ? 0.0 : report.loss_per_epoch.back());

    std::ofstream predictions;
    if (writing) {
      save_weights(map, out_dir / ("trial_" + std::to_string(trial) + "_weights.txt"));
      predictions.open(out_dir / ("trial_" + std::to_string(trial) + "_predictions.tsv"));
      predictions << "prediction\ttruth\n";
    }

    if (plan.classification) {
      std::vector<std::size_t> pred(test_split.size()), truth(test_split.size());
      for (std::size_t i = 0; i < test_split.size(); ++i) {
        const TargetParams theta = forward(map, test_split.features.row(i));
        pred[i] = detail::argmax_class(std::get<ClassProbs>(theta));
        truth[i] = static_cast<std::size_t>(test_split.targets[i]);
        if (predictions.is_open()) predictions << pred[i] << '\t' << truth[i] << '\n';
      }
      metric_values["accuracy"].push_back(accuracy(pred, truth));
      metric_values["permutation_accuracy"].push_back(permutation_accuracy(pred, truth, class_count));
      const auto perm = optimal_label_permutation(confusion_matrix(pred, truth, class_count));
      metadata << " label_permutation ";
      for (std::size_t p = 0; p < perm.size(); ++p) metadata << (p ? "," : "") << perm[p];
    } else {
      std::vector<double> pred(test_split.size());
      char buf[64];
      for (std::size_t i = 0; i < test_split.size(); ++i) {
        const TargetParams theta = forward(map, test_split.features.row(i));
        pred[i] = detail::point_prediction(plan.target, theta);
        if (predictions.is_open()) {
          std::snprintf(buf, sizeof(buf), "%.17g\t%.17g\n", pred[i], test_split.targets[i]);
          predictions << buf;
        }
      }
      metric_values["mse"].push_back(mse(pred, test_split.targets));
      metric_values["error_variance"].push_back(error_variance(pred, test_split.targets));
    }
    metadata << "\n";
  }

  const std::string method = config.model + "+" + to_string(plan.family);
  const std::string dataset_name =
      config.dataset.rfind("blobs", 0) == 0 ? "blobs"
                                            : std::filesystem::path(config.dataset).stem().string();
  std::vector<std::string> wanted;
  if (config.metric == "auto") {
    if (plan.classification) {
      wanted = {"accuracy", "permutation_accuracy"};
    } else if (plan.tag == AggregationTag::RankPair || plan.tag == AggregationTag::RankList) {
      wanted = {"error_variance"};
    } else {
      wanted = {"error_variance", "mse"};
    }
  } else {
    if (!metric_values.count(config.metric)) {
      throw ConfigError("config: metric '" + config.metric + "' not produced by this run");
    }
    wanted = {config.metric};
  }
  std::sort(wanted.begin(), wanted.end());

  ExperimentResult result;
  for (const auto& name : wanted) {
    result.rows.push_back({dataset_name, method, name, aggregate_trials(metric_values.at(name))});
  }
  if (writing) {
    std::ofstream meta(out_dir / "metadata.txt");
    meta << metadata.str();
    std::ofstream table(out_dir / "results.tsv");
    table << result.table();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Verify: oracle cross-checks, one result per check

struct VerifyCheck {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

using RankGaussProbFn = std::function<double(double mu1, double mu2, double sigma1, double sigma2)>;

namespace detail {

inline ClassProbs random_simplex(Rng& rng, std::size_t classes) {
  ClassProbs p;
  p.p.resize(classes);
  double sum = 0.0;
  for (double& v : p.p) {
    v = -std::log(1.0 - rng.next_double());
    sum += v;
  }
  for (double& v : p.p) v /= sum;
  return p;
}

inline VerifyCheck make_check(std::string name, double max_error, double tolerance) {
  VerifyCheck check;
  check.name = std::move(name);
  check.max_error = max_error;
  check.tolerance = tolerance;
  check.passed = max_error <= tolerance;
  return check;
}

inline double relative_error(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace detail

/// rank_gauss_prob (or a caller-supplied stand-in) against half-plane
/// quadrature on random parameter draws.
inline VerifyCheck verify_rank_gauss_quadrature(const RankGaussProbFn& prob_fn, std::uint64_t seed,
                                                std::size_t cases = 20) {
  Rng rng(seed);
  double max_error = 0.0;
  for (std::size_t i = 0; i < cases; ++i) {
    const double mu1 = rng.next_uniform(-3.0, 3.0);
    const double mu2 = rng.next_uniform(-3.0, 3.0);
    const double s1 = rng.next_uniform(0.5, 2.0);
    const double s2 = rng.next_uniform(0.5, 2.0);
    const double got = prob_fn(mu1, mu2, s1, s2);
    const double expected = oracle::quad_rank_gauss(mu1, mu2, s1, s2);
    max_error = std::max(max_error, std::fabs(got - expected));
  }
  return detail::make_check("rank-gauss vs 2-D quadrature", max_error, 1e-6);
}

/// Runs every oracle cross-check; all random draws derive from `seed`.
inline std::vector<VerifyCheck> run_verify(std::uint64_t seed = 20240501) {
  std::vector<VerifyCheck> checks;
  const std::size_t class_choices[] = {2, 3, 5};

  {  // similarity vs enumeration
    Rng rng(mix_seed(seed, 1));
    double err = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
      const std::size_t c = class_choices[i % 3];
      const ClassProbs p1 = detail::random_simplex(rng, c);
      const ClassProbs p2 = detail::random_simplex(rng, c);
      const ClassProbs ps[] = {p1, p2};
      const int y = static_cast<int>(rng.next_below(2));
      const double expected = oracle::enumerate_class_likelihood(
          ps, [c](std::span<const std::size_t> z) { return agg_similarity(z[0], z[1], c); }, y);
      const double got = y == 1 ? sim_prob(p1, p2).prob : 1.0 - sim_prob(p1, p2).prob;
      err = std::max(err, std::fabs(got - expected));
    }
    checks.push_back(detail::make_check("similarity vs enumeration", err, 1e-12));
  }

  {  // triplet vs enumeration, indicator distance
    Rng rng(mix_seed(seed, 2));
    double err = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
      const std::size_t c = class_choices[i % 3];
      const auto dist = ClassDistanceMatrix::indicator(c);
      const ClassProbs ps[] = {detail::random_simplex(rng, c), detail::random_simplex(rng, c),
                               detail::random_simplex(rng, c)};
      const int y = static_cast<int>(rng.next_below(2));
      const double expected = oracle::enumerate_class_likelihood(
          ps, [&](std::span<const std::size_t> z) { return agg_triplet(z[0], z[1], z[2], dist); }, y);
      const double prob = triplet_prob(ps[0], ps[1], ps[2], dist).prob;
      err = std::max(err, std::fabs((y == 1 ? prob : 1.0 - prob) - expected));
    }
    checks.push_back(detail::make_check("triplet vs enumeration", err, 1e-12));
  }

  {  // uniform C=3 indicator triplet constant
    const ClassProbs uniform{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
    const double prob = triplet_prob(uniform, uniform, uniform, ClassDistanceMatrix::indicator(3)).prob;
    checks.push_back(detail::make_check("uniform triplet constant 2/9", std::fabs(prob - 2.0 / 9.0), 1e-12));
  }

  {  // multi-instance vs enumeration
    Rng rng(mix_seed(seed, 3));
    double err = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
      const std::size_t c = class_choices[i % 3];
      std::vector<ClassProbs> ps;
      for (int j = 0; j < 3; ++j) ps.push_back(detail::random_simplex(rng, c));
      const std::size_t positive = rng.next_below(c);
      const int y = static_cast<int>(rng.next_below(2));
      const double expected = oracle::enumerate_class_likelihood(
          ps, [&](std::span<const std::size_t> z) { return agg_multi_instance(z, positive); }, y);
      const double prob = multi_instance_prob(ps, positive).prob;
      err = std::max(err, std::fabs((y == 1 ? prob : 1.0 - prob) - expected));
    }
    checks.push_back(detail::make_check("multi-instance vs enumeration", err, 1e-12));
  }

  checks.push_back(verify_rank_gauss_quadrature(
      [](double mu1, double mu2, double s1, double s2) {
        return rank_gauss_prob(mu1, mu2, s1, s2).prob;
      },
      mix_seed(seed, 4)));

  {  // end-to-end rank-gauss gradient vs finite differences
    Rng rng(mix_seed(seed, 5));
    double err = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      ParamMap map = ParamMap::linear(3, 1, TargetFamily::GaussLoc);
      map.weights = init_weights(map, rng.next_u64());
      AggregateExample example;
      example.features = {{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()},
                          {rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()}};
      example.observation = static_cast<int>(rng.next_below(2));
      AggregateLoss loss;
      loss.family = LossFamily::RankGauss;
      const AggregateExample batch[] = {example};
      const auto [nll, grad] = batch_loss_and_grad(map, loss, batch);
      ParamMap probe = map;
      const auto fd = oracle::finite_diff_grad(
          [&](std::span<const double> w) {
            probe.weights.assign(w.begin(), w.end());
            return batch_loss_and_grad(probe, loss, batch).first;
          },
          map.weights);
      for (std::size_t j = 0; j < grad.size(); ++j) {
        err = std::max(err, detail::relative_error(grad[j], fd[j]));
      }
    }
    checks.push_back(detail::make_check("rank-gauss pipeline gradient vs finite differences", err, 1e-4));
  }

  {  // sum-poisson vs convolution
    Rng rng(mix_seed(seed, 6));
    double err = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      std::vector<double> rates(2 + rng.next_below(3));
      for (double& r : rates) r = rng.next_uniform(0.3, 4.0);
      const long long y = static_cast<long long>(rng.next_below(10));
      const double expected = oracle::poisson_convolution_pmf(rates, y);
      const double got = std::exp(-sum_poisson_nll(y, rates).nll);
      err = std::max(err, std::fabs(got - expected));
    }
    checks.push_back(detail::make_check("sum-poisson vs convolution", err, 1e-9));
  }

  {  // Hungarian vs exhaustive assignment
    Rng rng(mix_seed(seed, 7));
    double err = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      Matrix cost(5, 5);
      for (double& v : cost.values()) v = rng.next_uniform(0.0, 10.0);
      const auto assignment = linear_sum_assignment(cost);
      double total = 0.0;
      for (std::size_t r = 0; r < 5; ++r) total += cost(r, assignment[r]);
      const auto [_, best] = oracle::exhaustive_assignment(cost);
      err = std::max(err, std::fabs(total - best));
    }
    checks.push_back(detail::make_check("assignment vs exhaustive search", err, 1e-9));
  }

  {  // listwise likelihood vs direct Plackett-Luce products
    Rng rng(mix_seed(seed, 8));
    double err = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      std::vector<double> scores(4);
      for (double& s : scores) s = rng.next_uniform(-2.0, 2.0);
      std::vector<std::size_t> order = {0, 1, 2, 3};
      rng.shuffle(order);
      std::vector<double> observed(order.size());
      for (std::size_t j = 0; j < order.size(); ++j) observed[j] = scores[order[j]];
      const double got = std::exp(-listwise_gumbel_nll(observed).nll);
      err = std::max(err, std::fabs(got - oracle::plackett_luce_order_prob(scores, order)));
      // all 4! orderings must account for the whole probability mass
      std::vector<std::size_t> perm = {0, 1, 2, 3};
      double mass = 0.0;
      do {
        mass += oracle::plackett_luce_order_prob(scores, perm);
      } while (std::next_permutation(perm.begin(), perm.end()));
      err = std::max(err, std::fabs(mass - 1.0));
    }
    checks.push_back(detail::make_check("listwise vs Plackett-Luce products", err, 1e-10));
  }

  return checks;
}

}  // namespace agglearn
