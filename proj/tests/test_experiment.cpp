#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "agglearn/experiment.hpp"
#include "agglearn/math.hpp"

using namespace agglearn;

TEST_CASE("config parsing") {
  SECTION("happy path with comments") {
    std::istringstream text(
        "# toy experiment\n"
        "dataset = blobs(classes=3,count=300)\n"
        "aggregation = triplet\n"
        "model = mlp\n"
        "trials = 2\n"
        "seed = 5\n");
    const auto config = ExperimentConfig::parse(text);
    CHECK(config.dataset == "blobs(classes=3,count=300)");
    CHECK(config.aggregation == "triplet");
    CHECK(config.model == "mlp");
    CHECK(config.trials == 2);
    CHECK(config.seed == 5);
  }

  SECTION("unknown keys and missing fields are config errors") {
    std::istringstream unknown("dataset = x\naggregation = mean\nbogus = 1\n");
    CHECK_THROWS_AS(ExperimentConfig::parse(unknown), ConfigError);
    std::istringstream missing("aggregation = mean\n");
    CHECK_THROWS_AS(ExperimentConfig::parse(missing), ConfigError);
    std::istringstream bad_value("dataset = x\naggregation = mean\nepochs = many\n");
    CHECK_THROWS_AS(ExperimentConfig::parse(bad_value), ConfigError);
  }
}

TEST_CASE("missing dataset file is a data error") {
  ExperimentConfig config;
  config.dataset = "/nonexistent/file.csv";
  config.aggregation = "mean";
  config.trials = 1;
  CHECK_THROWS_AS(run_experiment(config), DataError);
}

TEST_CASE("run_experiment on tiny blob problems") {
  SECTION("similarity on well-separated blobs reaches high permutation accuracy") {
    ExperimentConfig config;
    config.dataset = "blobs(classes=3,count=900,dim=2,spread=6,noise=0.3)";
    config.aggregation = "similarity";
    config.model = "linear";
    config.epochs = 80;
    config.trials = 2;
    config.seed = 12;
    const auto result = run_experiment(config);
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].metric == "accuracy");
    CHECK(result.rows[1].metric == "permutation_accuracy");
    CHECK(result.rows[1].stats.mean >= result.rows[0].stats.mean);
    CHECK(result.rows[1].stats.mean > 0.9);
  }

  SECTION("mean regression reports mse and error variance") {
    ExperimentConfig config;
    config.dataset = "blobs(classes=2,count=200,dim=2,spread=4,noise=0.4)";
    config.aggregation = "mean";
    config.trials = 2;
    config.seed = 3;
    const auto result = run_experiment(config);
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].metric == "error_variance");
    CHECK(result.rows[1].metric == "mse");
  }

  SECTION("sum aggregation keeps count targets raw and trains a Poisson rate") {
    ExperimentConfig config;
    config.dataset = "blobs(classes=2,count=300,dim=2)";
    config.aggregation = "sum";
    config.trials = 2;
    config.seed = 6;
    config.epochs = 5;
    const auto result = run_experiment(config);
    REQUIRE(!result.rows.empty());
    for (const auto& row : result.rows) CHECK(std::isfinite(row.stats.mean));
  }

  SECTION("single trial reports zero standard deviation") {
    ExperimentConfig config;
    config.dataset = "blobs(classes=2,count=150,dim=2)";
    config.aggregation = "mean";
    config.trials = 1;
    config.seed = 9;
    const auto result = run_experiment(config);
    for (const auto& row : result.rows) CHECK(row.stats.stddev == 0.0);
  }

  SECTION("identical configs produce identical tables and prediction files") {
    ExperimentConfig config;
    config.dataset = "blobs(classes=2,count=160,dim=2)";
    config.aggregation = "rank_pair";
    config.count = 600;
    config.trials = 2;
    config.seed = 21;

    const auto dir_a = std::filesystem::temp_directory_path() / "agglearn_test_run_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "agglearn_test_run_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    const auto ra = run_experiment(config, dir_a);
    const auto rb = run_experiment(config, dir_b);
    CHECK(ra.table() == rb.table());

    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream is(p);
      std::stringstream ss;
      ss << is.rdbuf();
      return ss.str();
    };
    for (int t = 0; t < 2; ++t) {
      const std::string name = "trial_" + std::to_string(t) + "_predictions.tsv";
      const std::string a = slurp(dir_a / name);
      CHECK(!a.empty());
      CHECK(a == slurp(dir_b / name));
    }

    SECTION("metric rows are recomputable from the persisted predictions") {
      std::vector<double> recomputed;
      for (int t = 0; t < 2; ++t) {
        std::ifstream is(dir_a / ("trial_" + std::to_string(t) + "_predictions.tsv"));
        std::string header;
        std::getline(is, header);
        std::vector<double> pred, truth;
        double p, tr;
        while (is >> p >> tr) {
          pred.push_back(p);
          truth.push_back(tr);
        }
        REQUIRE(!pred.empty());
        recomputed.push_back(error_variance(pred, truth));
      }
      const TrialStats stats = aggregate_trials(recomputed);
      REQUIRE(ra.rows.size() == 1);
      CHECK(ra.rows[0].metric == "error_variance");
      CHECK(std::fabs(stats.mean - ra.rows[0].stats.mean) <= 1e-12);
      CHECK(std::fabs(stats.stddev - ra.rows[0].stats.stddev) <= 1e-12);
    }

    SECTION("trained weights are checkpointed per trial") {
      const ParamMap restored = load_weights(dir_a / "trial_0_weights.txt");
      CHECK(restored.input_dim == 2);
      CHECK(restored.out_dim == 1);
    }
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
  }
}

TEST_CASE("run_experiment from a CSV file, listwise ranks") {
  const auto dir = std::filesystem::temp_directory_path() / "agglearn_test_csv";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "synth.csv");
    csv << "x0,x1,y\n";
    Rng rng(91);
    for (int i = 0; i < 300; ++i) {
      const double a = rng.next_gaussian(), b = rng.next_gaussian();
      char line[128];
      std::snprintf(line, sizeof(line), "%.6f,%.6f,%.6f\n", a, b,
                    1.5 * a - 0.5 * b + 0.1 * rng.next_gaussian());
      csv << line;
    }
    std::ofstream schema(dir / "synth.schema");
    schema << "x0\tnumeric\nx1\tnumeric\ny\ttarget\n";
  }

  ExperimentConfig config;
  config.dataset = (dir / "synth.csv").string();
  config.aggregation = "rank_list";
  config.k = 4;
  config.trials = 2;
  config.seed = 14;
  config.epochs = 10;
  const auto result = run_experiment(config);
  REQUIRE(result.rows.size() == 1);
  CHECK(result.rows[0].dataset == "synth");
  CHECK(result.rows[0].metric == "error_variance");
  CHECK(std::isfinite(result.rows[0].stats.mean));
  std::filesystem::remove_all(dir);
}

TEST_CASE("verify suite") {
  SECTION("all checks pass on the real implementation") {
    for (const auto& check : run_verify(7)) {
      INFO(check.name << " max_error=" << check.max_error << " tolerance=" << check.tolerance);
      CHECK(check.passed);
    }
  }

  SECTION("a perturbed erf makes the rank-Gaussian quadrature check fail") {
    const auto broken = verify_rank_gauss_quadrature(
        [](double mu1, double mu2, double s1, double s2) {
          const double u = (mu1 - mu2) / std::sqrt(2.0 * (s1 * s1 + s2 * s2));
          return 0.5 * (1.0 + agglearn::erf(u) + 1e-3 * std::exp(-u * u));
        },
        7);
    CHECK_FALSE(broken.passed);
  }
}
