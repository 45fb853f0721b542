#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "agglearn/rng.hpp"

TEST_CASE("Rng streams are deterministic per seed") {
  agglearn::Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_diff = any_diff || va != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("next_double lies in [0, 1)") {
  agglearn::Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.next_double();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("next_below respects the bound and hits every value") {
  agglearn::Rng rng(11);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto v = rng.next_below(5);
    REQUIRE(v < 5);
    ++counts[v];
  }
  for (int c : counts) CHECK(c > 800);  // ~1000 expected each
  CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}

TEST_CASE("next_gaussian first two moments") {
  agglearn::Rng rng(3);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.next_gaussian();
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("shuffle is a seed-deterministic permutation") {
  std::vector<int> v1 = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> v2 = v1;
  agglearn::Rng a(99), b(99);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("mix_seed separates streams") {
  CHECK(agglearn::mix_seed(1, 0) != agglearn::mix_seed(1, 1));
  CHECK(agglearn::mix_seed(1, 0) != agglearn::mix_seed(2, 0));
  CHECK(agglearn::mix_seed(5, 3) == agglearn::mix_seed(5, 3));
}
