#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "rex/core.hpp"

using namespace rex;

namespace {

PredictionModel sum_model(int d) {
  return {d, 1, [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) s += v;
            return std::vector<double>{s};
          }};
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("subset complement") {
  CHECK(subset_complement(FeatureSubset::empty(3)) == FeatureSubset::full(3));
  CHECK(subset_complement(FeatureSubset::of({0, 2}, 3)) ==
        FeatureSubset::of({1}, 3));
  CHECK(subset_complement(FeatureSubset::full(3)) == FeatureSubset::empty(3));
  CHECK((FeatureSubset::of({0, 2}, 3).complement().bits() ^
         FeatureSubset::of({0, 2}, 3).bits()) ==
        FeatureSubset::full(3).bits());
}

TEST_CASE("subset construction rejects out-of-range bits") {
  CHECK_THROWS_AS(FeatureSubset(0b1000, 3), DimensionMismatch);
  CHECK_THROWS_AS(FeatureSubset::of({3}, 3), IndexOutOfRange);
  CHECK_THROWS_AS(FeatureSubset(0, 0), DimensionMismatch);
  CHECK_THROWS_AS(FeatureSubset(0, 64), DimensionMismatch);
}

TEST_CASE("enumerate_subsets order and cap") {
  const auto one = enumerate_subsets(1);
  REQUIRE(one.size() == 2);
  CHECK(one[0] == FeatureSubset::empty(1));
  CHECK(one[1] == FeatureSubset::of({0}, 1));

  const auto two = enumerate_subsets(2);
  REQUIRE(two.size() == 4);
  CHECK(two[1] == FeatureSubset::of({0}, 2));
  CHECK(two[2] == FeatureSubset::of({1}, 2));
  CHECK(two[3] == FeatureSubset::full(2));

  CHECK_THROWS_AS(enumerate_subsets(26), DimensionTooLarge);

  // No duplicates, full coverage.
  const auto all = enumerate_subsets(10);
  CHECK(all.size() == 1024);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].bits() == i);
  }
}

TEST_CASE("set function caches and counts distinct evaluations") {
  std::atomic<int> calls{0};
  SetFunction u(3, [&calls](const FeatureSubset& s) {
    ++calls;
    return static_cast<double>(s.count());
  });
  CHECK(u.eval_count() == 0);
  CHECK(u(FeatureSubset::of({0}, 3)) == 1.0);
  CHECK(u(FeatureSubset::of({0}, 3)) == 1.0);
  CHECK(u.eval_count() == 1);
  CHECK(calls.load() == 1);
  CHECK(u(FeatureSubset::of({0, 1}, 3)) == 2.0);
  CHECK(u.eval_count() == 2);
}

TEST_CASE("set function concurrent evaluation is consistent") {
  SetFunction u(4, [](const FeatureSubset& s) {
    return static_cast<double>(s.bits()) * 1.5;
  });
  const auto subsets = enumerate_subsets(4);
  std::vector<std::thread> workers;
  for (int t = 0; t < 4; ++t) {
    workers.emplace_back([&] {
      for (const auto& s : subsets) CHECK(u(s) == s.bits() * 1.5);
    });
  }
  for (auto& w : workers) w.join();
  CHECK(u.eval_count() == subsets.size());
}

TEST_CASE("prefetch matches sequential evaluation") {
  SetFunction a(6, [](const FeatureSubset& s) {
    return std::sin(static_cast<double>(s.bits()));
  });
  SetFunction b(6, [](const FeatureSubset& s) {
    return std::sin(static_cast<double>(s.bits()));
  });
  const auto subsets = enumerate_subsets(6);
  a.prefetch(subsets, 4);
  for (const auto& s : subsets) {
    CHECK(a(s) == b(s));
  }
  CHECK(a.eval_count() == subsets.size());
}

TEST_CASE("check_invariance on an invariant subset function") {
  // Zeros-style removal over f(x) = x0 + x1.
  const PredictionModel f = sum_model(2);
  SubsetFunction g(2, 1, true, f,
                   [&](std::span<const double> x, const FeatureSubset& s,
                       std::uint64_t) {
                     std::vector<double> probe(x.size(), 0.0);
                     for (int i : s.members()) {
                       probe[static_cast<std::size_t>(i)] =
                           x[static_cast<std::size_t>(i)];
                     }
                     double total = 0.0;
                     for (double v : probe) total += v;
                     return std::vector<double>{total};
                   });
  const std::vector<double> x{1.0, 9.0};
  const std::vector<double> x_alt{1.0, -3.0};
  CHECK(check_invariance(g, x, x_alt, FeatureSubset::of({0}, 2), 0));
  CHECK(check_invariance(g, x, x, FeatureSubset::full(2), 7));
  CHECK_THROWS_AS(
      check_invariance(g, x, x_alt, FeatureSubset::of({1}, 2), 0),
      PreconditionViolation);
}

TEST_CASE("check_extension detects corruption") {
  const PredictionModel f = sum_model(2);
  SubsetFunction good(2, 1, true, f,
                      [&](std::span<const double> x, const FeatureSubset&,
                          std::uint64_t) {
                        double total = 0.0;
                        for (double v : x) total += v;
                        return std::vector<double>{total};
                      });
  SubsetFunction bad(2, 1, true, f,
                     [&](std::span<const double> x, const FeatureSubset&,
                         std::uint64_t) {
                       double total = 1.0;
                       for (double v : x) total += v;
                       return std::vector<double>{total};
                     });
  const std::vector<std::vector<double>> probes{{1.0, 2.0}, {-4.0, 0.5}};
  CHECK(check_extension(good, f, probes));
  CHECK_FALSE(check_extension(bad, f, probes));
}

TEST_CASE("rng determinism and moments") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(7);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    sum += v;
    sum2 += v * v;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);

  // Uniform stays inside its interval.
  for (int i = 0; i < 1000; ++i) {
    const double v = r.uniform(2.0, 3.0);
    CHECK(v >= 2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("seed derivations are order-free") {
  CHECK(sample_seed(1, 2, 3) == sample_seed(1, 2, 3));
  CHECK(sample_seed(1, 2, 3) != sample_seed(1, 2, 4));
  CHECK(sample_seed(1, 2, 3) != sample_seed(1, 3, 3));
  CHECK(row_seed(1, 2) != sample_seed(1, 2, 0));
}

TEST_CASE("explanation factories keep kind and scores consistent") {
  const auto a = Explanation::attribution({1.0, 2.0}, "m", 3);
  CHECK(a.kind == ExplanationKind::attribution);
  CHECK(a.scores.size() == 2);
  CHECK_FALSE(a.selected.has_value());

  const auto s =
      Explanation::selection(FeatureSubset::of({1}, 2), "m", 3);
  CHECK(s.kind == ExplanationKind::selection);
  CHECK(s.scores.empty());
  CHECK(s.selected->contains(1));
}

}  // TEST_SUITE
