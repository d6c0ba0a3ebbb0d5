#include <doctest.h>

#include <cmath>

#include "rex/removal.hpp"

using namespace rex;

namespace {

PredictionModel product_model() {
  return {2, 1, [](std::span<const double> x) {
            return std::vector<double>{x[0] * x[1]};
          }};
}

PredictionModel sum_model(int d) {
  return {d, 1, [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) s += v;
            return std::vector<double>{s};
          }};
}

double eval1(const SubsetFunction& f, std::vector<double> x, FeatureSubset s,
             std::uint64_t seed = 0) {
  return f.evaluate(x, s, seed)[0];
}

}  // namespace

TEST_SUITE("removal") {

TEST_CASE("fixed baseline removal") {
  const auto f = fixed_baseline_removal(sum_model(2), {0.0, 0.0});
  CHECK(eval1(f, {2, 3}, FeatureSubset::of({0}, 2)) == 2.0);
  CHECK(eval1(f, {2, 3}, FeatureSubset::full(2)) == 5.0);

  const auto g = fixed_baseline_removal(product_model(), {1.0, 1.0});
  CHECK(eval1(g, {5, 7}, FeatureSubset::of({1}, 2)) == 7.0);
  CHECK(g.is_invariant());
  CHECK(g.extension_of().has_value());

  CHECK_THROWS_AS(fixed_baseline_removal(sum_model(2), {0.0}),
                  DimensionMismatch);
}

TEST_CASE("marginal removal averages over background rows") {
  const auto bg = BackgroundData::from_rows({{1, 2}, {3, 4}});
  const auto f = marginal_removal(product_model(), bg);
  CHECK(eval1(f, {5, 6}, FeatureSubset::of({0}, 2)) ==
        doctest::Approx(15.0));  // mean(5*2, 5*4)
  CHECK(eval1(f, {5, 6}, FeatureSubset::empty(2)) ==
        doctest::Approx(7.0));   // mean(1*2, 3*4)
  CHECK(eval1(f, {5, 6}, FeatureSubset::full(2)) == 30.0);
}

TEST_CASE("product of marginals uses the cartesian product") {
  const auto bg = BackgroundData::from_rows({{1, 2}, {3, 4}});
  const auto f = product_of_marginals_removal(product_model(), bg);
  // (1*2 + 1*4 + 3*2 + 3*4) / 4 = 6, distinct from the joint value 7.
  CHECK(eval1(f, {5, 6}, FeatureSubset::empty(2)) == doctest::Approx(6.0));
  CHECK(eval1(f, {5, 6}, FeatureSubset::of({0}, 2)) == doctest::Approx(15.0));
  CHECK(eval1(f, {5, 6}, FeatureSubset::full(2)) == 30.0);
}

TEST_CASE("product equals marginal when one coordinate is held out") {
  const auto bg = BackgroundData::from_rows({{1, 2}, {3, 4}, {0, -1}});
  const auto joint = marginal_removal(product_model(), bg);
  const auto product = product_of_marginals_removal(product_model(), bg);
  for (std::uint64_t bits = 0; bits < 4; ++bits) {
    const FeatureSubset s{bits, 2};
    if (s.complement().count() > 1) continue;
    CHECK(eval1(joint, {5, 6}, s) == doctest::Approx(eval1(product, {5, 6}, s))
                                         .epsilon(1e-12));
  }
}

TEST_CASE("exact product enumeration is capped") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 500; ++i) {
    rows.push_back({static_cast<double>(i), 0.0, 0.0});
  }
  const auto bg = BackgroundData::from_rows(rows);
  const auto f = product_of_marginals_removal(sum_model(3), bg);
  // 500^3 > 1e7.
  CHECK_THROWS_AS(eval1(f, {0, 0, 0}, FeatureSubset::empty(3)),
                  ProductTooLarge);
  // 500^2 < 1e7 still runs.
  CHECK(eval1(f, {0, 0, 0}, FeatureSubset::of({0}, 3)) ==
        doctest::Approx(0.0));
}

TEST_CASE("single-row marginal equals fixed baseline on that row") {
  const auto bg = BackgroundData::from_rows({{2.5, -1.0}});
  const auto marginal = marginal_removal(product_model(), bg);
  const auto baseline = fixed_baseline_removal(product_model(), {2.5, -1.0});
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> x{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const FeatureSubset s{rng.next_u64() % 4, 2};
    CHECK(eval1(marginal, x, s) == eval1(baseline, x, s));
  }
}

TEST_CASE("uniform removal converges to the interval mean") {
  FeatureBounds bounds{{0.0, 0.0}, {1.0, 2.0}};
  const PredictionModel pick_x1{2, 1, [](std::span<const double> x) {
                                  return std::vector<double>{x[1]};
                                }};
  const auto f = uniform_removal(pick_x1, bounds, 100000);
  CHECK(eval1(f, {0.3, 9.9}, FeatureSubset::of({0}, 2)) ==
        doctest::Approx(1.0).epsilon(0.02));

  // No dependence on sampled coordinates: exact at any sample count.
  const PredictionModel pick_x0{2, 1, [](std::span<const double> x) {
                                  return std::vector<double>{x[0]};
                                }};
  const auto g = uniform_removal(pick_x0, bounds, 3);
  CHECK(eval1(g, {0.3, 9.9}, FeatureSubset::of({0}, 2)) == 0.3);

  FeatureBounds bad{{1.0}, {0.0}};
  CHECK_THROWS_AS(uniform_removal(sum_model(1), bad, 4), DegenerateBounds);
}

TEST_CASE("replacement distributions avoid the original categorical value") {
  const auto bg = BackgroundData::from_rows(
      {{0.0, 1.0}, {0.0, 2.0}, {1.0, 3.0}, {1.0, 4.0}},
      {ColumnKind::categorical, ColumnKind::continuous});
  const auto q = ReplacementDistributionSet::from_background(bg);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    CHECK(q.sample(0, 0.0, rng) == 1.0);
    CHECK(q.sample(0, 1.0, rng) == 0.0);
  }
}

TEST_CASE("replacement draws stay inside the sampled bin") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 64; ++i) rows.push_back({static_cast<double>(i)});
  const auto bg = BackgroundData::from_rows(rows);
  const auto q = ReplacementDistributionSet::from_background(bg);
  const auto marginals = empirical_marginals(bg);
  std::vector<double> edges{marginals[0].lo};
  edges.insert(edges.end(), marginals[0].bin_edges.begin(),
               marginals[0].bin_edges.end());
  edges.push_back(marginals[0].hi);

  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const double original = 10.0;  // first bin
    const double v = q.sample(0, original, rng);
    CHECK(v >= edges[1]);  // never the original's bin
    CHECK(v <= edges[4]);
  }
}

TEST_CASE("degenerate categorical columns are rejected") {
  const auto bg = BackgroundData::from_rows({{7.0}, {7.0}},
                                            {ColumnKind::categorical});
  CHECK_THROWS_AS(ReplacementDistributionSet::from_background(bg),
                  DegenerateColumn);
}

TEST_CASE("replacement removal is seeded and non-invariant") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 32; ++i) {
    rows.push_back({static_cast<double>(i), static_cast<double>(i % 7)});
  }
  const auto bg = BackgroundData::from_rows(rows);
  const auto q = ReplacementDistributionSet::from_background(bg);
  const auto f = replacement_distribution_removal(product_model(), q, 16);
  CHECK_FALSE(f.is_invariant());

  // Agrees with the model when nothing is removed.
  CHECK(eval1(f, {3, 4}, FeatureSubset::full(2)) == 12.0);

  // Same (x, S, seed) twice: identical.
  const FeatureSubset s = FeatureSubset::of({1}, 2);
  CHECK(eval1(f, {3, 4}, s, 9) == eval1(f, {3, 4}, s, 9));

  // Two x differing only in the removed coordinate, same seed, distinct
  // bins: outputs differ.
  const std::vector<double> a{3.0, 4.0};
  const std::vector<double> b{29.0, 4.0};
  CHECK_FALSE(check_invariance(f, a, b, s, 11));
}

TEST_CASE("conditional gaussian mean plugin follows the formula") {
  Mat cov(2, 2);
  cov(0, 0) = 1.0; cov(0, 1) = 0.5;
  cov(1, 0) = 0.5; cov(1, 1) = 1.0;
  const GaussianSpec g{{0.0, 0.0}, cov};
  const auto f = conditional_gaussian_removal(sum_model(2), g);
  // E[x0 + x1 | x0 = 1] = 1 + 0.5.
  CHECK(eval1(f, {1.0, 77.0}, FeatureSubset::of({0}, 2)) ==
        doctest::Approx(1.5).epsilon(1e-12));
  CHECK(eval1(f, {1.0, 2.0}, FeatureSubset::full(2)) == 3.0);

  // Diagonal covariance: conditional mean is the marginal mean.
  Mat diag(2, 2);
  diag(0, 0) = 1.0; diag(1, 1) = 1.0;
  const GaussianSpec ind{{0.5, -0.5}, diag};
  const auto h = conditional_gaussian_removal(sum_model(2), ind);
  CHECK(eval1(h, {1.0, 77.0}, FeatureSubset::of({0}, 2)) ==
        doctest::Approx(0.5).epsilon(1e-12));

  Mat indef(2, 2);
  indef(0, 0) = 1.0; indef(0, 1) = 2.0;
  indef(1, 0) = 2.0; indef(1, 1) = 1.0;
  CHECK_THROWS_AS(GaussianSpec({0.0, 0.0}, indef), NotPositiveDefinite);
}

TEST_CASE("conditional gaussian equals exact marginal for matching moments") {
  // Background whose column means equal mu; linear model; diagonal cov.
  const auto bg = BackgroundData::from_rows({{1, 4}, {3, 8}, {2, 6}});
  Mat diag(2, 2);
  diag(0, 0) = 1.0; diag(1, 1) = 1.0;
  const GaussianSpec g{{2.0, 6.0}, diag};
  const auto cond = conditional_gaussian_removal(sum_model(2), g);
  const auto marg = marginal_removal(sum_model(2), bg);
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const FeatureSubset s{rng.next_u64() % 4, 2};
    CHECK(eval1(cond, x, s) ==
          doctest::Approx(eval1(marg, x, s)).epsilon(1e-12));
  }
}

TEST_CASE("conditional empirical removal matches on categorical columns") {
  const auto bg = BackgroundData::from_rows(
      {{0.0, 10.0}, {0.0, 20.0}, {1.0, 30.0}},
      {ColumnKind::categorical, ColumnKind::continuous});
  const PredictionModel pick_x1{2, 1, [](std::span<const double> x) {
                                  return std::vector<double>{x[1]};
                                }};
  const auto f = conditional_empirical_removal(pick_x1, bg);
  CHECK(eval1(f, {0.0, -1}, FeatureSubset::of({0}, 2)) ==
        doctest::Approx(15.0));
  CHECK(eval1(f, {1.0, -1}, FeatureSubset::of({0}, 2)) ==
        doctest::Approx(30.0));
  CHECK_THROWS_AS(eval1(f, {2.0, -1}, FeatureSubset::of({0}, 2)),
                  NoMatchingRows);
  // Continuous columns cannot be conditioned on.
  CHECK_THROWS_AS(eval1(f, {0.0, 10.0}, FeatureSubset::of({1}, 2)),
                  PreconditionViolation);
}

TEST_CASE("tree distribution removal weights paths by coverage") {
  // Depth-1 tree on feature 0: left leaf 0.0 (30 samples), right 1.0 (70).
  DecisionTreeModel tree;
  tree.dim = 1;
  tree.out_dim = 1;
  tree.nodes.resize(3);
  tree.nodes[0].split_feature = 0;
  tree.nodes[0].threshold = 0.5;
  tree.nodes[0].left = 1;
  tree.nodes[0].right = 2;
  tree.nodes[0].coverage = 100.0;
  tree.nodes[1].value = {0.0};
  tree.nodes[1].coverage = 30.0;
  tree.nodes[2].value = {1.0};
  tree.nodes[2].coverage = 70.0;

  const auto f = tree_distribution_removal(tree);
  CHECK(eval1(f, {0.9}, FeatureSubset::empty(1)) == doctest::Approx(0.7));
  CHECK(eval1(f, {0.9}, FeatureSubset::of({0}, 1)) == 1.0);
  CHECK(eval1(f, {0.1}, FeatureSubset::of({0}, 1)) == 0.0);

  DecisionTreeModel broken = tree;
  broken.nodes[1].coverage = 0.0;
  CHECK_THROWS_AS(tree_distribution_removal(broken), MissingCoverage);
}

TEST_CASE("tree distribution equals plain prediction with all features") {
  RowMatrix x(128, 2);
  std::vector<double> y(128);
  Rng gen(31);
  for (std::size_t i = 0; i < 128; ++i) {
    x.at(i, 0) = gen.uniform(-1, 1);
    x.at(i, 1) = gen.uniform(-1, 1);
    y[i] = x.at(i, 0) > 0 ? 2.0 : (x.at(i, 1) > 0.3 ? -1.0 : 0.5);
  }
  TreeFitOptions opts;
  opts.max_depth = 4;
  const auto tree = fit_tree(x, y, opts);
  const auto f = tree_distribution_removal(tree);
  const auto full = FeatureSubset::full(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<double> probe{gen.uniform(-2, 2), gen.uniform(-2, 2)};
    CHECK(f.evaluate(probe, full) == tree.predict(probe));
  }
}

TEST_CASE("separate models removal recovers noiseless structure") {
  // d = 1, y = 3 x0.
  LabeledDataset ds;
  ds.features = RowMatrix(4, 1);
  for (std::size_t i = 0; i < 4; ++i) {
    ds.features.at(i, 0) = static_cast<double>(i);
  }
  ds.labels = {0.0, 3.0, 6.0, 9.0};
  ds.kinds = {ColumnKind::continuous};
  ds.categories.resize(1);
  ds.feature_names = {"x0"};
  const auto table = fit_subset_model_table(ds, TrainFamily::linear);
  const auto f = separate_models_removal(table);
  CHECK(eval1(f, {2.0}, FeatureSubset::of({0}, 1)) ==
        doctest::Approx(6.0).epsilon(1e-9));
  CHECK(eval1(f, {2.0}, FeatureSubset::empty(1)) ==
        doctest::Approx(4.5).epsilon(1e-12));  // mean of labels
  // Def. 3 against the table's own full model.
  CHECK(f.evaluate(std::vector<double>{2.0}, FeatureSubset::full(1)) ==
        (*f.extension_of())(std::vector<double>{2.0}));
}

TEST_CASE("all strategies satisfy invariance and extension on random probes") {
  const int d = 4;
  const PredictionModel model{
      d, 1, [](std::span<const double> x) {
        return std::vector<double>{x[0] * x[1] + std::sin(x[2]) - 0.5 * x[3]};
      }};
  std::vector<std::vector<double>> rows;
  Rng gen(41);
  for (int i = 0; i < 12; ++i) {
    rows.push_back({gen.uniform(-2, 2), gen.uniform(-2, 2),
                    gen.uniform(-2, 2), gen.uniform(-2, 2)});
  }
  const auto bg = BackgroundData::from_rows(rows);

  std::vector<SubsetFunction> strategies;
  strategies.push_back(
      fixed_baseline_removal(model, std::vector<double>(d, 0.0)));
  strategies.push_back(marginal_removal(model, bg));
  strategies.push_back(marginal_removal(model, bg, SampleMode::sampled(8)));
  strategies.push_back(product_of_marginals_removal(model, bg));
  strategies.push_back(uniform_removal(
      model, FeatureBounds::from_background(bg), 8));
  strategies.push_back(conditional_gaussian_removal(
      model, GaussianSpec::from_background(bg)));
  strategies.push_back(conditional_gaussian_removal(
      model, GaussianSpec::from_background(bg), ConditionalMode::sampled(8)));

  const auto subsets = enumerate_subsets(d);
  std::vector<std::vector<double>> probes;
  for (int i = 0; i < 25; ++i) {
    probes.push_back({gen.uniform(-2, 2), gen.uniform(-2, 2),
                      gen.uniform(-2, 2), gen.uniform(-2, 2)});
  }
  for (const auto& f : strategies) {
    CHECK(check_extension(f, *f.extension_of(), probes));
    for (const auto& x : probes) {
      const FeatureSubset s = subsets[gen.uniform_index(subsets.size())];
      std::vector<double> alt = x;
      for (int i = 0; i < d; ++i) {
        if (!s.contains(i)) {
          alt[static_cast<std::size_t>(i)] += gen.uniform(0.5, 1.5);
        }
      }
      CHECK(check_invariance(f, x, alt, s, 2024));
    }
  }
}

TEST_CASE("sampled modes converge to exact modes") {
  const PredictionModel model{
      2, 1, [](std::span<const double> x) {
        return std::vector<double>{x[0] * x[1] + x[0]};
      }};
  std::vector<std::vector<double>> rows;
  Rng gen(53);
  for (int i = 0; i < 20; ++i) {
    rows.push_back({gen.uniform(-1, 1), gen.uniform(-1, 1)});
  }
  const auto bg = BackgroundData::from_rows(rows);
  const auto exact = marginal_removal(model, bg);
  const int n = 4000;
  const auto sampled = marginal_removal(model, bg, SampleMode::sampled(n));

  int failures = 0;
  int checks = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> x{gen.uniform(-1, 1), gen.uniform(-1, 1)};
    for (std::uint64_t bits = 0; bits < 3; ++bits) {  // skip S = D
      const FeatureSubset s{bits, 2};
      const double reference = eval1(exact, x, s);
      const double estimate = eval1(sampled, x, s, 1000 + trial);
      // Empirical std of single-draw values around the exact mean.
      double var = 0.0;
      std::vector<double> probe = x;
      for (std::size_t r = 0; r < bg.n(); ++r) {
        for (int j : s.complement().members()) {
          probe[static_cast<std::size_t>(j)] =
              bg.rows.at(r, static_cast<std::size_t>(j));
        }
        const double v = model(probe)[0];
        var += (v - reference) * (v - reference);
      }
      var /= static_cast<double>(bg.n());
      const double bound = 3.0 * std::sqrt(var / n);
      ++checks;
      if (std::abs(estimate - reference) > bound) ++failures;
    }
  }
  // 99% of probes within 3 standard errors.
  CHECK(failures <= checks / 100);
}

}  // TEST_SUITE
