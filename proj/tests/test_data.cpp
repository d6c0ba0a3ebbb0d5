#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "rex/data.hpp"
#include "rex/removal.hpp"

using namespace rex;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/rex_test_" + name;
  std::ofstream out(path);
  out << body;
  return path;
}

const char* kSchema = R"({
  "columns": [
    {"name": "a", "kind": "continuous"},
    {"name": "b", "kind": "continuous"},
    {"name": "y", "kind": "continuous"}
  ],
  "label": "y"
})";

}  // namespace

TEST_SUITE("data") {

TEST_CASE("csv shape and header handling") {
  const auto schema = DatasetSchema::from_json_text(kSchema);
  const auto path = write_temp("shape.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  const auto ds = load_csv(path, schema);
  CHECK(ds.n() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.labels == std::vector<double>{3, 6, 9});
  CHECK(ds.features.at(2, 1) == 8.0);

  // Headerless files parse identically.
  const auto bare = write_temp("bare.csv", "1,2,3\n4,5,6\n7,8,9\n");
  const auto ds2 = load_csv(bare, schema);
  CHECK(ds2.n() == 3);
  CHECK(ds2.features.data == ds.features.data);
}

TEST_CASE("categorical encoding uses first-appearance order") {
  const auto schema = DatasetSchema::from_json_text(R"({
    "columns": [
      {"name": "c", "kind": "categorical"},
      {"name": "y", "kind": "continuous"}
    ],
    "label": "y"
  })");
  const auto path = write_temp("cat.csv", "b,1\na,2\nb,3\nz,4\n");
  const auto ds = load_csv(path, schema);
  CHECK(ds.features.at(0, 0) == 0.0);  // "b"
  CHECK(ds.features.at(1, 0) == 1.0);  // "a"
  CHECK(ds.features.at(2, 0) == 0.0);
  CHECK(ds.features.at(3, 0) == 2.0);  // "z"
  CHECK(ds.categories[0] == std::vector<std::string>{"b", "a", "z"});
}

TEST_CASE("parse errors carry row and column") {
  const auto schema = DatasetSchema::from_json_text(kSchema);
  const auto path = write_temp("bad.csv", "1,2,3\n4,oops,6\n");
  try {
    load_csv(path, schema);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }
  const auto short_path = write_temp("short.csv", "1,2\n");
  CHECK_THROWS_AS(load_csv(short_path, schema), SchemaMismatch);
}

TEST_CASE("csv round trip is bit exact") {
  const auto schema = DatasetSchema::from_json_text(R"({
    "columns": [
      {"name": "a", "kind": "continuous"},
      {"name": "c", "kind": "categorical"},
      {"name": "y", "kind": "continuous"}
    ],
    "label": "y"
  })");
  const auto path = write_temp(
      "rt.csv", "a,c,y\n0.1,red,3.25\n-7.5e-3,blue,0.333333333333333314\n"
                "123456.789,red,-2\n");
  const auto ds = load_csv(path, schema);
  const auto out = write_temp("rt_out.csv", "");
  save_csv(out, ds);
  const auto ds2 = load_csv(out, schema);
  CHECK(ds.features.data == ds2.features.data);
  CHECK(ds.labels == ds2.labels);
  CHECK(ds.categories == ds2.categories);
}

TEST_CASE("quantiles follow linear interpolation") {
  // Column 0..99: quartile edges 24.75 / 49.5 / 74.25.
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 100; ++i) rows.push_back({static_cast<double>(i)});
  const auto bg = BackgroundData::from_rows(rows);
  const auto marginals = empirical_marginals(bg);
  REQUIRE(marginals.size() == 1);
  const auto& m = marginals[0];
  CHECK(m.lo == 0.0);
  CHECK(m.hi == 99.0);
  REQUIRE(m.bin_edges.size() == 3);
  CHECK(m.bin_edges[0] == doctest::Approx(24.75).epsilon(1e-12));
  CHECK(m.bin_edges[1] == doctest::Approx(49.5).epsilon(1e-12));
  CHECK(m.bin_edges[2] == doctest::Approx(74.25).epsilon(1e-12));
}

TEST_CASE("categorical marginals carry exact frequencies") {
  const auto bg = BackgroundData::from_rows({{1.0}, {1.0}, {2.0}},
                                            {ColumnKind::categorical});
  const auto marginals = empirical_marginals(bg);
  REQUIRE(marginals[0].values.size() == 2);
  CHECK(marginals[0].values[0] == 1.0);
  CHECK(marginals[0].freqs[0] == doctest::Approx(2.0 / 3));
  CHECK(marginals[0].freqs[1] == doctest::Approx(1.0 / 3));
}

TEST_CASE("synthetic generation is reproducible and centered") {
  Mat cov(2, 2);
  cov(0, 0) = 1.0;
  cov(1, 1) = 4.0;
  const auto a = synth_gaussian_linear({1.0, -2.0}, cov, {1.0, 2.0}, 0.0,
                                       20000, 99);
  const auto b = synth_gaussian_linear({1.0, -2.0}, cov, {1.0, 2.0}, 0.0,
                                       20000, 99);
  CHECK(a.data.features.data == b.data.features.data);
  CHECK(a.data.labels == b.data.labels);

  double mean0 = 0.0, mean1 = 0.0;
  for (std::size_t i = 0; i < a.data.n(); ++i) {
    mean0 += a.data.features.at(i, 0);
    mean1 += a.data.features.at(i, 1);
  }
  mean0 /= static_cast<double>(a.data.n());
  mean1 /= static_cast<double>(a.data.n());
  CHECK(std::abs(mean0 - 1.0) < 3.0 / std::sqrt(20000.0));
  CHECK(std::abs(mean1 + 2.0) < 3.0 * 2.0 / std::sqrt(20000.0));

  // Noiseless labels are exactly beta . x.
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.data.labels[i] == a.data.features.at(i, 0) +
                                  2.0 * a.data.features.at(i, 1));
  }
}

TEST_CASE("oracle extension matches the conditional-gaussian removal") {
  Mat cov(3, 3);
  cov(0, 0) = 1.0; cov(0, 1) = 0.3; cov(0, 2) = 0.1;
  cov(1, 0) = 0.3; cov(1, 1) = 2.0; cov(1, 2) = -0.4;
  cov(2, 0) = 0.1; cov(2, 1) = -0.4; cov(2, 2) = 1.5;
  const std::vector<double> mean{0.5, -1.0, 2.0};
  const std::vector<double> beta{1.0, -2.0, 0.5};
  const auto synth = synth_gaussian_linear(mean, cov, beta, 0.0, 10, 7);

  LinearModel lm;
  lm.beta = beta;
  lm.intercept = 0.0;
  const auto f = conditional_gaussian_removal(
      lm.as_model(), GaussianSpec{mean, cov}, ConditionalMode::plugin());

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x{rng.uniform(-2, 2), rng.uniform(-2, 2),
                          rng.uniform(-2, 2)};
    const FeatureSubset s{rng.next_u64() % 8, 3};
    const double expected = synth.oracle.extension_value(x, s);
    CHECK(f.evaluate(x, s)[0] == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("analytic shapley values require diagonal covariance") {
  Mat cov(2, 2);
  cov(0, 0) = 1.0;
  cov(1, 1) = 1.0;
  const auto synth = synth_gaussian_linear({0, 0}, cov, {1.0, 2.0}, 0.0, 5, 1);
  const auto phi = synth.oracle.dataset_loss_shapley();
  CHECK(phi[0] == doctest::Approx(1.0));
  CHECK(phi[1] == doctest::Approx(4.0));

  Mat dep(2, 2);
  dep(0, 0) = 1.0; dep(0, 1) = 0.5;
  dep(1, 0) = 0.5; dep(1, 1) = 1.0;
  const auto bad = synth_gaussian_linear({0, 0}, dep, {1.0, 2.0}, 0.0, 5, 1);
  CHECK_THROWS_AS(bad.oracle.dataset_loss_shapley(), PreconditionViolation);
}

}  // TEST_SUITE
