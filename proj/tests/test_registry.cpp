#include <doctest.h>

#include <algorithm>
#include <set>

#include "rex/engine.hpp"
#include "rex/registry.hpp"

using namespace rex;

namespace {

bool has_neighbor(const std::string& from, const std::string& to,
                  const std::string& axis) {
  for (const auto& n : neighbors(preset(from))) {
    if (n.spec.name == to && n.axis == axis) return true;
  }
  return false;
}

struct Row {
  const char* name;
  const char* removal;
  const char* behavior;
  const char* summary;
};

// The full method table, one row per preset.
constexpr Row kTable[] = {
    {"IME (2009)", "separate-models", "prediction", "shapley-value"},
    {"IME (2010)", "marginalize-uniform", "prediction", "shapley-value"},
    {"QII", "marginalize-product", "prediction", "shapley-value"},
    {"SHAP", "marginalize-conditional", "prediction", "shapley-value"},
    {"KernelSHAP", "marginalize-marginal", "prediction", "shapley-value"},
    {"TreeSHAP", "tree-distribution", "prediction", "shapley-value"},
    {"LossSHAP", "marginalize-conditional", "prediction-loss",
     "shapley-value"},
    {"SAGE", "marginalize-conditional", "dataset-loss-label", "shapley-value"},
    {"Shapley Net Effects", "separate-models", "dataset-loss-label",
     "shapley-value"},
    {"Shapley Effects", "marginalize-conditional", "dataset-loss-output",
     "shapley-value"},
    {"Permutation Test", "marginalize-marginal", "dataset-loss-label",
     "remove-individual"},
    {"Conditional Perm. Test", "marginalize-conditional",
     "dataset-loss-label", "remove-individual"},
    {"Feature Ablation (LOCO)", "separate-models", "dataset-loss-label",
     "remove-individual"},
    {"Univariate Predictors", "separate-models", "dataset-loss-label",
     "include-individual"},
    {"L2X", "missingness-during-training", "prediction-mean-loss",
     "high-value-subset"},
    {"INVASE", "missingness-during-training", "prediction-mean-loss",
     "high-value-subset"},
    {"LIME (Images)", "default-values", "prediction", "linear-model"},
    {"LIME (Tabular)", "marginalize-replacement", "prediction",
     "linear-model"},
    {"PredDiff", "marginalize-conditional", "prediction",
     "remove-individual"},
    {"Occlusion", "zeros", "prediction", "remove-individual"},
    {"CXPlain", "zeros", "prediction-loss", "remove-individual"},
    {"RISE", "zeros", "prediction", "mean-when-included"},
    {"MM", "default-values", "prediction", "partitioned-subsets"},
    {"MIR", "extend-pixel-values", "prediction", "high-value-subset"},
    {"MP", "blurring", "prediction", "low-value-subset"},
    {"EP", "blurring", "prediction", "high-value-subset"},
    {"FIDO-CA", "generative-model", "prediction", "high-value-subset"},
};

}  // namespace

TEST_SUITE("registry") {

TEST_CASE("every preset row resolves with the tabulated labels") {
  CHECK(all_presets().size() == 27);
  for (const Row& row : kTable) {
    const MethodSpec spec = preset(row.name);
    CHECK(spec.name == row.name);
    CHECK(spec.removal.label == row.removal);
    CHECK(spec.behavior.label == row.behavior);
    CHECK(spec.summary.label == row.summary);
  }
  CHECK_THROWS_AS(preset("NoSuchMethod"), UnknownPreset);
}

TEST_CASE("preset lookup normalizes names") {
  CHECK(preset("ime-2009").name == "IME (2009)");
  CHECK(preset("IME_2009").name == "IME (2009)");
  CHECK(preset("kernelshap").name == "KernelSHAP");
  CHECK(preset("KERNEL shap").name == "KernelSHAP");
  CHECK(preset("loco").name == "Feature Ablation (LOCO)");
  CHECK(preset("lime tabular").name == "LIME (Tabular)");
}

TEST_CASE("substituted presets are flagged with notes") {
  const std::set<std::string> expected = {"MP",  "EP",     "MIR",
                                          "MM",  "FIDO-CA", "L2X",
                                          "INVASE", "CXPlain"};
  for (const auto& p : all_presets()) {
    const bool should = expected.count(p.name) > 0;
    CHECK(p.substituted == should);
    if (should) CHECK_FALSE(p.substitution_note.empty());
  }
}

TEST_CASE("out-of-scope removal labels have executable bindings") {
  int executable = 0;
  for (const auto& label : removal_axis_labels()) {
    if (removal_label_executable(label)) {
      ++executable;
      CHECK(substituted_removal_binding(label) == label);
    } else {
      const auto bound = substituted_removal_binding(label);
      CHECK(removal_label_executable(bound));
    }
  }
  CHECK(executable == 9);
  CHECK(substituted_removal_binding("blurring") == "default-values");
  CHECK(substituted_removal_binding("missingness-during-training") ==
        "marginalize-marginal");
}

TEST_CASE("grid covers the full cartesian product") {
  const auto grid = enumerate_grid();
  CHECK(grid.size() == removal_axis_labels().size() *
                           behavior_axis_labels().size() *
                           summary_axis_labels().size());
  CHECK(grid.size() == 13 * 5 * 8);

  // Every preset occupies exactly one cell.
  std::size_t occupied = 0;
  for (const auto& cell : grid) occupied += cell.presets.size();
  CHECK(occupied == all_presets().size());

  // Occupancy examples.
  bool found_perm = false, found_empty = false;
  for (const auto& cell : grid) {
    if (cell.position ==
        GridPosition{"marginalize-marginal", "dataset-loss-label",
                     "remove-individual"}) {
      REQUIRE(cell.presets.size() == 1);
      CHECK(cell.presets[0] == "Permutation Test");
      found_perm = true;
    }
    if (cell.position ==
        GridPosition{"zeros", "dataset-loss-output", "include-individual"}) {
      CHECK(cell.presets.empty());
      found_empty = true;
    }
  }
  CHECK(found_perm);
  CHECK(found_empty);
}

TEST_CASE("neighbor groupings differ in exactly the tabulated axis") {
  // Shared behavior and summary; removal differs.
  for (const char* a : {"IME (2009)", "IME (2010)", "QII", "SHAP",
                        "KernelSHAP", "TreeSHAP"}) {
    for (const char* b : {"IME (2009)", "IME (2010)", "QII", "SHAP",
                          "KernelSHAP", "TreeSHAP"}) {
      if (std::string(a) == b) continue;
      CHECK(has_neighbor(a, b, "removal"));
    }
  }

  // Shared removal and summary; behavior differs.
  for (const char* a : {"SHAP", "LossSHAP", "SAGE", "Shapley Effects"}) {
    for (const char* b : {"SHAP", "LossSHAP", "SAGE", "Shapley Effects"}) {
      if (std::string(a) == b) continue;
      CHECK(has_neighbor(a, b, "behavior"));
    }
  }

  // Shared removal (zeros ~ default-values) and behavior; summary differs.
  for (const char* a : {"Occlusion", "LIME (Images)", "MM", "RISE"}) {
    for (const char* b : {"Occlusion", "LIME (Images)", "MM", "RISE"}) {
      if (std::string(a) == b) continue;
      CHECK(has_neighbor(a, b, "summary"));
    }
  }

  // Remaining pairwise groupings.
  CHECK(has_neighbor("Feature Ablation (LOCO)", "Permutation Test",
                     "removal"));
  CHECK(has_neighbor("Permutation Test", "Conditional Perm. Test",
                     "removal"));
  CHECK(has_neighbor("Univariate Predictors", "Feature Ablation (LOCO)",
                     "summary"));
  CHECK(has_neighbor("Univariate Predictors", "Shapley Net Effects",
                     "summary"));
  CHECK(has_neighbor("SAGE", "Shapley Net Effects", "removal"));
  CHECK(has_neighbor("SAGE", "Conditional Perm. Test", "summary"));
  CHECK(has_neighbor("Shapley Net Effects", "IME (2009)", "behavior"));
  CHECK(has_neighbor("Occlusion", "CXPlain", "behavior"));
  CHECK(has_neighbor("Occlusion", "PredDiff", "removal"));
  CHECK(has_neighbor("Conditional Perm. Test", "PredDiff", "behavior"));
  CHECK(has_neighbor("SHAP", "PredDiff", "summary"));
  CHECK(has_neighbor("MP", "EP", "summary"));
  CHECK(has_neighbor("EP", "FIDO-CA", "removal"));

  // L2X and INVASE share all three choices: co-occupants, not neighbors.
  CHECK(position_of(preset("L2X")) == position_of(preset("INVASE")));
  CHECK_FALSE(has_neighbor("L2X", "INVASE", "removal"));
  CHECK_FALSE(has_neighbor("L2X", "INVASE", "behavior"));
  CHECK_FALSE(has_neighbor("L2X", "INVASE", "summary"));
}

TEST_CASE("a spec with no occupied neighbors yields an empty list") {
  MethodSpec spec;
  spec.removal = {"tree-distribution", {}};
  spec.behavior = {"prediction-mean-loss", {}};
  spec.summary = {"partitioned-subsets", {}};
  CHECK(neighbors(spec).empty());
}

TEST_CASE("engine validates axis labels and instance requirements") {
  LabeledDataset ds;
  ds.features = RowMatrix(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    ds.features.at(i, 0) = static_cast<double>(i);
    ds.features.at(i, 1) = static_cast<double>(i % 2);
  }
  ds.labels = {0.0, 1.0, 2.0, 3.0};
  ds.kinds.assign(2, ColumnKind::continuous);
  ds.categories.resize(2);
  ds.feature_names = {"a", "b"};
  const AnyModel model = fit_linear(ds);

  EngineConfig config;
  config.method = preset("Occlusion");
  CHECK_THROWS_AS(run_explanation(ds, model, config), ConfigError);  // no instance

  config.instance = 0;
  const auto result = run_explanation(ds, model, config);
  CHECK(result.explanation.scores.size() == 2);
  CHECK(result.explanation.kind == ExplanationKind::attribution);

  // Dataset behaviors forbid an instance.
  EngineConfig sage;
  sage.method = preset("SAGE");
  sage.instance = 0;
  CHECK_THROWS_AS(run_explanation(ds, model, sage), ConfigError);

  // Tree removal requires a tree model.
  EngineConfig treeshap;
  treeshap.method = preset("TreeSHAP");
  treeshap.instance = 0;
  CHECK_THROWS_AS(run_explanation(ds, model, treeshap), ConfigError);

  EngineConfig bad;
  bad.method = preset("Occlusion");
  bad.method.removal.label = "no-such-removal";
  bad.instance = 0;
  CHECK_THROWS_AS(run_explanation(ds, model, bad), ConfigError);
}

TEST_CASE("substituted presets execute end to end") {
  LabeledDataset ds;
  ds.features = RowMatrix(6, 3);
  Rng rng(2);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      ds.features.at(i, j) = rng.uniform(-1, 1);
    }
  }
  ds.labels = {0, 1, 0, 1, 1, 0};
  ds.label_is_class = true;
  ds.label_categories = {"0", "1"};
  ds.kinds.assign(3, ColumnKind::continuous);
  ds.categories.resize(3);
  ds.feature_names = {"a", "b", "c"};
  const AnyModel model = fit_logistic(ds);

  for (const char* name : {"MP", "EP", "MIR", "MM", "FIDO-CA", "L2X",
                           "INVASE", "CXPlain"}) {
    EngineConfig config;
    config.method = preset(name);
    config.instance = 1;
    const auto result = run_explanation(ds, model, config);
    CHECK(result.resolved.substituted);
    if (result.explanation.kind == ExplanationKind::selection) {
      CHECK(result.explanation.selected.has_value());
    } else {
      CHECK(result.explanation.scores.size() == 3);
    }
  }
}

TEST_CASE("sage preset attributions satisfy efficiency") {
  LabeledDataset ds;
  ds.features = RowMatrix(24, 3);
  Rng rng(12);
  for (std::size_t i = 0; i < 24; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      ds.features.at(i, j) = rng.normal();
    }
    ds.labels.push_back(ds.features.at(i, 0) - 2.0 * ds.features.at(i, 2) +
                        0.1 * rng.normal());
  }
  ds.kinds.assign(3, ColumnKind::continuous);
  ds.categories.resize(3);
  ds.feature_names = {"a", "b", "c"};
  const AnyModel model = fit_linear(ds);

  EngineConfig config;
  config.method = preset("SAGE");
  const auto result = run_explanation(ds, model, config);

  const SubsetFunction f = build_removal(
      "marginalize-conditional", config.method.removal.params, model, ds);
  const auto u = behavior_dataset_loss_label(
      f, ds, LossFunction::squared_error(), 0);
  const double expected_total =
      u(FeatureSubset::full(3)) - u(FeatureSubset::empty(3));
  double total = 0.0;
  for (double s : result.explanation.scores) total += s;
  CHECK(total == doctest::Approx(expected_total).epsilon(1e-8));
}

}  // TEST_SUITE
