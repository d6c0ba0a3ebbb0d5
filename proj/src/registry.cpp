#include "rex/registry.hpp"

#include <algorithm>
#include <cctype>

namespace rex {

namespace {

const char* kZeros = "zeros";
const char* kDefaults = "default-values";
const char* kMissingness = "missingness-during-training";
const char* kExtendPixels = "extend-pixel-values";
const char* kBlurring = "blurring";
const char* kGenerative = "generative-model";
const char* kConditional = "marginalize-conditional";
const char* kMarginal = "marginalize-marginal";
const char* kProduct = "marginalize-product";
const char* kUniform = "marginalize-uniform";
const char* kReplacement = "marginalize-replacement";
const char* kTree = "tree-distribution";
const char* kSeparate = "separate-models";

const char* kPrediction = "prediction";
const char* kPredictionLoss = "prediction-loss";
const char* kPredictionMeanLoss = "prediction-mean-loss";
const char* kDatasetLossLabel = "dataset-loss-label";
const char* kDatasetLossOutput = "dataset-loss-output";

const char* kRemoveIndividual = "remove-individual";
const char* kIncludeIndividual = "include-individual";
const char* kLinearModel = "linear-model";
const char* kMeanWhenIncluded = "mean-when-included";
const char* kShapleyValue = "shapley-value";
const char* kLowValueSubset = "low-value-subset";
const char* kHighValueSubset = "high-value-subset";
const char* kPartitionedSubsets = "partitioned-subsets";

using Params = std::map<std::string, std::string>;

MethodSpec make(std::string name, MethodAxis removal, MethodAxis behavior,
                MethodAxis summary, std::string note = {}) {
  MethodSpec spec;
  spec.name = std::move(name);
  spec.removal = std::move(removal);
  spec.behavior = std::move(behavior);
  spec.summary = std::move(summary);
  if (!note.empty()) {
    spec.substituted = true;
    spec.substitution_note = std::move(note);
  }
  return spec;
}

std::vector<MethodSpec> build_presets() {
  const MethodAxis prediction{kPrediction, {}};
  const MethodAxis prediction_logodds{kPrediction, {{"link", "log-odds"}}};
  const MethodAxis prediction_loss{kPredictionLoss, {{"loss", "auto"}}};
  const MethodAxis mean_loss{kPredictionMeanLoss, {{"loss", "auto"}}};
  const MethodAxis dataset_label{kDatasetLossLabel, {{"loss", "auto"}}};
  const MethodAxis dataset_output{kDatasetLossOutput,
                                  {{"loss", "squared-error"}}};

  const MethodAxis shapley{kShapleyValue, {{"solver", "exact"}}};
  const MethodAxis remove_ind{kRemoveIndividual, {}};
  const MethodAxis include_ind{kIncludeIndividual, {}};

  const MethodAxis conditional{kConditional,
                               {{"variant", "gaussian"}, {"mode", "plugin"}}};
  const MethodAxis marginal{kMarginal, {{"mode", "exact"}}};
  const MethodAxis separate{kSeparate, {{"family", "auto"}}};
  const MethodAxis zeros{kZeros, {}};
  const MethodAxis defaults{kDefaults, {{"baseline", "means"}}};

  const std::string blur_note =
      "original removes image regions by Gaussian blurring; "
      "bound to default-value baselines for tabular data";
  const std::string amortized_note =
      "original trains with missingness and an amortized selector network; "
      "bound to marginal removal with direct optimization";

  std::vector<MethodSpec> presets;

  presets.push_back(make("IME (2009)", separate, prediction, shapley));
  presets.push_back(make("IME (2010)",
                         {kUniform, {{"samples", "1024"}}}, prediction,
                         shapley));
  presets.push_back(make("QII", {kProduct, {{"mode", "exact"}}}, prediction,
                         shapley));
  presets.push_back(make(
      "SHAP",
      {kConditional,
       {{"variant", "gaussian"}, {"mode", "plugin"},
        {"alt-removal", kMarginal}}},
      prediction, shapley));
  presets.push_back(make("KernelSHAP", marginal, prediction,
                         {kShapleyValue, {{"solver", "kernel-regression"}}}));
  presets.push_back(make("TreeSHAP", {kTree, {}}, prediction, shapley));
  presets.push_back(make("LossSHAP", conditional, prediction_loss, shapley));
  presets.push_back(make("SAGE", conditional, dataset_label, shapley));
  presets.push_back(
      make("Shapley Net Effects", separate, dataset_label, shapley));
  presets.push_back(make("Shapley Effects", conditional, dataset_output,
                         shapley));
  presets.push_back(make("Permutation Test", marginal, dataset_label,
                         remove_ind));
  presets.push_back(make("Conditional Perm. Test", conditional, dataset_label,
                         remove_ind));
  presets.push_back(make("Feature Ablation (LOCO)", separate, dataset_label,
                         remove_ind));
  presets.push_back(make("Univariate Predictors", separate, dataset_label,
                         include_ind));
  presets.push_back(make("L2X", {kMissingness, {}}, mean_loss,
                         {kHighValueSubset,
                          {{"form", "constrained"}, {"k", "auto"},
                           {"solver", "exhaustive"}}},
                         amortized_note));
  presets.push_back(make("INVASE", {kMissingness, {}}, mean_loss,
                         {kHighValueSubset,
                          {{"form", "regularized"}, {"lambda", "0.01"},
                           {"solver", "exhaustive"}}},
                         amortized_note));
  presets.push_back(make("LIME (Images)", defaults, prediction,
                         {kLinearModel,
                          {{"kernel", "uniform"}, {"regularizer", "none"}}}));
  presets.push_back(make("LIME (Tabular)",
                         {kReplacement, {{"samples", "128"}, {"bins", "4"}}},
                         prediction,
                         {kLinearModel,
                          {{"kernel", "uniform"}, {"regularizer", "none"}}}));
  presets.push_back(make("PredDiff", conditional, prediction_logodds,
                         remove_ind));
  presets.push_back(make("Occlusion", zeros, prediction, remove_ind));
  presets.push_back(make(
      "CXPlain", zeros, prediction_loss,
      {kRemoveIndividual, {{"normalize", "false"}}},
      "original trains an amortized explainer on precomputed attributions; "
      "the training-free attributions are computed directly here"));
  presets.push_back(make("RISE", zeros, prediction,
                         {kMeanWhenIncluded,
                          {{"p", "0.5"}, {"mode", "exact"}}}));
  presets.push_back(make(
      "MM", defaults, prediction,
      {kPartitionedSubsets,
       {{"lambda", "1"}, {"gamma", "0"}, {"solver", "exhaustive"}}},
      "original trains an amortized mask model with monotonic link "
      "functions; the partitioned objective is optimized directly here"));
  presets.push_back(make(
      "MIR", {kExtendPixels, {}}, prediction,
      {kHighValueSubset,
       {{"form", "threshold"}, {"t", "auto"}, {"solver", "greedy"}}},
      "original extends neighboring pixel values via a gradient-space "
      "manipulation; bound to default-value baselines for tabular data"));
  presets.push_back(make(
      "MP", {kBlurring, {}}, prediction,
      {kLowValueSubset, {{"lambda", "0.1"}, {"solver", "exhaustive"}}},
      blur_note));
  presets.push_back(make(
      "EP", {kBlurring, {}}, prediction,
      {kHighValueSubset,
       {{"form", "constrained"}, {"k", "auto"}, {"solver", "exhaustive"}}},
      blur_note));
  presets.push_back(make(
      "FIDO-CA", {kGenerative, {}}, prediction,
      {kHighValueSubset,
       {{"form", "regularized"}, {"lambda", "0.01"},
        {"solver", "exhaustive"}}},
      "original in-paints held-out features with a conditional generative "
      "model; bound to default-value baselines for tabular data"));

  return presets;
}

}  // namespace

// ---------------------------------------------------------------------------
// Axes
// ---------------------------------------------------------------------------

const std::vector<std::string>& removal_axis_labels() {
  static const std::vector<std::string> labels = {
      kZeros,     kDefaults,   kMissingness, kExtendPixels, kBlurring,
      kGenerative, kConditional, kMarginal,   kProduct,      kUniform,
      kReplacement, kTree,      kSeparate,
  };
  return labels;
}

const std::vector<std::string>& behavior_axis_labels() {
  static const std::vector<std::string> labels = {
      kPrediction, kPredictionLoss, kPredictionMeanLoss, kDatasetLossLabel,
      kDatasetLossOutput,
  };
  return labels;
}

const std::vector<std::string>& summary_axis_labels() {
  static const std::vector<std::string> labels = {
      kRemoveIndividual, kIncludeIndividual, kLinearModel, kMeanWhenIncluded,
      kShapleyValue,     kLowValueSubset,    kHighValueSubset,
      kPartitionedSubsets,
  };
  return labels;
}

bool removal_label_executable(const std::string& label) {
  return label != kMissingness && label != kExtendPixels &&
         label != kBlurring && label != kGenerative;
}

std::string substituted_removal_binding(const std::string& label) {
  if (label == kMissingness) return kMarginal;
  if (label == kExtendPixels || label == kBlurring || label == kGenerative) {
    return kDefaults;
  }
  return label;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

const std::vector<MethodSpec>& all_presets() {
  static const std::vector<MethodSpec> presets = build_presets();
  return presets;
}

std::string normalize_method_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

MethodSpec preset(const std::string& name) {
  const std::string key = normalize_method_name(name);
  for (const MethodSpec& p : all_presets()) {
    if (normalize_method_name(p.name) == key) return p;
  }
  // Aliases for common shorthand.
  static const std::map<std::string, std::string> aliases = {
      {"loco", "Feature Ablation (LOCO)"},
      {"featureablation", "Feature Ablation (LOCO)"},
      {"conditionalpermutationtest", "Conditional Perm. Test"},
      {"lime", "LIME (Tabular)"},
  };
  auto it = aliases.find(key);
  if (it != aliases.end()) return preset(it->second);
  throw UnknownPreset("no preset named '" + name + "'");
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

GridPosition position_of(const MethodSpec& spec) {
  return {spec.removal.label, spec.behavior.label, spec.summary.label};
}

std::vector<GridCell> enumerate_grid() {
  std::vector<GridCell> cells;
  cells.reserve(removal_axis_labels().size() * behavior_axis_labels().size() *
                summary_axis_labels().size());
  for (const auto& r : removal_axis_labels()) {
    for (const auto& b : behavior_axis_labels()) {
      for (const auto& s : summary_axis_labels()) {
        GridCell cell;
        cell.position = {r, b, s};
        for (const MethodSpec& p : all_presets()) {
          if (position_of(p) == cell.position) {
            cell.presets.push_back(p.name);
          }
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

namespace {

// Zeros is the all-zero instance of the default-values family; the two
// labels share a removal-axis position for neighborhood purposes.
bool removal_labels_equal(const std::string& a, const std::string& b) {
  if (a == b) return true;
  const bool a_baseline = a == kZeros || a == kDefaults;
  const bool b_baseline = b == kZeros || b == kDefaults;
  return a_baseline && b_baseline;
}

}  // namespace

std::vector<Neighbor> neighbors(const MethodSpec& spec) {
  std::vector<Neighbor> out;
  const GridPosition pos = position_of(spec);
  for (const MethodSpec& p : all_presets()) {
    if (p.name == spec.name && !spec.name.empty()) continue;
    const GridPosition other = position_of(p);
    const bool same_removal = removal_labels_equal(pos.removal, other.removal);
    const bool same_behavior = pos.behavior == other.behavior;
    const bool same_summary = pos.summary == other.summary;
    const int differing = (same_removal ? 0 : 1) + (same_behavior ? 0 : 1) +
                          (same_summary ? 0 : 1);
    if (differing != 1) continue;
    Neighbor n;
    n.spec = p;
    n.axis = !same_removal ? "removal" : (!same_behavior ? "behavior"
                                                         : "summary");
    out.push_back(std::move(n));
  }
  return out;
}

}  // namespace rex
