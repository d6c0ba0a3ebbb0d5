#pragma once

#include <string>
#include <variant>
#include <vector>

#include "rex/core.hpp"
#include "rex/data.hpp"

namespace rex {

// ---------------------------------------------------------------------------
// Linear regression
// ---------------------------------------------------------------------------

struct LinearModel {
  std::vector<double> beta;
  double intercept = 0.0;

  int dim() const { return static_cast<int>(beta.size()); }
  double predict(std::span<const double> x) const;
  PredictionModel as_model() const;
};

struct LinearFitOptions {
  // Rank-deficient designs fall back to a tiny ridge penalty unless disabled,
  // in which case they raise RankDeficient.
  bool ridge_fallback = true;
  double ridge_lambda = 1e-8;
};

LinearModel fit_linear(const RowMatrix& x, std::span<const double> y,
                       const LinearFitOptions& opts = {});
LinearModel fit_linear(const LabeledDataset& data,
                       const LinearFitOptions& opts = {});

// ---------------------------------------------------------------------------
// Logistic regression (binary)
// ---------------------------------------------------------------------------

struct LogisticModel {
  std::vector<double> beta;
  double intercept = 0.0;

  int dim() const { return static_cast<int>(beta.size()); }
  double prob_class1(std::span<const double> x) const;
  // Output is the class-probability vector (P(y=0), P(y=1)).
  std::vector<double> predict(std::span<const double> x) const;
  PredictionModel as_model() const;
};

LogisticModel fit_logistic(const RowMatrix& x, std::span<const double> y01,
                           int max_iters = 10000, double step = 0.1);
LogisticModel fit_logistic(const LabeledDataset& data, int max_iters = 10000,
                           double step = 0.1);

// ---------------------------------------------------------------------------
// Decision trees (CART) with training-coverage counts
// ---------------------------------------------------------------------------

struct TreeNode {
  int split_feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;  // leaf prediction (size out_dim)
  double coverage = 0.0;      // training samples through this node
  bool is_leaf() const { return split_feature < 0; }
};

struct DecisionTreeModel {
  std::vector<TreeNode> nodes;  // node 0 is the root
  int dim = 0;
  int out_dim = 1;

  std::vector<double> predict(std::span<const double> x) const;
  PredictionModel as_model() const;
};

struct TreeFitOptions {
  int max_depth = 4;
  int min_leaf = 1;
  bool classification = false;  // squared error otherwise
  int n_classes = 2;
};

DecisionTreeModel fit_tree(const RowMatrix& x, std::span<const double> y,
                           const TreeFitOptions& opts);
DecisionTreeModel fit_tree(const LabeledDataset& data,
                           const TreeFitOptions& opts);

// ---------------------------------------------------------------------------
// Per-subset model tables (one model trained on each feature subset)
// ---------------------------------------------------------------------------

enum class TrainFamily { linear, logistic };

inline constexpr int kMaxSubsetTableDim = 15;

class SubsetModelTable {
 public:
  struct Entry {
    std::vector<double> beta;  // aligned with the subset's members, ascending
    double intercept = 0.0;
  };

  SubsetModelTable() = default;
  SubsetModelTable(int dim, TrainFamily family, int out_dim,
                   std::vector<Entry> entries);

  int dim() const { return dim_; }
  int out_dim() const { return out_dim_; }
  TrainFamily family() const { return family_; }

  // Prediction of the subset's model; reads only the coordinates in s.
  std::vector<double> predict(std::span<const double> x,
                              const FeatureSubset& s) const;

 private:
  int dim_ = 0;
  int out_dim_ = 1;
  TrainFamily family_ = TrainFamily::linear;
  std::vector<Entry> entries_;  // indexed by subset bitmask
};

SubsetModelTable fit_subset_model_table(const LabeledDataset& data,
                                        TrainFamily family);

// ---------------------------------------------------------------------------
// JSON serialization (versioned documents for CLI round-trips)
// ---------------------------------------------------------------------------

using AnyModel = std::variant<LinearModel, LogisticModel, DecisionTreeModel>;

std::string model_to_json(const AnyModel& model);
AnyModel model_from_json(const std::string& text);
void save_model(const std::string& path, const AnyModel& model);
AnyModel load_model(const std::string& path);

PredictionModel as_prediction_model(const AnyModel& model);

}  // namespace rex
