#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rex/core.hpp"
#include "rex/linalg.hpp"

namespace rex {

enum class ColumnKind { continuous, categorical };

// Row-major matrix; the only bulk container the library uses.
struct RowMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;

  RowMatrix() = default;
  RowMatrix(std::size_t n_, std::size_t d_) : n(n_), d(d_), data(n_ * d_) {}

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * d, d};
  }
  double& at(std::size_t i, std::size_t j) { return data[i * d + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * d + j]; }
};

struct DatasetSchema {
  struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
  };
  std::vector<Column> columns;
  std::optional<std::string> label;  // at most one label column

  static DatasetSchema from_json_file(const std::string& path);
  static DatasetSchema from_json_text(const std::string& text);
};

struct LabeledDataset {
  RowMatrix features;
  std::vector<std::string> feature_names;
  std::vector<ColumnKind> kinds;
  // Encoding dictionaries for categorical columns (empty for continuous).
  // Codes follow first-appearance order in the source file.
  std::vector<std::vector<std::string>> categories;

  std::vector<double> labels;
  std::string label_name;
  bool label_is_class = false;
  std::vector<std::string> label_categories;

  // Optional per-row label distribution (n x n_classes), for the
  // expected-loss-per-input behavior.
  std::optional<RowMatrix> label_dist;

  std::size_t n() const { return features.n; }
  int dim() const { return static_cast<int>(features.d); }
  int n_classes() const { return static_cast<int>(label_categories.size()); }
  bool has_labels() const { return !labels.empty(); }
};

// Empirical stand-in for the data distribution used by the marginalizing
// removal strategies.
struct BackgroundData {
  RowMatrix rows;
  std::vector<ColumnKind> kinds;

  static BackgroundData from_dataset(const LabeledDataset& ds);
  static BackgroundData from_rows(std::vector<std::vector<double>> rows,
                                  std::vector<ColumnKind> kinds = {});

  std::size_t n() const { return rows.n; }
  int dim() const { return static_cast<int>(rows.d); }
};

LabeledDataset load_csv(const std::string& path, const DatasetSchema& schema);
void save_csv(const std::string& path, const LabeledDataset& ds);

// ---------------------------------------------------------------------------
// Empirical marginals
// ---------------------------------------------------------------------------

struct FeatureMarginal {
  ColumnKind kind = ColumnKind::continuous;
  // Categorical: distinct values with exact frequencies.
  std::vector<double> values;
  std::vector<double> freqs;
  // Continuous: sorted samples, extremes, and quantile bin edges
  // (n_bins - 1 interior edges, type-7 linear-interpolation quantiles).
  std::vector<double> sorted;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> bin_edges;
};

std::vector<FeatureMarginal> empirical_marginals(const BackgroundData& bg,
                                                 int n_bins = 4);

// Type-7 quantile (linear interpolation between order statistics).
double quantile_type7(std::span<const double> sorted, double p);

// ---------------------------------------------------------------------------
// Synthetic Gaussian-linear data with analytic ground truth
// ---------------------------------------------------------------------------

struct SynthOracle {
  std::vector<double> mean;
  Mat cov;
  std::vector<double> beta;
  double noise_std = 0.0;

  // Exact conditional-expectation extension of the linear model:
  // F(x_S) = beta_S . x_S + beta_Sbar . E[X_Sbar | X_S = x_S].
  double extension_value(std::span<const double> x,
                         const FeatureSubset& s) const;

  // Shapley values of the dataset-MSE game under conditional removal with
  // independent features: phi_i = beta_i^2 * cov_ii. Requires diagonal cov.
  std::vector<double> dataset_loss_shapley() const;
};

struct SynthResult {
  LabeledDataset data;
  SynthOracle oracle;
};

SynthResult synth_gaussian_linear(const std::vector<double>& mean,
                                  const Mat& cov,
                                  const std::vector<double>& beta,
                                  double noise_std, std::size_t n,
                                  std::uint64_t seed);

}  // namespace rex
