#pragma once

#include <vector>

#include "rex/core.hpp"
#include "rex/data.hpp"
#include "rex/linalg.hpp"
#include "rex/models.hpp"

namespace rex {

// ---------------------------------------------------------------------------
// Distributional inputs
// ---------------------------------------------------------------------------

struct FeatureBounds {
  std::vector<double> lo;
  std::vector<double> hi;

  static FeatureBounds from_background(const BackgroundData& bg);
  void validate() const;  // DegenerateBounds unless lo_i <= hi_i
};

// Gaussian data model for conditional marginalization.
struct GaussianSpec {
  std::vector<double> mean;
  Mat cov;

  GaussianSpec() = default;
  GaussianSpec(std::vector<double> mean, Mat cov);  // validates SPD, symmetry

  static GaussianSpec from_background(const BackgroundData& bg);
  int dim() const { return static_cast<int>(mean.size()); }
};

// Per-feature replacement samplers q_{x_i}(X_i): categorical features draw
// from the empirical distribution restricted to values != x_i; continuous
// features draw a quantile bin != bin(x_i) uniformly, then a truncated
// normal within that bin.
class ReplacementDistributionSet {
 public:
  static ReplacementDistributionSet from_background(const BackgroundData& bg,
                                                    int n_bins = 4);

  int dim() const { return static_cast<int>(features_.size()); }
  double sample(int feature, double original, Rng& rng) const;

 private:
  struct Bin {
    double lo = 0.0;
    double hi = 0.0;
    double mean = 0.0;
    double std = 0.0;
  };
  struct Feature {
    ColumnKind kind = ColumnKind::continuous;
    std::vector<double> values;  // categorical
    std::vector<double> freqs;
    std::vector<Bin> bins;  // continuous
  };
  int bin_of(const Feature& f, double x) const;
  std::vector<Feature> features_;
};

// ---------------------------------------------------------------------------
// Sampling modes
// ---------------------------------------------------------------------------

struct SampleMode {
  bool exact = true;
  int n_samples = 0;

  static SampleMode exactly() { return {true, 0}; }
  static SampleMode sampled(int n) { return {false, n}; }
};

struct ConditionalMode {
  bool mean_plugin = true;
  int n_samples = 0;

  static ConditionalMode plugin() { return {true, 0}; }
  static ConditionalMode sampled(int n) { return {false, n}; }
};

// Exact product-of-marginals enumeration cap.
inline constexpr double kMaxProductTerms = 1e7;

// ---------------------------------------------------------------------------
// Removal strategies
//
// Every strategy short-circuits S = D to the underlying model, so extensions
// agree with it bit-exactly. All strategies except the replacement
// distribution are invariant to held-out coordinates.
// ---------------------------------------------------------------------------

SubsetFunction fixed_baseline_removal(const PredictionModel& f,
                                      std::vector<double> baseline);

SubsetFunction marginal_removal(const PredictionModel& f,
                                const BackgroundData& bg,
                                SampleMode mode = SampleMode::exactly());

SubsetFunction product_of_marginals_removal(
    const PredictionModel& f, const BackgroundData& bg,
    SampleMode mode = SampleMode::exactly());

SubsetFunction uniform_removal(const PredictionModel& f,
                               const FeatureBounds& bounds, int n_samples);

SubsetFunction replacement_distribution_removal(
    const PredictionModel& f, const ReplacementDistributionSet& q,
    int n_samples);

SubsetFunction conditional_gaussian_removal(
    const PredictionModel& f, const GaussianSpec& g,
    ConditionalMode mode = ConditionalMode::plugin());

// Empirical conditional over exact matches: every feature in S must be
// categorical; averages the model over background rows whose S-columns
// equal x_S.
SubsetFunction conditional_empirical_removal(const PredictionModel& f,
                                             const BackgroundData& bg);

SubsetFunction tree_distribution_removal(const DecisionTreeModel& tree);

SubsetFunction separate_models_removal(const SubsetModelTable& table);

}  // namespace rex
