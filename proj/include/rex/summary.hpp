#pragma once

#include <vector>

#include "rex/core.hpp"

namespace rex {

// ---------------------------------------------------------------------------
// Kernels, regularizers, sampling plans
// ---------------------------------------------------------------------------

struct KernelWeights {
  enum class Kind { uniform, shapley, custom };

  Kind kind = Kind::uniform;
  std::vector<double> table;  // custom: weight per subset size, length d+1

  static KernelWeights uniform() { return {Kind::uniform, {}}; }
  static KernelWeights shapley() { return {Kind::shapley, {}}; }
  static KernelWeights custom(std::vector<double> by_size) {
    return {Kind::custom, std::move(by_size)};
  }

  // pi(|S|, d). The Shapley kernel is (d-1) / (C(d,k) k (d-k)) on interior
  // sizes; the empty and full sets are handled by constraints in the
  // kernel-regression solver, so their weight here is 0.
  double weight(int k, int d) const;
};

struct Regularizer {
  enum class Kind { none, l1 };

  Kind kind = Kind::none;
  double lambda = 0.0;

  static Regularizer none() { return {Kind::none, 0.0}; }
  static Regularizer l1(double lambda);
};

struct SamplingPlan {
  int n_samples = 1;
  std::uint64_t seed = 0;
  double inclusion_prob = 0.5;  // mean-when-included only
};

struct RegressionMode {
  bool full_enumeration = true;
  SamplingPlan plan;

  static RegressionMode full() { return {true, {}}; }
  static RegressionMode sampled(SamplingPlan p) { return {false, p}; }
};

struct MwiMode {
  bool exact = true;
  double p = 0.5;
  SamplingPlan plan;

  static MwiMode exactly(double p) { return {true, p, {}}; }
  static MwiMode sampled(SamplingPlan plan) {
    return {false, plan.inclusion_prob, plan};
  }
};

enum class Solver { exhaustive, greedy };

double binom(int n, int k);

// ---------------------------------------------------------------------------
// Feature attributions
// ---------------------------------------------------------------------------

// a_i = u(D) - u(D \ {i}); exactly d+1 distinct evaluations.
Explanation remove_individual(const SetFunction& u);

// a_i = u({i}) - u({}); exactly d+1 distinct evaluations.
Explanation include_individual(const SetFunction& u);

// Exact Shapley values by subset enumeration (d <= 25).
Explanation shapley_exact(const SetFunction& u, int threads = 1);

// Monte Carlo Shapley values from uniformly random permutations, with
// per-feature standard errors. Requires n_samples >= 2.
Explanation shapley_permutation_sample(const SetFunction& u,
                                       const SamplingPlan& plan,
                                       int threads = 1);

// Weighted least squares with the Shapley kernel, constrained to
// b0 = u({}) and b0 + sum b_i = u(D). FullEnumeration requires d <= 20 and
// reproduces shapley_exact.
Explanation shapley_kernel_regression(const SetFunction& u,
                                      const RegressionMode& mode,
                                      int threads = 1);

struct LimeFit {
  double intercept = 0.0;
  Explanation attribution;
};

// Unconstrained (regularized) weighted linear model over subsets.
LimeFit lime_linear(const SetFunction& u, const KernelWeights& weights,
                    const Regularizer& reg, const RegressionMode& mode,
                    int threads = 1);

// a_i = E[u(S) | i in S] under independent inclusion with probability p.
Explanation mean_when_included(const SetFunction& u, const MwiMode& mode,
                               int threads = 1);

// w_i = a_i / sum_j a_j; requires nonnegative scores with a nonzero sum.
std::vector<double> normalize_attributions(std::span<const double> scores);
Explanation normalize_attributions(const Explanation& attribution);

// ---------------------------------------------------------------------------
// Feature selections
// ---------------------------------------------------------------------------

// argmin_S u(D \ S) + lambda |S|
Explanation low_value_subset(const SetFunction& u, double lambda,
                             Solver solver, int threads = 1);

// Minimum-cardinality S with u(S) >= t. The greedy solver removes features
// from D one at a time, keeping u as high as possible, and stops before u
// would drop below t.
Explanation minimal_subset_threshold(const SetFunction& u, double t,
                                     Solver solver, int threads = 1);

// argmax_{|S| = k} u(S)
Explanation high_value_subset_constrained(const SetFunction& u, int k,
                                          Solver solver, int threads = 1);

// argmax_S u(S) - lambda |S|
Explanation high_value_subset_regularized(const SetFunction& u, double lambda,
                                          Solver solver, int threads = 1);

// argmax_S u(S) - lambda u(D \ S) - gamma |S|
Explanation partitioned_subsets(const SetFunction& u, double lambda,
                                double gamma, Solver solver, int threads = 1);

}  // namespace rex
