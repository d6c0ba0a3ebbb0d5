#include "rex/summary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "rex/linalg.hpp"

namespace rex {

namespace {

constexpr int kMaxKernelDim = 20;

// Deterministic argbest tie-breaking: better objective first, then smaller
// cardinality, then ascending bitmask.
struct Candidate {
  double objective = 0.0;
  int size = 0;
  std::uint64_t bits = 0;

  bool operator<(const Candidate& o) const {
    if (objective != o.objective) return objective < o.objective;
    if (size != o.size) return size < o.size;
    return bits < o.bits;
  }
};

std::vector<double> dense_values(const SetFunction& u, int threads) {
  const auto subsets = enumerate_subsets(u.dim());
  u.prefetch(subsets, threads);
  std::vector<double> values(subsets.size());
  for (std::size_t i = 0; i < subsets.size(); ++i) values[i] = u(subsets[i]);
  return values;
}

double stderr_of(double sum, double sum_sq, double n) {
  if (n < 2.0) return 0.0;
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return std::sqrt(var / n);
}

// Fisher-Yates permutation of 0..d-1.
std::vector<int> random_permutation(int d, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = d - 1; i > 0; --i) {
    const auto j = rng.uniform_index(static_cast<std::size_t>(i) + 1);
    std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
  }
  return perm;
}

// Next mask with the same popcount (Gosper's hack); 0 when exhausted.
std::uint64_t next_same_size(std::uint64_t v, std::uint64_t limit) {
  const std::uint64_t c = v & (~v + 1);
  const std::uint64_t r = v + c;
  std::uint64_t next = (((r ^ v) >> 2) / c) | r;
  return next < limit ? next : 0;
}

}  // namespace

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double result = 1.0;
  for (int i = 1; i <= k; ++i) {
    result *= static_cast<double>(n - i + 1) / static_cast<double>(i);
  }
  return result;
}

double KernelWeights::weight(int k, int d) const {
  switch (kind) {
    case Kind::uniform:
      return 1.0;
    case Kind::shapley:
      if (k <= 0 || k >= d) return 0.0;
      return static_cast<double>(d - 1) /
             (binom(d, k) * static_cast<double>(k) *
              static_cast<double>(d - k));
    case Kind::custom:
      if (k < 0 || static_cast<std::size_t>(k) >= table.size()) {
        throw IndexOutOfRange("custom kernel table has no entry for |S| = " +
                              std::to_string(k));
      }
      return table[static_cast<std::size_t>(k)];
  }
  return 0.0;
}

Regularizer Regularizer::l1(double lambda) {
  if (lambda < 0.0) throw PreconditionViolation("l1 lambda must be >= 0");
  return {Kind::l1, lambda};
}

// ---------------------------------------------------------------------------
// Individual-feature attributions
// ---------------------------------------------------------------------------

Explanation remove_individual(const SetFunction& u) {
  const int d = u.dim();
  const std::size_t before = u.eval_count();
  const FeatureSubset all = FeatureSubset::full(d);
  const double base = u(all);
  std::vector<double> scores(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    scores[static_cast<std::size_t>(i)] = base - u(all.without(i));
  }
  return Explanation::attribution(std::move(scores), "remove-individual",
                                  u.eval_count() - before);
}

Explanation include_individual(const SetFunction& u) {
  const int d = u.dim();
  const std::size_t before = u.eval_count();
  const FeatureSubset none = FeatureSubset::empty(d);
  const double base = u(none);
  std::vector<double> scores(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    scores[static_cast<std::size_t>(i)] = u(none.with(i)) - base;
  }
  return Explanation::attribution(std::move(scores), "include-individual",
                                  u.eval_count() - before);
}

// ---------------------------------------------------------------------------
// Shapley values
// ---------------------------------------------------------------------------

Explanation shapley_exact(const SetFunction& u, int threads) {
  const int d = u.dim();
  if (d > kMaxEnumerationDim) {
    throw DimensionTooLarge("exact Shapley values are capped at d <= " +
                            std::to_string(kMaxEnumerationDim));
  }
  const std::size_t before = u.eval_count();
  const std::vector<double> values = dense_values(u, threads);

  // phi_i = sum over masks of the signed ordering weight:
  //   +w(|M|-1) u(M) when i in M, -w(|M|) u(M) otherwise,
  // with w(k) = k! (d-1-k)! / d! = 1 / (d C(d-1, k)).
  std::vector<double> w(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    w[static_cast<std::size_t>(k)] =
        1.0 / (static_cast<double>(d) * binom(d - 1, k));
  }
  std::vector<double> phi(static_cast<std::size_t>(d), 0.0);
  for (std::uint64_t mask = 0; mask < values.size(); ++mask) {
    const int size = std::popcount(mask);
    const double v = values[mask];
    for (int i = 0; i < d; ++i) {
      if ((mask >> i) & 1) {
        phi[static_cast<std::size_t>(i)] +=
            w[static_cast<std::size_t>(size - 1)] * v;
      } else {
        phi[static_cast<std::size_t>(i)] -=
            w[static_cast<std::size_t>(size)] * v;
      }
    }
  }
  return Explanation::attribution(std::move(phi), "shapley-exact",
                                  u.eval_count() - before);
}

Explanation shapley_permutation_sample(const SetFunction& u,
                                       const SamplingPlan& plan, int threads) {
  if (plan.n_samples < 2) {
    throw PreconditionViolation("permutation sampling requires n >= 2");
  }
  const int d = u.dim();
  const std::size_t before = u.eval_count();

  // Generate all permutations first so the evaluations can be prefetched;
  // the estimate is then independent of the thread count.
  std::vector<std::vector<int>> perms;
  perms.reserve(static_cast<std::size_t>(plan.n_samples));
  std::vector<FeatureSubset> needed;
  needed.push_back(FeatureSubset::empty(d));
  for (int k = 0; k < plan.n_samples; ++k) {
    Rng rng(mix_seed(plan.seed, static_cast<std::uint64_t>(k)));
    perms.push_back(random_permutation(d, rng));
    FeatureSubset s = FeatureSubset::empty(d);
    for (int i : perms.back()) {
      s = s.with(i);
      needed.push_back(s);
    }
  }
  u.prefetch(needed, threads);

  std::vector<double> sum(static_cast<std::size_t>(d), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(d), 0.0);
  const double base = u(FeatureSubset::empty(d));
  for (const auto& perm : perms) {
    FeatureSubset s = FeatureSubset::empty(d);
    double prev = base;
    for (int i : perm) {
      s = s.with(i);
      const double cur = u(s);
      const double contribution = cur - prev;
      sum[static_cast<std::size_t>(i)] += contribution;
      sum_sq[static_cast<std::size_t>(i)] += contribution * contribution;
      prev = cur;
    }
  }

  const double n = static_cast<double>(plan.n_samples);
  std::vector<double> phi(static_cast<std::size_t>(d));
  std::vector<double> se(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    phi[ii] = sum[ii] / n;
    se[ii] = stderr_of(sum[ii], sum_sq[ii], n);
  }
  return Explanation::attribution(std::move(phi), std::move(se),
                                  "shapley-permutation",
                                  u.eval_count() - before);
}

// ---------------------------------------------------------------------------
// Kernel regression
// ---------------------------------------------------------------------------

namespace {

// Weighted least squares for sum_S w_S (b0 + sum_{i in S} b_i - u(S))^2
// subject to b0 = u({}) and b0 + sum b_i = u(D). The last coefficient is
// eliminated through the efficiency constraint.
std::vector<double> solve_constrained_wls(
    int d, const std::map<std::uint64_t, double>& weights,
    const std::vector<double>& targets, double u_empty, double u_full) {
  const double delta = u_full - u_empty;
  if (d == 1) return {delta};

  const std::size_t p = static_cast<std::size_t>(d - 1);
  Mat gram(p, p);
  std::vector<double> rhs(p, 0.0);
  std::vector<double> z(p);
  std::size_t idx = 0;
  for (const auto& [bits, w] : weights) {
    const bool has_last = (bits >> (d - 1)) & 1;
    for (std::size_t i = 0; i < p; ++i) {
      z[i] = (((bits >> i) & 1) ? 1.0 : 0.0) - (has_last ? 1.0 : 0.0);
    }
    const double t = (targets[idx++] - u_empty) - (has_last ? delta : 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      if (z[i] == 0.0) continue;
      rhs[i] += w * z[i] * t;
      for (std::size_t j = i; j < p; ++j) gram(i, j) += w * z[i] * z[j];
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
  }
  auto solution = solve_spd(gram, rhs);
  if (!solution) {
    throw SingularSystem("kernel regression system is singular");
  }
  std::vector<double> phi(static_cast<std::size_t>(d));
  double tail = delta;
  for (std::size_t i = 0; i < p; ++i) {
    phi[i] = (*solution)[i];
    tail -= phi[i];
  }
  phi[p] = tail;
  return phi;
}

}  // namespace

Explanation shapley_kernel_regression(const SetFunction& u,
                                      const RegressionMode& mode,
                                      int threads) {
  const int d = u.dim();
  const std::size_t before = u.eval_count();
  const KernelWeights kernel = KernelWeights::shapley();

  std::map<std::uint64_t, double> weights;
  if (mode.full_enumeration) {
    if (d > kMaxKernelDim) {
      throw DimensionTooLarge("full kernel regression is capped at d <= " +
                              std::to_string(kMaxKernelDim));
    }
    const std::uint64_t full = (std::uint64_t{1} << d) - 1;
    for (std::uint64_t bits = 1; bits < full; ++bits) {
      weights.emplace(bits, kernel.weight(std::popcount(bits), d));
    }
  } else {
    if (mode.plan.n_samples < 1) {
      throw PreconditionViolation("sampled kernel regression needs n >= 1");
    }
    // Subsets drawn proportional to pi: size from the normalized kernel
    // mass per size, members uniformly within the size. Repeats accumulate
    // weight, guarding the normal equations against rank collapse.
    std::vector<double> size_cdf;
    double total = 0.0;
    for (int k = 1; k < d; ++k) {
      total += kernel.weight(k, d) * binom(d, k);
      size_cdf.push_back(total);
    }
    for (int s = 0; s < mode.plan.n_samples; ++s) {
      Rng rng(mix_seed(mode.plan.seed, static_cast<std::uint64_t>(s)));
      const double pick = rng.uniform01() * total;
      int size = 1;
      for (std::size_t k = 0; k < size_cdf.size(); ++k) {
        if (pick <= size_cdf[k]) {
          size = static_cast<int>(k) + 1;
          break;
        }
      }
      const auto perm = random_permutation(d, rng);
      std::uint64_t bits = 0;
      for (int i = 0; i < size; ++i) {
        bits |= std::uint64_t{1} << perm[static_cast<std::size_t>(i)];
      }
      weights[bits] += 1.0;
    }
    if (weights.size() < static_cast<std::size_t>(d)) {
      throw SingularSystem(
          "fewer distinct sampled subsets than features; increase n");
    }
  }

  std::vector<FeatureSubset> needed;
  needed.push_back(FeatureSubset::empty(d));
  needed.push_back(FeatureSubset::full(d));
  for (const auto& [bits, w] : weights) needed.emplace_back(bits, d);
  u.prefetch(needed, threads);

  std::vector<double> targets;
  targets.reserve(weights.size());
  for (const auto& [bits, w] : weights) targets.push_back(u({bits, d}));
  auto phi = solve_constrained_wls(d, weights, targets,
                                   u(FeatureSubset::empty(d)),
                                   u(FeatureSubset::full(d)));
  return Explanation::attribution(std::move(phi), "shapley-kernel-regression",
                                  u.eval_count() - before);
}

// ---------------------------------------------------------------------------
// LIME-style linear model
// ---------------------------------------------------------------------------

LimeFit lime_linear(const SetFunction& u, const KernelWeights& weights,
                    const Regularizer& reg, const RegressionMode& mode,
                    int threads) {
  const int d = u.dim();
  const std::size_t before = u.eval_count();

  std::map<std::uint64_t, double> subset_weights;
  if (mode.full_enumeration) {
    if (d > kMaxKernelDim) {
      throw DimensionTooLarge("full-enumeration linear models are capped at "
                              "d <= " + std::to_string(kMaxKernelDim));
    }
    const std::uint64_t total = std::uint64_t{1} << d;
    for (std::uint64_t bits = 0; bits < total; ++bits) {
      const double w = weights.weight(std::popcount(bits), d);
      if (w > 0.0) subset_weights.emplace(bits, w);
    }
  } else {
    if (mode.plan.n_samples < 1) {
      throw PreconditionViolation("sampled linear model needs n >= 1");
    }
    std::vector<double> size_cdf;
    double total = 0.0;
    for (int k = 0; k <= d; ++k) {
      total += weights.weight(k, d) * binom(d, k);
      size_cdf.push_back(total);
    }
    if (total <= 0.0) throw SingularSystem("kernel has no mass");
    for (int s = 0; s < mode.plan.n_samples; ++s) {
      Rng rng(mix_seed(mode.plan.seed, static_cast<std::uint64_t>(s)));
      const double pick = rng.uniform01() * total;
      int size = d;
      for (std::size_t k = 0; k < size_cdf.size(); ++k) {
        if (pick <= size_cdf[k]) {
          size = static_cast<int>(k);
          break;
        }
      }
      const auto perm = random_permutation(d, rng);
      std::uint64_t bits = 0;
      for (int i = 0; i < size; ++i) {
        bits |= std::uint64_t{1} << perm[static_cast<std::size_t>(i)];
      }
      subset_weights[bits] += 1.0;
    }
  }

  std::vector<FeatureSubset> needed;
  for (const auto& [bits, w] : subset_weights) needed.emplace_back(bits, d);
  u.prefetch(needed, threads);

  // Gram matrix over (1, 1{0 in S}, ..., 1{d-1 in S}).
  const std::size_t p = static_cast<std::size_t>(d) + 1;
  Mat gram(p, p);
  std::vector<double> rhs(p, 0.0);
  for (const auto& [bits, w] : subset_weights) {
    const double value = u({bits, d});
    std::vector<std::size_t> cols;
    cols.push_back(0);
    for (int i = 0; i < d; ++i) {
      if ((bits >> i) & 1) cols.push_back(static_cast<std::size_t>(i) + 1);
    }
    for (std::size_t a : cols) {
      rhs[a] += w * value;
      for (std::size_t b : cols) {
        if (b >= a) gram(a, b) += w;
      }
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
  }

  std::vector<double> coef(p, 0.0);
  if (reg.kind == Regularizer::Kind::none) {
    auto solution = solve_spd(gram, rhs);
    if (!solution) throw SingularSystem("linear model system is singular");
    coef = *solution;
  } else {
    // Cyclic coordinate descent with soft thresholding; the intercept is
    // not penalized. Converges when no coefficient moves more than 1e-12.
    const double lambda = reg.lambda;
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double max_change = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        if (gram(j, j) == 0.0) continue;
        double partial = rhs[j];
        for (std::size_t k = 0; k < p; ++k) {
          if (k != j) partial -= gram(j, k) * coef[k];
        }
        double updated;
        if (j == 0) {
          updated = partial / gram(0, 0);
        } else {
          const double threshold = lambda / 2.0;
          if (partial > threshold) {
            updated = (partial - threshold) / gram(j, j);
          } else if (partial < -threshold) {
            updated = (partial + threshold) / gram(j, j);
          } else {
            updated = 0.0;
          }
        }
        max_change = std::max(max_change, std::abs(updated - coef[j]));
        coef[j] = updated;
      }
      if (max_change < 1e-12) break;
    }
  }

  LimeFit fit;
  fit.intercept = coef[0];
  std::vector<double> scores(coef.begin() + 1, coef.end());
  fit.attribution = Explanation::attribution(std::move(scores), "lime-linear",
                                             u.eval_count() - before);
  return fit;
}

// ---------------------------------------------------------------------------
// Mean when included
// ---------------------------------------------------------------------------

Explanation mean_when_included(const SetFunction& u, const MwiMode& mode,
                               int threads) {
  const int d = u.dim();
  const std::size_t before = u.eval_count();

  if (mode.exact) {
    if (d > kMaxEnumerationDim) {
      throw DimensionTooLarge("exact mean-when-included is capped at d <= " +
                              std::to_string(kMaxEnumerationDim));
    }
    if (!(mode.p > 0.0 && mode.p < 1.0)) {
      throw PreconditionViolation("inclusion probability must lie in (0, 1)");
    }
    const std::vector<double> values = dense_values(u, threads);
    // P(S | i in S) = p^{|S|-1} (1-p)^{d-|S|} under independent inclusion.
    std::vector<double> size_weight(static_cast<std::size_t>(d) + 1, 0.0);
    for (int k = 1; k <= d; ++k) {
      size_weight[static_cast<std::size_t>(k)] =
          std::pow(mode.p, k - 1) * std::pow(1.0 - mode.p, d - k);
    }
    std::vector<double> scores(static_cast<std::size_t>(d), 0.0);
    for (std::uint64_t mask = 1; mask < values.size(); ++mask) {
      const double wv =
          size_weight[static_cast<std::size_t>(std::popcount(mask))] *
          values[mask];
      for (int i = 0; i < d; ++i) {
        if ((mask >> i) & 1) scores[static_cast<std::size_t>(i)] += wv;
      }
    }
    return Explanation::attribution(std::move(scores), "mean-when-included",
                                    u.eval_count() - before);
  }

  const double p = mode.plan.inclusion_prob;
  if (!(p > 0.0 && p < 1.0)) {
    throw PreconditionViolation("inclusion probability must lie in (0, 1)");
  }
  if (mode.plan.n_samples < 1) {
    throw PreconditionViolation("sampled mean-when-included needs n >= 1");
  }
  std::vector<FeatureSubset> masks;
  masks.reserve(static_cast<std::size_t>(mode.plan.n_samples));
  for (int k = 0; k < mode.plan.n_samples; ++k) {
    Rng rng(mix_seed(mode.plan.seed, static_cast<std::uint64_t>(k)));
    std::uint64_t bits = 0;
    for (int i = 0; i < d; ++i) {
      if (rng.uniform01() < p) bits |= std::uint64_t{1} << i;
    }
    masks.emplace_back(bits, d);
  }
  u.prefetch(masks, threads);

  std::vector<double> sum(static_cast<std::size_t>(d), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(d), 0.0);
  std::vector<double> count(static_cast<std::size_t>(d), 0.0);
  for (const auto& mask : masks) {
    const double v = u(mask);
    for (int i : mask.members()) {
      const auto ii = static_cast<std::size_t>(i);
      sum[ii] += v;
      sum_sq[ii] += v * v;
      count[ii] += 1.0;
    }
  }
  std::vector<double> scores(static_cast<std::size_t>(d));
  std::vector<double> se(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    if (count[ii] < 2.0) {
      throw PreconditionViolation(
          "feature " + std::to_string(i) +
          " was sampled fewer than twice; increase n_samples");
    }
    scores[ii] = sum[ii] / count[ii];
    se[ii] = stderr_of(sum[ii], sum_sq[ii], count[ii]);
  }
  return Explanation::attribution(std::move(scores), std::move(se),
                                  "mean-when-included",
                                  u.eval_count() - before);
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

std::vector<double> normalize_attributions(std::span<const double> scores) {
  double total = 0.0;
  for (double a : scores) {
    if (a < 0.0) {
      throw NegativeEntry("normalization requires nonnegative attributions");
    }
    total += a;
  }
  if (total == 0.0) throw ZeroSum("attributions sum to zero");
  std::vector<double> out(scores.begin(), scores.end());
  for (double& a : out) a /= total;
  return out;
}

Explanation normalize_attributions(const Explanation& attribution) {
  if (attribution.kind != ExplanationKind::attribution) {
    throw PreconditionViolation("can only normalize attribution explanations");
  }
  Explanation out = attribution;
  out.scores = normalize_attributions(std::span<const double>(out.scores));
  out.stderrs.reset();
  return out;
}

// ---------------------------------------------------------------------------
// Selection optimizers
// ---------------------------------------------------------------------------

namespace {

void require_exhaustive_dim(int d) {
  if (d > kMaxEnumerationDim) {
    throw DimensionTooLarge("exhaustive optimization is capped at d <= " +
                            std::to_string(kMaxEnumerationDim));
  }
}

// Minimizes `objective` over all subsets with deterministic tie-breaking.
template <typename Objective>
FeatureSubset exhaustive_argmin(const SetFunction& u, int threads,
                                Objective objective) {
  require_exhaustive_dim(u.dim());
  const auto subsets = enumerate_subsets(u.dim());
  u.prefetch(subsets, threads);
  Candidate best{std::numeric_limits<double>::infinity(), 0, 0};
  for (const auto& s : subsets) {
    const Candidate c{objective(s), s.count(), s.bits()};
    if (c < best) best = c;
  }
  return {best.bits, u.dim()};
}

// Greedy local add: starts from the empty set and accepts the single
// feature whose addition most decreases `objective`, stopping when no
// addition strictly decreases it.
template <typename Objective>
FeatureSubset greedy_argmin(const SetFunction& u, Objective objective) {
  const int d = u.dim();
  FeatureSubset s = FeatureSubset::empty(d);
  double current = objective(s);
  while (s.count() < d) {
    int best_feature = -1;
    double best_value = current;
    for (int i = 0; i < d; ++i) {
      if (s.contains(i)) continue;
      const double candidate = objective(s.with(i));
      if (candidate < best_value) {
        best_value = candidate;
        best_feature = i;
      }
    }
    if (best_feature < 0) break;
    s = s.with(best_feature);
    current = best_value;
  }
  return s;
}

}  // namespace

Explanation low_value_subset(const SetFunction& u, double lambda,
                             Solver solver, int threads) {
  if (lambda < 0.0) throw PreconditionViolation("lambda must be >= 0");
  const std::size_t before = u.eval_count();
  const auto objective = [&](const FeatureSubset& s) {
    return u(s.complement()) + lambda * s.count();
  };
  const FeatureSubset s = solver == Solver::exhaustive
                              ? exhaustive_argmin(u, threads, objective)
                              : greedy_argmin(u, objective);
  return Explanation::selection(s, "low-value-subset",
                                u.eval_count() - before);
}

Explanation minimal_subset_threshold(const SetFunction& u, double t,
                                     Solver solver, int threads) {
  const int d = u.dim();
  const std::size_t before = u.eval_count();
  if (u(FeatureSubset::full(d)) < t) {
    throw Infeasible("u(D) is below the requested threshold");
  }
  if (solver == Solver::exhaustive) {
    require_exhaustive_dim(d);
    const auto subsets = enumerate_subsets(d);
    u.prefetch(subsets, threads);
    Candidate best{0.0, d + 1, 0};
    for (const auto& s : subsets) {
      if (u(s) < t) continue;
      const Candidate c{0.0, s.count(), s.bits()};
      if (c < best) best = c;
    }
    return Explanation::selection({best.bits, d}, "minimal-subset-threshold",
                                  u.eval_count() - before);
  }
  // Greedy removal: drop, one at a time, the feature whose removal keeps u
  // highest; stop before u would fall below t.
  FeatureSubset s = FeatureSubset::full(d);
  while (!s.is_empty()) {
    int best_feature = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) {
      if (!s.contains(i)) continue;
      const double candidate = u(s.without(i));
      if (candidate > best_value) {
        best_value = candidate;
        best_feature = i;
      }
    }
    if (best_feature < 0 || best_value < t) break;
    s = s.without(best_feature);
  }
  return Explanation::selection(s, "minimal-subset-threshold",
                                u.eval_count() - before);
}

Explanation high_value_subset_constrained(const SetFunction& u, int k,
                                          Solver solver, int threads) {
  const int d = u.dim();
  if (k < 0 || k > d) {
    throw InvalidK("subset size must satisfy 0 <= k <= d");
  }
  const std::size_t before = u.eval_count();
  if (solver == Solver::exhaustive) {
    if (binom(d, k) > 2e6) {
      throw DimensionTooLarge("C(d, k) exceeds the exhaustive cap");
    }
    std::vector<FeatureSubset> candidates;
    const std::uint64_t limit = std::uint64_t{1} << d;
    if (k == 0) {
      candidates.push_back(FeatureSubset::empty(d));
    } else {
      std::uint64_t bits = (std::uint64_t{1} << k) - 1;
      while (bits != 0) {
        candidates.emplace_back(bits, d);
        bits = next_same_size(bits, limit);
      }
    }
    u.prefetch(candidates, threads);
    Candidate best{std::numeric_limits<double>::infinity(), 0, 0};
    for (const auto& s : candidates) {
      const Candidate c{-u(s), s.count(), s.bits()};
      if (c < best) best = c;
    }
    return Explanation::selection({best.bits, d},
                                  "high-value-subset-constrained",
                                  u.eval_count() - before);
  }
  // Greedy: add the best single feature k times.
  FeatureSubset s = FeatureSubset::empty(d);
  for (int step = 0; step < k; ++step) {
    int best_feature = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) {
      if (s.contains(i)) continue;
      const double candidate = u(s.with(i));
      if (candidate > best_value) {
        best_value = candidate;
        best_feature = i;
      }
    }
    s = s.with(best_feature);
  }
  return Explanation::selection(s, "high-value-subset-constrained",
                                u.eval_count() - before);
}

Explanation high_value_subset_regularized(const SetFunction& u, double lambda,
                                          Solver solver, int threads) {
  if (lambda < 0.0) throw PreconditionViolation("lambda must be >= 0");
  const std::size_t before = u.eval_count();
  const auto objective = [&](const FeatureSubset& s) {
    return -(u(s) - lambda * s.count());
  };
  const FeatureSubset s = solver == Solver::exhaustive
                              ? exhaustive_argmin(u, threads, objective)
                              : greedy_argmin(u, objective);
  return Explanation::selection(s, "high-value-subset-regularized",
                                u.eval_count() - before);
}

Explanation partitioned_subsets(const SetFunction& u, double lambda,
                                double gamma, Solver solver, int threads) {
  if (lambda < 0.0 || gamma < 0.0) {
    throw PreconditionViolation("lambda and gamma must be >= 0");
  }
  const std::size_t before = u.eval_count();
  const auto objective = [&](const FeatureSubset& s) {
    return -(u(s) - lambda * u(s.complement()) - gamma * s.count());
  };
  const FeatureSubset s = solver == Solver::exhaustive
                              ? exhaustive_argmin(u, threads, objective)
                              : greedy_argmin(u, objective);
  return Explanation::selection(s, "partitioned-subsets",
                                u.eval_count() - before);
}

}  // namespace rex
