#include "rex/removal.hpp"

#include <algorithm>
#include <cmath>

namespace rex {

namespace {

// Wraps a strategy body with the S = D short-circuit that makes every
// strategy an exact extension.
SubsetFunction make_extension(const PredictionModel& f, bool invariant,
                              SubsetFunction::Fn body) {
  PredictionModel model = f;
  auto fn = [model, body = std::move(body)](
                std::span<const double> x, const FeatureSubset& s,
                std::uint64_t seed) -> std::vector<double> {
    if (s.is_full()) return model(x);
    return body(x, s, seed);
  };
  return {f.dim(), f.out_dim(), invariant, f, std::move(fn)};
}

// Running mean with the exactness property that averaging identical values
// returns them bit-exactly (the increment is exactly zero), which keeps
// strategies independent of sampled coordinates the model ignores.
struct RunningMean {
  std::vector<double> mean;
  double count = 0.0;

  explicit RunningMean(std::size_t n) : mean(n, 0.0) {}

  void add(const std::vector<double>& v) {
    count += 1.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      mean[i] += (v[i] - mean[i]) / count;
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// FeatureBounds / GaussianSpec / ReplacementDistributionSet
// ---------------------------------------------------------------------------

FeatureBounds FeatureBounds::from_background(const BackgroundData& bg) {
  if (bg.n() == 0) throw EmptyBackground("bounds from empty background");
  FeatureBounds b;
  b.lo.assign(bg.rows.d, 0.0);
  b.hi.assign(bg.rows.d, 0.0);
  for (std::size_t j = 0; j < bg.rows.d; ++j) {
    double lo = bg.rows.at(0, j), hi = bg.rows.at(0, j);
    for (std::size_t i = 1; i < bg.n(); ++i) {
      lo = std::min(lo, bg.rows.at(i, j));
      hi = std::max(hi, bg.rows.at(i, j));
    }
    b.lo[j] = lo;
    b.hi[j] = hi;
  }
  return b;
}

void FeatureBounds::validate() const {
  if (lo.size() != hi.size()) {
    throw DimensionMismatch("bounds lo/hi length mismatch");
  }
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i]) {
      throw DegenerateBounds("lo > hi for feature " + std::to_string(i));
    }
  }
}

GaussianSpec::GaussianSpec(std::vector<double> mean_, Mat cov_)
    : mean(std::move(mean_)), cov(std::move(cov_)) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw DimensionMismatch("covariance shape does not match mean");
  }
  if (!is_symmetric(cov, 1e-12)) {
    throw NotPositiveDefinite("covariance is not symmetric");
  }
  if (!cholesky(cov)) {
    throw NotPositiveDefinite("covariance is not positive definite");
  }
}

GaussianSpec GaussianSpec::from_background(const BackgroundData& bg) {
  if (bg.n() < 2) throw EmptyBackground("moments require n >= 2 rows");
  const std::size_t d = bg.rows.d;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < bg.n(); ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += bg.rows.at(i, j);
  }
  for (double& m : mean) m /= static_cast<double>(bg.n());
  Mat cov(d, d);
  for (std::size_t i = 0; i < bg.n(); ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = bg.rows.at(i, a) - mean[a];
      for (std::size_t b = a; b < d; ++b) {
        cov(a, b) += da * (bg.rows.at(i, b) - mean[b]);
      }
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= static_cast<double>(bg.n() - 1);
      cov(b, a) = cov(a, b);
    }
    // Tiny jitter keeps empirical covariances factorizable.
    cov(a, a) += 1e-12;
  }
  return {std::move(mean), std::move(cov)};
}

ReplacementDistributionSet ReplacementDistributionSet::from_background(
    const BackgroundData& bg, int n_bins) {
  if (bg.n() == 0) throw EmptyBackground("replacement set from empty data");
  const auto marginals = empirical_marginals(bg, n_bins);
  ReplacementDistributionSet set;
  set.features_.resize(marginals.size());
  for (std::size_t j = 0; j < marginals.size(); ++j) {
    const FeatureMarginal& m = marginals[j];
    Feature& f = set.features_[j];
    f.kind = m.kind;
    if (m.kind == ColumnKind::categorical) {
      if (m.values.size() < 2) {
        throw DegenerateColumn("categorical column " + std::to_string(j) +
                               " has a single distinct value");
      }
      f.values = m.values;
      f.freqs = m.freqs;
      continue;
    }
    std::vector<double> edges;
    edges.push_back(m.lo);
    edges.insert(edges.end(), m.bin_edges.begin(), m.bin_edges.end());
    edges.push_back(m.hi);
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      Bin bin;
      bin.lo = edges[b];
      bin.hi = edges[b + 1];
      double sum = 0.0, sum2 = 0.0;
      std::size_t count = 0;
      for (double v : m.sorted) {
        const bool in_bin = b + 2 == edges.size() ? (v >= bin.lo && v <= bin.hi)
                                                  : (v >= bin.lo && v < bin.hi);
        if (in_bin) {
          sum += v;
          sum2 += v * v;
          ++count;
        }
      }
      if (count > 0) {
        bin.mean = sum / static_cast<double>(count);
        const double var =
            std::max(0.0, sum2 / static_cast<double>(count) -
                              bin.mean * bin.mean);
        bin.std = std::sqrt(var);
      } else {
        bin.mean = 0.5 * (bin.lo + bin.hi);
        bin.std = 0.0;
      }
      f.bins.push_back(bin);
    }
  }
  return set;
}

int ReplacementDistributionSet::bin_of(const Feature& f, double x) const {
  for (std::size_t b = 0; b + 1 < f.bins.size(); ++b) {
    if (x < f.bins[b].hi) return static_cast<int>(b);
  }
  return static_cast<int>(f.bins.size()) - 1;
}

double ReplacementDistributionSet::sample(int feature, double original,
                                          Rng& rng) const {
  const Feature& f = features_[static_cast<std::size_t>(feature)];
  if (f.kind == ColumnKind::categorical) {
    // Empirical distribution restricted to values != original.
    double total = 0.0;
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      if (f.values[k] != original) total += f.freqs[k];
    }
    if (total <= 0.0) {
      // All mass sits on the original value; with >= 2 distinct values this
      // cannot happen, and construction rejects degenerate columns.
      throw DegenerateColumn("no alternative categorical value to draw");
    }
    double u = rng.uniform01() * total;
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      if (f.values[k] == original) continue;
      u -= f.freqs[k];
      if (u <= 0.0) return f.values[k];
    }
    for (std::size_t k = f.values.size(); k-- > 0;) {
      if (f.values[k] != original) return f.values[k];
    }
    throw DegenerateColumn("no alternative categorical value to draw");
  }

  const int original_bin = bin_of(f, original);
  const int n_bins = static_cast<int>(f.bins.size());
  if (n_bins <= 1) {
    const Bin& only = f.bins[0];
    return std::clamp(only.mean, only.lo, only.hi);
  }
  int pick = static_cast<int>(rng.uniform_index(
      static_cast<std::size_t>(n_bins - 1)));
  if (pick >= original_bin) ++pick;
  const Bin& bin = f.bins[static_cast<std::size_t>(pick)];
  if (bin.std <= 0.0 || bin.hi <= bin.lo) {
    return std::clamp(bin.mean, bin.lo, bin.hi);
  }
  // Truncated normal by rejection; the bin mean lies inside the bin, so this
  // terminates fast. Bounded retries keep evaluation total.
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double v = bin.mean + bin.std * rng.normal();
    if (v >= bin.lo && v <= bin.hi) return v;
  }
  return std::clamp(bin.mean, bin.lo, bin.hi);
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

SubsetFunction fixed_baseline_removal(const PredictionModel& f,
                                      std::vector<double> baseline) {
  if (static_cast<int>(baseline.size()) != f.dim()) {
    throw DimensionMismatch("baseline length must equal model dimension");
  }
  for (double v : baseline) {
    if (!std::isfinite(v)) {
      throw DimensionMismatch("baseline must be finite");
    }
  }
  PredictionModel model = f;
  return make_extension(
      f, true,
      [model, baseline = std::move(baseline)](
          std::span<const double> x, const FeatureSubset& s,
          std::uint64_t) -> std::vector<double> {
        std::vector<double> probe(baseline);
        for (int i : s.members()) {
          probe[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
        }
        return model(probe);
      });
}

SubsetFunction marginal_removal(const PredictionModel& f,
                                const BackgroundData& bg, SampleMode mode) {
  if (bg.dim() != f.dim()) {
    throw DimensionMismatch("background dimension must match model");
  }
  if (bg.n() == 0) throw EmptyBackground("marginal removal needs rows");
  PredictionModel model = f;
  auto rows = std::make_shared<RowMatrix>(bg.rows);
  return make_extension(
      f, true,
      [model, rows, mode](std::span<const double> x, const FeatureSubset& s,
                          std::uint64_t seed) -> std::vector<double> {
        std::vector<double> probe(x.begin(), x.end());
        RunningMean acc(static_cast<std::size_t>(model.out_dim()));
        const auto held_out = s.complement().members();
        if (mode.exact) {
          for (std::size_t r = 0; r < rows->n; ++r) {
            for (int j : held_out) {
              probe[static_cast<std::size_t>(j)] =
                  rows->at(r, static_cast<std::size_t>(j));
            }
            acc.add(model(probe));
          }
          return acc.mean;
        }
        for (int k = 0; k < mode.n_samples; ++k) {
          Rng rng(sample_seed(seed, s.bits(), static_cast<std::uint64_t>(k)));
          const std::size_t r = rng.uniform_index(rows->n);
          for (int j : held_out) {
            probe[static_cast<std::size_t>(j)] =
                rows->at(r, static_cast<std::size_t>(j));
          }
          acc.add(model(probe));
        }
        return acc.mean;
      });
}

SubsetFunction product_of_marginals_removal(const PredictionModel& f,
                                            const BackgroundData& bg,
                                            SampleMode mode) {
  if (bg.dim() != f.dim()) {
    throw DimensionMismatch("background dimension must match model");
  }
  if (bg.n() == 0) throw EmptyBackground("product removal needs rows");
  PredictionModel model = f;
  auto rows = std::make_shared<RowMatrix>(bg.rows);
  return make_extension(
      f, true,
      [model, rows, mode](std::span<const double> x, const FeatureSubset& s,
                          std::uint64_t seed) -> std::vector<double> {
        std::vector<double> probe(x.begin(), x.end());
        RunningMean acc(static_cast<std::size_t>(model.out_dim()));
        const auto held_out = s.complement().members();
        const std::size_t n = rows->n;
        if (mode.exact) {
          const double terms =
              std::pow(static_cast<double>(n),
                       static_cast<double>(held_out.size()));
          if (terms > kMaxProductTerms) {
            throw ProductTooLarge(
                "exact product-of-marginals exceeds the enumeration cap; "
                "use the sampled mode");
          }
          // Mixed-radix walk over the Cartesian product of column values.
          std::vector<std::size_t> digit(held_out.size(), 0);
          const std::size_t total = static_cast<std::size_t>(terms);
          for (std::size_t t = 0; t < total; ++t) {
            for (std::size_t j = 0; j < held_out.size(); ++j) {
              probe[static_cast<std::size_t>(held_out[j])] =
                  rows->at(digit[j], static_cast<std::size_t>(held_out[j]));
            }
            acc.add(model(probe));
            for (std::size_t j = 0; j < held_out.size(); ++j) {
              if (++digit[j] < n) break;
              digit[j] = 0;
            }
          }
          return acc.mean;
        }
        for (int k = 0; k < mode.n_samples; ++k) {
          Rng rng(sample_seed(seed, s.bits(), static_cast<std::uint64_t>(k)));
          for (int j : held_out) {
            probe[static_cast<std::size_t>(j)] =
                rows->at(rng.uniform_index(n), static_cast<std::size_t>(j));
          }
          acc.add(model(probe));
        }
        return acc.mean;
      });
}

SubsetFunction uniform_removal(const PredictionModel& f,
                               const FeatureBounds& bounds, int n_samples) {
  bounds.validate();
  if (static_cast<int>(bounds.lo.size()) != f.dim()) {
    throw DimensionMismatch("bounds length must equal model dimension");
  }
  if (n_samples < 1) throw PreconditionViolation("n_samples must be >= 1");
  PredictionModel model = f;
  return make_extension(
      f, true,
      [model, bounds, n_samples](std::span<const double> x,
                                 const FeatureSubset& s,
                                 std::uint64_t seed) -> std::vector<double> {
        std::vector<double> probe(x.begin(), x.end());
        RunningMean acc(static_cast<std::size_t>(model.out_dim()));
        const auto held_out = s.complement().members();
        for (int k = 0; k < n_samples; ++k) {
          Rng rng(sample_seed(seed, s.bits(), static_cast<std::uint64_t>(k)));
          for (int j : held_out) {
            const std::size_t jj = static_cast<std::size_t>(j);
            probe[jj] = rng.uniform(bounds.lo[jj], bounds.hi[jj]);
          }
          acc.add(model(probe));
        }
        return acc.mean;
      });
}

SubsetFunction replacement_distribution_removal(
    const PredictionModel& f, const ReplacementDistributionSet& q,
    int n_samples) {
  if (q.dim() != f.dim()) {
    throw DimensionMismatch("replacement set dimension must match model");
  }
  if (n_samples < 1) throw PreconditionViolation("n_samples must be >= 1");
  PredictionModel model = f;
  auto samplers = std::make_shared<ReplacementDistributionSet>(q);
  auto fn = [model, samplers, n_samples](
                std::span<const double> x, const FeatureSubset& s,
                std::uint64_t seed) -> std::vector<double> {
    std::vector<double> probe(x.begin(), x.end());
    RunningMean acc(static_cast<std::size_t>(model.out_dim()));
    const auto held_out = s.complement().members();
    for (int k = 0; k < n_samples; ++k) {
      Rng rng(sample_seed(seed, s.bits(), static_cast<std::uint64_t>(k)));
      for (int j : held_out) {
        probe[static_cast<std::size_t>(j)] =
            samplers->sample(j, x[static_cast<std::size_t>(j)], rng);
      }
      acc.add(model(probe));
    }
    return acc.mean;
  };
  // The draws depend on the held-out original values, so this strategy
  // agrees with f at S = D but is not invariant (not a subset function).
  PredictionModel model_copy = f;
  auto wrapped = [model_copy, fn = std::move(fn)](
                     std::span<const double> x, const FeatureSubset& s,
                     std::uint64_t seed) -> std::vector<double> {
    if (s.is_full()) return model_copy(x);
    return fn(x, s, seed);
  };
  return {f.dim(), f.out_dim(), false, f, std::move(wrapped)};
}

SubsetFunction conditional_gaussian_removal(const PredictionModel& f,
                                            const GaussianSpec& g,
                                            ConditionalMode mode) {
  if (g.dim() != f.dim()) {
    throw DimensionMismatch("Gaussian spec dimension must match model");
  }
  PredictionModel model = f;
  auto spec = std::make_shared<GaussianSpec>(g);
  return make_extension(
      f, true,
      [model, spec, mode](std::span<const double> x, const FeatureSubset& s,
                          std::uint64_t seed) -> std::vector<double> {
        const auto observed = s.members();
        if (mode.mean_plugin) {
          const std::vector<double> filled =
              gaussian_conditional_fill(spec->mean, spec->cov, x, observed);
          return model(filled);
        }
        Mat cond_cov;
        const std::vector<double> center = gaussian_conditional_fill(
            spec->mean, spec->cov, x, observed, &cond_cov);
        auto l = cholesky(cond_cov);
        if (!l) {
          // The conditional covariance can be singular when features are
          // perfectly correlated; fall back to its diagonal.
          Mat diag(cond_cov.rows(), cond_cov.cols());
          for (std::size_t i = 0; i < cond_cov.rows(); ++i) {
            diag(i, i) = std::sqrt(std::max(cond_cov(i, i), 0.0));
          }
          l = diag;
        }
        const auto hidden = s.complement().members();
        std::vector<double> probe(center);
        RunningMean acc(static_cast<std::size_t>(model.out_dim()));
        std::vector<double> z(hidden.size());
        for (int k = 0; k < mode.n_samples; ++k) {
          Rng rng(sample_seed(seed, s.bits(), static_cast<std::uint64_t>(k)));
          for (double& v : z) v = rng.normal();
          for (std::size_t i = 0; i < hidden.size(); ++i) {
            double v = center[static_cast<std::size_t>(hidden[i])];
            for (std::size_t j = 0; j <= i; ++j) v += (*l)(i, j) * z[j];
            probe[static_cast<std::size_t>(hidden[i])] = v;
          }
          acc.add(model(probe));
        }
        return acc.mean;
      });
}

SubsetFunction conditional_empirical_removal(const PredictionModel& f,
                                             const BackgroundData& bg) {
  if (bg.dim() != f.dim()) {
    throw DimensionMismatch("background dimension must match model");
  }
  if (bg.n() == 0) throw EmptyBackground("conditional removal needs rows");
  PredictionModel model = f;
  auto rows = std::make_shared<RowMatrix>(bg.rows);
  auto kinds = std::make_shared<std::vector<ColumnKind>>(bg.kinds);
  return make_extension(
      f, true,
      [model, rows, kinds](std::span<const double> x, const FeatureSubset& s,
                           std::uint64_t) -> std::vector<double> {
        const auto observed = s.members();
        for (int j : observed) {
          if ((*kinds)[static_cast<std::size_t>(j)] !=
              ColumnKind::categorical) {
            throw PreconditionViolation(
                "empirical conditioning matches on categorical columns only");
          }
        }
        std::vector<double> probe(x.begin(), x.end());
        RunningMean acc(static_cast<std::size_t>(model.out_dim()));
        const auto held_out = s.complement().members();
        for (std::size_t r = 0; r < rows->n; ++r) {
          bool match = true;
          for (int j : observed) {
            if (rows->at(r, static_cast<std::size_t>(j)) !=
                x[static_cast<std::size_t>(j)]) {
              match = false;
              break;
            }
          }
          if (!match) continue;
          for (int j : held_out) {
            probe[static_cast<std::size_t>(j)] =
                rows->at(r, static_cast<std::size_t>(j));
          }
          acc.add(model(probe));
        }
        if (acc.count == 0.0) {
          throw NoMatchingRows("no background rows match the conditioning");
        }
        return acc.mean;
      });
}

SubsetFunction tree_distribution_removal(const DecisionTreeModel& tree) {
  for (const TreeNode& node : tree.nodes) {
    if (node.coverage <= 0.0) {
      throw MissingCoverage("tree node lacks training-coverage counts");
    }
  }
  auto model_ptr = std::make_shared<DecisionTreeModel>(tree);

  struct Eval {
    static std::vector<double> run(const DecisionTreeModel& t, int node_idx,
                                   std::span<const double> x,
                                   const FeatureSubset& s) {
      const TreeNode& node = t.nodes[static_cast<std::size_t>(node_idx)];
      if (node.is_leaf()) return node.value;
      if (s.contains(node.split_feature)) {
        const int next =
            x[static_cast<std::size_t>(node.split_feature)] <= node.threshold
                ? node.left
                : node.right;
        return run(t, next, x, s);
      }
      // Unknown split: coverage-weighted average of both children.
      const auto left = run(t, node.left, x, s);
      const auto right = run(t, node.right, x, s);
      const double cl = t.nodes[static_cast<std::size_t>(node.left)].coverage;
      const double cr = t.nodes[static_cast<std::size_t>(node.right)].coverage;
      const double total = cl + cr;
      std::vector<double> out(left.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (cl * left[i] + cr * right[i]) / total;
      }
      return out;
    }
  };

  const PredictionModel as_model = tree.as_model();
  return make_extension(
      as_model, true,
      [model_ptr](std::span<const double> x, const FeatureSubset& s,
                  std::uint64_t) -> std::vector<double> {
        return Eval::run(*model_ptr, 0, x, s);
      });
}

SubsetFunction separate_models_removal(const SubsetModelTable& table) {
  auto table_ptr = std::make_shared<SubsetModelTable>(table);
  const FeatureSubset all = FeatureSubset::full(table.dim());
  // The extension target is the full-feature model f_D.
  PredictionModel f_d{
      table.dim(), table.out_dim(),
      [table_ptr, all](std::span<const double> x) {
        return table_ptr->predict(x, all);
      }};
  return make_extension(
      f_d, true,
      [table_ptr](std::span<const double> x, const FeatureSubset& s,
                  std::uint64_t) -> std::vector<double> {
        return table_ptr->predict(x, s);
      });
}

}  // namespace rex
