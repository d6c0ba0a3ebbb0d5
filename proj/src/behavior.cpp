#include "rex/behavior.hpp"

#include <algorithm>
#include <cmath>

namespace rex {

namespace {

double clamp_prob(double p, double eps) {
  return std::clamp(p, eps, 1.0 - eps);
}

std::vector<double> copy_of(std::span<const double> x) {
  return {x.begin(), x.end()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Losses and links
// ---------------------------------------------------------------------------

double LossFunction::against_label(std::span<const double> pred,
                                   double label) const {
  if (kind == Kind::cross_entropy) {
    const auto idx = static_cast<std::size_t>(label);
    if (label < 0 || idx >= pred.size() ||
        static_cast<double>(idx) != label) {
      throw IndexOutOfRange("cross entropy expects an integer class label "
                            "within the output dimension");
    }
    return -std::log(clamp_prob(pred[idx], clip_epsilon));
  }
  if (pred.size() == 1) {
    const double diff = pred[0] - label;
    return diff * diff;
  }
  // One-hot squared error for vector outputs with a class label.
  const auto idx = static_cast<std::size_t>(label);
  if (label < 0 || idx >= pred.size() || static_cast<double>(idx) != label) {
    throw IndexOutOfRange("class label outside the output dimension");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - (i == idx ? 1.0 : 0.0);
    total += diff * diff;
  }
  return total;
}

double LossFunction::against_vector(std::span<const double> pred,
                                    std::span<const double> target) const {
  if (pred.size() != target.size()) {
    throw DimensionMismatch("loss target length mismatch");
  }
  if (kind == Kind::cross_entropy) {
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      total -= target[i] * std::log(clamp_prob(pred[i], clip_epsilon));
    }
    return total;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    total += diff * diff;
  }
  return total;
}

double LinkFunction::apply(double v) const {
  if (kind == Kind::identity) return v;
  const double p = clamp_prob(v, clip_epsilon);
  return std::log(p / (1.0 - p));
}

// ---------------------------------------------------------------------------
// Behaviors
// ---------------------------------------------------------------------------

SetFunction behavior_prediction(const SubsetFunction& f,
                                std::span<const double> x, int output_index,
                                LinkFunction link, std::uint64_t seed) {
  if (output_index < 0 || output_index >= f.out_dim()) {
    throw IndexOutOfRange("output index " + std::to_string(output_index) +
                          " outside output dimension " +
                          std::to_string(f.out_dim()));
  }
  auto xv = copy_of(x);
  SubsetFunction fv = f;
  return {f.dim(), [fv, xv, output_index, link, seed](const FeatureSubset& s) {
            return link.apply(
                fv.evaluate(xv, s, seed)[static_cast<std::size_t>(output_index)]);
          }};
}

SetFunction behavior_prediction_loss(const SubsetFunction& f,
                                     std::span<const double> x, double y,
                                     LossFunction loss, std::uint64_t seed) {
  auto xv = copy_of(x);
  SubsetFunction fv = f;
  return {f.dim(), [fv, xv, y, loss, seed](const FeatureSubset& s) {
            return -loss.against_label(fv.evaluate(xv, s, seed), y);
          }};
}

SetFunction behavior_prediction_mean_loss(const SubsetFunction& f,
                                          std::span<const double> x,
                                          std::span<const double> label_dist,
                                          LossFunction loss,
                                          std::uint64_t seed) {
  double total = 0.0;
  for (double p : label_dist) {
    if (p < 0.0) throw InvalidDistribution("negative label probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidDistribution("label distribution must sum to 1");
  }
  auto xv = copy_of(x);
  std::vector<double> dist(label_dist.begin(), label_dist.end());
  SubsetFunction fv = f;
  return {f.dim(), [fv, xv, dist, loss, seed](const FeatureSubset& s) {
            const auto pred = fv.evaluate(xv, s, seed);
            double u = 0.0;
            for (std::size_t y = 0; y < dist.size(); ++y) {
              if (dist[y] == 0.0) continue;
              u -= dist[y] *
                   loss.against_label(pred, static_cast<double>(y));
            }
            return u;
          }};
}

SetFunction behavior_dataset_loss_label(const SubsetFunction& f,
                                        const LabeledDataset& data,
                                        LossFunction loss,
                                        std::uint64_t seed) {
  if (data.n() == 0 || !data.has_labels()) {
    throw EmptyDataset("dataset-loss behavior requires labeled rows");
  }
  auto rows = std::make_shared<RowMatrix>(data.features);
  auto labels = std::make_shared<std::vector<double>>(data.labels);
  SubsetFunction fv = f;
  return {f.dim(), [fv, rows, labels, loss, seed](const FeatureSubset& s) {
            double total = 0.0;
            for (std::size_t r = 0; r < rows->n; ++r) {
              total += loss.against_label(
                  fv.evaluate(rows->row(r), s, row_seed(seed, r)),
                  (*labels)[r]);
            }
            return -total / static_cast<double>(rows->n);
          }};
}

SetFunction behavior_dataset_loss_output(const SubsetFunction& f,
                                         const LabeledDataset& data,
                                         LossFunction loss,
                                         std::uint64_t seed) {
  if (data.n() == 0) throw EmptyDataset("output-loss behavior requires rows");
  if (!f.extension_of()) {
    throw PreconditionViolation(
        "output-loss behavior requires an extension of a model");
  }
  auto rows = std::make_shared<RowMatrix>(data.features);
  const FeatureSubset all = FeatureSubset::full(f.dim());
  SubsetFunction fv = f;
  return {f.dim(), [fv, rows, loss, seed, all](const FeatureSubset& s) {
            double total = 0.0;
            for (std::size_t r = 0; r < rows->n; ++r) {
              const std::uint64_t rs = row_seed(seed, r);
              const auto target = fv.evaluate(rows->row(r), all, rs);
              total += loss.against_vector(fv.evaluate(rows->row(r), s, rs),
                                           target);
            }
            return -total / static_cast<double>(rows->n);
          }};
}

// ---------------------------------------------------------------------------
// Identities
// ---------------------------------------------------------------------------

double IdentityReport::max_discrepancy() const {
  return std::max({prediction_loss, mean_loss, dataset_label, dataset_output});
}

IdentityReport verify_behavior_identities(const SubsetFunction& f,
                                          const LabeledDataset& data,
                                          LossFunction loss,
                                          std::uint64_t seed) {
  if (data.n() == 0 || !data.has_labels()) {
    throw EmptyDataset("identity checks require labeled rows");
  }
  const int d = f.dim();
  if (d > 16) {
    throw DimensionTooLarge("identity checks enumerate all subsets; d <= 16");
  }
  const auto subsets = enumerate_subsets(d);
  const std::size_t n = data.n();
  const FeatureSubset all = FeatureSubset::full(d);

  IdentityReport report;

  // Per-row local games, built once.
  std::vector<SetFunction> v_xy;
  std::vector<SetFunction> w_x;
  const bool have_dists = data.label_dist.has_value() || data.label_is_class;
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint64_t rs = row_seed(seed, r);
    v_xy.push_back(behavior_prediction_loss(f, data.features.row(r),
                                            data.labels[r], loss, rs));
    if (have_dists) {
      std::vector<double> dist;
      if (data.label_dist) {
        dist.assign(data.label_dist->row(r).begin(),
                    data.label_dist->row(r).end());
      } else {
        dist.assign(static_cast<std::size_t>(data.n_classes()), 0.0);
        dist[static_cast<std::size_t>(data.labels[r])] = 1.0;
      }
      w_x.push_back(behavior_prediction_mean_loss(f, data.features.row(r),
                                                  dist, loss, rs));
    }
  }
  report.mean_loss_checked = have_dists;

  const SetFunction v = behavior_dataset_loss_label(f, data, loss, seed);
  const SetFunction w = behavior_dataset_loss_output(f, data, loss, seed);

  for (const FeatureSubset& s : subsets) {
    double sum_v_xy = 0.0;
    double sum_w_x = 0.0;
    double sum_out = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::uint64_t rs = row_seed(seed, r);
      const auto pred = f.evaluate(data.features.row(r), s, rs);

      // v_xy(S) = -loss(F(x_S), y), recomputed outside the game object.
      const double direct = -loss.against_label(pred, data.labels[r]);
      report.prediction_loss =
          std::max(report.prediction_loss, std::abs(v_xy[r](s) - direct));
      sum_v_xy += v_xy[r](s);

      if (have_dists) {
        // w_x(S) = sum_y p(y|x) v_xy(S), expanded per class.
        double expected = 0.0;
        std::vector<double> dist;
        if (data.label_dist) {
          dist.assign(data.label_dist->row(r).begin(),
                      data.label_dist->row(r).end());
        } else {
          dist.assign(static_cast<std::size_t>(data.n_classes()), 0.0);
          dist[static_cast<std::size_t>(data.labels[r])] = 1.0;
        }
        for (std::size_t y = 0; y < dist.size(); ++y) {
          if (dist[y] == 0.0) continue;
          expected -= dist[y] *
                      loss.against_label(pred, static_cast<double>(y));
        }
        report.mean_loss =
            std::max(report.mean_loss, std::abs(w_x[r](s) - expected));
        sum_w_x += w_x[r](s);
      }

      const auto target = f.evaluate(data.features.row(r), all, rs);
      sum_out += loss.against_vector(pred, target);
    }

    const double mean_v_xy = sum_v_xy / static_cast<double>(n);
    report.dataset_label =
        std::max(report.dataset_label, std::abs(v(s) - mean_v_xy));
    // The two empirical readings of E_XY agree exactly only when the label
    // distributions are point masses on the observed labels.
    if (have_dists && !data.label_dist) {
      const double mean_w_x = sum_w_x / static_cast<double>(n);
      report.dataset_label =
          std::max(report.dataset_label, std::abs(v(s) - mean_w_x));
    }
    const double direct_out = -sum_out / static_cast<double>(n);
    report.dataset_output =
        std::max(report.dataset_output, std::abs(w(s) - direct_out));
  }
  return report;
}

}  // namespace rex
