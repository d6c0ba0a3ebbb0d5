#pragma once

#include <span>
#include <vector>

#include "rex/core.hpp"
#include "rex/data.hpp"

namespace rex {

// ---------------------------------------------------------------------------
// Losses and links
// ---------------------------------------------------------------------------

struct LossFunction {
  enum class Kind { squared_error, cross_entropy };

  Kind kind = Kind::squared_error;
  double clip_epsilon = 1e-12;  // probability clamp before logs

  static LossFunction squared_error() { return {Kind::squared_error, 1e-12}; }
  static LossFunction cross_entropy(double eps = 1e-12) {
    return {Kind::cross_entropy, eps};
  }

  // Loss against a scalar label. Squared error compares pred[0] with the
  // label for scalar outputs and one-hot-encodes class labels for vector
  // outputs; cross entropy reads the label as a class index.
  double against_label(std::span<const double> pred, double label) const;

  // Loss against a full target vector (used by the output-loss behavior).
  double against_vector(std::span<const double> pred,
                        std::span<const double> target) const;
};

struct LinkFunction {
  enum class Kind { identity, log_odds };

  Kind kind = Kind::identity;
  double clip_epsilon = 1e-12;

  static LinkFunction identity() { return {Kind::identity, 1e-12}; }
  static LinkFunction log_odds(double eps = 1e-12) {
    return {Kind::log_odds, eps};
  }

  double apply(double v) const;
};

// ---------------------------------------------------------------------------
// Behaviors: set functions u(S) built from a subset function
//
// Dataset-level behaviors evaluate row r with row_seed(seed, r), so a
// stochastic subset function yields a deterministic set function and the
// relationship identities below hold exactly.
// ---------------------------------------------------------------------------

// u(S) = link(F(x_S)[output_index])
SetFunction behavior_prediction(const SubsetFunction& f,
                                std::span<const double> x, int output_index,
                                LinkFunction link, std::uint64_t seed);

// u(S) = -loss(F(x_S), y)
SetFunction behavior_prediction_loss(const SubsetFunction& f,
                                     std::span<const double> x, double y,
                                     LossFunction loss, std::uint64_t seed);

// u(S) = -sum_y label_dist[y] * loss(F(x_S), y)
SetFunction behavior_prediction_mean_loss(const SubsetFunction& f,
                                          std::span<const double> x,
                                          std::span<const double> label_dist,
                                          LossFunction loss,
                                          std::uint64_t seed);

// u(S) = -(1/n) sum_rows loss(F(x_row, S), y_row)
SetFunction behavior_dataset_loss_label(const SubsetFunction& f,
                                        const LabeledDataset& data,
                                        LossFunction loss, std::uint64_t seed);

// u(S) = -(1/n) sum_rows loss(F(x_row, S), F(x_row, D))
SetFunction behavior_dataset_loss_output(const SubsetFunction& f,
                                         const LabeledDataset& data,
                                         LossFunction loss,
                                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Relationship identities between the five behaviors
// ---------------------------------------------------------------------------

struct IdentityReport {
  // Per-identity max absolute discrepancy over all rows and subsets.
  double prediction_loss = 0.0;   // v_xy(S) vs -loss(F(x_S), y)
  double mean_loss = 0.0;         // w_x(S) vs sum_y p(y|x) v_xy(S)
  double dataset_label = 0.0;     // v(S) vs E[v_XY(S)] and E[w_X(S)]
  double dataset_output = 0.0;    // w(S) vs -E[loss(F(X_S), F(X))]
  bool mean_loss_checked = false;

  double max_discrepancy() const;
};

IdentityReport verify_behavior_identities(const SubsetFunction& f,
                                          const LabeledDataset& data,
                                          LossFunction loss,
                                          std::uint64_t seed);

}  // namespace rex
