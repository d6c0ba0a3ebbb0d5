#include "rex/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rex/linalg.hpp"

namespace rex {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void require_rows(const RowMatrix& x, std::span<const double> y) {
  if (x.n == 0) throw EmptyDataset("fit requires at least one row");
  if (x.n != y.size()) {
    throw DimensionMismatch("feature/label row count mismatch");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear regression
// ---------------------------------------------------------------------------

double LinearModel::predict(std::span<const double> x) const {
  double v = intercept;
  for (std::size_t i = 0; i < beta.size(); ++i) v += beta[i] * x[i];
  return v;
}

PredictionModel LinearModel::as_model() const {
  LinearModel copy = *this;
  return {dim(), 1, [copy](std::span<const double> x) {
            return std::vector<double>{copy.predict(x)};
          }};
}

LinearModel fit_linear(const RowMatrix& x, std::span<const double> y,
                       const LinearFitOptions& opts) {
  require_rows(x, y);
  const std::size_t d = x.d;
  const std::size_t p = d + 1;  // intercept last

  // Normal equations (X^T X) b = X^T y over the augmented design.
  Mat xtx(p, p);
  std::vector<double> xty(p, 0.0);
  for (std::size_t r = 0; r < x.n; ++r) {
    auto row = x.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) xtx(i, j) += row[i] * row[j];
      xtx(i, d) += row[i];
      xty[i] += row[i] * y[r];
    }
    xtx(d, d) += 1.0;
    xty[d] += y[r];
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < i; ++j) xtx(i, j) = xtx(j, i);
  }

  auto solution = solve_spd(xtx, xty);
  if (!solution) {
    if (!opts.ridge_fallback) {
      throw RankDeficient("design matrix is rank deficient");
    }
    for (std::size_t i = 0; i < p; ++i) xtx(i, i) += opts.ridge_lambda;
    solution = solve_spd(xtx, xty);
    if (!solution) {
      throw RankDeficient("design matrix is rank deficient even with ridge");
    }
  }
  LinearModel m;
  m.beta.assign(solution->begin(), solution->end() - 1);
  m.intercept = solution->back();
  return m;
}

LinearModel fit_linear(const LabeledDataset& data,
                       const LinearFitOptions& opts) {
  if (!data.has_labels()) throw EmptyDataset("dataset has no labels");
  return fit_linear(data.features, data.labels, opts);
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

double LogisticModel::prob_class1(std::span<const double> x) const {
  double z = intercept;
  for (std::size_t i = 0; i < beta.size(); ++i) z += beta[i] * x[i];
  return sigmoid(z);
}

std::vector<double> LogisticModel::predict(std::span<const double> x) const {
  const double p = prob_class1(x);
  return {1.0 - p, p};
}

PredictionModel LogisticModel::as_model() const {
  LogisticModel copy = *this;
  return {dim(), 2, [copy](std::span<const double> x) {
            return copy.predict(x);
          }};
}

LogisticModel fit_logistic(const RowMatrix& x, std::span<const double> y01,
                           int max_iters, double step) {
  require_rows(x, y01);
  for (double v : y01) {
    if (v != 0.0 && v != 1.0) {
      throw NonBinaryLabels("logistic regression requires labels in {0, 1}");
    }
  }
  const std::size_t d = x.d;
  const double inv_n = 1.0 / static_cast<double>(x.n);
  LogisticModel m;
  m.beta.assign(d, 0.0);

  std::vector<double> grad(d + 1);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t r = 0; r < x.n; ++r) {
      auto row = x.row(r);
      const double err = m.prob_class1(row) - y01[r];
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * row[j];
      grad[d] += err;
    }
    double max_abs = 0.0;
    for (double& g : grad) {
      g *= inv_n;
      max_abs = std::max(max_abs, std::abs(g));
    }
    if (max_abs < 1e-6) break;
    for (std::size_t j = 0; j < d; ++j) m.beta[j] -= step * grad[j];
    m.intercept -= step * grad[d];
  }
  return m;
}

LogisticModel fit_logistic(const LabeledDataset& data, int max_iters,
                           double step) {
  if (!data.has_labels()) throw EmptyDataset("dataset has no labels");
  return fit_logistic(data.features, data.labels, max_iters, step);
}

// ---------------------------------------------------------------------------
// Decision trees
// ---------------------------------------------------------------------------

std::vector<double> DecisionTreeModel::predict(
    std::span<const double> x) const {
  int idx = 0;
  while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(idx)];
    idx = x[static_cast<std::size_t>(node.split_feature)] <= node.threshold
              ? node.left
              : node.right;
  }
  return nodes[static_cast<std::size_t>(idx)].value;
}

PredictionModel DecisionTreeModel::as_model() const {
  DecisionTreeModel copy = *this;
  return {dim, out_dim, [copy](std::span<const double> x) {
            return copy.predict(x);
          }};
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

std::vector<double> leaf_value(const RowMatrix& x, std::span<const double> y,
                               const std::vector<std::size_t>& idx,
                               const TreeFitOptions& opts) {
  (void)x;
  if (opts.classification) {
    std::vector<double> props(static_cast<std::size_t>(opts.n_classes), 0.0);
    for (std::size_t r : idx) props[static_cast<std::size_t>(y[r])] += 1.0;
    for (double& p : props) p /= static_cast<double>(idx.size());
    return props;
  }
  double mean = 0.0;
  for (std::size_t r : idx) mean += y[r];
  return {mean / static_cast<double>(idx.size())};
}

// Sum of per-side impurities: SSE for regression, Gini weighted by count for
// classification. Lower is better.
double side_impurity(std::span<const double> y,
                     const std::vector<std::size_t>& idx,
                     const TreeFitOptions& opts) {
  if (idx.empty()) return 0.0;
  if (opts.classification) {
    std::vector<double> counts(static_cast<std::size_t>(opts.n_classes), 0.0);
    for (std::size_t r : idx) counts[static_cast<std::size_t>(y[r])] += 1.0;
    const double n = static_cast<double>(idx.size());
    double gini = 1.0;
    for (double c : counts) gini -= (c / n) * (c / n);
    return gini * n;
  }
  double mean = 0.0;
  for (std::size_t r : idx) mean += y[r];
  mean /= static_cast<double>(idx.size());
  double sse = 0.0;
  for (std::size_t r : idx) sse += (y[r] - mean) * (y[r] - mean);
  return sse;
}

int build_node(const RowMatrix& x, std::span<const double> y,
               const std::vector<std::size_t>& idx, int depth,
               const TreeFitOptions& opts, DecisionTreeModel& tree) {
  const int node_idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes.back().coverage = static_cast<double>(idx.size());

  SplitChoice best;
  if (depth < opts.max_depth &&
      idx.size() >= 2 * static_cast<std::size_t>(opts.min_leaf)) {
    for (std::size_t f = 0; f < x.d; ++f) {
      std::vector<double> values;
      values.reserve(idx.size());
      for (std::size_t r : idx) values.push_back(x.at(r, f));
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double thr = 0.5 * (values[k] + values[k + 1]);
        std::vector<std::size_t> left, right;
        for (std::size_t r : idx) {
          (x.at(r, f) <= thr ? left : right).push_back(r);
        }
        if (left.size() < static_cast<std::size_t>(opts.min_leaf) ||
            right.size() < static_cast<std::size_t>(opts.min_leaf)) {
          continue;
        }
        const double imp =
            side_impurity(y, left, opts) + side_impurity(y, right, opts);
        // Ties broken by lowest feature index, then lowest threshold, which
        // the scan order already guarantees with a strict comparison.
        if (imp < best.impurity) {
          best = {static_cast<int>(f), thr, imp};
        }
      }
    }
  }

  if (best.feature < 0) {
    tree.nodes[static_cast<std::size_t>(node_idx)].value =
        leaf_value(x, y, idx, opts);
    return node_idx;
  }

  std::vector<std::size_t> left, right;
  for (std::size_t r : idx) {
    (x.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left
                                                                       : right)
        .push_back(r);
  }
  const int left_idx = build_node(x, y, left, depth + 1, opts, tree);
  const int right_idx = build_node(x, y, right, depth + 1, opts, tree);
  TreeNode& node = tree.nodes[static_cast<std::size_t>(node_idx)];
  node.split_feature = best.feature;
  node.threshold = best.threshold;
  node.left = left_idx;
  node.right = right_idx;
  return node_idx;
}

}  // namespace

DecisionTreeModel fit_tree(const RowMatrix& x, std::span<const double> y,
                           const TreeFitOptions& opts) {
  require_rows(x, y);
  if (x.n < static_cast<std::size_t>(opts.min_leaf)) {
    throw EmptyDataset("fewer rows than min_leaf");
  }
  DecisionTreeModel tree;
  tree.dim = static_cast<int>(x.d);
  tree.out_dim = opts.classification ? opts.n_classes : 1;
  std::vector<std::size_t> idx(x.n);
  for (std::size_t i = 0; i < x.n; ++i) idx[i] = i;
  build_node(x, y, idx, 0, opts, tree);
  return tree;
}

DecisionTreeModel fit_tree(const LabeledDataset& data,
                           const TreeFitOptions& opts) {
  if (!data.has_labels()) throw EmptyDataset("dataset has no labels");
  TreeFitOptions o = opts;
  if (o.classification && data.n_classes() > 0) {
    o.n_classes = data.n_classes();
  }
  return fit_tree(data.features, data.labels, o);
}

// ---------------------------------------------------------------------------
// Subset model tables
// ---------------------------------------------------------------------------

SubsetModelTable::SubsetModelTable(int dim, TrainFamily family, int out_dim,
                                   std::vector<Entry> entries)
    : dim_(dim), out_dim_(out_dim), family_(family),
      entries_(std::move(entries)) {
  if (entries_.size() != (std::size_t{1} << dim)) {
    throw MissingSubsetModel("table must cover all 2^d subsets");
  }
}

std::vector<double> SubsetModelTable::predict(std::span<const double> x,
                                              const FeatureSubset& s) const {
  if (s.dim() != dim_) throw DimensionMismatch("subset table dim mismatch");
  const Entry& e = entries_[s.bits()];
  double z = e.intercept;
  std::size_t k = 0;
  for (int i : s.members()) {
    z += e.beta[k++] * x[static_cast<std::size_t>(i)];
  }
  if (family_ == TrainFamily::logistic) {
    const double p = sigmoid(z);
    return {1.0 - p, p};
  }
  return {z};
}

SubsetModelTable fit_subset_model_table(const LabeledDataset& data,
                                        TrainFamily family) {
  if (!data.has_labels()) throw EmptyDataset("dataset has no labels");
  const int d = data.dim();
  if (d > kMaxSubsetTableDim) {
    throw DimensionTooLarge("subset model tables are capped at d <= " +
                            std::to_string(kMaxSubsetTableDim));
  }
  const std::size_t n = data.n();
  std::vector<SubsetModelTable::Entry> entries(std::size_t{1} << d);

  for (std::uint64_t bits = 0; bits < entries.size(); ++bits) {
    const FeatureSubset s(bits, d);
    const auto members = s.members();
    SubsetModelTable::Entry& entry = entries[bits];
    if (members.empty()) {
      // Empty subset: training-label mean (regression) or class prior odds
      // (classification).
      double mean = 0.0;
      for (double y : data.labels) mean += y;
      mean /= static_cast<double>(n);
      if (family == TrainFamily::logistic) {
        const double p = std::clamp(mean, 1e-12, 1.0 - 1e-12);
        entry.intercept = std::log(p / (1.0 - p));
      } else {
        entry.intercept = mean;
      }
      continue;
    }
    RowMatrix sub(n, members.size());
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < members.size(); ++j) {
        sub.at(r, j) = data.features.at(r, static_cast<std::size_t>(members[j]));
      }
    }
    if (family == TrainFamily::logistic) {
      const LogisticModel m = fit_logistic(sub, data.labels);
      entry.beta = m.beta;
      entry.intercept = m.intercept;
    } else {
      const LinearModel m = fit_linear(sub, data.labels);
      entry.beta = m.beta;
      entry.intercept = m.intercept;
    }
  }
  const int out_dim = family == TrainFamily::logistic ? 2 : 1;
  return {d, family, out_dim, std::move(entries)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

using nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

ordered_json tree_to_json(const DecisionTreeModel& m) {
  ordered_json nodes = ordered_json::array();
  for (const TreeNode& n : m.nodes) {
    ordered_json j;
    j["split_feature"] = n.split_feature;
    j["threshold"] = n.threshold;
    j["left"] = n.left;
    j["right"] = n.right;
    j["value"] = n.value;
    j["coverage"] = n.coverage;
    nodes.push_back(std::move(j));
  }
  ordered_json j;
  j["dim"] = m.dim;
  j["out_dim"] = m.out_dim;
  j["nodes"] = std::move(nodes);
  return j;
}

DecisionTreeModel tree_from_json(const nlohmann::json& j) {
  DecisionTreeModel m;
  m.dim = j.at("dim").get<int>();
  m.out_dim = j.at("out_dim").get<int>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.split_feature = n.at("split_feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.value = n.at("value").get<std::vector<double>>();
    node.coverage = n.at("coverage").get<double>();
    m.nodes.push_back(std::move(node));
  }
  return m;
}

}  // namespace

std::string model_to_json(const AnyModel& model) {
  ordered_json j;
  j["format_version"] = kFormatVersion;
  if (const auto* lin = std::get_if<LinearModel>(&model)) {
    j["kind"] = "linear";
    j["coefficients"] = lin->beta;
    j["intercept"] = lin->intercept;
  } else if (const auto* log = std::get_if<LogisticModel>(&model)) {
    j["kind"] = "logistic";
    j["coefficients"] = log->beta;
    j["intercept"] = log->intercept;
  } else {
    const auto& tree = std::get<DecisionTreeModel>(model);
    j["kind"] = "tree";
    j["tree"] = tree_to_json(tree);
  }
  return j.dump(2) + "\n";
}

AnyModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid model JSON: ") + e.what());
  }
  if (j.value("format_version", -1) != kFormatVersion) {
    throw ParseError("unsupported model format version");
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    LinearModel m;
    m.beta = j.at("coefficients").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    return m;
  }
  if (kind == "logistic") {
    LogisticModel m;
    m.beta = j.at("coefficients").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    return m;
  }
  if (kind == "tree") return tree_from_json(j.at("tree"));
  throw ParseError("unknown model kind '" + kind + "'");
}

void save_model(const std::string& path, const AnyModel& model) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << model_to_json(model);
}

AnyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

PredictionModel as_prediction_model(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.as_model(); }, model);
}

}  // namespace rex
