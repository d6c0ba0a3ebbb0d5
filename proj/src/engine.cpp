#include "rex/engine.hpp"

#include <algorithm>
#include <cmath>

namespace rex {

namespace {

using Params = std::map<std::string, std::string>;

std::string get_param(const Params& params, const std::string& key,
                      const std::string& fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

int get_int(const Params& params, const std::string& key, int fallback) {
  const std::string v = get_param(params, key, "");
  if (v.empty()) return fallback;
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw ConfigError("parameter '" + key + "' expects an integer, got '" +
                      v + "'");
  }
}

double get_double(const Params& params, const std::string& key,
                  double fallback) {
  const std::string v = get_param(params, key, "");
  if (v.empty() || v == "auto") return fallback;
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw ConfigError("parameter '" + key + "' expects a number, got '" + v +
                      "'");
  }
}

std::vector<double> column_means(const LabeledDataset& data) {
  std::vector<double> means(data.features.d, 0.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.features.d; ++j) {
      means[j] += data.features.at(i, j);
    }
  }
  for (double& m : means) m /= static_cast<double>(data.n());
  return means;
}

std::vector<double> parse_baseline(const std::string& text, int dim) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find(';', start);
    const std::string tok = text.substr(
        start, end == std::string::npos ? std::string::npos : end - start);
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("baseline expects ';'-separated numbers, got '" +
                        text + "'");
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (static_cast<int>(out.size()) != dim) {
    throw ConfigError("baseline has " + std::to_string(out.size()) +
                      " entries, expected " + std::to_string(dim));
  }
  return out;
}

Solver parse_solver(const std::string& v) {
  if (v == "exhaustive") return Solver::exhaustive;
  if (v == "greedy") return Solver::greedy;
  throw ConfigError("unknown solver '" + v + "'");
}

LossFunction resolve_loss(const Params& params, int out_dim,
                          std::string* resolved_name) {
  const std::string v = get_param(params, "loss", "auto");
  std::string name = v;
  if (v == "auto") name = out_dim >= 2 ? "cross-entropy" : "squared-error";
  if (resolved_name) *resolved_name = name;
  if (name == "cross-entropy") return LossFunction::cross_entropy();
  if (name == "squared-error") return LossFunction::squared_error();
  throw ConfigError("unknown loss '" + v + "'");
}

}  // namespace

bool behavior_is_local(const std::string& label) {
  return label == "prediction" || label == "prediction-loss" ||
         label == "prediction-mean-loss";
}

// ---------------------------------------------------------------------------
// Removal construction
// ---------------------------------------------------------------------------

SubsetFunction build_removal(const std::string& label, const Params& params,
                             const AnyModel& model,
                             const LabeledDataset& data) {
  const int d = data.dim();

  if (label == "separate-models") {
    std::string family = get_param(params, "family", "auto");
    if (family == "auto") {
      family = data.label_is_class && data.n_classes() == 2 ? "logistic"
                                                            : "linear";
    }
    TrainFamily fam;
    if (family == "linear") {
      fam = TrainFamily::linear;
    } else if (family == "logistic") {
      fam = TrainFamily::logistic;
    } else {
      throw ConfigError("unknown model family '" + family + "'");
    }
    return separate_models_removal(fit_subset_model_table(data, fam));
  }

  if (label == "tree-distribution") {
    const auto* tree = std::get_if<DecisionTreeModel>(&model);
    if (!tree) {
      throw ConfigError("tree-distribution removal requires a tree model");
    }
    return tree_distribution_removal(*tree);
  }

  const PredictionModel f = as_prediction_model(model);
  if (f.dim() != d) {
    throw ConfigError("model expects " + std::to_string(f.dim()) +
                      " features but the data has " + std::to_string(d));
  }

  if (label == "zeros") {
    return fixed_baseline_removal(f, std::vector<double>(d, 0.0));
  }
  if (label == "default-values") {
    const std::string b = get_param(params, "baseline", "means");
    return fixed_baseline_removal(
        f, b == "means" ? column_means(data) : parse_baseline(b, d));
  }

  const BackgroundData bg = BackgroundData::from_dataset(data);

  if (label == "marginalize-marginal" || label == "marginalize-product") {
    const std::string mode = get_param(params, "mode", "exact");
    SampleMode m = SampleMode::exactly();
    if (mode == "sampled") {
      m = SampleMode::sampled(get_int(params, "samples", 256));
    } else if (mode != "exact") {
      throw ConfigError("unknown removal mode '" + mode + "'");
    }
    return label == "marginalize-marginal"
               ? marginal_removal(f, bg, m)
               : product_of_marginals_removal(f, bg, m);
  }
  if (label == "marginalize-uniform") {
    return uniform_removal(f, FeatureBounds::from_background(bg),
                           get_int(params, "samples", 1024));
  }
  if (label == "marginalize-replacement") {
    return replacement_distribution_removal(
        f,
        ReplacementDistributionSet::from_background(
            bg, get_int(params, "bins", 4)),
        get_int(params, "samples", 128));
  }
  if (label == "marginalize-conditional") {
    const std::string variant = get_param(params, "variant", "gaussian");
    if (variant == "empirical") {
      return conditional_empirical_removal(f, bg);
    }
    if (variant != "gaussian") {
      throw ConfigError("unknown conditional variant '" + variant + "'");
    }
    const std::string mode = get_param(params, "mode", "plugin");
    ConditionalMode m = ConditionalMode::plugin();
    if (mode == "sampled") {
      m = ConditionalMode::sampled(get_int(params, "samples", 256));
    } else if (mode != "plugin") {
      throw ConfigError("unknown conditional mode '" + mode + "'");
    }
    return conditional_gaussian_removal(f, GaussianSpec::from_background(bg),
                                        m);
  }
  throw ConfigError("unknown removal strategy '" + label + "'");
}

// ---------------------------------------------------------------------------
// Explanation runs
// ---------------------------------------------------------------------------

EngineResult run_explanation(const LabeledDataset& data, const AnyModel& model,
                             const EngineConfig& config) {
  const MethodSpec& method = config.method;
  MethodSpec resolved = method;

  const auto& removal_labels = removal_axis_labels();
  const auto& behavior_labels = behavior_axis_labels();
  const auto& summary_labels = summary_axis_labels();
  if (std::find(removal_labels.begin(), removal_labels.end(),
                method.removal.label) == removal_labels.end()) {
    throw ConfigError("unknown removal label '" + method.removal.label + "'");
  }
  if (std::find(behavior_labels.begin(), behavior_labels.end(),
                method.behavior.label) == behavior_labels.end()) {
    throw ConfigError("unknown behavior label '" + method.behavior.label +
                      "'");
  }
  if (std::find(summary_labels.begin(), summary_labels.end(),
                method.summary.label) == summary_labels.end()) {
    throw ConfigError("unknown summary label '" + method.summary.label + "'");
  }
  if (data.n() == 0) throw ConfigError("dataset is empty");

  // Out-of-scope removal labels execute through their tabular substitutes.
  const std::string exec_label =
      substituted_removal_binding(method.removal.label);
  if (exec_label != method.removal.label) {
    resolved.substituted = true;
    if (resolved.substitution_note.empty()) {
      resolved.substitution_note = "removal '" + method.removal.label +
                                   "' is not executable on tabular data; "
                                   "bound to '" + exec_label + "'";
    }
    resolved.removal.params["bound-to"] = exec_label;
  }

  const bool local = behavior_is_local(method.behavior.label);
  if (local) {
    if (config.instance < 0 ||
        static_cast<std::size_t>(config.instance) >= data.n()) {
      throw ConfigError("behavior '" + method.behavior.label +
                        "' requires --instance within the dataset");
    }
  } else if (config.instance >= 0) {
    throw ConfigError("behavior '" + method.behavior.label +
                      "' is dataset-level; --instance is not allowed");
  }

  SubsetFunction f =
      build_removal(exec_label, method.removal.params, model, data);

  // ----- behavior -----
  std::string loss_name;
  const LossFunction loss =
      resolve_loss(method.behavior.params, f.out_dim(), &loss_name);
  SetFunction u;
  const auto x = local ? data.features.row(
                             static_cast<std::size_t>(config.instance))
                       : std::span<const double>{};
  if (method.behavior.label == "prediction") {
    const std::string link_name =
        get_param(method.behavior.params, "link", "identity");
    LinkFunction link = LinkFunction::identity();
    if (link_name == "log-odds") {
      link = LinkFunction::log_odds();
    } else if (link_name != "identity") {
      throw ConfigError("unknown link '" + link_name + "'");
    }
    if (config.output_index < 0 || config.output_index >= f.out_dim()) {
      throw ConfigError("output index outside the model output dimension");
    }
    u = behavior_prediction(f, x, config.output_index, link, config.seed);
    resolved.behavior.params["link"] = link_name;
  } else if (method.behavior.label == "prediction-loss") {
    if (!data.has_labels()) throw ConfigError("behavior requires labels");
    u = behavior_prediction_loss(
        f, x, data.labels[static_cast<std::size_t>(config.instance)], loss,
        config.seed);
    resolved.behavior.params["loss"] = loss_name;
  } else if (method.behavior.label == "prediction-mean-loss") {
    std::vector<double> dist;
    if (data.label_dist) {
      auto row = data.label_dist->row(
          static_cast<std::size_t>(config.instance));
      dist.assign(row.begin(), row.end());
    } else if (data.label_is_class) {
      dist.assign(static_cast<std::size_t>(data.n_classes()), 0.0);
      dist[static_cast<std::size_t>(
          data.labels[static_cast<std::size_t>(config.instance)])] = 1.0;
    } else {
      throw ConfigError(
          "prediction-mean-loss requires class labels or per-row label "
          "distributions");
    }
    u = behavior_prediction_mean_loss(f, x, dist, loss, config.seed);
    resolved.behavior.params["loss"] = loss_name;
  } else if (method.behavior.label == "dataset-loss-label") {
    if (!data.has_labels()) throw ConfigError("behavior requires labels");
    u = behavior_dataset_loss_label(f, data, loss, config.seed);
    resolved.behavior.params["loss"] = loss_name;
  } else {  // dataset-loss-output
    u = behavior_dataset_loss_output(f, data, loss, config.seed);
    resolved.behavior.params["loss"] = loss_name;
  }

  // ----- summary -----
  const Params& sp = method.summary.params;
  const int d = u.dim();
  const int threads = std::max(1, config.threads);
  EngineResult result;
  result.resolved = resolved;

  auto plan_samples = [&](int fallback) {
    return config.samples > 0 ? config.samples
                              : get_int(sp, "samples", fallback);
  };

  if (method.summary.label == "remove-individual") {
    result.explanation = remove_individual(u);
    if (get_param(sp, "normalize", "false") == "true") {
      result.explanation = normalize_attributions(result.explanation);
    }
  } else if (method.summary.label == "include-individual") {
    result.explanation = include_individual(u);
  } else if (method.summary.label == "shapley-value") {
    const std::string solver = get_param(sp, "solver", "exact");
    result.resolved.summary.params["solver"] = solver;
    if (solver == "exact") {
      result.explanation = shapley_exact(u, threads);
    } else if (solver == "permutation") {
      SamplingPlan plan;
      plan.n_samples = plan_samples(10000);
      plan.seed = config.seed;
      result.resolved.summary.params["samples"] =
          std::to_string(plan.n_samples);
      result.explanation = shapley_permutation_sample(u, plan, threads);
    } else if (solver == "kernel-regression") {
      RegressionMode mode = RegressionMode::full();
      if (d > 20 || get_param(sp, "mode", "full") == "sampled") {
        SamplingPlan plan;
        plan.n_samples = plan_samples(2048);
        plan.seed = config.seed;
        mode = RegressionMode::sampled(plan);
        result.resolved.summary.params["mode"] = "sampled";
        result.resolved.summary.params["samples"] =
            std::to_string(plan.n_samples);
      } else {
        result.resolved.summary.params["mode"] = "full";
      }
      result.explanation = shapley_kernel_regression(u, mode, threads);
    } else {
      throw ConfigError("unknown Shapley solver '" + solver + "'");
    }
  } else if (method.summary.label == "linear-model") {
    const std::string kernel_name = get_param(sp, "kernel", "uniform");
    KernelWeights kernel = KernelWeights::uniform();
    if (kernel_name == "shapley") {
      kernel = KernelWeights::shapley();
    } else if (kernel_name != "uniform") {
      throw ConfigError("unknown kernel '" + kernel_name + "'");
    }
    Regularizer reg = Regularizer::none();
    const std::string reg_name = get_param(sp, "regularizer", "none");
    if (reg_name == "l1") {
      reg = Regularizer::l1(get_double(sp, "lambda", 0.0));
    } else if (reg_name != "none") {
      throw ConfigError("unknown regularizer '" + reg_name + "'");
    }
    RegressionMode mode = RegressionMode::full();
    if (d > 20 || get_param(sp, "mode", "full") == "sampled") {
      SamplingPlan plan;
      plan.n_samples = plan_samples(2048);
      plan.seed = config.seed;
      mode = RegressionMode::sampled(plan);
      result.resolved.summary.params["mode"] = "sampled";
      result.resolved.summary.params["samples"] =
          std::to_string(plan.n_samples);
    } else {
      result.resolved.summary.params["mode"] = "full";
    }
    LimeFit fit = lime_linear(u, kernel, reg, mode, threads);
    result.intercept = fit.intercept;
    result.explanation = std::move(fit.attribution);
    result.resolved.summary.params["kernel"] = kernel_name;
    result.resolved.summary.params["regularizer"] = reg_name;
  } else if (method.summary.label == "mean-when-included") {
    const double p = get_double(sp, "p", 0.5);
    result.resolved.summary.params["p"] = std::to_string(p);
    if (get_param(sp, "mode", "exact") == "sampled" || d > 25) {
      SamplingPlan plan;
      plan.n_samples = plan_samples(10000);
      plan.seed = config.seed;
      plan.inclusion_prob = p;
      result.resolved.summary.params["mode"] = "sampled";
      result.resolved.summary.params["samples"] =
          std::to_string(plan.n_samples);
      result.explanation =
          mean_when_included(u, MwiMode::sampled(plan), threads);
    } else {
      result.resolved.summary.params["mode"] = "exact";
      result.explanation =
          mean_when_included(u, MwiMode::exactly(p), threads);
    }
  } else if (method.summary.label == "low-value-subset") {
    const double lambda = get_double(sp, "lambda", 0.1);
    const Solver solver = parse_solver(get_param(sp, "solver", "exhaustive"));
    result.explanation = low_value_subset(u, lambda, solver, threads);
    result.resolved.summary.params["lambda"] = std::to_string(lambda);
  } else if (method.summary.label == "high-value-subset") {
    const std::string form = get_param(sp, "form", "regularized");
    const Solver solver = parse_solver(get_param(sp, "solver", "exhaustive"));
    result.resolved.summary.params["form"] = form;
    if (form == "threshold") {
      double t;
      if (get_param(sp, "t", "auto") == "auto") {
        const double u_full = u(FeatureSubset::full(d));
        const double u_empty = u(FeatureSubset::empty(d));
        t = u_full - 0.2 * std::abs(u_full - u_empty);
      } else {
        t = get_double(sp, "t", 0.0);
      }
      result.resolved.summary.params["t"] = std::to_string(t);
      result.explanation = minimal_subset_threshold(u, t, solver, threads);
    } else if (form == "constrained") {
      int k;
      if (get_param(sp, "k", "auto") == "auto") {
        k = (d + 1) / 2;
      } else {
        k = get_int(sp, "k", 1);
      }
      result.resolved.summary.params["k"] = std::to_string(k);
      result.explanation =
          high_value_subset_constrained(u, k, solver, threads);
    } else if (form == "regularized") {
      const double lambda = get_double(sp, "lambda", 0.01);
      result.resolved.summary.params["lambda"] = std::to_string(lambda);
      result.explanation =
          high_value_subset_regularized(u, lambda, solver, threads);
    } else {
      throw ConfigError("unknown high-value-subset form '" + form + "'");
    }
  } else if (method.summary.label == "partitioned-subsets") {
    const double lambda = get_double(sp, "lambda", 1.0);
    const double gamma = get_double(sp, "gamma", 0.0);
    const Solver solver = parse_solver(get_param(sp, "solver", "exhaustive"));
    result.explanation =
        partitioned_subsets(u, lambda, gamma, solver, threads);
    result.resolved.summary.params["lambda"] = std::to_string(lambda);
    result.resolved.summary.params["gamma"] = std::to_string(gamma);
  } else {
    throw ConfigError("unknown summary label '" + method.summary.label + "'");
  }

  return result;
}

}  // namespace rex
