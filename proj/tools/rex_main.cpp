// Command-line surface for the removal-based explanation engine.
//
// Subcommands:
//   explain  run a preset or an explicit (removal, behavior, summary) triple
//   fit      train a model on a CSV dataset and serialize it to JSON
//   grid     emit the method grid (axes, occupancy, neighbors)
//   verify   run the invariance / extension / identity / axiom diagnostics
//
// Exit codes: 0 ok, 1 verification failure, 2 config error, 3 runtime error.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rex/engine.hpp"

namespace {

using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct DataOptions {
  std::string data_path;
  std::string schema_path;
  std::string label_column;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--data", opts.data_path, "CSV dataset path")->required();
  cmd->add_option("--schema", opts.schema_path,
                  "sidecar schema JSON (columns + label)");
  cmd->add_option("--label", opts.label_column,
                  "label column name (all feature columns continuous)");
}

rex::LabeledDataset load_dataset(const DataOptions& opts) {
  rex::DatasetSchema schema;
  if (!opts.schema_path.empty()) {
    schema = rex::DatasetSchema::from_json_file(opts.schema_path);
  } else if (!opts.label_column.empty()) {
    // Build a schema from the CSV header: every column continuous, one label.
    std::ifstream in(opts.data_path);
    if (!in) throw rex::ParseError("cannot open '" + opts.data_path + "'");
    std::string header;
    if (!std::getline(in, header)) {
      throw rex::ParseError("empty data file");
    }
    if (!header.empty() && header.back() == '\r') header.pop_back();
    std::size_t start = 0;
    while (start <= header.size()) {
      const std::size_t end = header.find(',', start);
      schema.columns.push_back(
          {header.substr(start, end == std::string::npos ? std::string::npos
                                                         : end - start),
           rex::ColumnKind::continuous});
      if (end == std::string::npos) break;
      start = end + 1;
    }
    schema.label = opts.label_column;
    bool found = false;
    for (const auto& c : schema.columns) found |= c.name == *schema.label;
    if (!found) {
      throw rex::SchemaMismatch("label column '" + opts.label_column +
                                "' not found in the CSV header");
    }
  } else {
    throw rex::SchemaMismatch("either --schema or --label is required");
  }
  return rex::load_csv(opts.data_path, schema);
}

rex::AnyModel resolve_model(const std::string& spec,
                            const rex::LabeledDataset& data, int max_depth,
                            int min_leaf) {
  if (spec == "linear") return rex::fit_linear(data);
  if (spec == "logistic") return rex::fit_logistic(data);
  if (spec == "tree") {
    rex::TreeFitOptions opts;
    opts.max_depth = max_depth;
    opts.min_leaf = min_leaf;
    opts.classification = data.label_is_class;
    return rex::fit_tree(data, opts);
  }
  return rex::load_model(spec);
}

// "--removal id,key=value,key=value" style axis arguments.
rex::MethodAxis parse_axis(const std::string& text) {
  rex::MethodAxis axis;
  std::size_t start = 0;
  bool first = true;
  while (start <= text.size()) {
    const std::size_t end = text.find(',', start);
    const std::string tok = text.substr(
        start, end == std::string::npos ? std::string::npos : end - start);
    if (first) {
      axis.label = tok;
      first = false;
    } else if (!tok.empty()) {
      const std::size_t eq = tok.find('=');
      if (eq == std::string::npos) {
        throw rex::ConfigError("axis parameter '" + tok +
                               "' is not key=value");
      }
      axis.params[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return axis;
}

ordered_json axis_json(const rex::MethodAxis& axis) {
  ordered_json j;
  j["label"] = axis.label;
  ordered_json params = ordered_json::object();
  for (const auto& [k, v] : axis.params) params[k] = v;
  j["params"] = std::move(params);
  return j;
}

ordered_json method_json(const rex::MethodSpec& spec) {
  ordered_json j;
  j["name"] = spec.name;
  j["removal"] = axis_json(spec.removal);
  j["behavior"] = axis_json(spec.behavior);
  j["summary"] = axis_json(spec.summary);
  j["substituted"] = spec.substituted;
  if (spec.substituted) j["substitution_note"] = spec.substitution_note;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw rex::ParseError("cannot open '" + path + "' for writing");
  out << text;
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

int cmd_explain(const DataOptions& data_opts, const std::string& model_spec,
                const std::string& preset_name, const std::string& removal,
                const std::string& behavior, const std::string& summary,
                int instance, int output_index, std::uint64_t seed,
                int samples, int threads, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const rex::LabeledDataset data = load_dataset(data_opts);

  rex::MethodSpec method;
  if (!preset_name.empty()) {
    method = rex::preset(preset_name);
    if (!removal.empty()) method.removal = parse_axis(removal);
    if (!behavior.empty()) method.behavior = parse_axis(behavior);
    if (!summary.empty()) method.summary = parse_axis(summary);
  } else {
    if (removal.empty() || behavior.empty() || summary.empty()) {
      throw rex::ConfigError(
          "either --preset or all of --removal/--behavior/--summary are "
          "required");
    }
    method.removal = parse_axis(removal);
    method.behavior = parse_axis(behavior);
    method.summary = parse_axis(summary);
  }

  const rex::AnyModel model = resolve_model(model_spec, data, 4, 1);

  rex::EngineConfig config;
  config.method = method;
  config.instance = instance;
  config.output_index = output_index;
  config.seed = seed;
  config.samples = samples;
  config.threads = threads;
  const rex::EngineResult result = rex::run_explanation(data, model, config);

  ordered_json report;
  report["method"] = method_json(result.resolved);
  report["seed"] = seed;
  if (instance >= 0) report["instance"] = instance;
  if (method.behavior.label == "prediction") {
    report["output_index"] = output_index;
  }
  report["dim"] = data.dim();
  report["feature_names"] = data.feature_names;
  if (result.explanation.kind == rex::ExplanationKind::attribution) {
    report["kind"] = "attribution";
    report["attributions"] = result.explanation.scores;
    if (result.explanation.stderrs) {
      report["stderr"] = *result.explanation.stderrs;
    }
    // Plot-data export: one bar per feature.
    ordered_json bars = ordered_json::array();
    for (std::size_t i = 0; i < result.explanation.scores.size(); ++i) {
      ordered_json bar;
      bar["feature"] = data.feature_names[i];
      bar["score"] = result.explanation.scores[i];
      if (result.explanation.stderrs) {
        bar["stderr"] = (*result.explanation.stderrs)[i];
      }
      bars.push_back(std::move(bar));
    }
    report["bars"] = std::move(bars);
  } else {
    report["kind"] = "selection";
    report["selected"] = result.explanation.selected->members();
  }
  if (result.intercept) report["intercept"] = *result.intercept;
  report["evaluations_used"] = result.explanation.evaluations_used;
  const auto t1 = std::chrono::steady_clock::now();
  report["wall_time_ms"] =
      std::chrono::duration<double, std::milli>(t1 - t0).count();

  write_text(out_path, report.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const DataOptions& data_opts, const std::string& family,
            int max_depth, int min_leaf, const std::string& out_path) {
  const rex::LabeledDataset data = load_dataset(data_opts);
  if (family != "linear" && family != "logistic" && family != "tree") {
    throw rex::ConfigError("--model must be linear, logistic, or tree");
  }
  const rex::AnyModel model = resolve_model(family, data, max_depth, min_leaf);
  write_text(out_path, rex::model_to_json(model));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

int cmd_grid(const std::string& out_path) {
  ordered_json j;
  j["axes"]["removal"] = rex::removal_axis_labels();
  j["axes"]["behavior"] = rex::behavior_axis_labels();
  j["axes"]["summary"] = rex::summary_axis_labels();

  ordered_json executable = ordered_json::object();
  for (const auto& label : rex::removal_axis_labels()) {
    ordered_json e;
    e["executable"] = rex::removal_label_executable(label);
    if (!rex::removal_label_executable(label)) {
      e["bound_to"] = rex::substituted_removal_binding(label);
    }
    executable[label] = std::move(e);
  }
  j["removal_bindings"] = std::move(executable);

  ordered_json presets = ordered_json::array();
  for (const auto& p : rex::all_presets()) presets.push_back(method_json(p));
  j["presets"] = std::move(presets);

  ordered_json positions = ordered_json::array();
  for (const auto& cell : rex::enumerate_grid()) {
    ordered_json c;
    c["removal"] = cell.position.removal;
    c["behavior"] = cell.position.behavior;
    c["summary"] = cell.position.summary;
    c["presets"] = cell.presets;
    positions.push_back(std::move(c));
  }
  j["positions"] = std::move(positions);

  ordered_json neighbor_map = ordered_json::object();
  for (const auto& p : rex::all_presets()) {
    ordered_json list = ordered_json::array();
    for (const auto& n : rex::neighbors(p)) {
      ordered_json e;
      e["name"] = n.spec.name;
      e["axis"] = n.axis;
      list.push_back(std::move(e));
    }
    neighbor_map[p.name] = std::move(list);
  }
  j["neighbors"] = std::move(neighbor_map);

  write_text(out_path, j.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckOutcome {
  bool ok = true;
  std::string first_failure;

  void record(const std::string& name, bool pass) {
    if (!pass && ok) {
      ok = false;
      first_failure = name;
    }
  }
};

int cmd_verify(const DataOptions& data_opts, std::uint64_t seed,
               bool corrupt_extension) {
  const rex::LabeledDataset data = load_dataset(data_opts);
  const int d = data.dim();
  if (d < 1 || d > 8) {
    throw rex::ConfigError("verify requires 1 <= d <= 8");
  }
  if (!data.has_labels()) {
    throw rex::ConfigError("verify requires a labeled dataset");
  }

  CheckOutcome outcome;
  const rex::AnyModel model = rex::fit_linear(data);
  const rex::AnyModel tree_model = [&] {
    rex::TreeFitOptions opts;
    opts.max_depth = 3;
    opts.classification = data.label_is_class;
    return rex::AnyModel{rex::fit_tree(data, opts)};
  }();

  bool all_categorical = true;
  for (auto kind : data.kinds) {
    all_categorical &= kind == rex::ColumnKind::categorical;
  }

  const int n_probes = 200;
  const auto subsets = rex::enumerate_subsets(d);

  for (const auto& label : rex::removal_axis_labels()) {
    if (!rex::removal_label_executable(label)) continue;
    if (label == "marginalize-conditional" && all_categorical) continue;
    std::map<std::string, std::string> params;
    std::string strategy = label;
    if (label == "marginalize-conditional") {
      params["variant"] = "gaussian";
      params["mode"] = "plugin";
    }
    rex::SubsetFunction f = [&] {
      const rex::AnyModel& m =
          label == "tree-distribution" ? tree_model : model;
      return rex::build_removal(label, params, m, data);
    }();
    if (corrupt_extension && label == "zeros") {
      // Negative-control fixture: breaks agreement with the model at S = D.
      rex::SubsetFunction base = f;
      rex::PredictionModel pm = *f.extension_of();
      f = rex::SubsetFunction(
          f.dim(), f.out_dim(), f.is_invariant(), pm,
          [base](std::span<const double> x, const rex::FeatureSubset& s,
                 std::uint64_t sd) {
            auto out = base.evaluate(x, s, sd);
            if (s.is_full()) {
              for (double& v : out) v += 1.0;
            }
            return out;
          });
    }

    // Extension probes.
    std::vector<std::vector<double>> probes;
    for (int k = 0; k < n_probes; ++k) {
      rex::Rng rng(rex::mix_seed(seed, static_cast<std::uint64_t>(k)));
      const std::size_t row = rng.uniform_index(data.n());
      std::vector<double> x(data.features.row(row).begin(),
                            data.features.row(row).end());
      probes.push_back(std::move(x));
    }
    const bool ext_ok =
        rex::check_extension(f, *f.extension_of(), probes);
    std::printf("check_extension    %-26s %s\n", strategy.c_str(),
                ext_ok ? "pass (exact)" : "FAIL");
    outcome.record("check_extension(" + strategy + ")", ext_ok);

    // Invariance probes: perturb held-out coordinates only.
    int violations = 0;
    for (int k = 0; k < n_probes; ++k) {
      rex::Rng rng(rex::mix_seed(seed + 1, static_cast<std::uint64_t>(k)));
      const std::size_t row = rng.uniform_index(data.n());
      std::vector<double> x(data.features.row(row).begin(),
                            data.features.row(row).end());
      const rex::FeatureSubset s = subsets[rng.uniform_index(subsets.size())];
      std::vector<double> alt = x;
      for (int i = 0; i < d; ++i) {
        if (s.contains(i)) continue;
        if (data.kinds[static_cast<std::size_t>(i)] ==
            rex::ColumnKind::categorical) {
          const std::size_t other = rng.uniform_index(data.n());
          alt[static_cast<std::size_t>(i)] =
              data.features.at(other, static_cast<std::size_t>(i));
        } else {
          alt[static_cast<std::size_t>(i)] += rng.uniform(0.5, 2.5);
        }
      }
      if (!rex::check_invariance(f, x, alt, s, seed)) ++violations;
    }
    if (f.is_invariant()) {
      std::printf("check_invariance   %-26s %s (%d/%d probes)\n",
                  strategy.c_str(), violations == 0 ? "pass" : "FAIL",
                  n_probes - violations, n_probes);
      outcome.record("check_invariance(" + strategy + ")", violations == 0);
    } else {
      std::printf("check_invariance   %-26s non-invariant (expected), "
                  "%d violating probes\n",
                  strategy.c_str(), violations);
      outcome.record("check_invariance(" + strategy + ") non-invariance",
                     violations > 0);
    }
  }

  // Identity suite over a deterministic and a seeded-stochastic strategy.
  {
    const rex::BackgroundData bg = rex::BackgroundData::from_dataset(data);
    const rex::PredictionModel pm = rex::as_prediction_model(model);
    const rex::SubsetFunction deterministic = rex::marginal_removal(pm, bg);
    const rex::SubsetFunction stochastic = rex::uniform_removal(
        pm, rex::FeatureBounds::from_background(bg), 16);
    for (const auto& [name, f] :
         {std::pair<const char*, const rex::SubsetFunction*>{
              "marginal-exact", &deterministic},
          {"uniform-sampled", &stochastic}}) {
      const auto report = rex::verify_behavior_identities(
          *f, data, rex::LossFunction::squared_error(), seed);
      const double worst = report.max_discrepancy();
      std::printf("behavior_identities %-25s max discrepancy %.3e %s\n", name,
                  worst, worst < 1e-12 ? "pass" : "FAIL");
      outcome.record(std::string("behavior_identities(") + name + ")",
                     worst < 1e-12);
    }
  }

  // Shapley axioms on random games of the dataset's dimension.
  {
    double worst = 0.0;
    for (int g = 0; g < 20; ++g) {
      std::vector<double> values(subsets.size());
      rex::Rng rng(rex::mix_seed(seed + 2, static_cast<std::uint64_t>(g)));
      for (double& v : values) v = rng.uniform(-1.0, 1.0);
      rex::SetFunction u(d, [&values](const rex::FeatureSubset& s) {
        return values[s.bits()];
      });
      const auto phi = rex::shapley_exact(u);
      double total = 0.0;
      for (double p : phi.scores) total += p;
      const double efficiency =
          std::abs(total - (values[subsets.size() - 1] - values[0]));
      worst = std::max(worst, efficiency);
    }
    std::printf("shapley_efficiency %-25s max residual %.3e %s\n", "",
                worst, worst < 1e-10 ? "pass" : "FAIL");
    outcome.record("shapley_efficiency", worst < 1e-10);
  }

  if (!outcome.ok) {
    std::printf("verification FAILED: %s\n", outcome.first_failure.c_str());
    return kExitVerifyFailure;
  }
  std::printf("all checks passed\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Removal-based model explanations"};
  app.require_subcommand(1);

  // explain
  auto* explain = app.add_subcommand("explain", "generate an explanation");
  DataOptions explain_data;
  add_data_options(explain, explain_data);
  std::string model_spec = "linear";
  std::string preset_name, removal, behavior, summary, out_path;
  int instance = -1;
  int output_index = 0;
  std::uint64_t seed = 0;
  int samples = 0;
  int threads = 1;
  explain->add_option("--model", model_spec,
                      "model family (linear|logistic|tree) or model JSON "
                      "path");
  explain->add_option("--preset", preset_name, "preset method name");
  explain->add_option("--removal", removal, "removal label[,key=value...]");
  explain->add_option("--behavior", behavior, "behavior label[,key=value...]");
  explain->add_option("--summary", summary, "summary label[,key=value...]");
  explain->add_option("--instance", instance, "row index for local behaviors");
  explain->add_option("--output-index", output_index,
                      "model output to explain");
  explain->add_option("--seed", seed, "random seed (recorded in the report)");
  explain->add_option("--samples", samples, "summary sampling budget");
  explain->add_option("--threads", threads, "evaluation threads");
  explain->add_option("--out", out_path, "report path (default stdout)");

  // fit
  auto* fit = app.add_subcommand("fit", "fit and serialize a model");
  DataOptions fit_data;
  add_data_options(fit, fit_data);
  std::string fit_family = "linear";
  int max_depth = 4;
  int min_leaf = 1;
  std::string fit_out;
  fit->add_option("--model", fit_family, "linear|logistic|tree");
  fit->add_option("--max-depth", max_depth, "tree depth limit");
  fit->add_option("--min-leaf", min_leaf, "minimum samples per leaf");
  fit->add_option("--out", fit_out, "model JSON path (default stdout)");

  // grid
  auto* grid = app.add_subcommand("grid", "emit the method grid");
  std::string grid_out;
  grid->add_option("--out", grid_out, "grid JSON path (default stdout)");

  // verify
  auto* verify = app.add_subcommand("verify", "run framework diagnostics");
  DataOptions verify_data;
  add_data_options(verify, verify_data);
  std::uint64_t verify_seed = 0;
  bool corrupt_extension = false;
  verify->add_option("--seed", verify_seed, "random seed");
  verify
      ->add_flag("--corrupt-extension", corrupt_extension,
                 "inject a broken extension (negative-control fixture)")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (explain->parsed()) {
      return cmd_explain(explain_data, model_spec, preset_name, removal,
                         behavior, summary, instance, output_index, seed,
                         samples, threads, out_path);
    }
    if (fit->parsed()) {
      return cmd_fit(fit_data, fit_family, max_depth, min_leaf, fit_out);
    }
    if (grid->parsed()) return cmd_grid(grid_out);
    if (verify->parsed()) {
      return cmd_verify(verify_data, verify_seed, corrupt_extension);
    }
  } catch (const rex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const rex::SchemaMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const rex::UnknownPreset& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const rex::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitConfigError;
}
