#pragma once

#include <optional>

#include "rex/behavior.hpp"
#include "rex/data.hpp"
#include "rex/models.hpp"
#include "rex/registry.hpp"
#include "rex/removal.hpp"
#include "rex/summary.hpp"

namespace rex {

// Invalid run configurations (bad labels, missing instance, wrong model
// kind). Distinct from Error so the CLI can map them to their own exit code.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct EngineConfig {
  MethodSpec method;
  int instance = -1;    // required by local behaviors, forbidden otherwise
  int output_index = 0;
  std::uint64_t seed = 0;
  int samples = 0;      // summary sampling budget override; 0 keeps defaults
  int threads = 1;
};

struct EngineResult {
  Explanation explanation;
  MethodSpec resolved;  // all defaults materialized; reports reproduce runs
  std::optional<double> intercept;  // linear-model summaries only
};

bool behavior_is_local(const std::string& label);

// Builds the subset function for an executable removal label. `model` is
// ignored by separate-models (which trains its own table) and must hold a
// decision tree for tree-distribution.
SubsetFunction build_removal(const std::string& label,
                             const std::map<std::string, std::string>& params,
                             const AnyModel& model, const LabeledDataset& data);

EngineResult run_explanation(const LabeledDataset& data, const AnyModel& model,
                             const EngineConfig& config);

}  // namespace rex
