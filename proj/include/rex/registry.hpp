#pragma once

#include <map>
#include <string>
#include <vector>

#include "rex/core.hpp"

namespace rex {

// ---------------------------------------------------------------------------
// Method specifications
//
// A method is a (removal, behavior, summary) triple. Axis labels use the
// framework's closed vocabularies; params carry the execution knobs. Presets
// whose original removal cannot run on tabular data keep their original
// label for grid placement and execute through a documented substitute.
// ---------------------------------------------------------------------------

struct MethodAxis {
  std::string label;
  std::map<std::string, std::string> params;
};

struct MethodSpec {
  std::string name;  // preset display name; empty for custom triples
  MethodAxis removal;
  MethodAxis behavior;
  MethodAxis summary;
  bool substituted = false;
  std::string substitution_note;
};

// ---------------------------------------------------------------------------
// Axis vocabularies
// ---------------------------------------------------------------------------

const std::vector<std::string>& removal_axis_labels();   // 13 labels
const std::vector<std::string>& behavior_axis_labels();  // 5 labels
const std::vector<std::string>& summary_axis_labels();   // 8 labels

// True for the removal labels that execute directly; the remaining labels
// run through substituted_removal_binding().
bool removal_label_executable(const std::string& label);
std::string substituted_removal_binding(const std::string& label);

// ---------------------------------------------------------------------------
// Presets (one per method table row)
// ---------------------------------------------------------------------------

const std::vector<MethodSpec>& all_presets();

// Case-insensitive, punctuation-insensitive lookup ("ime-2009", "IME (2009)"
// and "ime_2009" all resolve). Throws UnknownPreset.
MethodSpec preset(const std::string& name);

std::string normalize_method_name(const std::string& name);

// ---------------------------------------------------------------------------
// The method grid
// ---------------------------------------------------------------------------

struct GridPosition {
  std::string removal;
  std::string behavior;
  std::string summary;

  friend bool operator==(const GridPosition&, const GridPosition&) = default;
};

struct GridCell {
  GridPosition position;
  std::vector<std::string> presets;  // occupants, possibly empty
};

GridPosition position_of(const MethodSpec& spec);

// Full Cartesian product of the axis labels in declaration order, with the
// presets occupying each position.
std::vector<GridCell> enumerate_grid();

struct Neighbor {
  MethodSpec spec;
  std::string axis;  // "removal" | "behavior" | "summary"
};

// Occupied positions at Hamming distance exactly 1 from the spec's position.
// On the removal axis, zeros and default-values count as the same family
// (zeros is the all-zero default baseline).
std::vector<Neighbor> neighbors(const MethodSpec& spec);

}  // namespace rex
