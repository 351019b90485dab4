#pragma once

// Summary-statistics space: quantile bins for continuous variables, frequency
// tables for every variable and contingency tables for variable groups.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "distsynth/schema.hpp"

namespace distsynth {

inline constexpr std::size_t kDefaultMainBins = 6;
inline constexpr std::size_t kDefaultSubBins = 8;

// Main bins are [e_i, e_{i+1}) except the last, which is closed. Values outside
// [e_0, e_n] (possible for synthetic data drawn from schema bounds) fall into
// the outermost bins.
struct BinSpec {
  struct Refinement {
    std::size_t main_bin = 0;
    std::vector<double> sub_edges;  // kDefaultSubBins + 1 equal-width edges
  };

  std::string variable;
  std::vector<double> main_edges;
  std::size_t requested_bins = kDefaultMainBins;
  // Bins lost because tied quantiles collapsed onto the same edge.
  std::size_t merged_bins = 0;
  std::optional<Refinement> refined;

  std::size_t bin_count() const { return main_edges.size() - 1; }
  std::size_t main_bin(double x) const;
  // Sub-bin within the refined main bin; x must map to that main bin.
  std::size_t sub_bin(double x) const;
  std::size_t sub_bin_count() const { return refined ? refined->sub_edges.size() - 1 : 0; }
  double lower(std::size_t bin) const { return main_edges[bin]; }
  double upper(std::size_t bin) const { return main_edges[bin + 1]; }
  std::string bin_label(std::size_t bin) const;
  std::string sub_label(std::size_t sub) const;
};

using BinSpecMap = std::map<std::string, BinSpec>;

struct Cell {
  std::string label;
  double proportion = 0.0;
};

struct FrequencyTable {
  std::string unit;
  std::vector<Cell> cells;
  // Present when the variable's BinSpec is refined: proportions of the
  // refined main bin's sub-intervals, summing to that bin's proportion.
  std::optional<std::size_t> refined_bin;
  std::vector<Cell> sub_cells;
  std::size_t records = 0;
  bool empty() const { return records == 0; }
  std::vector<double> proportions() const;
  std::vector<double> sub_proportions() const;
};

struct StructuralComponent {
  std::string id;
  std::vector<std::string> variables;

  // id is the variable names joined with '+'.
  static StructuralComponent of(std::vector<std::string> variables);
  // Throws Error(InvalidComponent).
  void validate(const VariableSchema& schema) const;
  friend bool operator==(const StructuralComponent&, const StructuralComponent&) = default;
};

using LevelKey = std::vector<std::uint32_t>;

struct ContingencyTable {
  StructuralComponent component;
  // Level labels per component variable (categories or main-bin labels).
  std::vector<std::vector<std::string>> level_labels;
  // Occupied cells only; absent keys have proportion 0.
  std::map<LevelKey, double> cells;
  std::size_t records = 0;

  bool empty() const { return records == 0; }
  std::string label(const LevelKey& key) const;
  std::vector<std::string> labels(const LevelKey& key) const;
  double at(const LevelKey& key) const;
};

// Empirical quantiles (linear interpolation between closest ranks) at
// 0, 1/n, ..., 1. Errors: NotContinuous, EmptyDataset, DegenerateBins.
BinSpec fit_bins(const Dataset& real, const std::string& variable,
                 std::size_t n_main = kDefaultMainBins);
BinSpecMap fit_all_bins(const Dataset& real, std::size_t n_main = kDefaultMainBins);

struct RefineResult {
  BinSpec spec;
  // True when no main bin has real > synth; spec is returned unrefined.
  bool no_positive_discrepancy = false;
};

RefineResult refine_bins(const BinSpec& spec, const FrequencyTable& real_table,
                         const FrequencyTable& synth_table,
                         std::size_t n_sub = kDefaultSubBins);

// Level of a record's value: category level, or main-bin index.
std::uint32_t level_of(const Dataset& data, std::size_t row, std::size_t var,
                       const BinSpec* spec);
std::vector<std::string> level_labels(const Variable& var, const BinSpec* spec);
const BinSpec* find_spec(const BinSpecMap& specs, const std::string& name);

// Errors: MissingBinSpec.
FrequencyTable summarize_marginal(const Dataset& data, const std::string& variable,
                                  const BinSpec* spec);
ContingencyTable summarize_joint(const Dataset& data, const StructuralComponent& component,
                                 const BinSpecMap& specs);

struct SummarySet {
  std::vector<FrequencyTable> marginals;  // schema order
  std::vector<ContingencyTable> joints;
  // All variable pairs; filled for the real dataset when requested.
  std::vector<ContingencyTable> pairs;
  std::size_t records = 0;

  const FrequencyTable* marginal(const std::string& unit) const;
  const ContingencyTable* joint(const std::string& id) const;
};

SummarySet summarize(const Dataset& data, const std::vector<StructuralComponent>& components,
                     const BinSpecMap& specs, bool with_pairs = false);

// Marginal of one component variable from a contingency table (main bins).
std::vector<double> marginalize(const ContingencyTable& table, std::size_t position);

// Payload embedded in proposer prompts.
nlohmann::json frequency_table_to_json(const FrequencyTable& t, const BinSpec* spec,
                                       bool include_sub_cells = true);
nlohmann::json contingency_table_to_json(const ContingencyTable& t);
nlohmann::json summary_set_to_json(const SummarySet& s, const BinSpecMap& specs,
                                   bool include_sub_cells = true);

}  // namespace distsynth
