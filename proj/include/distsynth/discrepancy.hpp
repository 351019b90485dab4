#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "distsynth/summary.hpp"

namespace distsynth {

enum class UnitKind { Marginal, Joint };

struct CellGap {
  std::string label;
  LevelKey key;  // level index (marginal) or level tuple (joint)
  double real = 0.0;
  double synth = 0.0;
  double gap = 0.0;  // real - synth; positive means under-generated
};

struct UnitDiscrepancy {
  std::string unit;
  UnitKind kind = UnitKind::Marginal;
  std::vector<std::string> variables;
  double value = 0.0;  // total variation distance over main cells
  std::vector<CellGap> per_cell;
  // Sub-bin gaps of the refined main bin (continuous marginals only).
  std::optional<std::size_t> refined_bin;
  std::vector<CellGap> sub_cells;
  bool synth_empty = false;

  const CellGap* cell(const LevelKey& key) const;
};

struct DiscrepancyReport {
  std::vector<UnitDiscrepancy> marginals;
  std::vector<UnitDiscrepancy> joints;
  double mean_tvd = 0.0;
  std::size_t synth_records = 0;

  const UnitDiscrepancy* unit(const std::string& name) const;
  // Units in report order: marginals then joints.
  std::vector<const UnitDiscrepancy*> units() const;
};

// Half the L1 distance. Errors: LabelMismatch on unequal lengths.
double tvd(std::span<const double> p, std::span<const double> q);
// Errors: UnitMismatch, LabelMismatch.
double tvd(const FrequencyTable& p, const FrequencyTable& q);
double tvd(const ContingencyTable& p, const ContingencyTable& q);

// Units whose synthetic summary is empty get value 1.0 (maximal discrepancy)
// and are flagged. Errors: MissingSummary(unit).
DiscrepancyReport compute_report(const SummarySet& real, const SummarySet& synth,
                                 const std::vector<StructuralComponent>& components);

nlohmann::json unit_discrepancy_to_json(const UnitDiscrepancy& u, bool include_sub_cells = true,
                                        std::size_t max_cells = 0);

}  // namespace distsynth
