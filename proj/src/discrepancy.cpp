#include "distsynth/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "distsynth/error.hpp"

namespace distsynth {

const CellGap* UnitDiscrepancy::cell(const LevelKey& key) const {
  for (const auto& c : per_cell)
    if (c.key == key) return &c;
  return nullptr;
}

const UnitDiscrepancy* DiscrepancyReport::unit(const std::string& name) const {
  for (const auto& u : marginals)
    if (u.unit == name) return &u;
  for (const auto& u : joints)
    if (u.unit == name) return &u;
  return nullptr;
}

std::vector<const UnitDiscrepancy*> DiscrepancyReport::units() const {
  std::vector<const UnitDiscrepancy*> out;
  for (const auto& u : marginals) out.push_back(&u);
  for (const auto& u : joints) out.push_back(&u);
  return out;
}

double tvd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::LabelMismatch, "tvd over unequal label spaces");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double tvd(const FrequencyTable& p, const FrequencyTable& q) {
  if (p.unit != q.unit) throw Error(ErrorCode::UnitMismatch, "'" + p.unit + "' vs '" + q.unit + "'");
  if (p.cells.size() != q.cells.size())
    throw Error(ErrorCode::LabelMismatch, "label spaces differ for '" + p.unit + "'");
  for (std::size_t i = 0; i < p.cells.size(); ++i)
    if (p.cells[i].label != q.cells[i].label)
      throw Error(ErrorCode::LabelMismatch, "label spaces differ for '" + p.unit + "'");
  const auto a = p.proportions();
  const auto b = q.proportions();
  return tvd(a, b);
}

double tvd(const ContingencyTable& p, const ContingencyTable& q) {
  if (p.component.id != q.component.id)
    throw Error(ErrorCode::UnitMismatch, "'" + p.component.id + "' vs '" + q.component.id + "'");
  if (p.level_labels != q.level_labels)
    throw Error(ErrorCode::LabelMismatch, "level spaces differ for '" + p.component.id + "'");
  double s = 0.0;
  for (const auto& [key, pv] : p.cells) s += std::abs(pv - q.at(key));
  for (const auto& [key, qv] : q.cells)
    if (!p.cells.count(key)) s += qv;
  return 0.5 * s;
}

namespace {

UnitDiscrepancy marginal_unit(const FrequencyTable& real, const FrequencyTable& synth) {
  if (real.cells.size() != synth.cells.size())
    throw Error(ErrorCode::LabelMismatch, "label spaces differ for '" + real.unit + "'");
  UnitDiscrepancy u;
  u.unit = real.unit;
  u.kind = UnitKind::Marginal;
  u.variables = {real.unit};
  u.synth_empty = synth.empty();
  for (std::size_t i = 0; i < real.cells.size(); ++i) {
    const double r = real.cells[i].proportion;
    const double s = synth.cells[i].proportion;
    u.per_cell.push_back({real.cells[i].label, {static_cast<std::uint32_t>(i)}, r, s, r - s});
  }
  u.value = u.synth_empty ? 1.0 : tvd(real, synth);
  // Sub-bins are attached when both sides refined the same main bin.
  if (real.refined_bin && synth.refined_bin == real.refined_bin &&
      real.sub_cells.size() == synth.sub_cells.size()) {
    u.refined_bin = real.refined_bin;
    for (std::size_t k = 0; k < real.sub_cells.size(); ++k) {
      const double r = real.sub_cells[k].proportion;
      const double s = synth.sub_cells[k].proportion;
      u.sub_cells.push_back({real.sub_cells[k].label, {static_cast<std::uint32_t>(k)}, r, s, r - s});
    }
  }
  return u;
}

UnitDiscrepancy joint_unit(const ContingencyTable& real, const ContingencyTable& synth) {
  UnitDiscrepancy u;
  u.unit = real.component.id;
  u.kind = UnitKind::Joint;
  u.variables = real.component.variables;
  u.synth_empty = synth.empty();
  std::set<LevelKey> keys;
  for (const auto& [k, p] : real.cells) keys.insert(k);
  for (const auto& [k, p] : synth.cells) keys.insert(k);
  for (const auto& k : keys) {
    const double r = real.at(k);
    const double s = synth.at(k);
    u.per_cell.push_back({real.label(k), k, r, s, r - s});
  }
  u.value = u.synth_empty ? 1.0 : tvd(real, synth);
  return u;
}

}  // namespace

DiscrepancyReport compute_report(const SummarySet& real, const SummarySet& synth,
                                 const std::vector<StructuralComponent>& components) {
  DiscrepancyReport report;
  report.synth_records = synth.records;
  for (const auto& rm : real.marginals) {
    const auto* sm = synth.marginal(rm.unit);
    if (sm == nullptr) throw Error(ErrorCode::MissingSummary, "no synthetic summary for '" + rm.unit + "'");
    report.marginals.push_back(marginal_unit(rm, *sm));
  }
  for (const auto& c : components) {
    const auto* rj = real.joint(c.id);
    const auto* sj = synth.joint(c.id);
    if (rj == nullptr || sj == nullptr)
      throw Error(ErrorCode::MissingSummary, "no joint summary for '" + c.id + "'");
    report.joints.push_back(joint_unit(*rj, *sj));
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* u : report.units()) {
    sum += u->value;
    ++n;
  }
  report.mean_tvd = n ? sum / static_cast<double>(n) : 0.0;
  return report;
}

nlohmann::json unit_discrepancy_to_json(const UnitDiscrepancy& u, bool include_sub_cells,
                                        std::size_t max_cells) {
  std::vector<const CellGap*> cells;
  for (const auto& c : u.per_cell) cells.push_back(&c);
  if (max_cells > 0 && cells.size() > max_cells) {
    std::stable_sort(cells.begin(), cells.end(), [](const CellGap* a, const CellGap* b) {
      return std::abs(a->gap) > std::abs(b->gap);
    });
    cells.resize(max_cells);
  }
  nlohmann::json jc = nlohmann::json::array();
  for (const auto* c : cells)
    jc.push_back({{"label", c->label}, {"real", c->real}, {"synthetic", c->synth}, {"gap", c->gap}});
  nlohmann::json j = {{"unit", u.unit},
                      {"kind", u.kind == UnitKind::Marginal ? "marginal" : "joint"},
                      {"tvd", u.value},
                      {"cells", std::move(jc)}};
  if (max_cells > 0 && u.per_cell.size() > max_cells) j["omitted_cells"] = u.per_cell.size() - max_cells;
  if (include_sub_cells && u.refined_bin) {
    nlohmann::json sub = nlohmann::json::array();
    for (const auto& c : u.sub_cells)
      sub.push_back({{"label", c.label}, {"real", c.real}, {"synthetic", c.synth}, {"gap", c.gap}});
    j["sub_cells"] = std::move(sub);
  }
  return j;
}

}  // namespace distsynth
