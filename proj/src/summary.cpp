#include "distsynth/summary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "distsynth/error.hpp"

namespace distsynth {

namespace {

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string interval_label(double lo, double hi, bool closed) {
  return "[" + short_number(lo) + ", " + short_number(hi) + (closed ? "]" : ")");
}

// Count of interior edges <= x, i.e. the half-open bin index with the
// outermost bins absorbing anything beyond the end edges.
std::size_t locate(const std::vector<double>& edges, double x) {
  auto first = edges.begin() + 1;
  auto last = edges.end() - 1;
  return static_cast<std::size_t>(std::upper_bound(first, last, x) - first);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::size_t BinSpec::main_bin(double x) const { return locate(main_edges, x); }

std::size_t BinSpec::sub_bin(double x) const {
  if (!refined) throw Error(ErrorCode::MissingBinSpec, "'" + variable + "' has no refined bin");
  return locate(refined->sub_edges, x);
}

std::string BinSpec::bin_label(std::size_t bin) const {
  return interval_label(main_edges[bin], main_edges[bin + 1], bin + 1 == bin_count());
}

std::string BinSpec::sub_label(std::size_t sub) const {
  const auto& e = refined->sub_edges;
  const bool closed = sub + 2 == e.size() && refined->main_bin + 1 == bin_count();
  return interval_label(e[sub], e[sub + 1], closed);
}

std::vector<double> FrequencyTable::proportions() const {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(c.proportion);
  return out;
}

std::vector<double> FrequencyTable::sub_proportions() const {
  std::vector<double> out;
  out.reserve(sub_cells.size());
  for (const auto& c : sub_cells) out.push_back(c.proportion);
  return out;
}

StructuralComponent StructuralComponent::of(std::vector<std::string> variables) {
  StructuralComponent c;
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (i) c.id += '+';
    c.id += variables[i];
  }
  c.variables = std::move(variables);
  return c;
}

void StructuralComponent::validate(const VariableSchema& schema) const {
  if (variables.size() < 2 || variables.size() > 4)
    throw Error(ErrorCode::InvalidComponent, "component '" + id + "' must have 2-4 variables");
  std::set<std::string> seen;
  for (const auto& v : variables) {
    if (!schema.find(v))
      throw Error(ErrorCode::InvalidComponent, "component '" + id + "' names unknown variable '" + v + "'");
    if (!seen.insert(v).second)
      throw Error(ErrorCode::InvalidComponent, "component '" + id + "' repeats '" + v + "'");
  }
}

std::string ContingencyTable::label(const LevelKey& key) const {
  std::string out = "(";
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i) out += ", ";
    out += level_labels[i][key[i]];
  }
  return out + ")";
}

std::vector<std::string> ContingencyTable::labels(const LevelKey& key) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < key.size(); ++i) out.push_back(level_labels[i][key[i]]);
  return out;
}

double ContingencyTable::at(const LevelKey& key) const {
  auto it = cells.find(key);
  return it == cells.end() ? 0.0 : it->second;
}

BinSpec fit_bins(const Dataset& real, const std::string& variable, std::size_t n_main) {
  const auto var = real.schema().index_of(variable);
  if (!real.schema()[var].is_continuous())
    throw Error(ErrorCode::NotContinuous, "'" + variable + "' is not continuous");
  if (real.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit bins on an empty dataset");
  if (n_main == 0) throw Error(ErrorCode::DegenerateBins, "need at least one bin");
  auto xs = real.column_numbers(var);
  std::sort(xs.begin(), xs.end());

  BinSpec spec;
  spec.variable = variable;
  spec.requested_bins = n_main;
  for (std::size_t i = 0; i <= n_main; ++i) {
    const double q = static_cast<double>(i) / static_cast<double>(n_main);
    spec.main_edges.push_back(i == n_main ? xs.back() : quantile_sorted(xs, q));
  }
  spec.main_edges.erase(std::unique(spec.main_edges.begin(), spec.main_edges.end()),
                        spec.main_edges.end());
  if (spec.main_edges.size() < 2)
    throw Error(ErrorCode::DegenerateBins, "all values of '" + variable + "' are identical");
  spec.merged_bins = n_main - spec.bin_count();
  return spec;
}

BinSpecMap fit_all_bins(const Dataset& real, std::size_t n_main) {
  BinSpecMap out;
  for (const auto& v : real.schema())
    if (v.is_continuous()) out.emplace(v.name, fit_bins(real, v.name, n_main));
  return out;
}

RefineResult refine_bins(const BinSpec& spec, const FrequencyTable& real_table,
                         const FrequencyTable& synth_table, std::size_t n_sub) {
  if (real_table.cells.size() != spec.bin_count() || synth_table.cells.size() != spec.bin_count())
    throw Error(ErrorCode::LabelMismatch, "tables do not match the bins of '" + spec.variable + "'");
  RefineResult result{spec, false};
  result.spec.refined.reset();
  std::size_t best = 0;
  double best_gap = 0.0;
  for (std::size_t i = 0; i < spec.bin_count(); ++i) {
    const double gap = real_table.cells[i].proportion - synth_table.cells[i].proportion;
    if (gap > best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  if (!(best_gap > 0.0)) {
    result.no_positive_discrepancy = true;
    return result;
  }
  BinSpec::Refinement r;
  r.main_bin = best;
  const double lo = spec.lower(best);
  const double hi = spec.upper(best);
  for (std::size_t k = 0; k <= n_sub; ++k)
    r.sub_edges.push_back(k == n_sub ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_sub));
  result.spec.refined = std::move(r);
  return result;
}

const BinSpec* find_spec(const BinSpecMap& specs, const std::string& name) {
  auto it = specs.find(name);
  return it == specs.end() ? nullptr : &it->second;
}

std::uint32_t level_of(const Dataset& data, std::size_t row, std::size_t var,
                       const BinSpec* spec) {
  if (data.schema()[var].is_discrete()) return data.level(row, var);
  if (spec == nullptr)
    throw Error(ErrorCode::MissingBinSpec, "no bins for '" + data.schema()[var].name + "'");
  return static_cast<std::uint32_t>(spec->main_bin(data.number(row, var)));
}

std::vector<std::string> level_labels(const Variable& var, const BinSpec* spec) {
  if (var.is_discrete()) return var.discrete().categories;
  if (spec == nullptr) throw Error(ErrorCode::MissingBinSpec, "no bins for '" + var.name + "'");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec->bin_count(); ++i) out.push_back(spec->bin_label(i));
  return out;
}

FrequencyTable summarize_marginal(const Dataset& data, const std::string& variable,
                                  const BinSpec* spec) {
  const auto var = data.schema().index_of(variable);
  const auto& v = data.schema()[var];
  if (v.is_continuous() && spec == nullptr)
    throw Error(ErrorCode::MissingBinSpec, "no bins for '" + variable + "'");

  FrequencyTable t;
  t.unit = variable;
  t.records = data.size();
  const auto labels = level_labels(v, spec);
  std::vector<std::size_t> counts(labels.size(), 0);
  std::vector<std::size_t> sub_counts;
  const bool refined = v.is_continuous() && spec->refined.has_value();
  if (refined) sub_counts.assign(spec->sub_bin_count(), 0);

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto level = level_of(data, i, var, spec);
    ++counts[level];
    if (refined && level == spec->refined->main_bin) ++sub_counts[spec->sub_bin(data.number(i, var))];
  }
  const double n = static_cast<double>(data.size());
  auto prop = [&](std::size_t c) { return data.empty() ? 0.0 : static_cast<double>(c) / n; };
  for (std::size_t k = 0; k < labels.size(); ++k) t.cells.push_back({labels[k], prop(counts[k])});
  if (refined) {
    t.refined_bin = spec->refined->main_bin;
    for (std::size_t k = 0; k < sub_counts.size(); ++k)
      t.sub_cells.push_back({spec->sub_label(k), prop(sub_counts[k])});
  }
  return t;
}

ContingencyTable summarize_joint(const Dataset& data, const StructuralComponent& component,
                                 const BinSpecMap& specs) {
  component.validate(data.schema());
  ContingencyTable t;
  t.component = component;
  t.records = data.size();
  std::vector<std::size_t> vars;
  std::vector<const BinSpec*> var_specs;
  for (const auto& name : component.variables) {
    const auto idx = data.schema().index_of(name);
    const BinSpec* spec = find_spec(specs, name);
    if (data.schema()[idx].is_continuous() && spec == nullptr)
      throw Error(ErrorCode::MissingBinSpec, "no bins for '" + name + "'");
    vars.push_back(idx);
    var_specs.push_back(spec);
    t.level_labels.push_back(level_labels(data.schema()[idx], spec));
  }
  std::map<LevelKey, std::size_t> counts;
  LevelKey key(vars.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < vars.size(); ++k) key[k] = level_of(data, i, vars[k], var_specs[k]);
    ++counts[key];
  }
  const double n = static_cast<double>(data.size());
  for (const auto& [k, c] : counts) t.cells.emplace(k, static_cast<double>(c) / n);
  return t;
}

const FrequencyTable* SummarySet::marginal(const std::string& unit) const {
  for (const auto& m : marginals)
    if (m.unit == unit) return &m;
  return nullptr;
}

const ContingencyTable* SummarySet::joint(const std::string& id) const {
  for (const auto& j : joints)
    if (j.component.id == id) return &j;
  return nullptr;
}

SummarySet summarize(const Dataset& data, const std::vector<StructuralComponent>& components,
                     const BinSpecMap& specs, bool with_pairs) {
  SummarySet s;
  s.records = data.size();
  for (const auto& v : data.schema())
    s.marginals.push_back(summarize_marginal(data, v.name, find_spec(specs, v.name)));
  for (const auto& c : components) s.joints.push_back(summarize_joint(data, c, specs));
  if (with_pairs) {
    const auto& schema = data.schema();
    for (std::size_t a = 0; a < schema.size(); ++a)
      for (std::size_t b = a + 1; b < schema.size(); ++b)
        s.pairs.push_back(
            summarize_joint(data, StructuralComponent::of({schema[a].name, schema[b].name}), specs));
  }
  return s;
}

std::vector<double> marginalize(const ContingencyTable& table, std::size_t position) {
  std::vector<double> out(table.level_labels.at(position).size(), 0.0);
  for (const auto& [key, p] : table.cells) out[key[position]] += p;
  return out;
}

nlohmann::json frequency_table_to_json(const FrequencyTable& t, const BinSpec* spec,
                                       bool include_sub_cells) {
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t i = 0; i < t.cells.size(); ++i) {
    nlohmann::json c = {{"label", t.cells[i].label}, {"proportion", t.cells[i].proportion}};
    if (spec != nullptr) c["range"] = {spec->lower(i), spec->upper(i)};
    cells.push_back(std::move(c));
  }
  nlohmann::json j = {{"unit", t.unit},
                      {"kind", spec != nullptr ? "continuous" : "discrete"},
                      {"cells", std::move(cells)}};
  if (include_sub_cells && t.refined_bin && spec != nullptr && spec->refined) {
    nlohmann::json sub = nlohmann::json::array();
    const auto& e = spec->refined->sub_edges;
    for (std::size_t k = 0; k < t.sub_cells.size(); ++k)
      sub.push_back({{"label", t.sub_cells[k].label},
                     {"range", {e[k], e[k + 1]}},
                     {"proportion", t.sub_cells[k].proportion}});
    j["refined_bin"] = *t.refined_bin;
    j["sub_cells"] = std::move(sub);
  }
  return j;
}

nlohmann::json contingency_table_to_json(const ContingencyTable& t) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [key, p] : t.cells) cells.push_back({{"labels", t.labels(key)}, {"proportion", p}});
  return {{"unit", t.component.id}, {"variables", t.component.variables}, {"cells", std::move(cells)}};
}

nlohmann::json summary_set_to_json(const SummarySet& s, const BinSpecMap& specs,
                                   bool include_sub_cells) {
  nlohmann::json marg = nlohmann::json::array();
  for (const auto& m : s.marginals)
    marg.push_back(frequency_table_to_json(m, find_spec(specs, m.unit), include_sub_cells));
  nlohmann::json joints = nlohmann::json::array();
  for (const auto& j : s.joints) joints.push_back(contingency_table_to_json(j));
  return {{"records", s.records}, {"marginals", std::move(marg)}, {"joints", std::move(joints)}};
}

}  // namespace distsynth
