#include "distsynth/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "distsynth/error.hpp"

namespace distsynth {

void ProposerContext::validate() const {
  if (k < 1) throw Error(ErrorCode::InvalidContext, "k must be >= 1");
  if (batch_size < k) throw Error(ErrorCode::InvalidContext, "batch_size must be >= k");
}

double mutual_information(const ContingencyTable& t) {
  if (t.level_labels.size() != 2)
    throw Error(ErrorCode::InvalidComponent, "mutual information needs a pair table");
  const auto pa = marginalize(t, 0);
  const auto pb = marginalize(t, 1);
  double mi = 0.0;
  for (const auto& [key, p] : t.cells) {
    if (p <= 0.0) continue;
    mi += p * std::log(p / (pa[key[0]] * pb[key[1]]));
  }
  return std::max(0.0, mi);
}

std::vector<StructuralComponent> infer_components_by_mi(const VariableSchema& schema,
                                                        const SummarySet& real,
                                                        std::size_t n_components,
                                                        const OracleOptions& options) {
  if (schema.size() < 2) throw Error(ErrorCode::TooFewVariables, "need at least two variables");
  if (real.pairs.empty()) throw Error(ErrorCode::MissingSummary, "pairwise tables are required");

  struct Pair {
    std::string a, b;
    double mi;
  };
  std::vector<Pair> pairs;
  std::map<std::pair<std::string, std::string>, double> mi_of;
  for (const auto& t : real.pairs) {
    const auto& v = t.component.variables;
    const double mi = mutual_information(t);
    pairs.push_back({v[0], v[1], mi});
    mi_of[{v[0], v[1]}] = mi;
    mi_of[{v[1], v[0]}] = mi;
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.mi != y.mi) return x.mi > y.mi;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });

  std::vector<std::set<std::string>> taken;
  std::vector<StructuralComponent> out;
  auto covered = [&](const std::set<std::string>& s) {
    for (const auto& t : taken)
      if (std::includes(t.begin(), t.end(), s.begin(), s.end())) return true;
    return false;
  };
  const std::size_t max_size = std::clamp<std::size_t>(options.max_component_size, 2, 4);
  for (const auto& seed : pairs) {
    if (out.size() >= n_components) break;
    std::set<std::string> members{seed.a, seed.b};
    if (covered(members)) continue;
    std::vector<std::string> ordered{seed.a, seed.b};
    while (ordered.size() < max_size) {
      std::string best;
      double best_mi = -1.0;
      for (const auto& v : schema) {
        if (members.count(v.name)) continue;
        double strongest = 0.0;
        for (const auto& m : ordered) strongest = std::max(strongest, mi_of[{v.name, m}]);
        if (strongest > best_mi) {
          best_mi = strongest;
          best = v.name;
        }
      }
      if (best.empty() || !(best_mi > 0.0) || best_mi < options.grow_ratio * seed.mi) break;
      auto grown = members;
      grown.insert(best);
      if (covered(grown)) break;
      members = std::move(grown);
      ordered.push_back(best);
    }
    // Schema order keeps component ids stable regardless of growth order.
    std::vector<std::string> in_schema_order;
    for (const auto& v : schema)
      if (members.count(v.name)) in_schema_order.push_back(v.name);
    taken.push_back(members);
    out.push_back(StructuralComponent::of(std::move(in_schema_order)));
  }
  return out;
}

std::string oracle_focus_unit(const DiscrepancyReport& report) {
  const UnitDiscrepancy* best = nullptr;
  for (const auto* u : report.units()) {
    if (best == nullptr || u->value > best->value ||
        (u->value == best->value && u->unit < best->unit))
      best = u;
  }
  return best ? best->unit : std::string();
}

namespace {

constexpr std::int64_t kUnassigned = -1;
using Levels = std::vector<std::int64_t>;

struct UnitState {
  const UnitDiscrepancy* source = nullptr;
  std::vector<std::size_t> vars;
  std::map<LevelKey, double> target;  // (m + b) * real
  std::map<LevelKey, double> cum;     // m * synth + this batch's allocations
  // Overshoot the unit may absorb while its discrepancy stays non-increasing.
  double budget = 0.0;
  double overshoot = 0.0;
  bool binding = false;

  double deficit(const LevelKey& key) const {
    auto t = target.find(key);
    auto c = cum.find(key);
    return (t == target.end() ? 0.0 : t->second) - (c == cum.end() ? 0.0 : c->second);
  }

  bool consistent(const LevelKey& key, const Levels& levels) const {
    for (std::size_t p = 0; p < vars.size(); ++p) {
      const auto l = levels[vars[p]];
      if (l != kUnassigned && static_cast<std::uint32_t>(l) != key[p]) return false;
    }
    return true;
  }

  double partial_deficit(const Levels& levels) const {
    double s = 0.0;
    for (const auto& [key, v] : target)
      if (consistent(key, levels)) s += v;
    for (const auto& [key, v] : cum)
      if (consistent(key, levels)) s -= v;
    return s;
  }

  bool covers(std::size_t var) const { return std::find(vars.begin(), vars.end(), var) != vars.end(); }

  LevelKey key_of(const Levels& levels) const {
    LevelKey k;
    for (auto v : vars) k.push_back(static_cast<std::uint32_t>(levels[v]));
    return k;
  }

  void add(const LevelKey& key, double n) {
    overshoot += std::max(0.0, n - std::max(0.0, deficit(key)));
    cum[key] += n;
  }
};

struct SubState {
  std::size_t main_bin = 0;
  std::vector<double> target;
  std::vector<double> cum;
};

struct Atom {
  Levels levels;
  std::vector<LevelKey> keys;  // cell of every unit
  std::size_t count = 0;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

std::vector<Proposal> oracle_allocate(const VariableSchema& schema, const DiscrepancyReport& report,
                                      const SummarySet& real_summaries, const BinSpecMap& specs,
                                      std::size_t batch_size, std::size_t k,
                                      const OracleOptions& options) {
  (void)real_summaries;  // the report carries real proportions for every cell
  if (batch_size == 0 || k == 0) return {};
  const double m = static_cast<double>(report.synth_records);
  const double b = static_cast<double>(batch_size);

  const std::string focus_name = oracle_focus_unit(report);
  std::vector<UnitState> units;
  std::vector<std::size_t> marginal_of(schema.size(), std::numeric_limits<std::size_t>::max());
  std::size_t focus = 0;
  for (const auto* u : report.units()) {
    UnitState s;
    s.source = u;
    for (const auto& name : u->variables) s.vars.push_back(schema.index_of(name));
    for (const auto& c : u->per_cell) {
      if (c.real > 0.0) s.target[c.key] = (m + b) * c.real;
      if (c.synth > 0.0) s.cum[c.key] = m * c.synth;
    }
    // With an empty pool every unit sits at the maximum, so no overshoot is
    // granted and the batch alone has to match the real tables.
    s.budget = m > 0.0 ? b * u->value : 0.0;
    s.binding = u->kind == UnitKind::Marginal;
    if (u->kind == UnitKind::Marginal) marginal_of[s.vars.front()] = units.size();
    if (u->unit == focus_name) focus = units.size();
    units.push_back(std::move(s));
  }
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (marginal_of[j] == std::numeric_limits<std::size_t>::max())
      throw Error(ErrorCode::MissingSummary, "report lacks marginal for '" + schema[j].name + "'");

  // Refined-bin detail for continuous marginals.
  std::map<std::size_t, SubState> subs;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto* u = units[marginal_of[j]].source;
    const BinSpec* spec = find_spec(specs, schema[j].name);
    if (!u->refined_bin || spec == nullptr || !spec->refined || spec->refined->main_bin != *u->refined_bin)
      continue;
    SubState st;
    st.main_bin = *u->refined_bin;
    for (const auto& c : u->sub_cells) {
      st.target.push_back((m + b) * c.real);
      st.cum.push_back(m * c.synth);
    }
    subs.emplace(j, std::move(st));
  }

  // The most over-generated level of a significantly mismatched variable is
  // never proposed when the one-step target already gives it no records.
  std::vector<std::int64_t> excluded(schema.size(), kUnassigned);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& mu = units[marginal_of[j]];
    const auto* u = mu.source;
    if (u->synth_empty || u->value < options.exclusion_threshold) continue;
    const CellGap* worst = nullptr;
    for (const auto& c : u->per_cell)
      if (worst == nullptr || c.gap < worst->gap) worst = &c;
    if (worst != nullptr && worst->gap < 0.0 && mu.deficit(worst->key) <= 0.0) excluded[j] = worst->key.front();
  }
  auto is_excluded = [&](const UnitState& u, const LevelKey& key) {
    for (std::size_t p = 0; p < u.vars.size(); ++p)
      if (excluded[u.vars[p]] == static_cast<std::int64_t>(key[p])) return true;
    return false;
  };

  const UnitState& fu = units[focus];
  auto focus_cell = [&]() {
    const LevelKey* best = nullptr;
    double best_d = -std::numeric_limits<double>::infinity();
    for (int pass = 0; pass < 2 && best == nullptr; ++pass)
      for (const auto& [key, t] : fu.target) {
        if (pass == 0 && is_excluded(fu, key)) continue;
        const double d = fu.deficit(key);
        if (d > best_d) {
          best_d = d;
          best = &key;
        }
      }
    return *best;
  };

  auto choose_level = [&](std::size_t var, Levels& levels) {
    const auto& v = schema[var];
    const std::size_t n_levels = v.is_discrete() ? v.discrete().categories.size()
                                                 : find_spec(specs, v.name)->bin_count();
    std::int64_t best = kUnassigned;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int pass = 0; pass < 2 && best == kUnassigned; ++pass) {
      for (std::size_t l = 0; l < n_levels; ++l) {
        if (pass == 0 && excluded[var] == static_cast<std::int64_t>(l)) continue;
        levels[var] = static_cast<std::int64_t>(l);
        double score = 0.0;
        for (const auto& u : units)
          if (u.covers(var)) score += u.partial_deficit(levels);
        if (score > best_score) {
          best_score = score;
          best = static_cast<std::int64_t>(l);
        }
      }
    }
    levels[var] = best;
  };

  auto next_var = [&](const Levels& levels) -> std::size_t {
    for (const auto& u : units) {
      if (u.source->kind != UnitKind::Joint) continue;
      bool touches = false;
      for (auto v : u.vars) touches |= levels[v] != kUnassigned;
      if (!touches) continue;
      for (auto v : u.vars)
        if (levels[v] == kUnassigned) return v;
    }
    for (std::size_t j = 0; j < schema.size(); ++j)
      if (levels[j] == kUnassigned) return j;
    return schema.size();
  };

  // Objective: every unit's L1 deficit after the batch, with a steep penalty
  // for exceeding the value that keeps its discrepancy unchanged.
  constexpr double kIncreasePenalty = 1000.0;
  std::vector<double> l1(units.size(), 0.0), ref(units.size(), 0.0);
  for (std::size_t u = 0; u < units.size(); ++u) ref[u] = 2.0 * (m + b) * units[u].source->value;
  auto unit_cost = [&](std::size_t u, double v) { return v + kIncreasePenalty * std::max(0.0, v - ref[u]); };

  auto place = [&](Atom& a, std::size_t n) {
    for (std::size_t i = 0; i < units.size(); ++i) units[i].add(a.keys[i], static_cast<double>(n));
    a.count += n;
  };

  // Phase 1: herd atoms, each capped by the marginal deficits of its levels
  // plus an equal share of the marginal budgets.
  std::vector<Atom> atoms;
  std::size_t placed = 0;
  for (std::size_t guard = 0; placed < batch_size && atoms.size() < k && guard < 4 * k + batch_size; ++guard) {
    Atom a;
    a.levels.assign(schema.size(), kUnassigned);
    const LevelKey fkey = focus_cell();
    for (std::size_t p = 0; p < fu.vars.size(); ++p) a.levels[fu.vars[p]] = fkey[p];
    for (std::size_t var = next_var(a.levels); var < schema.size(); var = next_var(a.levels))
      choose_level(var, a.levels);
    for (const auto& u : units) a.keys.push_back(u.key_of(a.levels));
    double cap = b;
    for (std::size_t i = 0; i < units.size(); ++i)
      if (units[i].binding)
        cap = std::min(cap, std::max(0.0, units[i].deficit(a.keys[i])) + units[i].budget / static_cast<double>(k));
    const std::size_t n = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(cap)), 1, batch_size - placed);
    auto same = std::find_if(atoms.begin(), atoms.end(), [&](const Atom& o) { return o.levels == a.levels; });
    if (same != atoms.end()) {
      place(*same, n);
    } else {
      place(a, n);
      atoms.push_back(std::move(a));
    }
    placed += n;
  }

  // Phase 2: remaining records go one at a time to the atom whose overshoot
  // costs least relative to each unit's budget.
  for (; placed < batch_size; ++placed) {
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      double cost = 0.0;
      double gain = 0.0;
      for (std::size_t u = 0; u < units.size(); ++u) {
        const double d = units[u].deficit(atoms[i].keys[u]);
        gain += d;
        const double inc = std::clamp(1.0 - std::max(0.0, d), 0.0, 1.0);
        const double scale = std::max(1.0, units[u].budget);
        cost += inc * (2.0 * units[u].overshoot + inc) / (scale * scale);
      }
      if (cost < best_cost - 1e-12 || (std::abs(cost - best_cost) <= 1e-12 && gain > best_gain)) {
        best = i;
        best_cost = cost;
        best_gain = gain;
      }
    }
    place(atoms[best], 1);
  }

  // Phase 3: local search over record transfers, single-level changes and
  // splits onto a changed level while fewer than k atoms exist.
  for (std::size_t u = 0; u < units.size(); ++u) {
    std::set<LevelKey> keys;
    for (const auto& [key, v] : units[u].target) keys.insert(key);
    for (const auto& [key, v] : units[u].cum) keys.insert(key);
    for (const auto& key : keys) l1[u] += std::abs(units[u].deficit(key));
  }
  std::vector<double> nl1(units.size());
  auto change_cost = [&]() {
    double d = 0.0;
    for (std::size_t u = 0; u < units.size(); ++u) d += unit_cost(u, nl1[u]) - unit_cost(u, l1[u]);
    return d;
  };
  // L1 change from moving n records of unit u from cell `from` to cell `to`.
  auto moved = [&](std::size_t u, const LevelKey& from, const LevelKey& to, double n) {
    if (from == to) return 0.0;
    const double df = units[u].deficit(from);
    const double dt = units[u].deficit(to);
    return std::abs(df + n) - std::abs(df) + std::abs(dt - n) - std::abs(dt);
  };
  auto level_count = [&](std::size_t var) {
    const auto& v = schema[var];
    return v.is_discrete() ? v.discrete().categories.size() : find_spec(specs, v.name)->bin_count();
  };

  for (std::size_t sweep = 0; sweep < 200; ++sweep) {
    double best = -1e-9;
    int kind = 0;
    std::size_t bi = 0, bj = 0, bv = 0, bl = 0, br = 0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      for (std::size_t j = 0; j < atoms.size(); ++j) {
        if (i == j) continue;
        for (std::size_t r = 1; r < atoms[i].count; r *= 2) {
          for (std::size_t u = 0; u < units.size(); ++u)
            nl1[u] = l1[u] + moved(u, atoms[i].keys[u], atoms[j].keys[u], static_cast<double>(r));
          const double d = change_cost();
          if (d < best) {
            best = d;
            kind = 1;
            bi = i;
            bj = j;
            br = r;
          }
        }
      }
      for (std::size_t var = 0; var < schema.size(); ++var) {
        const std::size_t n_levels = level_count(var);
        for (std::size_t l = 0; l < n_levels; ++l) {
          if (static_cast<std::int64_t>(l) == atoms[i].levels[var]) continue;
          if (excluded[var] == static_cast<std::int64_t>(l)) continue;
          Levels lv = atoms[i].levels;
          lv[var] = static_cast<std::int64_t>(l);
          for (std::size_t u = 0; u < units.size(); ++u)
            nl1[u] = units[u].covers(var)
                         ? l1[u] + moved(u, atoms[i].keys[u], units[u].key_of(lv), static_cast<double>(atoms[i].count))
                         : l1[u];
          const double d = change_cost();
          if (d < best) {
            best = d;
            kind = 2;
            bi = i;
            bv = var;
            bl = l;
          }
          if (atoms.size() >= k) continue;
          // Split part of the atom off onto the changed level.
          for (std::size_t r = 1; r < atoms[i].count; r *= 2) {
            for (std::size_t u = 0; u < units.size(); ++u)
              nl1[u] = units[u].covers(var)
                           ? l1[u] + moved(u, atoms[i].keys[u], units[u].key_of(lv), static_cast<double>(r))
                           : l1[u];
            const double ds = change_cost();
            if (ds < best) {
              best = ds;
              kind = 3;
              bi = i;
              bv = var;
              bl = l;
              br = r;
            }
          }
        }
      }
    }
    if (kind == 0) break;
    if (kind == 3) {
      Atom a;
      a.levels = atoms[bi].levels;
      a.levels[bv] = static_cast<std::int64_t>(bl);
      const auto n = static_cast<double>(br);
      for (std::size_t u = 0; u < units.size(); ++u) {
        const LevelKey to = units[u].key_of(a.levels);
        l1[u] += moved(u, atoms[bi].keys[u], to, n);
        units[u].cum[atoms[bi].keys[u]] -= n;
        units[u].cum[to] += n;
        a.keys.push_back(to);
      }
      atoms[bi].count -= br;
      a.count = br;
      atoms.push_back(std::move(a));
      continue;
    }
    if (kind == 1) {
      for (std::size_t u = 0; u < units.size(); ++u) {
        l1[u] += moved(u, atoms[bi].keys[u], atoms[bj].keys[u], static_cast<double>(br));
        units[u].cum[atoms[bi].keys[u]] -= static_cast<double>(br);
        units[u].cum[atoms[bj].keys[u]] += static_cast<double>(br);
      }
      atoms[bi].count -= br;
      atoms[bj].count += br;
    } else {
      Levels lv = atoms[bi].levels;
      lv[bv] = static_cast<std::int64_t>(bl);
      const auto n = static_cast<double>(atoms[bi].count);
      for (std::size_t u = 0; u < units.size(); ++u) {
        const LevelKey to = units[u].key_of(lv);
        l1[u] += moved(u, atoms[bi].keys[u], to, n);
        units[u].cum[atoms[bi].keys[u]] -= n;
        units[u].cum[to] += n;
        atoms[bi].keys[u] = to;
      }
      atoms[bi].levels = std::move(lv);
    }
  }

  // Merge atoms that ended on the same levels, then pick sub-bins.
  std::vector<Atom> merged;
  for (auto& a : atoms) {
    auto it = std::find_if(merged.begin(), merged.end(), [&](const Atom& o) { return o.levels == a.levels; });
    if (it == merged.end()) {
      merged.push_back(std::move(a));
    } else {
      it->count += a.count;
    }
  }

  std::vector<Proposal> out;
  const std::string why = "oracle: focus " + focus_name + " (tvd " + fmt(fu.source->value) + ")";
  for (auto& a : merged) {
    Proposal p;
    p.num = a.count;
    p.rationale = why;
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto level = static_cast<std::uint32_t>(a.levels[j]);
      if (schema[j].is_discrete()) {
        p.assignments.emplace_back(FixedCategory{schema[j].discrete().categories[level]});
        continue;
      }
      const BinSpec* spec = find_spec(specs, schema[j].name);
      auto sit = subs.find(j);
      if (sit != subs.end() && sit->second.main_bin == level) {
        auto& st = sit->second;
        std::size_t best = 0;
        for (std::size_t s = 1; s < st.target.size(); ++s)
          if (st.target[s] - st.cum[s] > st.target[best] - st.cum[best]) best = s;
        st.cum[best] += static_cast<double>(a.count);
        const auto& e = spec->refined->sub_edges;
        p.assignments.emplace_back(Range{e[best], e[best + 1]});
      } else {
        p.assignments.emplace_back(Range{spec->lower(level), spec->upper(level)});
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<StructuralComponent> OracleProposer::infer_components(const VariableSchema& schema,
                                                                  const SummarySet& real_summaries,
                                                                  const BinSpecMap& specs,
                                                                  std::size_t n_components) {
  (void)specs;
  return infer_components_by_mi(schema, real_summaries, n_components, options_);
}

std::vector<Proposal> OracleProposer::propose(const ProposerContext& ctx) {
  ctx.validate();
  return oracle_allocate(ctx.schema, ctx.report, ctx.real_summaries, ctx.specs, ctx.batch_size,
                         ctx.k, options_);
}

}  // namespace distsynth
