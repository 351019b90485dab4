#include "distsynth/loop.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "distsynth/error.hpp"

namespace distsynth {

namespace {

constexpr const char* kSamplerStream = "loop/sampler";

bool proposer_error(ErrorCode c) {
  return c == ErrorCode::LlmUnavailable || c == ErrorCode::MalformedReply ||
         c == ErrorCode::InfeasibleProposal || c == ErrorCode::PromptTooLarge;
}

std::vector<double> proportions_at(const std::map<LevelKey, double>& cells,
                                   const std::vector<LevelKey>& keys) {
  std::vector<double> out;
  for (const auto& k : keys) {
    auto it = cells.find(k);
    out.push_back(it == cells.end() ? 0.0 : it->second);
  }
  return out;
}

std::map<LevelKey, double> cells_of(const FrequencyTable& t) {
  std::map<LevelKey, double> m;
  for (std::size_t i = 0; i < t.cells.size(); ++i) m[{static_cast<std::uint32_t>(i)}] = t.cells[i].proportion;
  return m;
}

double half_l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace

void LoopConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::InvalidConfig, field + ": " + why);
  };
  if (iterations < 1) bad("iterations", "must be >= 1");
  if (proposals < 1) bad("proposals", "must be >= 1");
  if (batch_size < proposals) bad("batch_size", "must be >= proposals");
  if (n_components < 1) bad("components", "must be >= 1");
  if (!(threshold > 0.0) || threshold > 1.0) bad("threshold", "must lie in (0, 1]");
  if (!(tolerance > 0.0) || tolerance > threshold) bad("tolerance", "must lie in (0, threshold]");
  if (main_bins < 1) bad("main_bins", "must be >= 1");
  if (sub_bins < 1) bad("sub_bins", "must be >= 1");
}

nlohmann::json loop_config_to_json(const LoopConfig& c) {
  nlohmann::json j = {{"iterations", c.iterations},     {"proposals", c.proposals},
                      {"batch_size", c.batch_size},     {"n_components", c.n_components},
                      {"seed", c.seed.value},           {"tolerance", c.tolerance},
                      {"threshold", c.threshold},       {"main_bins", c.main_bins},
                      {"sub_bins", c.sub_bins},         {"suite_every", c.suite_every},
                      {"cache_components", c.cache_components}};
  j["guidance"] = c.guidance ? nlohmann::json(*c.guidance) : nlohmann::json(nullptr);
  return j;
}

LoopConfig loop_config_from_json(const nlohmann::json& j) {
  try {
    LoopConfig c;
    c.iterations = j.at("iterations").get<std::size_t>();
    c.proposals = j.at("proposals").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.n_components = j.at("n_components").get<std::size_t>();
    c.seed.value = j.at("seed").get<std::uint64_t>();
    c.tolerance = j.at("tolerance").get<double>();
    c.threshold = j.at("threshold").get<double>();
    c.main_bins = j.at("main_bins").get<std::size_t>();
    c.sub_bins = j.at("sub_bins").get<std::size_t>();
    c.suite_every = j.at("suite_every").get<std::size_t>();
    c.cache_components = j.at("cache_components").get<bool>();
    if (j.contains("guidance") && j["guidance"].is_string()) c.guidance = j["guidance"].get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("loop config: ") + e.what());
  }
}

nlohmann::json metric_row_to_json(const MetricRow& r) {
  return {{"iteration", r.iteration}, {"phase", r.phase}, {"unit", r.unit}, {"metric", r.metric}, {"value", r.value}};
}

MetricRow metric_row_from_json(const nlohmann::json& j) {
  return {j.at("iteration").get<std::size_t>(), j.at("phase").get<std::string>(), j.at("unit").get<std::string>(),
          j.at("metric").get<std::string>(), j.at("value").get<double>()};
}

std::vector<Record> sample_from_proposal(const VariableSchema& schema, const Proposal& p, Rng& rng) {
  std::vector<Record> out;
  out.reserve(p.num);
  for (std::size_t n = 0; n < p.num; ++n) {
    Record r;
    r.reserve(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (const auto* c = std::get_if<FixedCategory>(&p.assignments[j])) {
        r.emplace_back(Category{*schema.category_level(j, c->value)});
      } else {
        const auto& range = std::get<Range>(p.assignments[j]);
        r.emplace_back(range.lo == range.hi ? range.lo : rng.uniform(range.lo, range.hi));
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

SynthesisLoop::SynthesisLoop(Dataset real, LoopConfig cfg, Proposer& proposer)
    : real_(std::move(real)), cfg_(std::move(cfg)), proposer_(proposer) {
  cfg_.validate();
  if (real_.empty()) throw Error(ErrorCode::EmptyDataset, "real dataset has no records");
  main_specs_ = fit_all_bins(real_, cfg_.main_bins);
  real_pairs_ = summarize(real_, {}, main_specs_, true);
  reset();
}

void SynthesisLoop::reset() {
  state_ = LoopState{};
  state_.pool = Dataset(real_.schema());
  state_.rng = Rng(cfg_.seed, kSamplerStream);
  components_.clear();
  records_.clear();
}

void SynthesisLoop::restore(LoopState state) {
  if (!(state.pool.schema() == real_.schema()))
    throw Error(ErrorCode::SchemaMismatch, "checkpoint pool schema differs from the real data");
  state_ = std::move(state);
  components_ = state_.component_cache;
  records_.clear();
}

std::vector<StructuralComponent> SynthesisLoop::infer() {
  if (cfg_.cache_components && !state_.component_cache.empty()) return state_.component_cache;
  try {
    auto comps = proposer_.infer_components(real_.schema(), real_pairs_, main_specs_, cfg_.n_components);
    for (const auto& c : comps) c.validate(real_.schema());
    return comps;
  } catch (const Error& e) {
    if (!proposer_error(e.code())) throw;
    throw Error(ErrorCode::ProposerFailure, "component inference failed at iteration " +
                                                std::to_string(state_.iteration + 1) + ": " + e.what());
  }
}

const IterationRecord& SynthesisLoop::step() {
  const auto& schema = real_.schema();
  const std::size_t t = state_.iteration + 1;
  auto comps = infer();

  // Refinement follows the current pool; main edges stay fixed.
  BinSpecMap specs = main_specs_;
  for (auto& [name, spec] : specs) {
    const auto& main = main_specs_.at(name);
    spec = refine_bins(main, summarize_marginal(real_, name, &main), summarize_marginal(state_.pool, name, &main),
                       cfg_.sub_bins)
               .spec;
  }
  const auto real_s = summarize(real_, comps, specs);
  const auto synth_s = summarize(state_.pool, comps, specs);
  auto report = compute_report(real_s, synth_s, comps);

  ProposerContext ctx{schema, real_s, specs, report, comps, cfg_.proposals, cfg_.batch_size, cfg_.guidance};
  std::vector<Proposal> props;
  try {
    props = proposer_.propose(ctx);
    for (const auto& p : props) validate_proposal(schema, p);
  } catch (const Error& e) {
    if (!proposer_error(e.code())) throw;
    throw Error(ErrorCode::ProposerFailure,
                "proposal generation failed at iteration " + std::to_string(t) + ": " + e.what());
  }
  if (props.empty()) throw Error(ErrorCode::ProposerFailure, "proposer returned no proposals");
  std::size_t total = 0;
  for (const auto& p : props) total += p.num;
  if (total != cfg_.batch_size) {
    rescale_counts(props, cfg_.batch_size);
    std::erase_if(props, [](const Proposal& p) { return p.num == 0; });
  }

  Rng rng = state_.rng;
  Dataset batch(schema);
  batch.reserve(cfg_.batch_size);
  for (const auto& p : props)
    for (auto& r : sample_from_proposal(schema, p, rng)) batch.append(std::move(r));

  Dataset pool_after = state_.pool;
  pool_after.append_all(batch);
  const auto batch_s = summarize(batch, comps, specs);
  const auto after_s = summarize(pool_after, comps, specs);

  IterationRecord rec;
  rec.iteration = t;
  rec.components = comps;
  rec.pool_before = state_.pool.size();
  rec.batch_records = batch.size();
  rec.batch_weight = static_cast<double>(batch.size()) / static_cast<double>(pool_after.size());
  rec.proposals = props;

  for (const auto* u : report.units()) {
    UnitTrace tr;
    tr.unit = u->unit;
    std::map<LevelKey, double> real_cells, before, in_batch, after;
    if (u->kind == UnitKind::Marginal) {
      real_cells = cells_of(*real_s.marginal(u->unit));
      before = cells_of(*synth_s.marginal(u->unit));
      in_batch = cells_of(*batch_s.marginal(u->unit));
      after = cells_of(*after_s.marginal(u->unit));
    } else {
      real_cells = real_s.joint(u->unit)->cells;
      before = synth_s.joint(u->unit)->cells;
      in_batch = batch_s.joint(u->unit)->cells;
      after = after_s.joint(u->unit)->cells;
    }
    std::set<LevelKey> keys;
    for (const auto* m : {&real_cells, &before, &in_batch, &after})
      for (const auto& [k, v] : *m) keys.insert(k);
    tr.keys.assign(keys.begin(), keys.end());
    tr.real = proportions_at(real_cells, tr.keys);
    tr.pool_before = proportions_at(before, tr.keys);
    tr.batch = proportions_at(in_batch, tr.keys);
    tr.pool_after = proportions_at(after, tr.keys);
    tr.delta = u->value;
    tr.batch_delta = half_l1(tr.real, tr.batch);
    tr.delta_after = half_l1(tr.real, tr.pool_after);
    rec.traces.push_back(std::move(tr));
  }

  // Commit.
  state_.rng = rng;
  state_.pool = std::move(pool_after);
  state_.iteration = t;
  if (cfg_.cache_components && state_.component_cache.empty()) state_.component_cache = comps;
  components_ = comps;

  for (const auto& tr : rec.traces) {
    state_.history.push_back({t, "loop", tr.unit, "tvd", tr.delta});
    state_.history.push_back({t, "loop", tr.unit, "batch_tvd", tr.batch_delta});
  }
  state_.history.push_back({t, "loop", "*", "mean_tvd", report.mean_tvd});
  state_.history.push_back({t, "loop", "*", "batch_weight", rec.batch_weight});
  state_.history.push_back({t, "loop", "*", "pool_size", static_cast<double>(state_.pool.size())});

  if (cfg_.suite_every > 0 && t % cfg_.suite_every == 0) {
    rec.suite = metrics::metric_suite(real_, state_.pool, comps, main_specs_, {1000, cfg_.seed});
    for (auto& r : suite_rows(t, "suite", *rec.suite)) state_.history.push_back(std::move(r));
  }
  rec.report = std::move(report);
  state_.last_report = rec.report;
  records_.push_back(std::move(rec));
  return records_.back();
}

void SynthesisLoop::run(const std::function<void(const IterationRecord&)>& on_iteration) {
  while (!done()) {
    const auto& rec = step();
    if (on_iteration) on_iteration(rec);
  }
}

metrics::MetricReport SynthesisLoop::finalize() {
  if (components_.empty()) components_ = infer();
  auto r = metrics::metric_suite(real_, state_.pool, components_, main_specs_, {1000, cfg_.seed});
  std::erase_if(state_.history, [](const MetricRow& row) { return row.phase == "final"; });
  for (auto& row : suite_rows(state_.iteration, "final", r)) state_.history.push_back(std::move(row));
  return r;
}

RunResult run_loop(const Dataset& real, const LoopConfig& cfg, Proposer& proposer) {
  SynthesisLoop loop(real, cfg, proposer);
  loop.run();
  loop.finalize();
  return {loop.state().pool, loop.state().history};
}

std::vector<MetricRow> suite_rows(std::size_t iteration, const std::string& phase,
                                  const metrics::MetricReport& r) {
  std::vector<MetricRow> rows;
  for (const auto& u : r.units) {
    rows.push_back({iteration, phase, u.unit, "tvd", u.tvd});
    rows.push_back({iteration, phase, u.unit, "jsd", u.jsd});
    rows.push_back({iteration, phase, u.unit, "hellinger", u.hellinger});
    rows.push_back({iteration, phase, u.unit, "kl", u.kl});
    if (u.wasserstein) rows.push_back({iteration, phase, u.unit, "wasserstein", *u.wasserstein});
  }
  rows.push_back({iteration, phase, "*", "mean_tvd", r.mean_tvd});
  rows.push_back({iteration, phase, "*", "energy", r.energy});
  rows.push_back({iteration, phase, "*", "mmd", r.mmd});
  rows.push_back({iteration, phase, "*", "c2st_accuracy", r.c2st_accuracy});
  rows.push_back({iteration, phase, "*", "c2st_gap", r.c2st_gap});
  return rows;
}

void write_metrics_jsonl(std::ostream& out, const std::vector<MetricRow>& rows) {
  for (const auto& r : rows) out << metric_row_to_json(r).dump() << '\n';
}

std::vector<MetricRow> read_metrics_jsonl(std::istream& in) {
  std::vector<MetricRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      rows.push_back(metric_row_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw LocatedError(ErrorCode::IoFailure, n, "metrics", std::string("bad row: ") + e.what());
    }
  }
  return rows;
}

void write_convergence_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  std::vector<std::string> units;
  std::map<std::size_t, std::map<std::string, double>> by_iter;
  std::map<std::size_t, double> mean;
  for (const auto& r : rows) {
    if (r.phase != "loop") continue;
    if (r.unit == "*" && r.metric == "mean_tvd") mean[r.iteration] = r.value;
    if (r.unit == "*" || r.metric != "tvd") continue;
    if (std::find(units.begin(), units.end(), r.unit) == units.end()) units.push_back(r.unit);
    by_iter[r.iteration][r.unit] = r.value;
  }
  out << "iteration,mean_tvd";
  for (const auto& u : units) out << ',' << u;
  out << '\n';
  for (const auto& [t, m] : mean) {
    out << t << ',' << format_number(m);
    for (const auto& u : units) {
      out << ',';
      auto it = by_iter[t].find(u);
      if (it != by_iter[t].end()) out << format_number(it->second);
    }
    out << '\n';
  }
}

nlohmann::json components_to_json(const std::vector<StructuralComponent>& comps) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : comps) j.push_back(c.variables);
  return j;
}

std::vector<StructuralComponent> components_from_json(const nlohmann::json& j, const VariableSchema& schema) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidComponent, "components must be a JSON array");
  std::vector<StructuralComponent> out;
  for (const auto& item : j) {
    const auto& vars = item.is_object() && item.contains("variables") ? item["variables"] : item;
    if (!vars.is_array()) throw Error(ErrorCode::InvalidComponent, "component must list variable names");
    std::vector<std::string> names;
    for (const auto& v : vars) {
      if (!v.is_string()) throw Error(ErrorCode::InvalidComponent, "variable names must be strings");
      names.push_back(v.get<std::string>());
    }
    auto c = StructuralComponent::of(std::move(names));
    c.validate(schema);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace distsynth
