#pragma once

// Iterative synthesis: each iteration infers components, summarizes real and
// the cumulative pool, measures discrepancy, asks the proposer for a batch,
// samples it and appends it to the pool.

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "distsynth/metrics.hpp"
#include "distsynth/proposer.hpp"
#include "distsynth/rng.hpp"

namespace distsynth {

struct LoopConfig {
  std::size_t iterations = 100;
  std::size_t proposals = 5;
  std::size_t batch_size = 200;
  std::size_t n_components = 3;
  RngSeed seed{0};
  double tolerance = 0.05;
  double threshold = 0.05;
  std::size_t main_bins = kDefaultMainBins;
  std::size_t sub_bins = kDefaultSubBins;
  // Full metric suite every this many iterations; 0 disables it (the final
  // suite still runs).
  std::size_t suite_every = 10;
  // Reuse the first inferred components instead of re-inferring every
  // iteration.
  bool cache_components = false;
  std::optional<std::string> guidance;

  // Throws Error(InvalidConfig) naming the offending field.
  void validate() const;
  friend bool operator==(const LoopConfig&, const LoopConfig&) = default;
};

nlohmann::json loop_config_to_json(const LoopConfig& cfg);
LoopConfig loop_config_from_json(const nlohmann::json& j);

struct MetricRow {
  std::size_t iteration = 0;
  std::string phase;  // "loop", "suite" or "final"
  std::string unit;   // "*" for pool-level values
  std::string metric;
  double value = 0.0;
  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

nlohmann::json metric_row_to_json(const MetricRow& r);
MetricRow metric_row_from_json(const nlohmann::json& j);

// Main-cell proportions of one unit around a single iteration. Cells follow
// the report's per_cell order.
struct UnitTrace {
  std::string unit;
  std::vector<LevelKey> keys;
  std::vector<double> real;
  std::vector<double> pool_before;
  std::vector<double> batch;
  std::vector<double> pool_after;
  double delta = 0.0;        // against pool_before
  double batch_delta = 0.0;  // batch alone
  double delta_after = 0.0;  // against pool_after
};

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  std::vector<StructuralComponent> components;
  DiscrepancyReport report;  // pool through the previous iteration
  std::size_t pool_before = 0;
  std::size_t batch_records = 0;
  double batch_weight = 0.0;  // b / (m + b)
  std::vector<Proposal> proposals;
  std::vector<UnitTrace> traces;
  std::optional<metrics::MetricReport> suite;
};

struct LoopState {
  std::size_t iteration = 0;  // completed iterations
  Dataset pool;
  Rng rng{0};
  std::vector<StructuralComponent> component_cache;
  std::vector<MetricRow> history;
  std::optional<DiscrepancyReport> last_report;
};

// Records are drawn in order; FixedCategory values are copied and ranges are
// sampled uniformly on [lo, hi] (a constant when lo == hi).
std::vector<Record> sample_from_proposal(const VariableSchema& schema, const Proposal& p, Rng& rng);

class SynthesisLoop {
 public:
  // real must be non-empty. Throws InvalidConfig, EmptyDataset.
  SynthesisLoop(Dataset real, LoopConfig cfg, Proposer& proposer);

  const LoopConfig& config() const { return cfg_; }
  const Dataset& real() const { return real_; }
  const BinSpecMap& main_specs() const { return main_specs_; }
  const LoopState& state() const { return state_; }
  // Records of iterations run by this object (not restored on resume).
  const std::vector<IterationRecord>& records() const { return records_; }

  // Fresh state for the configured seed.
  void reset();
  // Replaces the state, e.g. with one loaded from a checkpoint.
  void restore(LoopState state);

  // One iteration. A proposer error is rethrown as ProposerFailure and leaves
  // the state untouched.
  const IterationRecord& step();
  // Steps until `iterations` are complete; on_iteration runs after each step.
  void run(const std::function<void(const IterationRecord&)>& on_iteration = {});
  bool done() const { return state_.iteration >= cfg_.iterations; }

  // Full suite on the current pool, appended to history as "final" rows.
  metrics::MetricReport finalize();
  // Components the most recent iteration used (cache or last inference).
  const std::vector<StructuralComponent>& components() const { return components_; }

 private:
  std::vector<StructuralComponent> infer();

  Dataset real_;
  LoopConfig cfg_;
  Proposer& proposer_;
  BinSpecMap main_specs_;
  SummarySet real_pairs_;
  LoopState state_;
  std::vector<StructuralComponent> components_;
  std::vector<IterationRecord> records_;
};

// Full run with the oracle or any other proposer.
struct RunResult {
  Dataset pool;
  std::vector<MetricRow> history;
};
RunResult run_loop(const Dataset& real, const LoopConfig& cfg, Proposer& proposer);

std::vector<MetricRow> suite_rows(std::size_t iteration, const std::string& phase,
                                  const metrics::MetricReport& r);

// One JSON object per line.
void write_metrics_jsonl(std::ostream& out, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_jsonl(std::istream& in);
// iteration, mean_tvd, then one column per unit from the "loop" rows.
void write_convergence_csv(std::ostream& out, const std::vector<MetricRow>& rows);

nlohmann::json components_to_json(const std::vector<StructuralComponent>& comps);
std::vector<StructuralComponent> components_from_json(const nlohmann::json& j, const VariableSchema& schema);

}  // namespace distsynth
