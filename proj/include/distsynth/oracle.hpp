#pragma once

// Deterministic proposer that needs no language model. It steers each batch
// toward the real summaries so that the unit with the largest discrepancy
// strictly improves in the cumulative pool, which makes convergence of the
// synthesis loop testable offline.

#include "distsynth/proposer.hpp"

namespace distsynth {

struct OracleOptions {
  // Levels whose signed gap is the most negative of their variable are never
  // proposed while that variable's marginal discrepancy is at least this.
  double exclusion_threshold = 0.05;
  // Components grow past a pair when a candidate's strongest mutual
  // information with a member is at least this fraction of the seed pair's.
  double grow_ratio = 0.5;
  std::size_t max_component_size = 3;
};

// Mutual information (nats) of a two-variable contingency table.
double mutual_information(const ContingencyTable& pair_table);

// Ranks variable pairs by mutual information from real.pairs and greedily
// grows the strongest pairs into up to n_components distinct components.
// Errors: TooFewVariables, MissingSummary (no pair tables).
std::vector<StructuralComponent> infer_components_by_mi(const VariableSchema& schema,
                                                        const SummarySet& real,
                                                        std::size_t n_components,
                                                        const OracleOptions& options = {});

// Splits batch_size records over at most k full-level atoms. Each unit u
// has target (m + b) * real_u against the pool's m * synth_u; atoms are
// herded by deficit, leftovers placed by least overshoot, then a local
// search minimizes the summed L1 deficit with a steep penalty on any unit
// whose discrepancy would grow. Continuous levels get a sub-bin range when
// the bin is refined. Identical atoms are merged.
std::vector<Proposal> oracle_allocate(const VariableSchema& schema, const DiscrepancyReport& report,
                                      const SummarySet& real_summaries, const BinSpecMap& specs,
                                      std::size_t batch_size, std::size_t k,
                                      const OracleOptions& options = {});

// Name of the unit oracle_allocate targets: largest discrepancy, ties broken
// by lexicographic unit name.
std::string oracle_focus_unit(const DiscrepancyReport& report);

class OracleProposer final : public Proposer {
 public:
  explicit OracleProposer(OracleOptions options = {}) : options_(options) {}

  std::vector<StructuralComponent> infer_components(const VariableSchema& schema,
                                                    const SummarySet& real_summaries,
                                                    const BinSpecMap& specs,
                                                    std::size_t n_components) override;
  std::vector<Proposal> propose(const ProposerContext& ctx) override;
  std::string name() const override { return "oracle"; }

 private:
  OracleOptions options_;
};

}  // namespace distsynth
