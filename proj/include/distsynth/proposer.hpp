#pragma once

#include <optional>
#include <string>
#include <vector>

#include "distsynth/discrepancy.hpp"
#include "distsynth/proposal.hpp"
#include "distsynth/summary.hpp"

namespace distsynth {

// Everything a proposer sees in one iteration. References are only valid for
// the duration of the call.
struct ProposerContext {
  const VariableSchema& schema;
  const SummarySet& real_summaries;
  const BinSpecMap& specs;
  const DiscrepancyReport& report;
  const std::vector<StructuralComponent>& components;
  std::size_t k = 5;
  std::size_t batch_size = 5;
  std::optional<std::string> guidance;

  // Throws Error(InvalidContext) unless k >= 1 and batch_size >= k.
  void validate() const;
};

class Proposer {
 public:
  virtual ~Proposer() = default;

  // Joint structural components from the real summaries (with pair tables).
  virtual std::vector<StructuralComponent> infer_components(const VariableSchema& schema,
                                                            const SummarySet& real_summaries,
                                                            const BinSpecMap& specs,
                                                            std::size_t n_components) = 0;

  // Complete, validated proposals whose num fields sum to ctx.batch_size.
  virtual std::vector<Proposal> propose(const ProposerContext& ctx) = 0;

  virtual std::string name() const = 0;
  virtual bool uses_guidance() const { return false; }
};

}  // namespace distsynth
