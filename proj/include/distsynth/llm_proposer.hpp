#pragma once

#include <functional>
#include <memory>
#include <string_view>

#include "distsynth/chat_client.hpp"
#include "distsynth/prompt.hpp"
#include "distsynth/proposer.hpp"

namespace distsynth {

using LogSink = std::function<void(std::string_view)>;

// Components from a copula reply: a JSON array whose items are arrays of
// variable names or objects with a "variables" array. Duplicates are skipped
// and at most n_components are kept. Errors: MalformedReply.
std::vector<StructuralComponent> parse_copula_reply(const VariableSchema& schema,
                                                    const std::string& text,
                                                    std::size_t n_components);

// Chat-completion backed proposer. Malformed or unavailable replies are
// retried up to max_retries times with exponential backoff.
class LlmProposer final : public Proposer {
 public:
  LlmProposer(std::shared_ptr<ChatClient> client, ProposerConfig cfg,
              PromptTemplates templates = PromptTemplates::defaults(), PromptBudget budget = {},
              LogSink log = {});

  std::vector<StructuralComponent> infer_components(const VariableSchema& schema,
                                                    const SummarySet& real_summaries,
                                                    const BinSpecMap& specs,
                                                    std::size_t n_components) override;
  std::vector<Proposal> propose(const ProposerContext& ctx) override;
  std::string name() const override { return "llm"; }
  bool uses_guidance() const override { return true; }

  // Retries spent by the most recent call, and across the proposer's life.
  std::size_t last_retries() const { return last_retries_; }
  std::size_t total_retries() const { return total_retries_; }
  // Infeasible proposals dropped by the most recent propose call.
  const std::vector<std::string>& last_dropped() const { return last_dropped_; }

 private:
  template <typename Parse>
  auto with_retries(const std::vector<ChatMessage>& messages, const char* what, Parse parse);
  void log(const std::string& msg) const;

  std::shared_ptr<ChatClient> client_;
  ProposerConfig cfg_;
  PromptTemplates templates_;
  PromptBudget budget_;
  LogSink log_;
  std::size_t last_retries_ = 0;
  std::size_t total_retries_ = 0;
  std::vector<std::string> last_dropped_;
};

}  // namespace distsynth
