#pragma once

// Prompt templates for dependency inference and proposal generation.
// Templates are plain text with {{name}} placeholders; rendering is
// deterministic so identical inputs give byte-identical messages.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "distsynth/proposer.hpp"

namespace distsynth {

struct ChatMessage {
  std::string role;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct PromptTemplate {
  std::string system;
  std::string user;
};

struct PromptTemplates {
  PromptTemplate copula;
  PromptTemplate proposal;

  static PromptTemplates defaults();
  // Reads copula_system.txt, copula_user.txt, proposal_system.txt and
  // proposal_user.txt; missing files keep the default text.
  static PromptTemplates from_dir(const std::filesystem::path& dir);
  // Writes the four files read by from_dir.
  void save(const std::filesystem::path& dir) const;
};

struct PromptBudget {
  std::size_t max_chars = 60000;
  // Cells kept per unit once per-cell lists have to be trimmed.
  std::size_t top_cells = 10;
};

enum class Truncation {
  None,
  SubBinsDropped,
  CellsTrimmed,
};

struct RenderedPrompt {
  std::vector<ChatMessage> messages;
  Truncation truncation = Truncation::None;
  bool truncated() const { return truncation != Truncation::None; }
  std::size_t size() const;
};

// Replaces every {{key}} present in `values`; other text is left untouched.
std::string substitute(const std::string& text, const std::map<std::string, std::string>& values);

// Description of the reply grammar embedded through {{format}}.
std::string proposal_reply_format();
std::string copula_reply_format();

// Errors: PromptTooLarge when even the most compact rendering exceeds the
// budget.
RenderedPrompt render_copula_prompt(const PromptTemplates& templates, const VariableSchema& schema,
                                    const SummarySet& real, const BinSpecMap& specs,
                                    std::size_t n_components, const PromptBudget& budget = {});
RenderedPrompt render_proposal_prompt(const PromptTemplates& templates, const ProposerContext& ctx,
                                      const PromptBudget& budget = {});

}  // namespace distsynth
