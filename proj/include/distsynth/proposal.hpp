#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "distsynth/schema.hpp"

namespace distsynth {

struct FixedCategory {
  std::string value;
  friend bool operator==(const FixedCategory&, const FixedCategory&) = default;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

using Assignment = std::variant<FixedCategory, Range>;

// A sampleable region of the joint space: one assignment per schema variable
// (in schema order) and the number of records to draw from it.
struct Proposal {
  std::vector<Assignment> assignments;
  std::size_t num = 1;
  std::string rationale;
  friend bool operator==(const Proposal&, const Proposal&) = default;
};

// Completeness and kind agreement failures raise MalformedReply; ranges that
// are inverted or leave the schema bounds raise InfeasibleProposal.
void validate_proposal(const VariableSchema& schema, const Proposal& p);

// Integer allocation of `total` proportional to non-negative weights
// (Hamilton / largest remainder; ties go to the lower index). All-zero
// weights are treated as uniform.
std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total);

// Rescales num fields so they sum to `total`.
void rescale_counts(std::vector<Proposal>& proposals, std::size_t total);

nlohmann::json proposal_to_json(const VariableSchema& schema, const Proposal& p);
// {"assignments": {var: "category" | [lo, hi]}, "num": n, "rationale": "..."}.
// Throws MalformedReply or InfeasibleProposal.
Proposal proposal_from_json(const VariableSchema& schema, const nlohmann::json& j);

struct ParsedProposals {
  std::vector<Proposal> accepted;
  std::vector<std::string> dropped;  // reasons for infeasible proposals
};

// Extracts the first JSON array from free text (chain-of-thought preamble and
// code fences are tolerated). Throws MalformedReply when no proposal survives.
ParsedProposals parse_proposal_reply(const VariableSchema& schema, const std::string& text);

// Locates and parses the outermost JSON array in `text`; throws MalformedReply.
nlohmann::json extract_json_array(const std::string& text);

}  // namespace distsynth
