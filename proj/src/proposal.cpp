#include "distsynth/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distsynth/error.hpp"

namespace distsynth {

void validate_proposal(const VariableSchema& schema, const Proposal& p) {
  if (p.assignments.size() != schema.size())
    throw Error(ErrorCode::MalformedReply, "proposal assigns " + std::to_string(p.assignments.size()) +
                                               " of " + std::to_string(schema.size()) + " variables");
  if (p.num < 1) throw Error(ErrorCode::MalformedReply, "proposal num must be >= 1");
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& v = schema[j];
    const auto& a = p.assignments[j];
    if (v.is_discrete()) {
      const auto* c = std::get_if<FixedCategory>(&a);
      if (c == nullptr)
        throw Error(ErrorCode::MalformedReply, "'" + v.name + "' needs a category value");
      if (!schema.category_level(j, c->value))
        throw Error(ErrorCode::MalformedReply, "'" + c->value + "' is not a category of '" + v.name + "'");
    } else {
      const auto* r = std::get_if<Range>(&a);
      if (r == nullptr) throw Error(ErrorCode::MalformedReply, "'" + v.name + "' needs a [lo, hi] range");
      const auto& b = v.continuous();
      if (!std::isfinite(r->lo) || !std::isfinite(r->hi) || r->lo > r->hi)
        throw Error(ErrorCode::InfeasibleProposal, "range for '" + v.name + "' is inverted or non-finite");
      if (r->lo < b.lower || r->hi > b.upper)
        throw Error(ErrorCode::InfeasibleProposal, "range for '" + v.name + "' leaves the schema bounds");
    }
  }
}

std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total) {
  std::vector<std::size_t> out(weights.size(), 0);
  if (weights.empty()) return out;
  double sum = 0.0;
  for (double w : weights) sum += std::max(0.0, w);
  std::vector<double> w(weights.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = sum > 0.0 ? std::max(0.0, weights[i]) / sum : 1.0 / static_cast<double>(w.size());
  std::vector<double> rem(w.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = w[i] * static_cast<double>(total);
    out[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rem[a] != rem[b]) return rem[a] > rem[b];
    return a < b;
  });
  // Floating error can leave assigned slightly off in either direction.
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
    if (w[order[i]] > 0.0 || sum == 0.0) {
      ++out[order[i]];
      ++assigned;
    }
  }
  while (assigned > total) {
    auto it = std::max_element(out.begin(), out.end());
    --*it;
    --assigned;
  }
  return out;
}

void rescale_counts(std::vector<Proposal>& proposals, std::size_t total) {
  std::vector<double> w;
  for (const auto& p : proposals) w.push_back(static_cast<double>(p.num));
  const auto counts = largest_remainder(w, total);
  for (std::size_t i = 0; i < proposals.size(); ++i) proposals[i].num = counts[i];
}

nlohmann::json proposal_to_json(const VariableSchema& schema, const Proposal& p) {
  nlohmann::json a = nlohmann::json::object();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (const auto* c = std::get_if<FixedCategory>(&p.assignments[j])) {
      a[schema[j].name] = c->value;
    } else {
      const auto& r = std::get<Range>(p.assignments[j]);
      a[schema[j].name] = {r.lo, r.hi};
    }
  }
  return {{"assignments", std::move(a)}, {"num", p.num}, {"rationale", p.rationale}};
}

Proposal proposal_from_json(const VariableSchema& schema, const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("assignments") || !j["assignments"].is_object())
    throw Error(ErrorCode::MalformedReply, "proposal needs an 'assignments' object");
  const auto& a = j["assignments"];
  Proposal p;
  for (const auto& v : schema) {
    if (!a.contains(v.name))
      throw Error(ErrorCode::MalformedReply, "proposal is missing variable '" + v.name + "'");
    const auto& val = a[v.name];
    if (v.is_discrete()) {
      if (!val.is_string())
        throw Error(ErrorCode::MalformedReply, "'" + v.name + "' must be a category string");
      p.assignments.emplace_back(FixedCategory{val.get<std::string>()});
    } else if (val.is_array() && val.size() == 2 && val[0].is_number() && val[1].is_number()) {
      p.assignments.emplace_back(Range{val[0].get<double>(), val[1].get<double>()});
    } else if (val.is_number()) {
      const double x = val.get<double>();
      p.assignments.emplace_back(Range{x, x});
    } else {
      throw Error(ErrorCode::MalformedReply, "'" + v.name + "' must be a [lo, hi] range");
    }
  }
  for (auto it = a.begin(); it != a.end(); ++it)
    if (!schema.find(it.key()))
      throw Error(ErrorCode::MalformedReply, "proposal names unknown variable '" + it.key() + "'");
  if (!j.contains("num") || !j["num"].is_number())
    throw Error(ErrorCode::MalformedReply, "proposal needs a numeric 'num'");
  const double num = j["num"].get<double>();
  if (!(num >= 1.0) || !std::isfinite(num))
    throw Error(ErrorCode::MalformedReply, "proposal num must be >= 1");
  p.num = static_cast<std::size_t>(std::llround(num));
  if (j.contains("rationale") && j["rationale"].is_string()) p.rationale = j["rationale"].get<std::string>();
  validate_proposal(schema, p);
  return p;
}

nlohmann::json extract_json_array(const std::string& text) {
  const auto first = text.find('[');
  const auto last = text.rfind(']');
  if (first == std::string::npos || last == std::string::npos || last < first)
    throw Error(ErrorCode::MalformedReply, "reply contains no JSON array");
  try {
    auto j = nlohmann::json::parse(text.begin() + static_cast<std::ptrdiff_t>(first),
                                   text.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    if (!j.is_array()) throw Error(ErrorCode::MalformedReply, "reply JSON is not an array");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedReply, std::string("reply JSON does not parse: ") + e.what());
  }
}

ParsedProposals parse_proposal_reply(const VariableSchema& schema, const std::string& text) {
  const auto arr = extract_json_array(text);
  ParsedProposals out;
  for (const auto& item : arr) {
    try {
      out.accepted.push_back(proposal_from_json(schema, item));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InfeasibleProposal) throw;
      out.dropped.emplace_back(e.what());
    }
  }
  if (out.accepted.empty()) throw Error(ErrorCode::MalformedReply, "reply has no feasible proposal");
  return out;
}

}  // namespace distsynth
