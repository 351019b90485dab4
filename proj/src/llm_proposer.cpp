#include "distsynth/llm_proposer.hpp"

#include <iostream>
#include <set>
#include <thread>

#include "distsynth/error.hpp"

namespace distsynth {

std::vector<StructuralComponent> parse_copula_reply(const VariableSchema& schema,
                                                    const std::string& text,
                                                    std::size_t n_components) {
  const auto arr = extract_json_array(text);
  std::vector<StructuralComponent> out;
  std::set<std::set<std::string>> seen;
  for (const auto& item : arr) {
    const nlohmann::json* vars = &item;
    if (item.is_object()) {
      if (!item.contains("variables"))
        throw Error(ErrorCode::MalformedReply, "component object lacks 'variables'");
      vars = &item["variables"];
    }
    if (!vars->is_array()) throw Error(ErrorCode::MalformedReply, "component must list variable names");
    std::vector<std::string> names;
    for (const auto& v : *vars) {
      if (!v.is_string()) throw Error(ErrorCode::MalformedReply, "component variable names must be strings");
      names.push_back(v.get<std::string>());
    }
    auto c = StructuralComponent::of(names);
    try {
      c.validate(schema);
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedReply, std::string("invalid component: ") + e.what());
    }
    if (!seen.insert(std::set<std::string>(names.begin(), names.end())).second) continue;
    out.push_back(std::move(c));
    if (out.size() == n_components) break;
  }
  if (out.empty()) throw Error(ErrorCode::MalformedReply, "reply names no component");
  return out;
}

LlmProposer::LlmProposer(std::shared_ptr<ChatClient> client, ProposerConfig cfg,
                         PromptTemplates templates, PromptBudget budget, LogSink log)
    : client_(std::move(client)),
      cfg_(std::move(cfg)),
      templates_(std::move(templates)),
      budget_(budget),
      log_(std::move(log)) {
  if (!client_) throw Error(ErrorCode::InvalidConfig, "no chat client");
  if (!(cfg_.temperature >= 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature: must be >= 0");
}

void LlmProposer::log(const std::string& msg) const {
  if (log_) {
    log_(msg);
  } else {
    std::cerr << "[llm] " << msg << '\n';
  }
}

template <typename Parse>
auto LlmProposer::with_retries(const std::vector<ChatMessage>& messages, const char* what, Parse parse) {
  last_retries_ = 0;
  auto delay = cfg_.retry_base;
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      auto result = parse(client_->complete(messages));
      if (attempt > 0)
        log(std::string(what) + " succeeded after " + std::to_string(attempt) + " retries");
      return result;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedReply && e.code() != ErrorCode::LlmUnavailable) throw;
      if (attempt >= cfg_.max_retries) {
        log(std::string(what) + " failed after " + std::to_string(attempt) + " retries: " + e.what());
        throw;
      }
      ++last_retries_;
      ++total_retries_;
      log(std::string(what) + " attempt " + std::to_string(attempt + 1) + " failed (" +
          std::string(to_string(e.code())) + ": " + e.what() + "), retry " + std::to_string(attempt + 1) +
          " of " + std::to_string(cfg_.max_retries));
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

std::vector<StructuralComponent> LlmProposer::infer_components(const VariableSchema& schema,
                                                               const SummarySet& real_summaries,
                                                               const BinSpecMap& specs,
                                                               std::size_t n_components) {
  if (schema.size() < 2) throw Error(ErrorCode::TooFewVariables, "need at least two variables");
  const auto prompt = render_copula_prompt(templates_, schema, real_summaries, specs, n_components, budget_);
  if (prompt.truncated()) log("copula prompt truncated to fit the budget");
  return with_retries(prompt.messages, "component inference", [&](const std::string& reply) {
    return parse_copula_reply(schema, reply, n_components);
  });
}

std::vector<Proposal> LlmProposer::propose(const ProposerContext& ctx) {
  ctx.validate();
  const auto prompt = render_proposal_prompt(templates_, ctx, budget_);
  if (prompt.truncated()) log("proposal prompt truncated to fit the budget");
  auto parsed = with_retries(prompt.messages, "proposal", [&](const std::string& reply) {
    return parse_proposal_reply(ctx.schema, reply);
  });
  last_dropped_ = parsed.dropped;
  for (const auto& d : parsed.dropped) log("dropped infeasible proposal: " + d);
  auto& props = parsed.accepted;
  if (props.size() > ctx.k) {
    log("reply has " + std::to_string(props.size()) + " proposals, keeping the first " + std::to_string(ctx.k));
    props.resize(ctx.k);
  }
  std::size_t sum = 0;
  for (const auto& p : props) sum += p.num;
  if (sum != ctx.batch_size) rescale_counts(props, ctx.batch_size);
  std::erase_if(props, [](const Proposal& p) { return p.num == 0; });
  return std::move(props);
}

}  // namespace distsynth
