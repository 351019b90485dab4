#include "distsynth/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "distsynth/error.hpp"

namespace distsynth {

namespace {

const char* kCopulaSystem =
    R"(You are a statistician acting as a copula simulator. From summary statistics of a real dataset you identify small groups of variables that share a latent joint dependency.

Think step by step about which variables plausibly influence each other, using the marginal frequency tables and the pairwise contingency tables you are given. Prefer groups whose joint table departs most from the product of its marginals. Each group holds 2 to 4 variables and groups must differ from each other.

{{format}})";

const char* kCopulaUser =
    R"(Variables:
{{schema}}

Real summary statistics (marginal frequency tables and pairwise contingency tables):
{{summaries}}

Return exactly {{n_components}} joint structural components.)";

const char* kProposalSystem =
    R"(You generate synthetic tabular data by proposing sampleable regions of the joint space. A proposal fixes one valid category for every discrete variable and gives a numeric range [lo, hi] inside the variable's bounds for every continuous variable. Values are drawn uniformly from each range, and num records are drawn from each proposal.

The synthetic pool is cumulative. The discrepancy report compares real and synthetic summaries per variable and per joint component: a positive gap means the cell is under-generated, a negative gap means it is over-generated. Steer the new batch toward cells with the largest positive gaps, avoid cells with negative gaps, and keep the joint components consistent with the real contingency tables. Refined sub-intervals of a continuous bin show where inside that bin the deficit sits.

Reason step by step in each rationale, citing the frequencies and the guidance you relied on.

{{format}})";

const char* kProposalUser =
    R"(Variables:
{{schema}}

Joint structural components:
{{components}}

Real summary statistics:
{{summaries}}

Discrepancy between real and the current synthetic pool:
{{discrepancy}}

Scenario guidance: {{guidance}}

Return exactly {{k}} proposals whose num fields sum to {{batch_size}}.)";

std::string read_or(const std::filesystem::path& p, const std::string& fallback) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return fallback;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
  out << text;
}

nlohmann::json trimmed_table(const ContingencyTable& t, std::size_t top) {
  auto j = contingency_table_to_json(t);
  auto& cells = j["cells"];
  if (top == 0 || cells.size() <= top) return j;
  std::vector<nlohmann::json> v(cells.begin(), cells.end());
  std::stable_sort(v.begin(), v.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
    return a["proportion"].get<double>() > b["proportion"].get<double>();
  });
  const auto omitted = v.size() - top;
  v.resize(top);
  j["cells"] = v;
  j["omitted_cells"] = omitted;
  return j;
}

nlohmann::json summaries_json(const SummarySet& s, const BinSpecMap& specs, Truncation level,
                              std::size_t top, bool pairs) {
  const bool subs = level == Truncation::None;
  const std::size_t cap = level == Truncation::CellsTrimmed ? top : 0;
  nlohmann::json marg = nlohmann::json::array();
  for (const auto& m : s.marginals) marg.push_back(frequency_table_to_json(m, find_spec(specs, m.unit), subs));
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : pairs ? s.pairs : s.joints) tables.push_back(trimmed_table(t, cap));
  return {{"records", s.records}, {"marginals", std::move(marg)}, {pairs ? "pairs" : "joints", std::move(tables)}};
}

std::string components_text(const std::vector<StructuralComponent>& comps) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : comps) j.push_back(c.variables);
  return j.dump();
}

template <typename Build>
RenderedPrompt render_with_budget(const PromptBudget& budget, Build build) {
  for (auto level : {Truncation::None, Truncation::SubBinsDropped, Truncation::CellsTrimmed}) {
    RenderedPrompt p{build(level), level};
    if (p.size() <= budget.max_chars) return p;
  }
  throw Error(ErrorCode::PromptTooLarge,
              "prompt exceeds " + std::to_string(budget.max_chars) + " characters after truncation");
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
  return {{kCopulaSystem, kCopulaUser}, {kProposalSystem, kProposalUser}};
}

PromptTemplates PromptTemplates::from_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::IoFailure, "prompt directory " + dir.string() + " does not exist");
  auto t = defaults();
  t.copula.system = read_or(dir / "copula_system.txt", t.copula.system);
  t.copula.user = read_or(dir / "copula_user.txt", t.copula.user);
  t.proposal.system = read_or(dir / "proposal_system.txt", t.proposal.system);
  t.proposal.user = read_or(dir / "proposal_user.txt", t.proposal.user);
  return t;
}

void PromptTemplates::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_file(dir / "copula_system.txt", copula.system);
  write_file(dir / "copula_user.txt", copula.user);
  write_file(dir / "proposal_system.txt", proposal.system);
  write_file(dir / "proposal_user.txt", proposal.user);
}

std::size_t RenderedPrompt::size() const {
  std::size_t n = 0;
  for (const auto& m : messages) n += m.content.size();
  return n;
}

std::string substitute(const std::string& text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(text, pos, open - pos);
    auto it = values.find(text.substr(open + 2, close - open - 2));
    if (it != values.end()) {
      out += it->second;
    } else {
      out.append(text, open, close + 2 - open);
    }
    pos = close + 2;
  }
  out.append(text, pos, std::string::npos);
  return out;
}

std::string proposal_reply_format() {
  return R"(Reply with a JSON array and nothing after it. Each element is an object:
{"assignments": {"<variable>": "<category>" or [lo, hi], ...}, "num": <positive integer>, "rationale": "<reasoning>"}
Every variable must appear in every proposal.)";
}

std::string copula_reply_format() {
  return R"(Reply with a JSON array and nothing after it. Each element is an object:
{"variables": ["<variable>", ...], "rationale": "<reasoning>"})";
}

RenderedPrompt render_copula_prompt(const PromptTemplates& templates, const VariableSchema& schema,
                                    const SummarySet& real, const BinSpecMap& specs,
                                    std::size_t n_components, const PromptBudget& budget) {
  return render_with_budget(budget, [&](Truncation level) {
    const std::map<std::string, std::string> values{
        {"schema", schema_to_json(schema).dump()},
        {"summaries", summaries_json(real, specs, level, budget.top_cells, true).dump()},
        {"n_components", std::to_string(n_components)},
        {"format", copula_reply_format()},
    };
    return std::vector<ChatMessage>{{"system", substitute(templates.copula.system, values)},
                                    {"user", substitute(templates.copula.user, values)}};
  });
}

RenderedPrompt render_proposal_prompt(const PromptTemplates& templates, const ProposerContext& ctx,
                                      const PromptBudget& budget) {
  return render_with_budget(budget, [&](Truncation level) {
    const bool subs = level == Truncation::None;
    const std::size_t cap = level == Truncation::CellsTrimmed ? budget.top_cells : 0;
    nlohmann::json disc = nlohmann::json::array();
    for (const auto* u : ctx.report.units()) disc.push_back(unit_discrepancy_to_json(*u, subs, cap));
    const std::map<std::string, std::string> values{
        {"schema", schema_to_json(ctx.schema).dump()},
        {"summaries", summaries_json(ctx.real_summaries, ctx.specs, level, budget.top_cells, false).dump()},
        {"discrepancy", disc.dump()},
        {"components", components_text(ctx.components)},
        {"guidance", ctx.guidance ? *ctx.guidance : std::string("none")},
        {"k", std::to_string(ctx.k)},
        {"batch_size", std::to_string(ctx.batch_size)},
        {"format", proposal_reply_format()},
    };
    return std::vector<ChatMessage>{{"system", substitute(templates.proposal.system, values)},
                                    {"user", substitute(templates.proposal.user, values)}};
  });
}

}  // namespace distsynth
