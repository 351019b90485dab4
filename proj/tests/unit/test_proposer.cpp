#include <doctest.h>

#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "distsynth/chat_client.hpp"
#include "distsynth/error.hpp"
#include "distsynth/llm_proposer.hpp"
#include "distsynth/oracle.hpp"
#include "distsynth/prompt.hpp"
#include "distsynth/proposal.hpp"
#include "distsynth/reference.hpp"
#include "test_support.hpp"

using namespace distsynth;
using namespace distsynth::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidConfig;
}

// Records with x drawn by exact counts per level and y cycling.
Dataset counted(const VariableSchema& s, const std::vector<std::size_t>& counts) {
  Dataset d(s);
  std::uint32_t y = 0;
  for (std::uint32_t lvl = 0; lvl < counts.size(); ++lvl)
    for (std::size_t i = 0; i < counts[lvl]; ++i) {
      d.append(rec({Category{lvl}, Category{y}}));
      y = (y + 1) % 2;
    }
  return d;
}

// Everything a proposer needs, owned in one place.
struct Fixture {
  Dataset real;
  BinSpecMap specs;
  std::vector<StructuralComponent> comps;
  SummarySet real_summaries;
  DiscrepancyReport report;

  Fixture(Dataset r, const Dataset& synth, std::vector<StructuralComponent> c)
      : real(std::move(r)), specs(fit_all_bins(real)), comps(std::move(c)) {
    real_summaries = summarize(real, comps, specs, true);
    report = compute_report(real_summaries, summarize(synth, comps, specs), comps);
  }
  ProposerContext ctx(std::size_t k, std::size_t b) const {
    return ProposerContext{real.schema(), real_summaries, specs, report, comps, k, b, std::nullopt};
  }
};

std::size_t total(const std::vector<Proposal>& ps) {
  std::size_t n = 0;
  for (const auto& p : ps) n += p.num;
  return n;
}

// Batch built by sampling the proposals, using any deterministic RNG.
Dataset realize(const VariableSchema& s, const std::vector<Proposal>& ps, std::uint64_t seed) {
  Dataset d(s);
  Rng rng(seed);
  for (const auto& p : ps)
    for (std::size_t i = 0; i < p.num; ++i) {
      Record r;
      for (std::size_t v = 0; v < s.size(); ++v) {
        if (const auto* f = std::get_if<FixedCategory>(&p.assignments[v])) {
          r.push_back(Category{*s.category_level(v, f->value)});
        } else {
          const auto& g = std::get<Range>(p.assignments[v]);
          r.push_back(rng.uniform(g.lo, g.hi));
        }
      }
      d.append(std::move(r));
    }
  return d;
}

double unit_delta(const Fixture& f, const Dataset& pool, const std::string& unit) {
  const auto rep = compute_report(f.real_summaries, summarize(pool, f.comps, f.specs), f.comps);
  return rep.unit(unit)->value;
}

class ScriptedClient final : public ChatClient {
 public:
  std::deque<std::string> replies;
  std::size_t calls = 0;
  std::vector<ChatMessage> last;
  std::string complete(const std::vector<ChatMessage>& messages) override {
    ++calls;
    last = messages;
    if (replies.empty()) throw Error(ErrorCode::LlmUnavailable, "script exhausted");
    auto r = replies.front();
    if (replies.size() > 1) replies.pop_front();
    if (r == "<down>") throw Error(ErrorCode::LlmUnavailable, "connection refused");
    return r;
  }
};

ProposerConfig fast_config() {
  ProposerConfig c;
  c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  c.retry_base = std::chrono::milliseconds(0);
  return c;
}

const VariableSchema kXY({discrete("x", {"A", "B"}), discrete("y", {"u", "v"})});

}  // namespace

TEST_CASE("largest remainder and rescaling") {
  CHECK(largest_remainder(std::vector<double>{1, 1, 1}, 10) == std::vector<std::size_t>{4, 3, 3});
  CHECK(largest_remainder(std::vector<double>{0.7, 0.3}, 1) == std::vector<std::size_t>{1, 0});
  CHECK(largest_remainder(std::vector<double>{0, 0}, 3) == std::vector<std::size_t>{2, 1});
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> w(1 + rng.below(9));
    for (auto& x : w) x = rng.uniform() * 10;
    const std::size_t n = rng.below(500);
    const auto a = largest_remainder(w, n);
    CHECK(std::accumulate(a.begin(), a.end(), std::size_t{0}) == n);
    const double sw = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(a[i] - n * w[i] / sw) < 1.0);
  }
  std::vector<Proposal> ps(3);
  ps[0].num = 10;
  ps[1].num = 30;
  ps[2].num = 60;
  rescale_counts(ps, 200);
  CHECK(ps[0].num == 20);
  CHECK(ps[1].num == 60);
  CHECK(ps[2].num == 120);
}

TEST_CASE("proposal validation and reply parsing") {
  const auto s = reference::ecommerce_schema();
  const std::string good =
      R"({"assignments": {"user_age": [20, 30], "gender": "Female", "location_tier": "Developed",
          "product_category": "Apparel", "price": [50, 50], "payment_method": "Online Payment"},
          "num": 7, "rationale": "young apparel buyers"})";
  const auto p = proposal_from_json(s, nlohmann::json::parse(good));
  CHECK(p.num == 7);
  CHECK(std::get<Range>(p.assignments[0]) == Range{20, 30});
  CHECK(std::get<FixedCategory>(p.assignments[1]).value == "Female");
  CHECK(proposal_from_json(s, proposal_to_json(s, p)) == p);

  auto missing = nlohmann::json::parse(good);
  missing["assignments"].erase("gender");
  CHECK(code_of([&] { proposal_from_json(s, missing); }) == ErrorCode::MalformedReply);
  auto wrong_kind = nlohmann::json::parse(good);
  wrong_kind["assignments"]["gender"] = nlohmann::json::array({1, 2});
  CHECK(code_of([&] { proposal_from_json(s, wrong_kind); }) == ErrorCode::MalformedReply);
  auto unknown_cat = nlohmann::json::parse(good);
  unknown_cat["assignments"]["gender"] = "Other";
  CHECK(code_of([&] { proposal_from_json(s, unknown_cat); }) == ErrorCode::MalformedReply);
  auto outside = nlohmann::json::parse(good);
  outside["assignments"]["price"] = nlohmann::json::array({1500, 2500});
  CHECK(code_of([&] { proposal_from_json(s, outside); }) == ErrorCode::InfeasibleProposal);
  auto inverted = nlohmann::json::parse(good);
  inverted["assignments"]["user_age"] = nlohmann::json::array({40, 30});
  CHECK(code_of([&] { proposal_from_json(s, inverted); }) == ErrorCode::InfeasibleProposal);

  // Chain-of-thought preamble and fences are tolerated; infeasible items are
  // dropped and reported.
  const std::string reply = "Reasoning: apparel is scarce.\n```json\n[" + good + "," + outside.dump() + "]\n```\nDone.";
  const auto parsed = parse_proposal_reply(s, reply);
  CHECK(parsed.accepted.size() == 1);
  CHECK(parsed.dropped.size() == 1);
  CHECK(code_of([&] { parse_proposal_reply(s, "no json here"); }) == ErrorCode::MalformedReply);
  CHECK(code_of([&] { parse_proposal_reply(s, "[" + outside.dump() + "]"); }) == ErrorCode::MalformedReply);
  CHECK(code_of([&] { parse_proposal_reply(s, "[" + missing.dump() + "]"); }) == ErrorCode::MalformedReply);
}

TEST_CASE("context validation") {
  const Fixture f(counted(kXY, {7, 3}), counted(kXY, {3, 7}), {});
  CHECK_NOTHROW(f.ctx(1, 1).validate());
  CHECK(code_of([&] { f.ctx(0, 5).validate(); }) == ErrorCode::InvalidContext);
  CHECK(code_of([&] { f.ctx(5, 4).validate(); }) == ErrorCode::InvalidContext);
}

TEST_CASE("oracle: over-generated pool corrected with an all-A batch") {
  const Fixture f(counted(kXY, {7, 3}), counted(kXY, {3, 7}), {});
  CHECK(oracle_focus_unit(f.report) == "x");
  OracleProposer oracle;
  const auto ps = oracle.propose(f.ctx(5, 10));
  CHECK(total(ps) == 10);
  CHECK(ps.size() <= 5);
  for (const auto& p : ps) CHECK(std::get<FixedCategory>(p.assignments[0]).value == "A");
  // (3 + 10) / 20 = 0.65: still below 0.7, so the whole batch is needed.
  const auto after = concat(counted(kXY, {3, 7}), realize(kXY, ps, 1));
  CHECK(unit_delta(f, after, "x") == doctest::Approx(0.05));
}

TEST_CASE("oracle: maintenance mode follows the real marginals") {
  const auto real = counted(kXY, {7, 3});
  const Fixture f(real, real, {});
  OracleProposer oracle;
  const auto ps = oracle.propose(f.ctx(5, 10));
  const auto batch = realize(kXY, ps, 1);
  CHECK(total(ps) == 10);
  const Fixture g(real, batch, {});
  CHECK(g.report.unit("x")->value == 0.0);
  CHECK(g.report.unit("y")->value == 0.0);
}

TEST_CASE("oracle: batch of one") {
  const Fixture f(counted(kXY, {7, 3}), Dataset(kXY), {});
  OracleProposer oracle;
  for (std::size_t k : {1u, 5u}) {
    const auto ps = oracle_allocate(kXY, f.report, f.real_summaries, f.specs, 1, k);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].num == 1);
    CHECK_NOTHROW(validate_proposal(kXY, ps[0]));
  }
  CHECK(oracle.propose(f.ctx(1, 1)).size() == 1);
}

TEST_CASE("oracle: the most over-generated level is not proposed") {
  // m = 4b so the pool's excess of B cannot be absorbed by one batch.
  const Fixture f(counted(kXY, {5, 5}), counted(kXY, {8, 32}), {});
  REQUIRE(f.report.unit("x")->value >= 0.05);
  const auto ps = oracle_allocate(kXY, f.report, f.real_summaries, f.specs, 10, 5);
  CHECK(total(ps) == 10);
  for (const auto& p : ps) CHECK(std::get<FixedCategory>(p.assignments[0]).value != "B");
}

TEST_CASE("oracle: empty pool batch matches the real marginals") {
  const auto real = reference::generate({}, 2000, RngSeed{7});
  const std::vector<StructuralComponent> comps{StructuralComponent::of({"product_category", "price"}),
                                               StructuralComponent::of({"location_tier", "payment_method"})};
  const Fixture f(real, Dataset(real.schema()), comps);
  const std::size_t b = 200;
  const auto ps = oracle_allocate(real.schema(), f.report, f.real_summaries, f.specs, b, b);
  CHECK(total(ps) == b);
  const auto batch = realize(real.schema(), ps, 3);
  const Fixture g(real, batch, comps);
  for (const auto& m : g.report.marginals) {
    if (!real.schema().at(m.unit).is_discrete()) continue;
    CAPTURE(m.unit);
    CHECK(m.value <= 2.0 / b);
  }
  for (const auto& p : ps) CHECK_NOTHROW(validate_proposal(real.schema(), p));
}

TEST_CASE("oracle descent over randomized tables") {
  // For every generated problem whose worst unit has delta >= 0.05, the
  // cumulative delta of that unit strictly drops after one batch. k = b lets
  // the batch cover the focus support; with few atoms a wide joint can be
  // out of reach (see the k = 5 loop checks instead).
  Rng rng(RngSeed{2024}, "descent");
  std::size_t checked = 0;
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<Variable> vars;
    const std::size_t nv = 2 + rng.below(3);
    for (std::size_t v = 0; v < nv; ++v) {
      if (v == 0 && rng.below(2) == 0) {
        vars.push_back(continuous("v0", 0, 100));
        continue;
      }
      std::vector<std::string> cats;
      const std::size_t nc = 2 + rng.below(3);
      for (std::size_t c = 0; c < nc; ++c) cats.push_back("c" + std::to_string(c));
      vars.push_back(discrete("v" + std::to_string(v), cats));
    }
    const VariableSchema s(vars);
    auto draw = [&](std::size_t n, double skew) {
      Dataset d(s);
      for (std::size_t i = 0; i < n; ++i) {
        Record r;
        std::uint32_t first = 0;
        for (std::size_t v = 0; v < nv; ++v) {
          if (s[v].is_continuous()) {
            r.push_back(100.0 * std::pow(rng.uniform(), skew));
            continue;
          }
          const auto nc = static_cast<std::uint32_t>(s[v].discrete().categories.size());
          std::uint32_t lvl = static_cast<std::uint32_t>(std::min<double>(nc - 1, nc * std::pow(rng.uniform(), skew)));
          if (v > 0 && rng.uniform() < 0.5) lvl = first % nc;  // dependence on the first discrete
          if (v == 0 || first == 0) first = lvl;
          r.push_back(Category{lvl});
        }
        d.append(std::move(r));
      }
      return d;
    };
    const auto real = draw(400 + rng.below(600), 1.0);
    const std::size_t b = 20 + rng.below(200);
    const std::size_t m = rng.below(2) == 0 ? 0 : b * (1 + rng.below(20));
    const auto pool = draw(m, 0.3 + 2.0 * rng.uniform());
    std::vector<StructuralComponent> comps{StructuralComponent::of({"v0", "v1"})};
    if (nv >= 3) comps.push_back(StructuralComponent::of({"v1", "v2"}));
    const Fixture f(real, pool, comps);
    const auto focus = oracle_focus_unit(f.report);
    const double before = f.report.unit(focus)->value;
    if (before < 0.05) continue;
    const auto ps = oracle_allocate(s, f.report, f.real_summaries, f.specs, b, b);
    REQUIRE(total(ps) == b);
    const double after = unit_delta(f, concat(pool, realize(s, ps, trial)), focus);
    CAPTURE(trial);
    CAPTURE(focus);
    CHECK(after < before);
    ++checked;
  }
  CHECK(checked >= 50);
}

TEST_CASE("mutual information and component inference") {
  const VariableSchema two({discrete("a", {"0", "1"}), discrete("b", {"0", "1"})});
  Dataset d(two, {rec({Category{0}, Category{0}}), rec({Category{1}, Category{1}})});
  const auto specs = fit_all_bins(d);
  const auto sm = summarize(d, {}, specs, true);
  REQUIRE(sm.pairs.size() == 1);
  CHECK(mutual_information(sm.pairs[0]) == doctest::Approx(std::log(2.0)));
  const auto comps = infer_components_by_mi(two, sm, 3);
  REQUIRE(comps.size() == 1);
  CHECK(comps[0].variables == std::vector<std::string>{"a", "b"});
  const VariableSchema one({discrete("a", {"0", "1"})});
  CHECK(code_of([&] {
          infer_components_by_mi(one, summarize(Dataset(one, {rec({Category{0}})}), {}, {}, true), 3);
        }) == ErrorCode::TooFewVariables);

  const auto real = reference::generate({}, 100000, RngSeed{21});
  const auto rspecs = fit_all_bins(real);
  const auto rs = summarize(real, {}, rspecs, true);
  // Brute force from raw records: MI = sum p(a,b) log p(a,b) / (p(a) p(b)).
  auto brute = [&](const std::string& va, const std::string& vb) {
    const auto ia = real.schema().index_of(va), ib = real.schema().index_of(vb);
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> joint;
    std::map<std::uint32_t, double> pa, pb;
    const double n = static_cast<double>(real.size());
    for (std::size_t i = 0; i < real.size(); ++i) {
      const auto a = level_of(real, i, ia, find_spec(rspecs, va));
      const auto b = level_of(real, i, ib, find_spec(rspecs, vb));
      joint[{a, b}] += 1 / n;
      pa[a] += 1 / n;
      pb[b] += 1 / n;
    }
    double mi = 0;
    for (const auto& [k, p] : joint) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
    return mi;
  };
  auto table_mi = [&](const std::string& id) {
    for (const auto& t : rs.pairs)
      if (t.component.id == id) return mutual_information(t);
    FAIL("missing pair " << id);
    return 0.0;
  };
  const double cat_price = table_mi("product_category+price");
  const double gender_price = table_mi("gender+price");
  CHECK(cat_price == doctest::Approx(brute("product_category", "price")).epsilon(1e-9));
  CHECK(gender_price == doctest::Approx(brute("gender", "price")).epsilon(1e-9));
  CHECK(cat_price > gender_price);
  const auto rc = infer_components_by_mi(real.schema(), rs, 3);
  CHECK(rc.size() == 3);
  for (const auto& c : rc) {
    CHECK_NOTHROW(c.validate(real.schema()));
    CHECK((c.variables.size() >= 2 && c.variables.size() <= 4));
  }
}

TEST_CASE("prompt rendering") {
  const auto real = reference::generate({}, 2000, RngSeed{7});
  const auto synth = reference::generate({}, 400, RngSeed{9});
  const std::vector<StructuralComponent> comps{StructuralComponent::of({"product_category", "price"}),
                                               StructuralComponent::of({"user_age", "gender", "product_category"})};
  auto specs = fit_all_bins(real);
  for (auto& [name, spec] : specs) {
    const auto rt = summarize_marginal(real, name, &spec);
    const auto st = summarize_marginal(synth, name, &spec);
    spec = refine_bins(spec, rt, st).spec;
  }
  const auto rs = summarize(real, comps, specs);
  const auto report = compute_report(rs, summarize(synth, comps, specs), comps);
  ProposerContext ctx{real.schema(), rs, specs, report, comps, 5, 200, std::nullopt};
  const auto templates = PromptTemplates::defaults();

  const auto a = render_proposal_prompt(templates, ctx);
  const auto b = render_proposal_prompt(templates, ctx);
  CHECK(a.messages == b.messages);
  REQUIRE(a.messages.size() == 2);
  CHECK(a.messages[0].role == "system");
  CHECK(a.messages[1].role == "user");
  CHECK(a.truncation == Truncation::None);
  CHECK(a.messages[1].content.find("sub_cells") != std::string::npos);
  CHECK(a.messages[1].content.find("product_category+price") != std::string::npos);
  CHECK(a.messages[1].content.find("{{") == std::string::npos);

  ctx.guidance = "There will be a concert downtown on Saturday night.";
  const auto g = render_proposal_prompt(templates, ctx);
  CHECK(g.messages[1].content.find(*ctx.guidance) != std::string::npos);

  // Sub-bin rows go first, then per-cell lists are trimmed.
  PromptBudget tight;
  tight.max_chars = a.size() - 1;
  const auto t1 = render_proposal_prompt(templates, ctx, tight);
  CHECK(t1.truncation == Truncation::SubBinsDropped);
  CHECK(t1.messages[1].content.find("sub_cells") == std::string::npos);
  CHECK(t1.messages[1].content.find("omitted_cells") == std::string::npos);
  tight.max_chars = t1.size() - 1;
  const auto t2 = render_proposal_prompt(templates, ctx, tight);
  CHECK(t2.truncation == Truncation::CellsTrimmed);
  CHECK(t2.messages[1].content.find("omitted_cells") != std::string::npos);
  CHECK(t2.size() <= tight.max_chars);
  tight.max_chars = 100;
  CHECK(code_of([&] { render_proposal_prompt(templates, ctx, tight); }) == ErrorCode::PromptTooLarge);

  const auto copula = render_copula_prompt(templates, real.schema(), summarize(real, {}, specs, true), specs, 3);
  CHECK(copula.messages[1].content.find("user_age") != std::string::npos);

  CHECK(substitute("a {{x}} {{y}}", {{"x", "1"}}) == "a 1 {{y}}");

  const auto dir = scratch_dir("prompts");
  auto custom = templates;
  custom.proposal.user = "custom {{k}} / {{batch_size}}";
  custom.save(dir);
  const auto loaded = PromptTemplates::from_dir(dir);
  CHECK(loaded.proposal.user == custom.proposal.user);
  CHECK(loaded.copula.system == templates.copula.system);
  CHECK(render_proposal_prompt(loaded, ctx).messages[1].content == "custom 5 / 200");
}

TEST_CASE("shipped prompt files match the built-in defaults") {
  const auto shipped = PromptTemplates::from_dir(DISTSYNTH_PROMPTS_DIR);
  const auto defaults = PromptTemplates::defaults();
  CHECK(shipped.copula.system == defaults.copula.system);
  CHECK(shipped.copula.user == defaults.copula.user);
  CHECK(shipped.proposal.system == defaults.proposal.system);
  CHECK(shipped.proposal.user == defaults.proposal.user);
  CHECK(std::filesystem::exists(std::filesystem::path(DISTSYNTH_PROMPTS_DIR) / "proposal_user.txt"));
}

TEST_CASE("chat wire format") {
  ProposerConfig cfg = fast_config();
  const auto body = chat_request_body(cfg, {{"system", "s"}, {"user", "u"}});
  CHECK(body["model"] == "gpt-4.1-nano");
  CHECK(body["temperature"] == 0.8);
  CHECK(body["messages"][1]["content"] == "u");
  CHECK(chat_reply_content(R"({"choices":[{"message":{"role":"assistant","content":"hi"}}]})") == "hi");
  CHECK(code_of([] { chat_reply_content(R"({"choices":[]})"); }) == ErrorCode::MalformedReply);
  CHECK(code_of([] { chat_reply_content("not json"); }) == ErrorCode::MalformedReply);
  cfg.temperature = -1;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
  // Nothing listens on port 1.
  HttpChatClient client(fast_config(), std::string("token"));
  CHECK(code_of([&] { client.complete({{"user", "x"}}); }) == ErrorCode::LlmUnavailable);
}

TEST_CASE("llm proposer retries and validates") {
  const auto s = reference::ecommerce_schema();
  const auto real = reference::generate({}, 500, RngSeed{7});
  const auto specs = fit_all_bins(real);
  const std::vector<StructuralComponent> comps{StructuralComponent::of({"product_category", "price"})};
  const auto rs = summarize(real, comps, specs, true);
  const auto report = compute_report(rs, summarize(Dataset(s), comps, specs), comps);
  ProposerContext ctx{s, rs, specs, report, comps, 2, 100, std::string("rainy weekend")};
  const std::string item =
      R"({"assignments": {"user_age": [20, 30], "gender": "Female", "location_tier": "Developed",
          "product_category": "Apparel", "price": [10, 90], "payment_method": "Online Payment"}, "num": 3})";
  const std::string valid = "[" + item + "," + item + "]";

  auto client = std::make_shared<ScriptedClient>();
  std::vector<std::string> logs;
  LlmProposer llm(client, fast_config(), PromptTemplates::defaults(), {}, [&](std::string_view m) { logs.emplace_back(m); });

  client->replies = {valid};
  auto ps = llm.propose(ctx);
  CHECK(total(ps) == 100);
  CHECK(ps.size() == 2);
  CHECK(llm.last_retries() == 0);
  CHECK(client->last[1].content.find("rainy weekend") != std::string::npos);

  client->replies = {"{oops", "[{\"num\": 3}]", valid};
  client->calls = 0;
  ps = llm.propose(ctx);
  CHECK(total(ps) == 100);
  CHECK(client->calls == 3);
  CHECK(llm.last_retries() == 2);
  CHECK(llm.total_retries() == 2);
  CHECK(std::any_of(logs.begin(), logs.end(), [](const std::string& m) { return m.find("succeeded after 2 retries") != std::string::npos; }));

  client->replies = {"<down>", valid};
  ps = llm.propose(ctx);
  CHECK(llm.last_retries() == 1);

  client->replies = {"never json"};
  client->calls = 0;
  CHECK(code_of([&] { llm.propose(ctx); }) == ErrorCode::MalformedReply);
  CHECK(client->calls == 4);  // one attempt plus max_retries

  // More proposals than k are truncated; the batch is still conserved.
  client->replies = {"[" + item + "," + item + "," + item + "]"};
  ps = llm.propose(ctx);
  CHECK(ps.size() == 2);
  CHECK(total(ps) == 100);

  // An out-of-bounds proposal is dropped and logged; the rest is rescaled.
  std::string bad = item;
  bad.replace(bad.find("[10, 90]"), 8, "[10, 9000]");
  client->replies = {"[" + item + "," + bad + "]"};
  ps = llm.propose(ctx);
  CHECK(ps.size() == 1);
  CHECK(ps[0].num == 100);
  CHECK(llm.last_dropped().size() == 1);

  client->replies = {R"([["product_category", "price"], {"variables": ["location_tier", "payment_method"]}, ["price", "product_category"]])"};
  const auto cc = llm.infer_components(s, rs, specs, 3);
  REQUIRE(cc.size() == 2);
  CHECK(cc[0].id == "product_category+price");
  CHECK(cc[1].id == "location_tier+payment_method");
  CHECK(code_of([&] { parse_copula_reply(s, R"([["price", "shoe_size"]])", 3); }) == ErrorCode::MalformedReply);
}
