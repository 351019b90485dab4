#include <doctest.h>

#include <cmath>
#include <sstream>

#include "distsynth/checkpoint.hpp"
#include "distsynth/csv.hpp"
#include "distsynth/error.hpp"
#include "distsynth/loop.hpp"
#include "distsynth/oracle.hpp"
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

LoopConfig small_config(std::size_t T, std::uint64_t seed) {
  LoopConfig c;
  c.iterations = T;
  c.batch_size = 100;
  c.seed = RngSeed{seed};
  c.suite_every = 5;
  return c;
}

std::string csv_text(const Dataset& d) {
  std::ostringstream os;
  write_csv(d, os);
  return os.str();
}

std::string jsonl_text(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  write_metrics_jsonl(os, rows);
  return os.str();
}

// Fails on the n-th propose call.
class FlakyProposer final : public Proposer {
 public:
  explicit FlakyProposer(std::size_t fail_at) : fail_at_(fail_at) {}
  std::vector<StructuralComponent> infer_components(const VariableSchema& s, const SummarySet& r,
                                                    const BinSpecMap& b, std::size_t n) override {
    return oracle_.infer_components(s, r, b, n);
  }
  std::vector<Proposal> propose(const ProposerContext& ctx) override {
    if (++calls_ == fail_at_) throw Error(ErrorCode::MalformedReply, "scripted failure");
    return oracle_.propose(ctx);
  }
  std::string name() const override { return "flaky"; }

 private:
  OracleProposer oracle_;
  std::size_t fail_at_;
  std::size_t calls_ = 0;
};

// Returns half the batch with skewed counts.
class ShortProposer final : public Proposer {
 public:
  std::vector<StructuralComponent> infer_components(const VariableSchema&, const SummarySet&, const BinSpecMap&,
                                                    std::size_t) override {
    return {};
  }
  std::vector<Proposal> propose(const ProposerContext& ctx) override {
    auto ps = oracle_.propose(ctx);
    for (auto& p : ps) p.num = std::max<std::size_t>(1, p.num / 2);
    return ps;
  }
  std::string name() const override { return "short"; }

 private:
  OracleProposer oracle_;
};

}  // namespace

TEST_CASE("sample_from_proposal") {
  const auto s = reference::ecommerce_schema();
  Proposal fixed{{Range{30, 30}, FixedCategory{"Male"}, FixedCategory{"Developed"}, FixedCategory{"Apparel"},
                  Range{10, 10}, FixedCategory{"Online Payment"}},
                 3,
                 ""};
  Rng rng(1);
  const auto rows = sample_from_proposal(s, fixed, rng);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == rows[1]);
  CHECK(rows[1] == rows[2]);
  CHECK(std::get<double>(rows[0][4]) == 10.0);
  CHECK(std::get<Category>(rows[0][3]).level == 1);

  Proposal wide = fixed;
  wide.assignments[4] = Range{0, 2000};
  wide.num = 100000;
  const auto many = sample_from_proposal(s, wide, rng);
  double sum = 0.0;
  for (const auto& r : many) {
    const double x = std::get<double>(r[4]);
    REQUIRE((x >= 0 && x <= 2000));
    sum += x;
  }
  CHECK(std::abs(sum / 1e5 - 1000.0) <= 20.0);
}

TEST_CASE("loop config validation") {
  LoopConfig c;
  CHECK_NOTHROW(c.validate());
  for (auto mutate : std::vector<std::function<void(LoopConfig&)>>{
           [](LoopConfig& x) { x.iterations = 0; }, [](LoopConfig& x) { x.proposals = 0; },
           [](LoopConfig& x) { x.batch_size = 4; }, [](LoopConfig& x) { x.tolerance = 0.0; },
           [](LoopConfig& x) { x.tolerance = 0.06; }, [](LoopConfig& x) { x.n_components = 0; }}) {
    LoopConfig bad;
    mutate(bad);
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  }
  CHECK(loop_config_from_json(loop_config_to_json(c)) == c);
  c.guidance = "festival";
  c.seed = RngSeed{0xFFFFFFFFFFFFFFFFULL};
  CHECK(loop_config_from_json(loop_config_to_json(c)) == c);
  OracleProposer oracle;
  CHECK(code_of([&] { SynthesisLoop(Dataset(reference::ecommerce_schema()), LoopConfig{}, oracle); }) ==
        ErrorCode::EmptyDataset);
}

TEST_CASE("one iteration with a batch the size of the real data") {
  const VariableSchema s({discrete("a", {"0", "1"}), discrete("b", {"0", "1"})});
  Dataset real(s);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto a = static_cast<std::uint32_t>(rng.uniform() < 0.3);
    const auto b = rng.uniform() < 0.8 ? a : 1 - a;
    real.append(rec({Category{a}, Category{b}}));
  }
  LoopConfig cfg;
  cfg.iterations = 1;
  cfg.batch_size = real.size();
  cfg.n_components = 1;
  OracleProposer oracle;
  SynthesisLoop loop(real, cfg, oracle);
  loop.run();
  const auto final_report = loop.finalize();
  CHECK(final_report.mean_tvd <= 0.1);
  CHECK(loop.state().pool.size() == real.size());
}

TEST_CASE("loop invariants over iterations") {
  const auto real = reference::generate({}, 600, RngSeed{7});
  OracleProposer oracle;
  SynthesisLoop loop(real, small_config(12, 3), oracle);
  std::size_t expected = 0;
  double prev_after = 1.0;
  loop.run([&](const IterationRecord& rec) {
    expected += 100;
    CHECK(loop.state().pool.size() == expected);
    CHECK(rec.pool_before == expected - 100);
    CHECK(rec.batch_weight == doctest::Approx(100.0 / expected).epsilon(1e-15));
    std::size_t n = 0;
    for (const auto& p : rec.proposals) n += p.num;
    CHECK(n == 100);
    CHECK(rec.proposals.size() <= 5);
    const double m = static_cast<double>(rec.pool_before), b = 100.0;
    for (const auto& tr : rec.traces) {
      for (std::size_t c = 0; c < tr.keys.size(); ++c)
        CHECK(std::abs(tr.pool_after[c] - (m * tr.pool_before[c] + b * tr.batch[c]) / (m + b)) <= 1e-9);
      CHECK(tr.delta_after <= (m * tr.delta + b * tr.batch_delta) / (m + b) + 1e-12);
      // The report is measured on the pool without this iteration's batch.
      CHECK(tr.delta == doctest::Approx(rec.report.unit(tr.unit)->value).epsilon(1e-15));
    }
    if (rec.iteration == 1) {
      for (const auto& tr : rec.traces) CHECK(tr.delta == 1.0);
    } else {
      CHECK(rec.traces.front().delta == doctest::Approx(prev_after).epsilon(1e-12));
    }
    prev_after = rec.traces.front().delta_after;
  });
  CHECK(loop.done());
  const auto& h = loop.state().history;
  CHECK(std::count_if(h.begin(), h.end(), [](const MetricRow& r) { return r.phase == "suite"; }) > 0);
  CHECK(std::count_if(h.begin(), h.end(), [](const MetricRow& r) { return r.metric == "pool_size"; }) == 12);

  // JSONL and convergence CSV.
  std::stringstream ss;
  write_metrics_jsonl(ss, h);
  CHECK(read_metrics_jsonl(ss) == h);
  std::ostringstream conv;
  write_convergence_csv(conv, h);
  const auto text = conv.str();
  CHECK(text.rfind("iteration,mean_tvd,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 13);
}

TEST_CASE("proposer counts are rescaled to the batch") {
  const auto real = reference::generate({}, 400, RngSeed{2});
  ShortProposer shorty;
  LoopConfig cfg = small_config(3, 1);
  cfg.n_components = 1;
  SynthesisLoop loop(real, cfg, shorty);
  loop.run();
  CHECK(loop.state().pool.size() == 300);
}

TEST_CASE("oracle runs are deterministic") {
  const auto real = reference::generate({}, 500, RngSeed{7});
  OracleProposer o1, o2, o3;
  const auto a = run_loop(real, small_config(8, 11), o1);
  const auto b = run_loop(real, small_config(8, 11), o2);
  CHECK(csv_text(a.pool) == csv_text(b.pool));
  CHECK(jsonl_text(a.history) == jsonl_text(b.history));
  // Continuous draws depend on the seed.
  const auto c = run_loop(real, small_config(8, 12), o3);
  CHECK(csv_text(a.pool) != csv_text(c.pool));
}

TEST_CASE("proposer failures leave the state untouched") {
  const auto real = reference::generate({}, 400, RngSeed{7});
  FlakyProposer flaky(3);
  SynthesisLoop loop(real, small_config(5, 1), flaky);
  loop.step();
  loop.step();
  const auto pool = csv_text(loop.state().pool);
  const auto hist = loop.state().history;
  CHECK(code_of([&] { loop.step(); }) == ErrorCode::ProposerFailure);
  CHECK(loop.state().iteration == 2);
  CHECK(csv_text(loop.state().pool) == pool);
  CHECK(loop.state().history == hist);
  // The next call succeeds and continues from the same state.
  loop.step();
  CHECK(loop.state().iteration == 3);
}

TEST_CASE("checkpoint and resume") {
  const auto real = reference::generate({}, 500, RngSeed{7});
  const auto dir = scratch_dir("ckpt");

  OracleProposer full_oracle;
  SynthesisLoop full(real, small_config(10, 4), full_oracle);
  full.run();
  full.finalize();

  OracleProposer first_oracle;
  SynthesisLoop first(real, small_config(10, 4), first_oracle);
  for (int i = 0; i < 5; ++i) first.step();
  save_checkpoint(dir, first.config(), first.state());
  const auto state_bytes = slurp(dir / "state.json");
  const auto pool_bytes = slurp(dir / "pool.csv");
  const auto manifest_bytes = slurp(dir / "manifest.json");
  save_checkpoint(dir, first.config(), first.state());
  CHECK(slurp(dir / "state.json") == state_bytes);
  CHECK(slurp(dir / "pool.csv") == pool_bytes);
  CHECK(slurp(dir / "manifest.json") == manifest_bytes);

  auto cp = load_checkpoint(dir, real.schema());
  CHECK(cp.config == first.config());
  CHECK(cp.state.iteration == 5);
  OracleProposer resumed_oracle;
  SynthesisLoop resumed(real, cp.config, resumed_oracle);
  resumed.restore(std::move(cp.state));
  resumed.run();
  resumed.finalize();
  CHECK(csv_text(resumed.state().pool) == csv_text(full.state().pool));
  CHECK(jsonl_text(resumed.state().history) == jsonl_text(full.state().history));

  const auto empty = scratch_dir("ckpt_empty");
  CHECK(code_of([&] { load_checkpoint(empty, real.schema()); }) == ErrorCode::CorruptCheckpoint);
  CHECK(code_of([&] { load_checkpoint(empty / "missing", real.schema()); }) == ErrorCode::CorruptCheckpoint);

  auto tampered = pool_bytes;
  tampered[tampered.size() / 2] = tampered[tampered.size() / 2] == '1' ? '2' : '1';
  spit(dir / "pool.csv", tampered);
  CHECK(code_of([&] { load_checkpoint(dir, real.schema()); }) == ErrorCode::CorruptCheckpoint);
  spit(dir / "pool.csv", pool_bytes);
  CHECK_NOTHROW(load_checkpoint(dir, real.schema()));
  const VariableSchema other({continuous("z", 0, 1)});
  CHECK(code_of([&] { load_checkpoint(dir, other); }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("cached components are reused") {
  const auto real = reference::generate({}, 400, RngSeed{7});
  OracleProposer oracle;
  auto cfg = small_config(3, 1);
  cfg.cache_components = true;
  SynthesisLoop loop(real, cfg, oracle);
  loop.run();
  CHECK(loop.state().component_cache.size() == 3);
  CHECK(loop.components() == loop.state().component_cache);
}
