#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "distsynth/chat_client.hpp"
#include "distsynth/checkpoint.hpp"
#include "distsynth/csv.hpp"
#include "distsynth/error.hpp"
#include "distsynth/llm_proposer.hpp"
#include "distsynth/loop.hpp"
#include "distsynth/oracle.hpp"
#include "distsynth/reference.hpp"

namespace distsynth::cli {

namespace {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidSchema:
    case ErrorCode::MissingColumn:
    case ErrorCode::TypeMismatch:
    case ErrorCode::OutOfBounds:
    case ErrorCode::EmptyFile:
    case ErrorCode::IoFailure:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::InvalidParams:
    case ErrorCode::InvalidComponent:
    case ErrorCode::UnknownCategory:
    case ErrorCode::EmptyDataset:
    case ErrorCode::TooFewVariables:
    case ErrorCode::InvalidContext:
    case ErrorCode::CorruptCheckpoint:
    case ErrorCode::InvalidConfig:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

// ---- gen-ref ---------------------------------------------------------------

struct GenRefArgs {
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  std::string out;
  std::string params;
};

void add_gen_ref(CLI::App& app, GenRefArgs& a) {
  auto* sub = app.add_subcommand("gen-ref", "Generate the e-commerce reference dataset");
  sub->add_option("--n", a.n, "Number of records")->capture_default_str();
  sub->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  sub->add_option("--out", a.out, "Output CSV; the schema goes to <out>.schema.json")->required();
  sub->add_option("--params", a.params, "JSON file with generator parameters");
  sub->add_option("--config", "key=value config file");
}

int gen_ref(const GenRefArgs& a, std::ostream& out) {
  reference::EcommerceParams params;
  if (!a.params.empty()) params = reference::params_from_json(read_json(a.params));
  params.validate();
  const auto data = reference::generate(params, a.n, RngSeed{a.seed});
  save_csv(data, a.out);
  auto sidecar = schema_to_json(data.schema());
  sidecar["category_stats"] = reference::category_stats_to_json(reference::category_stats(data));
  write_text(a.out + ".schema.json", sidecar.dump(2) + "\n");
  out << "wrote " << data.size() << " records to " << a.out << "\n";
  return kExitOk;
}

// ---- synthesize ------------------------------------------------------------

struct SynthArgs {
  std::string real, schema, out;
  std::size_t iterations = 100, batch_size = 200, proposals = 5, components = 3;
  std::uint64_t seed = 0;
  std::string proposer = "oracle";
  std::string endpoint, model = "gpt-4.1-nano";
  double temperature = 0.8;
  std::size_t max_retries = 3;
  std::size_t retry_base_ms = 1000;
  double timeout_s = 60.0;
  std::string prompt_dir;
  std::string guidance;
  bool guidance_set = false;
  bool resume = false;
  bool cache_components = false;
  std::size_t suite_every = 10;
  std::size_t checkpoint_every = 1;
  double tolerance = 0.05, threshold = 0.05;
  CLI::Option* iterations_opt = nullptr;
  CLI::Option* guidance_opt = nullptr;
};

void add_synthesize(CLI::App& app, SynthArgs& a) {
  auto* sub = app.add_subcommand("synthesize", "Run the iterative synthesis loop");
  sub->add_option("--real", a.real, "Real data CSV")->required();
  sub->add_option("--schema", a.schema, "Schema JSON")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  a.iterations_opt = sub->add_option("--iterations", a.iterations, "Iterations T")->capture_default_str();
  sub->add_option("--batch-size", a.batch_size, "Records per iteration")->capture_default_str();
  sub->add_option("--proposals", a.proposals, "Proposals per iteration")->capture_default_str();
  sub->add_option("--components", a.components, "Joint structural components")->capture_default_str();
  sub->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  sub->add_option("--proposer", a.proposer, "oracle or llm")
      ->check(CLI::IsMember({"oracle", "llm"}))
      ->capture_default_str();
  sub->add_option("--endpoint", a.endpoint, std::string("Chat completion URL (default $") + kEndpointEnv + ")");
  sub->add_option("--model", a.model, "Model name")->capture_default_str();
  sub->add_option("--temperature", a.temperature, "Sampling temperature")->capture_default_str();
  sub->add_option("--max-retries", a.max_retries, "Retries per LLM call")->capture_default_str();
  sub->add_option("--retry-base-ms", a.retry_base_ms, "First retry delay in ms")->capture_default_str();
  sub->add_option("--timeout", a.timeout_s, "HTTP timeout in seconds")->capture_default_str();
  sub->add_option("--prompt-dir", a.prompt_dir, "Directory with prompt template overrides");
  a.guidance_opt = sub->add_option("--guidance", a.guidance, "Scenario guidance for the proposer");
  sub->add_flag("--resume", a.resume, "Continue from <out>/checkpoint");
  sub->add_flag("--cache-components", a.cache_components, "Infer components once");
  sub->add_option("--suite-every", a.suite_every, "Full metric suite cadence (0 disables)")->capture_default_str();
  sub->add_option("--checkpoint-every", a.checkpoint_every, "Checkpoint cadence")->capture_default_str();
  sub->add_option("--tolerance", a.tolerance, "Convergence tolerance")->capture_default_str();
  sub->add_option("--threshold", a.threshold, "Dominance threshold")->capture_default_str();
  sub->add_option("--config", "key=value config file");
}

void write_outputs(const fs::path& out_dir, const SynthesisLoop& loop) {
  save_csv(loop.state().pool, (out_dir / "synthetic.csv").string());
  {
    std::ofstream m(out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    write_metrics_jsonl(m, loop.state().history);
  }
  {
    std::ofstream c(out_dir / "convergence.csv", std::ios::binary | std::ios::trunc);
    write_convergence_csv(c, loop.state().history);
  }
  if (!loop.components().empty())
    write_text(out_dir / "components.json", components_to_json(loop.components()).dump() + "\n");
}

int synthesize(SynthArgs& a, std::ostream& out, std::ostream& err) {
  a.guidance_set = a.guidance_opt->count() > 0;
  const auto schema = load_schema(a.schema);
  const fs::path out_dir(a.out);
  const fs::path ckpt_dir = out_dir / "checkpoint";

  LoopConfig cfg;
  std::optional<Checkpoint> resumed;
  if (a.resume) {
    resumed = load_checkpoint(ckpt_dir, schema);
    cfg = resumed->config;
    if (a.iterations_opt->count() > 0) cfg.iterations = a.iterations;
  } else {
    cfg.iterations = a.iterations;
    cfg.proposals = a.proposals;
    cfg.batch_size = a.batch_size;
    cfg.n_components = a.components;
    cfg.seed = RngSeed{a.seed};
    cfg.tolerance = a.tolerance;
    cfg.threshold = a.threshold;
    cfg.suite_every = a.suite_every;
    cfg.cache_components = a.cache_components;
    if (a.guidance_set) cfg.guidance = a.guidance;
  }
  cfg.validate();
  if (a.checkpoint_every < 1) throw Error(ErrorCode::InvalidConfig, "checkpoint-every: must be >= 1");

  std::unique_ptr<Proposer> proposer;
  if (a.proposer == "llm") {
    ProposerConfig pc;
    pc.endpoint = a.endpoint;
    if (pc.endpoint.empty()) {
      if (const char* env = std::getenv(kEndpointEnv); env != nullptr) pc.endpoint = env;
    }
    if (pc.endpoint.empty())
      throw Error(ErrorCode::InvalidConfig,
                  std::string("endpoint: --proposer llm needs --endpoint or $") + kEndpointEnv);
    pc.model = a.model;
    pc.temperature = a.temperature;
    pc.max_retries = a.max_retries;
    pc.retry_base = std::chrono::milliseconds(a.retry_base_ms);
    pc.timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout_s * 1000.0));
    pc.validate();
    auto templates = a.prompt_dir.empty() ? PromptTemplates::defaults() : PromptTemplates::from_dir(a.prompt_dir);
    auto client = std::make_shared<HttpChatClient>(pc);
    proposer = std::make_unique<LlmProposer>(client, pc, std::move(templates), PromptBudget{},
                                             [&err](std::string_view msg) { err << "[llm] " << msg << "\n"; });
  } else {
    if (cfg.guidance) err << "warning: the oracle proposer ignores --guidance\n";
    proposer = std::make_unique<OracleProposer>();
  }

  const auto real = load_csv(a.real, schema);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());

  SynthesisLoop loop(real, cfg, *proposer);
  if (resumed) {
    loop.restore(std::move(resumed->state));
    out << "resuming at iteration " << loop.state().iteration << " of " << cfg.iterations << "\n";
  }

  try {
    loop.run([&](const IterationRecord& rec) {
      if (rec.iteration % a.checkpoint_every == 0 || loop.done()) {
        save_checkpoint(ckpt_dir, cfg, loop.state());
        write_outputs(out_dir, loop);
      }
      if (rec.iteration % 10 == 0 || loop.done())
        out << "iteration " << rec.iteration << ": mean tvd " << format_number(rec.report.mean_tvd) << "\n";
    });
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ProposerFailure)
      err << "error: " << e.what() << "\nlast checkpoint kept in " << ckpt_dir.string() << "\n";
    throw;
  }

  const auto final_report = loop.finalize();
  save_checkpoint(ckpt_dir, cfg, loop.state());
  write_outputs(out_dir, loop);
  out << metrics::metric_report_table(final_report);
  out << "final mean tvd " << format_number(final_report.mean_tvd) << "\n";
  return kExitOk;
}

// ---- evaluate --------------------------------------------------------------

struct EvalArgs {
  std::string real, synth, schema, synth_schema, components_file, out;
  std::uint64_t seed = 0;
  std::size_t components = 3;
  std::size_t bins = kDefaultMainBins;
};

void add_evaluate(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("evaluate", "Compare a synthetic dataset with the real one");
  sub->add_option("--real", a.real, "Real data CSV")->required();
  sub->add_option("--synth", a.synth, "Synthetic data CSV")->required();
  sub->add_option("--schema", a.schema, "Schema JSON")->required();
  sub->add_option("--synth-schema", a.synth_schema, "Schema of the synthetic data when it differs");
  sub->add_option("--components-file", a.components_file, "JSON array of variable groups");
  sub->add_option("--components", a.components, "Components to infer when no file is given")
      ->capture_default_str();
  sub->add_option("--bins", a.bins, "Main bins per continuous variable")->capture_default_str();
  sub->add_option("--seed", a.seed, "Seed for the classifier split")->capture_default_str();
  sub->add_option("--out", a.out, "Write the JSON report here");
  sub->add_option("--config", "key=value config file");
}

int evaluate(const EvalArgs& a, std::ostream& out) {
  const auto schema = load_schema(a.schema);
  if (!a.synth_schema.empty() && !(load_schema(a.synth_schema) == schema))
    throw Error(ErrorCode::SchemaMismatch, "synthetic schema differs from the real schema");
  const auto real = load_csv(a.real, schema);
  const auto synth = load_csv(a.synth, schema);
  const auto specs = fit_all_bins(real, a.bins);
  std::vector<StructuralComponent> comps;
  if (!a.components_file.empty()) {
    comps = components_from_json(read_json(a.components_file), schema);
  } else if (schema.size() >= 2) {
    comps = infer_components_by_mi(schema, summarize(real, {}, specs, true), a.components);
  }
  const auto report = metrics::metric_suite(real, synth, comps, specs, {1000, RngSeed{a.seed}});
  out << metrics::metric_report_table(report);
  const auto j = metrics::metric_report_to_json(report);
  if (!a.out.empty()) {
    write_text(a.out, j.dump(2) + "\n");
  } else {
    out << j.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "config: cannot read " + path);
  std::vector<std::string> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(n) + ": expected key=value");
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(n) + ": empty key");
    if (key.find("key") != std::string::npos || key.find("token") != std::string::npos ||
        key.find("secret") != std::string::npos)
      throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(n) + ": secrets are read from $" +
                                                kApiKeyEnv + " only");
    if (key == "config") throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(n) + ": nested config");
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distribution-guided synthetic tabular data generation", "distsynth"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  GenRefArgs gen;
  SynthArgs syn;
  EvalArgs eval;
  add_gen_ref(app, gen);
  add_synthesize(app, syn);
  add_evaluate(app, eval);

  try {
    // Config-file values go in front of the command line so flags win.
    std::vector<std::string> args = raw_args;
    for (std::size_t i = 1; i < raw_args.size(); ++i) {
      std::string path;
      if (raw_args[i] == "--config" && i + 1 < raw_args.size()) {
        path = raw_args[i + 1];
      } else if (raw_args[i].rfind("--config=", 0) == 0) {
        path = raw_args[i].substr(9);
      }
      if (path.empty()) continue;
      const auto extra = config_file_args(path);
      args.insert(args.begin() + 1, extra.begin(), extra.end());
      break;
    }

    std::vector<std::string> argv_store{"distsynth"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store) argv.push_back(s.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
    }

    if (app.got_subcommand("gen-ref")) return gen_ref(gen, out);
    if (app.got_subcommand("synthesize")) return synthesize(syn, out, err);
    return evaluate(eval, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace distsynth::cli
