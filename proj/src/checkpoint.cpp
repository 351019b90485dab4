#include "distsynth/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "distsynth/csv.hpp"
#include "distsynth/error.hpp"

namespace distsynth {

namespace {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out << bytes;
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot replace " + path.string() + ": " + ec.message());
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint file " + path.string() + " is missing");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const fs::path& dir, const LoopConfig& config, const LoopState& state) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : state.history) history.push_back(metric_row_to_json(r));
  const nlohmann::json st = {
      {"iteration", state.iteration},
      {"rng", state.rng.save_state()},
      {"config", loop_config_to_json(config)},
      {"schema", schema_to_json(state.pool.schema())},
      {"component_cache", components_to_json(state.component_cache)},
      {"history", std::move(history)},
  };
  const std::string state_bytes = st.dump(1) + "\n";
  std::ostringstream pool;
  write_csv(state.pool, pool);
  const std::string pool_bytes = pool.str();

  const nlohmann::json manifest = {
      {"format", 1},
      {"files", {{"state.json", hex64(fnv1a64(state_bytes))}, {"pool.csv", hex64(fnv1a64(pool_bytes))}}},
  };
  write_atomic(dir / "state.json", state_bytes);
  write_atomic(dir / "pool.csv", pool_bytes);
  write_atomic(dir / "manifest.json", manifest.dump(1) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir, const VariableSchema& schema) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::CorruptCheckpoint, dir.string() + " is not a checkpoint directory");
  const auto manifest_bytes = read_all(dir / "manifest.json");
  const auto state_bytes = read_all(dir / "state.json");
  const auto pool_bytes = read_all(dir / "pool.csv");
  try {
    const auto manifest = nlohmann::json::parse(manifest_bytes);
    const auto& files = manifest.at("files");
    if (files.at("state.json").get<std::string>() != hex64(fnv1a64(state_bytes)))
      throw Error(ErrorCode::CorruptCheckpoint, "state.json does not match its manifest hash");
    if (files.at("pool.csv").get<std::string>() != hex64(fnv1a64(pool_bytes)))
      throw Error(ErrorCode::CorruptCheckpoint, "pool.csv does not match its manifest hash");

    const auto st = nlohmann::json::parse(state_bytes);
    if (!(schema_from_json(st.at("schema")) == schema))
      throw Error(ErrorCode::SchemaMismatch, "checkpoint was written for a different schema");
    Checkpoint cp;
    cp.config = loop_config_from_json(st.at("config"));
    cp.state.iteration = st.at("iteration").get<std::size_t>();
    cp.state.rng.load_state(st.at("rng").get<std::string>());
    cp.state.component_cache = components_from_json(st.at("component_cache"), schema);
    for (const auto& r : st.at("history")) cp.state.history.push_back(metric_row_from_json(r));
    std::istringstream pool(pool_bytes);
    cp.state.pool = read_csv(pool, schema);
    if (cp.state.pool.size() != cp.state.iteration * cp.config.batch_size)
      throw Error(ErrorCode::CorruptCheckpoint, "pool size disagrees with the iteration count");
    return cp;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint is unreadable: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint || e.code() == ErrorCode::SchemaMismatch) throw;
    throw Error(ErrorCode::CorruptCheckpoint, std::string("checkpoint is unreadable: ") + e.what());
  }
}

}  // namespace distsynth
