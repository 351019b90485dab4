#include "distsynth/schema.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "distsynth/error.hpp"

namespace distsynth {

namespace {

void check_variable(const Variable& v) {
  if (v.name.empty()) throw Error(ErrorCode::InvalidSchema, "empty variable name");
  if (const auto* d = std::get_if<Discrete>(&v.kind)) {
    if (d->categories.empty())
      throw Error(ErrorCode::InvalidSchema, "variable '" + v.name + "' has no categories");
    std::set<std::string> seen;
    for (const auto& c : d->categories) {
      if (!seen.insert(c).second)
        throw Error(ErrorCode::InvalidSchema,
                    "variable '" + v.name + "' repeats category '" + c + "'");
    }
  } else {
    const auto& c = std::get<Continuous>(v.kind);
    if (!std::isfinite(c.lower) || !std::isfinite(c.upper) || !(c.lower < c.upper))
      throw Error(ErrorCode::InvalidSchema,
                  "variable '" + v.name + "' needs finite bounds with lower < upper");
  }
}

}  // namespace

bool operator==(const Variable& a, const Variable& b) {
  if (a.name != b.name || a.kind.index() != b.kind.index()) return false;
  if (a.is_discrete()) return a.discrete().categories == b.discrete().categories;
  return a.continuous().lower == b.continuous().lower &&
         a.continuous().upper == b.continuous().upper;
}

VariableSchema::VariableSchema(std::vector<Variable> variables)
    : variables_(std::move(variables)) {
  std::set<std::string> names;
  level_index_.resize(variables_.size());
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    const auto& v = variables_[i];
    check_variable(v);
    if (!names.insert(v.name).second)
      throw Error(ErrorCode::InvalidSchema, "duplicate variable name '" + v.name + "'");
    if (v.is_discrete()) {
      const auto& cats = v.discrete().categories;
      for (std::size_t k = 0; k < cats.size(); ++k)
        level_index_[i].emplace(cats[k], static_cast<std::uint32_t>(k));
    }
  }
}

std::optional<std::size_t> VariableSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i].name == name) return i;
  return std::nullopt;
}

std::size_t VariableSchema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw Error(ErrorCode::InvalidSchema, "unknown variable '" + std::string(name) + "'");
}

std::optional<std::uint32_t> VariableSchema::category_level(
    std::size_t var, std::string_view label) const {
  const auto& idx = level_index_[var];
  auto it = idx.find(std::string(label));
  if (it == idx.end()) return std::nullopt;
  return it->second;
}

bool operator==(const VariableSchema& a, const VariableSchema& b) {
  return a.variables_ == b.variables_;
}

void validate_record(const VariableSchema& schema, const Record& record,
                     std::size_t row) {
  if (record.size() != schema.size())
    throw LocatedError(ErrorCode::TypeMismatch, row, "*",
                       "arity " + std::to_string(record.size()) + " != schema arity " +
                           std::to_string(schema.size()));
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& var = schema[j];
    const auto& value = record[j];
    if (var.is_discrete()) {
      const auto* c = std::get_if<Category>(&value);
      if (c == nullptr)
        throw LocatedError(ErrorCode::TypeMismatch, row, var.name, "expected a category");
      if (c->level >= var.discrete().categories.size())
        throw LocatedError(ErrorCode::TypeMismatch, row, var.name, "category level out of range");
    } else {
      const auto* x = std::get_if<double>(&value);
      if (x == nullptr)
        throw LocatedError(ErrorCode::TypeMismatch, row, var.name, "expected a number");
      const auto& b = var.continuous();
      if (!std::isfinite(*x))
        throw LocatedError(ErrorCode::TypeMismatch, row, var.name, "non-finite number");
      if (*x < b.lower || *x > b.upper)
        throw LocatedError(ErrorCode::OutOfBounds, row, var.name,
                           format_number(*x) + " outside [" + format_number(b.lower) +
                               ", " + format_number(b.upper) + "]");
    }
  }
}

Dataset::Dataset(VariableSchema schema, std::vector<Record> records)
    : schema_(std::move(schema)), records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) validate_record(schema_, records_[i], i + 1);
}

void Dataset::append(Record record) {
  validate_record(schema_, record, records_.size() + 1);
  records_.push_back(std::move(record));
}

void Dataset::append_all(const Dataset& other) {
  if (!(other.schema_ == schema_))
    throw Error(ErrorCode::SchemaMismatch, "cannot append records of a different schema");
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

std::vector<double> Dataset::column_numbers(std::size_t var) const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(std::get<double>(r[var]));
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (!(a.schema() == b.schema()))
    throw Error(ErrorCode::SchemaMismatch, "concat requires identical schemas");
  Dataset out(a.schema());
  out.reserve(a.size() + b.size());
  out.append_all(a);
  out.append_all(b);
  return out;
}

nlohmann::json schema_to_json(const VariableSchema& schema) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : schema) {
    if (v.is_discrete()) {
      vars.push_back({{"name", v.name}, {"kind", "discrete"},
                      {"categories", v.discrete().categories}});
    } else {
      vars.push_back({{"name", v.name}, {"kind", "continuous"},
                      {"lower", v.continuous().lower}, {"upper", v.continuous().upper}});
    }
  }
  return {{"variables", vars}};
}

VariableSchema schema_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("variables") || !j["variables"].is_array())
    throw Error(ErrorCode::InvalidSchema, "schema JSON needs a 'variables' array");
  std::vector<Variable> vars;
  try {
    for (const auto& item : j["variables"]) {
      Variable v;
      v.name = item.at("name").get<std::string>();
      const auto kind = item.at("kind").get<std::string>();
      if (kind == "discrete") {
        v.kind = Discrete{item.at("categories").get<std::vector<std::string>>()};
      } else if (kind == "continuous") {
        v.kind = Continuous{item.at("lower").get<double>(), item.at("upper").get<double>()};
      } else {
        throw Error(ErrorCode::InvalidSchema, "unknown kind '" + kind + "' for '" + v.name + "'");
      }
      vars.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSchema, e.what());
  }
  return VariableSchema(std::move(vars));
}

VariableSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSchema, "'" + path + "': " + e.what());
  }
  return schema_from_json(j);
}

void save_schema(const VariableSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  out << schema_to_json(schema).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

std::string format_number(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace distsynth
