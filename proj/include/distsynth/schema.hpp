#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace distsynth {

struct Discrete {
  std::vector<std::string> categories;
};

struct Continuous {
  double lower = 0.0;
  double upper = 1.0;
};

using VariableKind = std::variant<Discrete, Continuous>;

struct Variable {
  std::string name;
  VariableKind kind;

  bool is_discrete() const { return std::holds_alternative<Discrete>(kind); }
  bool is_continuous() const { return std::holds_alternative<Continuous>(kind); }
  const Discrete& discrete() const { return std::get<Discrete>(kind); }
  const Continuous& continuous() const { return std::get<Continuous>(kind); }
};

// Ordered variable set. Order defines column order in every file format.
class VariableSchema {
 public:
  VariableSchema() = default;
  // Throws Error(InvalidSchema) when an invariant is violated.
  explicit VariableSchema(std::vector<Variable> variables);

  std::size_t size() const { return variables_.size(); }
  bool empty() const { return variables_.empty(); }
  const Variable& operator[](std::size_t i) const { return variables_[i]; }
  const std::vector<Variable>& variables() const { return variables_; }
  auto begin() const { return variables_.begin(); }
  auto end() const { return variables_.end(); }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws Error(InvalidSchema) when absent.
  std::size_t index_of(std::string_view name) const;
  const Variable& at(std::string_view name) const { return variables_[index_of(name)]; }

  // Level index of a category label for a discrete variable.
  std::optional<std::uint32_t> category_level(std::size_t var,
                                              std::string_view label) const;

  friend bool operator==(const VariableSchema& a, const VariableSchema& b);

 private:
  std::vector<Variable> variables_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> level_index_;
};

bool operator==(const Variable& a, const Variable& b);

// Discrete values are held as a level index into the variable's category list.
struct Category {
  std::uint32_t level = 0;
  friend bool operator==(Category, Category) = default;
};

using Value = std::variant<Category, double>;
using Record = std::vector<Value>;

// Immutable-after-construction validated table.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(VariableSchema schema) : schema_(std::move(schema)) {}
  // Validates every record; throws LocatedError on the first violation.
  Dataset(VariableSchema schema, std::vector<Record> records);

  const VariableSchema& schema() const { return schema_; }
  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }

  // Validates and appends. Used by builders; the loop only appends batches.
  void append(Record record);
  void append_all(const Dataset& other);
  void reserve(std::size_t n) { records_.reserve(n); }

  std::uint32_t level(std::size_t row, std::size_t var) const {
    return std::get<Category>(records_[row][var]).level;
  }
  double number(std::size_t row, std::size_t var) const {
    return std::get<double>(records_[row][var]);
  }
  const std::string& label(std::size_t row, std::size_t var) const {
    return schema_[var].discrete().categories[level(row, var)];
  }

  std::vector<double> column_numbers(std::size_t var) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.schema_ == b.schema_ && a.records_ == b.records_;
  }

 private:
  VariableSchema schema_;
  std::vector<Record> records_;
};

// Throws LocatedError (row is 1-based) when the record does not fit the schema.
void validate_record(const VariableSchema& schema, const Record& record,
                     std::size_t row);

// a followed by b. Throws Error(SchemaMismatch).
Dataset concat(const Dataset& a, const Dataset& b);

nlohmann::json schema_to_json(const VariableSchema& schema);
// Accepts {"variables": [...]} and ignores unrelated keys.
VariableSchema schema_from_json(const nlohmann::json& j);
VariableSchema load_schema(const std::string& path);
void save_schema(const VariableSchema& schema, const std::string& path);

// Shortest decimal text that round-trips the double exactly.
std::string format_number(double value);

}  // namespace distsynth
