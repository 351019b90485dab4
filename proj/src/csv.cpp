#include "distsynth/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "distsynth/error.hpp"

namespace distsynth {

namespace {

// Splits one logical CSV line into fields. Quoted fields may contain commas
// and doubled quotes; embedded newlines are not supported.
std::vector<std::string> split_line(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"' && cur.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw LocatedError(ErrorCode::TypeMismatch, row, "*", "unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

void write_field(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char ch : s) {
    if (ch == '"') out << '"';
    out << ch;
  }
  out << '"';
}

}  // namespace

Dataset read_csv(std::istream& in, const VariableSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::EmptyFile, "no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.empty() && in.peek() == std::char_traits<char>::eof())
    throw Error(ErrorCode::EmptyFile, "no header row");
  const auto header = split_line(line, 0);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (j >= header.size() || header[j] != schema[j].name)
      throw Error(ErrorCode::MissingColumn,
                  "expected column " + std::to_string(j + 1) + " to be '" + schema[j].name + "'");
  }
  if (header.size() != schema.size())
    throw Error(ErrorCode::MissingColumn, "header has " + std::to_string(header.size()) +
                                              " columns, schema has " +
                                              std::to_string(schema.size()));

  std::vector<Record> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    auto fields = split_line(line, row);
    if (fields.size() != schema.size())
      throw LocatedError(ErrorCode::TypeMismatch, row, "*",
                         "expected " + std::to_string(schema.size()) + " fields, got " +
                             std::to_string(fields.size()));
    Record rec;
    rec.reserve(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& var = schema[j];
      const auto& field = fields[j];
      if (field.empty())
        throw LocatedError(ErrorCode::TypeMismatch, row, var.name, "missing value");
      if (var.is_discrete()) {
        auto level = schema.category_level(j, field);
        if (!level)
          throw LocatedError(ErrorCode::TypeMismatch, row, var.name,
                             "unknown category '" + field + "'");
        rec.emplace_back(Category{*level});
      } else {
        double x = 0.0;
        if (!parse_double(field, x))
          throw LocatedError(ErrorCode::TypeMismatch, row, var.name,
                             "'" + field + "' is not a number");
        rec.emplace_back(x);
      }
    }
    validate_record(schema, rec, row);
    records.push_back(std::move(rec));
  }
  Dataset out(schema);
  out.reserve(records.size());
  for (auto& r : records) out.append(std::move(r));
  return out;
}

Dataset load_csv(const std::string& path, const VariableSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  return read_csv(in, schema);
}

void write_csv(const Dataset& dataset, std::ostream& out) {
  const auto& schema = dataset.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (j) out << ',';
    write_field(out, schema[j].name);
  }
  out << '\n';
  for (const auto& rec : dataset.records()) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (j) out << ',';
      if (const auto* c = std::get_if<Category>(&rec[j])) {
        write_field(out, schema[j].discrete().categories[c->level]);
      } else {
        out << format_number(std::get<double>(rec[j]));
      }
    }
    out << '\n';
  }
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  write_csv(dataset, out);
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

}  // namespace distsynth
