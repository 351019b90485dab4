#pragma once

#include <iosfwd>
#include <string>

#include "distsynth/schema.hpp"

namespace distsynth {

// Header row must list the schema's variable names in order. Missing values
// are rejected. Errors: MissingColumn, TypeMismatch, OutOfBounds, EmptyFile.
Dataset load_csv(const std::string& path, const VariableSchema& schema);
Dataset read_csv(std::istream& in, const VariableSchema& schema);

// Categories are written raw unless they contain a comma, quote or newline
// (then double-quoted); numbers use the shortest round-trip form.
void save_csv(const Dataset& dataset, const std::string& path);
void write_csv(const Dataset& dataset, std::ostream& out);

}  // namespace distsynth
