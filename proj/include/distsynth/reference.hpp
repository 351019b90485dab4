#pragma once

// Seeded e-commerce transaction simulator (a six-node Bayesian network) and
// the two post-hoc economic labels computed on its records.

#include <array>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "distsynth/rng.hpp"
#include "distsynth/schema.hpp"

namespace distsynth::reference {

inline constexpr const char* kAge = "user_age";
inline constexpr const char* kGender = "gender";
inline constexpr const char* kLocation = "location_tier";
inline constexpr const char* kCategory = "product_category";
inline constexpr const char* kPrice = "price";
inline constexpr const char* kPayment = "payment_method";

inline const std::array<std::string, 2> kGenders = {"Male", "Female"};
inline const std::array<std::string, 2> kLocations = {"Developed", "Developing"};
inline const std::array<std::string, 4> kCategories = {
    "Electronics", "Apparel", "Food & Beverages", "Furniture & Appliances"};
inline const std::array<std::string, 2> kPayments = {"Online Payment", "Cash on Delivery"};

enum class AgeGroup { Young = 0, Middle = 1, Old = 2 };

struct NormalParams {
  double mean = 0.0;
  double std = 1.0;
};

struct EcommerceParams {
  std::array<double, 3> age_weights{0.5, 0.35, 0.15};
  std::array<NormalParams, 3> age_components{{{24, 6}, {38, 15}, {55, 10}}};
  double age_lower = 18.0;
  double age_upper = 90.0;
  std::array<double, 2> gender_probs{0.45, 0.55};
  std::array<double, 2> location_probs{0.40, 0.60};
  // [age group][gender] -> distribution over kCategories.
  std::array<std::array<std::array<double, 4>, 2>, 3> category_cpt{{
      {{{0.50, 0.25, 0.05, 0.20}, {0.20, 0.50, 0.05, 0.25}}},
      {{{0.20, 0.10, 0.50, 0.20}, {0.10, 0.20, 0.55, 0.15}}},
      {{{0.10, 0.10, 0.65, 0.15}, {0.10, 0.10, 0.60, 0.20}}},
  }};
  std::array<NormalParams, 4> price_params{{{800, 1000}, {100, 500}, {100, 400}, {200, 500}}};
  double price_lower = 0.0;
  double price_upper = 2000.0;
  // [location] -> [Online, COD].
  std::array<std::array<double, 2>, 2> payment_cpt{{{0.70, 0.30}, {0.40, 0.60}}};

  // Throws Error(InvalidParams).
  void validate() const;
};

nlohmann::json params_to_json(const EcommerceParams& p);
EcommerceParams params_from_json(const nlohmann::json& j);

AgeGroup age_group(double age);

// Normal(mean, std) restricted to [lo, hi]. Rejection sampling, switching to
// inverse-CDF when the interval's mass is below 0.05.
// Throws InvalidParams for std <= 0 or lo >= hi, DegenerateTruncation when the
// interval's mass is below 1e-12.
double sample_truncated_normal(double mean, double std, double lo, double hi, Rng& rng);

VariableSchema ecommerce_schema(const EcommerceParams& p = {});

// Records follow p(A) p(G) p(L) p(C|A,G) p(X|C) p(M|L). Each variable draws
// from its own stream derived from the seed ("ref/<variable name>").
Dataset generate(const EcommerceParams& params, std::size_t n, RngSeed seed);

enum class Band { Low, Mid, High };
std::string_view to_string(Band b);

struct Transaction {
  double age = 0.0;
  std::string gender;
  std::string location;
  std::string category;
  double price = 0.0;
  std::string payment;
};

// Extracts a transaction from any dataset carrying the six named variables.
Transaction transaction_at(const Dataset& data, std::size_t row);

using CategoryStats = std::map<std::string, NormalParams>;

// Per-category price mean and sample standard deviation (n - 1).
CategoryStats category_stats(const Dataset& data);
nlohmann::json category_stats_to_json(const CategoryStats& stats);
CategoryStats category_stats_from_json(const nlohmann::json& j);

double discount_score(const Transaction& t, const CategoryStats& stats);
Band discount_propensity(const Transaction& t, const CategoryStats& stats);
double lifetime_value_score(const Transaction& t);
Band lifetime_value_band(const Transaction& t);

}  // namespace distsynth::reference
