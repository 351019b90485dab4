#include "distsynth/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "distsynth/error.hpp"

namespace distsynth::reference {

namespace {

constexpr double kProbTol = 1e-12;

template <std::size_t N>
void check_prob_vector(const std::array<double, N>& p, const std::string& what) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw Error(ErrorCode::InvalidParams, what + " has a negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kProbTol)
    throw Error(ErrorCode::InvalidParams, what + " does not sum to 1");
}

void check_normal(const NormalParams& n, const std::string& what) {
  if (!std::isfinite(n.mean) || !(n.std > 0.0) || !std::isfinite(n.std))
    throw Error(ErrorCode::InvalidParams, what + " needs finite mean and std > 0");
}

template <std::size_t N>
std::size_t index_in(const std::array<std::string, N>& labels, const std::string& value,
                     const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (labels[i] == value) return i;
  throw Error(ErrorCode::UnknownCategory, std::string(what) + " '" + value + "'");
}

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

}  // namespace

void EcommerceParams::validate() const {
  check_prob_vector(age_weights, "age mixture weights");
  for (std::size_t i = 0; i < age_components.size(); ++i)
    check_normal(age_components[i], "age component " + std::to_string(i));
  if (!(age_lower < age_upper)) throw Error(ErrorCode::InvalidParams, "age truncation bounds");
  check_prob_vector(gender_probs, "gender probabilities");
  check_prob_vector(location_probs, "location probabilities");
  for (std::size_t g = 0; g < 3; ++g)
    for (std::size_t s = 0; s < 2; ++s)
      check_prob_vector(category_cpt[g][s], "category CPT row (" + std::to_string(g) + ", " +
                                                std::to_string(s) + ")");
  for (std::size_t c = 0; c < price_params.size(); ++c)
    check_normal(price_params[c], "price parameters for " + kCategories[c]);
  if (!(price_lower < price_upper))
    throw Error(ErrorCode::InvalidParams, "price truncation bounds");
  for (std::size_t l = 0; l < 2; ++l)
    check_prob_vector(payment_cpt[l], "payment CPT row for " + kLocations[l]);
}

nlohmann::json params_to_json(const EcommerceParams& p) {
  auto normals = [](const auto& arr) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& n : arr) out.push_back({n.mean, n.std});
    return out;
  };
  return {{"age_weights", p.age_weights},
          {"age_components", normals(p.age_components)},
          {"age_bounds", {p.age_lower, p.age_upper}},
          {"gender_probs", p.gender_probs},
          {"location_probs", p.location_probs},
          {"category_cpt", p.category_cpt},
          {"price_params", normals(p.price_params)},
          {"price_bounds", {p.price_lower, p.price_upper}},
          {"payment_cpt", p.payment_cpt}};
}

EcommerceParams params_from_json(const nlohmann::json& j) {
  EcommerceParams p;
  try {
    auto normals = [](const nlohmann::json& arr, auto& out) {
      if (arr.size() != out.size()) throw Error(ErrorCode::InvalidParams, "wrong arity");
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = {arr[i].at(0).get<double>(), arr[i].at(1).get<double>()};
    };
    if (j.contains("age_weights")) p.age_weights = j["age_weights"].get<std::array<double, 3>>();
    if (j.contains("age_components")) normals(j["age_components"], p.age_components);
    if (j.contains("age_bounds")) {
      p.age_lower = j["age_bounds"].at(0).get<double>();
      p.age_upper = j["age_bounds"].at(1).get<double>();
    }
    if (j.contains("gender_probs")) p.gender_probs = j["gender_probs"].get<std::array<double, 2>>();
    if (j.contains("location_probs"))
      p.location_probs = j["location_probs"].get<std::array<double, 2>>();
    if (j.contains("category_cpt"))
      p.category_cpt = j["category_cpt"].get<decltype(p.category_cpt)>();
    if (j.contains("price_params")) normals(j["price_params"], p.price_params);
    if (j.contains("price_bounds")) {
      p.price_lower = j["price_bounds"].at(0).get<double>();
      p.price_upper = j["price_bounds"].at(1).get<double>();
    }
    if (j.contains("payment_cpt")) p.payment_cpt = j["payment_cpt"].get<decltype(p.payment_cpt)>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, e.what());
  }
  p.validate();
  return p;
}

AgeGroup age_group(double age) {
  if (age < 35.0) return AgeGroup::Young;
  if (age < 55.0) return AgeGroup::Middle;
  return AgeGroup::Old;
}

double sample_truncated_normal(double mean, double std, double lo, double hi, Rng& rng) {
  if (!(std > 0.0) || !std::isfinite(std) || !std::isfinite(mean))
    throw Error(ErrorCode::InvalidParams, "truncated normal needs finite mean and std > 0");
  if (!(lo < hi)) throw Error(ErrorCode::InvalidParams, "truncated normal needs lo < hi");
  const double a = (lo - mean) / std;
  const double b = (hi - mean) / std;
  // Work in the tail that keeps the CDF values away from 1 for precision.
  const bool flip = a > 0.0;
  const double la = flip ? -b : a;
  const double lb = flip ? -a : b;
  const double cdf_a = boost::math::cdf(kStdNormal, la);
  const double cdf_b = boost::math::cdf(kStdNormal, lb);
  const double mass = cdf_b - cdf_a;
  if (!(mass >= kProbTol))
    throw Error(ErrorCode::DegenerateTruncation, "interval mass below 1e-12");
  if (mass >= 0.05) {
    for (;;) {
      const double x = mean + std * rng.normal();
      if (x >= lo && x <= hi) return x;
    }
  }
  double u = cdf_a + mass * rng.uniform();
  // Keep the quantile argument strictly inside (0, 1).
  u = std::clamp(u, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
  double z = boost::math::quantile(kStdNormal, u);
  if (flip) z = -z;
  return std::clamp(mean + std * z, lo, hi);
}

VariableSchema ecommerce_schema(const EcommerceParams& p) {
  auto cats = [](const auto& arr) { return Discrete{std::vector<std::string>(arr.begin(), arr.end())}; };
  return VariableSchema({
      {kAge, Continuous{p.age_lower, p.age_upper}},
      {kGender, cats(kGenders)},
      {kLocation, cats(kLocations)},
      {kCategory, cats(kCategories)},
      {kPrice, Continuous{p.price_lower, p.price_upper}},
      {kPayment, cats(kPayments)},
  });
}

Dataset generate(const EcommerceParams& params, std::size_t n, RngSeed seed) {
  params.validate();
  Rng age_rng(seed, std::string("ref/") + kAge);
  Rng gender_rng(seed, std::string("ref/") + kGender);
  Rng location_rng(seed, std::string("ref/") + kLocation);
  Rng category_rng(seed, std::string("ref/") + kCategory);
  Rng price_rng(seed, std::string("ref/") + kPrice);
  Rng payment_rng(seed, std::string("ref/") + kPayment);

  std::vector<Record> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Component-wise truncation: choose the component, then truncate it.
    const auto comp = age_rng.categorical(params.age_weights);
    const auto& ac = params.age_components[comp];
    const double age =
        sample_truncated_normal(ac.mean, ac.std, params.age_lower, params.age_upper, age_rng);
    const auto gender = gender_rng.categorical(params.gender_probs);
    const auto location = location_rng.categorical(params.location_probs);
    const auto group = static_cast<std::size_t>(age_group(age));
    const auto category = category_rng.categorical(params.category_cpt[group][gender]);
    const auto& pp = params.price_params[category];
    const double price =
        sample_truncated_normal(pp.mean, pp.std, params.price_lower, params.price_upper, price_rng);
    const auto payment = payment_rng.categorical(params.payment_cpt[location]);
    records.push_back({age, Category{static_cast<std::uint32_t>(gender)},
                       Category{static_cast<std::uint32_t>(location)},
                       Category{static_cast<std::uint32_t>(category)}, price,
                       Category{static_cast<std::uint32_t>(payment)}});
  }
  return Dataset(ecommerce_schema(params), std::move(records));
}

std::string_view to_string(Band b) {
  switch (b) {
    case Band::Low: return "Low";
    case Band::Mid: return "Mid";
    case Band::High: return "High";
  }
  return "?";
}

Transaction transaction_at(const Dataset& data, std::size_t row) {
  const auto& s = data.schema();
  Transaction t;
  t.age = data.number(row, s.index_of(kAge));
  t.gender = data.label(row, s.index_of(kGender));
  t.location = data.label(row, s.index_of(kLocation));
  t.category = data.label(row, s.index_of(kCategory));
  t.price = data.number(row, s.index_of(kPrice));
  t.payment = data.label(row, s.index_of(kPayment));
  return t;
}

CategoryStats category_stats(const Dataset& data) {
  const auto& s = data.schema();
  const auto cat = s.index_of(kCategory);
  const auto price = s.index_of(kPrice);
  std::map<std::string, std::vector<double>> groups;
  for (std::size_t i = 0; i < data.size(); ++i)
    groups[data.label(i, cat)].push_back(data.number(i, price));
  CategoryStats out;
  for (const auto& [name, xs] : groups) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    out[name] = {mean, xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
  }
  return out;
}

nlohmann::json category_stats_to_json(const CategoryStats& stats) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, np] : stats) j[name] = {{"mean", np.mean}, {"std", np.std}};
  return j;
}

CategoryStats category_stats_from_json(const nlohmann::json& j) {
  CategoryStats out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[it.key()] = {it.value().at("mean").get<double>(), it.value().at("std").get<double>()};
  return out;
}

double discount_score(const Transaction& t, const CategoryStats& stats) {
  auto it = stats.find(t.category);
  if (it == stats.end()) throw Error(ErrorCode::UnknownCategory, "no price stats for '" + t.category + "'");
  if (!(it->second.std > 0.0))
    throw Error(ErrorCode::ZeroStd, "price std is zero for '" + t.category + "'");
  const double z = (t.price - it->second.mean) / it->second.std;
  const double age_dev = t.age - 35.0;
  const bool cod = index_in(kPayments, t.payment, "payment method") == 1;
  const bool developing = index_in(kLocations, t.location, "location tier") == 1;
  return -std::tanh(z) + 0.01 * (age_dev * age_dev) / 100.0 + (cod ? 0.5 : 0.0) +
         (developing ? 0.3 : 0.0);
}

Band discount_propensity(const Transaction& t, const CategoryStats& stats) {
  const double s = discount_score(t, stats);
  if (s > 1.0) return Band::High;
  if (s < -1.0) return Band::Low;
  return Band::Mid;
}

double lifetime_value_score(const Transaction& t) {
  static constexpr std::array<double, 4> kCategoryWeight{1.3, 1.1, 0.9, 1.4};
  const double wc = kCategoryWeight[index_in(kCategories, t.category, "product category")];
  const double wm = index_in(kPayments, t.payment, "payment method") == 0 ? 1.2 : 0.85;
  return std::sqrt(t.price) * wm / (std::log(1.0 + std::abs(t.age - 35.0)) + 1.0) * wc;
}

Band lifetime_value_band(const Transaction& t) {
  const double l0 = lifetime_value_score(t);
  if (l0 > 20.0) return Band::High;
  if (l0 < 10.0) return Band::Low;
  return Band::Mid;
}

}  // namespace distsynth::reference
