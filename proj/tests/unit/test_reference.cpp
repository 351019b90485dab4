#include <doctest.h>

#include <cmath>
#include <sstream>

#include "distsynth/csv.hpp"
#include "distsynth/error.hpp"
#include "distsynth/reference.hpp"

using namespace distsynth;
using namespace distsynth::reference;

namespace {

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double truncated_mean(double mu, double s, double lo, double hi) {
  const double a = (lo - mu) / s, b = (hi - mu) / s;
  return mu + s * (phi(a) - phi(b)) / (Phi(b) - Phi(a));
}

double truncated_var(double mu, double s, double lo, double hi) {
  const double a = (lo - mu) / s, b = (hi - mu) / s, z = Phi(b) - Phi(a);
  const double r = (phi(a) - phi(b)) / z;
  return s * s * (1.0 + (a * phi(a) - b * phi(b)) / z - r * r);
}

void check_truncated(double mu, double s, double lo, double hi) {
  Rng rng(RngSeed{11}, "tn");
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_truncated_normal(mu, s, lo, hi, rng);
    REQUIRE((x >= lo && x <= hi));
    sum += x;
  }
  const double se = std::sqrt(truncated_var(mu, s, lo, hi) / n);
  CHECK(std::abs(sum / n - truncated_mean(mu, s, lo, hi)) < 3.0 * se);
}

Transaction tx(double age, std::string cat, double price, std::string pay, std::string loc) {
  return Transaction{age, "Male", std::move(loc), std::move(cat), price, std::move(pay)};
}

}  // namespace

TEST_CASE("age groups") {
  CHECK(age_group(34.99) == AgeGroup::Young);
  CHECK(age_group(35.0) == AgeGroup::Middle);
  CHECK(age_group(54.999) == AgeGroup::Middle);
  CHECK(age_group(55.0) == AgeGroup::Old);
  CHECK(age_group(18.0) == AgeGroup::Young);
}

TEST_CASE("truncated normal") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double x = sample_truncated_normal(800, 1000, 0, 2000, rng);
    REQUIRE((x >= 0 && x <= 2000));
  }
  check_truncated(50, 10, 30, 70);      // symmetric
  check_truncated(100, 400, 0, 2000);   // one-sided, rejection path
  check_truncated(0, 1, 3, 4);          // tail mass ~0.0013, inverse-CDF path
  CHECK_THROWS_AS(sample_truncated_normal(0, 0, 0, 1, rng), Error);
  CHECK_THROWS_AS(sample_truncated_normal(0, 1, 1, 1, rng), Error);
  try {
    sample_truncated_normal(0, 1, 40, 41, rng);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateTruncation);
  }
}

TEST_CASE("params validation and json") {
  EcommerceParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(params_to_json(params_from_json(params_to_json(p))) == params_to_json(p));
  auto bad = p;
  bad.gender_probs = {0.5, 0.6};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = p;
  bad.price_params[0].std = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = p;
  bad.category_cpt[1][0] = {1.2, -0.2, 0.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("generate is deterministic and shaped") {
  CHECK(generate({}, 0, RngSeed{1}).empty());
  const auto a = generate({}, 2000, RngSeed{7});
  const auto b = generate({}, 2000, RngSeed{7});
  std::ostringstream sa, sb;
  write_csv(a, sa);
  write_csv(b, sb);
  CHECK(sa.str() == sb.str());
  CHECK_FALSE(a == generate({}, 2000, RngSeed{8}));
  const auto& s = a.schema();
  REQUIRE(s.size() == 6);
  CHECK(s[0].name == kAge);
  CHECK(s[0].continuous().lower == 18.0);
  CHECK(s[4].continuous().upper == 2000.0);
  // A prefix run draws the same records: every variable has its own stream.
  const auto prefix = generate({}, 100, RngSeed{7});
  for (std::size_t i = 0; i < 100; ++i) CHECK(prefix[i] == a[i]);
}

TEST_CASE("discrete marginals and CPT at n = 10^5") {
  const auto d = generate({}, 100000, RngSeed{2024});
  const auto& s = d.schema();
  const auto g = s.index_of(kGender), l = s.index_of(kLocation), m = s.index_of(kPayment);
  double male = 0, dev = 0, dev_online = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    male += d.level(i, g) == 0;
    if (d.level(i, l) == 0) {
      dev += 1;
      dev_online += d.level(i, m) == 0;
    }
  }
  CHECK(std::abs(male / d.size() - 0.45) <= 0.005);
  CHECK(std::abs(dev_online / dev - 0.70) <= 0.01);
}

TEST_CASE("discount propensity") {
  const CategoryStats stats{{"Electronics", {800, 100}}, {"Apparel", {100, 50}}};
  CHECK(discount_score(tx(35, "Electronics", 800, "Online Payment", "Developed"), stats) == 0.0);
  CHECK(discount_propensity(tx(35, "Electronics", 800, "Online Payment", "Developed"), stats) == Band::Mid);
  CHECK(discount_score(tx(35, "Electronics", 800, "Cash on Delivery", "Developing"), stats) ==
        doctest::Approx(0.8).epsilon(1e-12));
  CHECK(discount_propensity(tx(35, "Electronics", 800, "Cash on Delivery", "Developing"), stats) == Band::Mid);
  CHECK(discount_score(tx(90, "Apparel", 100, "Cash on Delivery", "Developing"), stats) ==
        doctest::Approx(1.1025).epsilon(1e-12));
  CHECK(discount_propensity(tx(90, "Apparel", 100, "Cash on Delivery", "Developing"), stats) == Band::High);
  // z = 3: S = -tanh(3) = -0.995 stays above the Low threshold.
  CHECK(discount_propensity(tx(35, "Apparel", 250, "Online Payment", "Developed"), stats) == Band::Mid);
  CHECK_THROWS_AS(discount_score(tx(35, "Furniture & Appliances", 1, "Online Payment", "Developed"), stats), Error);
  const CategoryStats zero{{"Electronics", {800, 0}}};
  try {
    discount_score(tx(35, "Electronics", 800, "Online Payment", "Developed"), zero);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroStd);
  }
}

TEST_CASE("lifetime value band") {
  CHECK(lifetime_value_score(tx(35, "Electronics", 100, "Online Payment", "Developed")) ==
        doctest::Approx(15.6).epsilon(1e-12));
  CHECK(lifetime_value_band(tx(35, "Electronics", 100, "Online Payment", "Developed")) == Band::Mid);
  CHECK(lifetime_value_band(tx(60, "Apparel", 0, "Online Payment", "Developed")) == Band::Low);
  CHECK(lifetime_value_score(tx(35, "Furniture & Appliances", 400, "Online Payment", "Developed")) ==
        doctest::Approx(33.6).epsilon(1e-12));
  CHECK(lifetime_value_band(tx(35, "Furniture & Appliances", 400, "Online Payment", "Developed")) == Band::High);
  CHECK_THROWS_AS(lifetime_value_score(tx(35, "Toys", 1, "Online Payment", "Developed")), Error);
}

TEST_CASE("category stats use the sample standard deviation") {
  const auto d = generate({}, 500, RngSeed{3});
  const auto stats = category_stats(d);
  const auto p = d.schema().index_of(kPrice), c = d.schema().index_of(kCategory);
  double sum = 0, sq = 0, n = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.level(i, c) != 0) continue;
    sum += d.number(i, p);
    n += 1;
  }
  const double mean = sum / n;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.level(i, c) == 0) sq += (d.number(i, p) - mean) * (d.number(i, p) - mean);
  CHECK(stats.at("Electronics").mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(stats.at("Electronics").std == doctest::Approx(std::sqrt(sq / (n - 1))).epsilon(1e-12));
  CHECK(category_stats_from_json(category_stats_to_json(stats)).at("Apparel").mean == stats.at("Apparel").mean);
}
