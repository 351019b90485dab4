#pragma once

// Evaluation metrics used for reporting (never for steering the loop).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "distsynth/discrepancy.hpp"
#include "distsynth/rng.hpp"
#include "distsynth/schema.hpp"
#include "distsynth/summary.hpp"

namespace distsynth::metrics {

inline constexpr double kKlSmoothing = 1e-6;

// 1-D earth mover's distance between empirical distributions. Errors: EmptyInput.
double wasserstein1(std::span<const double> x, std::span<const double> y);

// Base-2 Jensen-Shannon divergence, in [0, 1]. Errors: LabelMismatch.
double jsd(std::span<const double> p, std::span<const double> q);
// sqrt(0.5 * sum (sqrt p - sqrt q)^2), in [0, 1].
double hellinger(std::span<const double> p, std::span<const double> q);
// KL(p || q) in nats after adding eps to every cell of both and renormalizing.
double kl_divergence(std::span<const double> p, std::span<const double> q,
                     double eps = kKlSmoothing);

// Aligned dense vectors over the union of occupied cells.
std::pair<std::vector<double>, std::vector<double>> aligned(const ContingencyTable& p,
                                                            const ContingencyTable& q);

// One-hot categories plus numerics z-scored with the reference dataset's
// mean and standard deviation.
class FeatureEncoder {
 public:
  explicit FeatureEncoder(const Dataset& reference);
  std::size_t dimension() const { return dim_; }
  std::vector<double> encode(const Dataset& data, std::size_t row) const;
  std::vector<std::vector<double>> encode_rows(const Dataset& data,
                                               std::span<const std::size_t> rows) const;

 private:
  VariableSchema schema_;
  std::vector<std::size_t> offset_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::size_t dim_ = 0;
};

using Matrix = std::vector<std::vector<double>>;

// V-statistic energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (Euclidean).
double energy_distance(const Matrix& x, const Matrix& y);
// Biased MMD^2 with an RBF kernel; bandwidth from the median pairwise
// distance of the pooled sample.
double mmd_rbf(const Matrix& x, const Matrix& y);

struct C2stOptions {
  std::size_t epochs = 500;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

struct C2stResult {
  double accuracy = 0.5;
  double gap = 0.0;  // |accuracy - 0.5|
};

// Logistic regression real-vs-synthetic on a stratified 50/50 split,
// full-batch gradient descent. Both samples must be non-empty.
C2stResult c2st(const Matrix& real, const Matrix& synth, const C2stOptions& options);

// Deterministic evenly spaced subsample of row indices.
std::vector<std::size_t> spread_indices(std::size_t n, std::size_t cap);

struct UnitMetrics {
  std::string unit;
  UnitKind kind = UnitKind::Marginal;
  double tvd = 0.0;
  double jsd = 0.0;
  double hellinger = 0.0;
  double kl = 0.0;
  std::optional<double> wasserstein;  // continuous marginals only
};

struct MetricReport {
  std::vector<UnitMetrics> units;
  double energy = 0.0;
  double mmd = 0.0;
  double c2st_accuracy = 0.5;
  double c2st_gap = 0.0;
  double mean_tvd = 0.0;
};

struct SuiteOptions {
  // Cap on rows per side for the kernel metrics and the classifier.
  std::size_t max_samples = 1000;
  RngSeed seed{0};
};

// Main-bin tables are built with `specs` (fit on real when empty).
// Errors: SchemaMismatch, EmptyInput.
MetricReport metric_suite(const Dataset& real, const Dataset& synth,
                          const std::vector<StructuralComponent>& components,
                          const BinSpecMap& specs, const SuiteOptions& options);

nlohmann::json metric_report_to_json(const MetricReport& r);
std::string metric_report_table(const MetricReport& r);

}  // namespace distsynth::metrics
