#include "distsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "distsynth/error.hpp"

namespace distsynth::metrics {

double wasserstein1(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::EmptyInput, "wasserstein1 needs non-empty samples");
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> all;
  all.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(all));
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  // Integrate |F_a - F_b| between consecutive support points.
  double total = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    const double z = all[i];
    while (ia < a.size() && a[ia] <= z) ++ia;
    while (ib < b.size() && b[ib] <= z) ++ib;
    const double width = all[i + 1] - z;
    if (width > 0.0) total += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * width;
  }
  return total;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::LabelMismatch, "jsd over unequal label spaces");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) s += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) s += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::clamp(s, 0.0, 1.0);
}

double hellinger(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::LabelMismatch, "hellinger over unequal label spaces");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    s += d * d;
  }
  return std::min(1.0, std::sqrt(0.5 * s));
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double eps) {
  if (p.size() != q.size()) throw Error(ErrorCode::LabelMismatch, "kl over unequal label spaces");
  const double n = static_cast<double>(p.size());
  const double zp = std::accumulate(p.begin(), p.end(), 0.0) + n * eps;
  const double zq = std::accumulate(q.begin(), q.end(), 0.0) + n * eps;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = (p[i] + eps) / zp;
    const double qi = (q[i] + eps) / zq;
    s += pi * std::log(pi / qi);
  }
  return std::max(0.0, s);
}

std::pair<std::vector<double>, std::vector<double>> aligned(const ContingencyTable& p,
                                                            const ContingencyTable& q) {
  std::set<LevelKey> keys;
  for (const auto& [k, v] : p.cells) keys.insert(k);
  for (const auto& [k, v] : q.cells) keys.insert(k);
  std::vector<double> a, b;
  for (const auto& k : keys) {
    a.push_back(p.at(k));
    b.push_back(q.at(k));
  }
  return {a, b};
}

FeatureEncoder::FeatureEncoder(const Dataset& reference) : schema_(reference.schema()) {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    offset_.push_back(dim_);
    const auto& v = schema_[j];
    if (v.is_discrete()) {
      dim_ += v.discrete().categories.size();
      mean_.push_back(0.0);
      scale_.push_back(1.0);
    } else {
      dim_ += 1;
      double mean = 0.0, var = 0.0;
      const auto n = static_cast<double>(reference.size());
      if (!reference.empty()) {
        for (std::size_t i = 0; i < reference.size(); ++i) mean += reference.number(i, j);
        mean /= n;
        for (std::size_t i = 0; i < reference.size(); ++i) {
          const double d = reference.number(i, j) - mean;
          var += d * d;
        }
        var /= n;
      }
      mean_.push_back(mean);
      scale_.push_back(var > 0.0 ? 1.0 / std::sqrt(var) : 1.0);
    }
  }
}

std::vector<double> FeatureEncoder::encode(const Dataset& data, std::size_t row) const {
  std::vector<double> out(dim_, 0.0);
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (schema_[j].is_discrete()) {
      out[offset_[j] + data.level(row, j)] = 1.0;
    } else {
      out[offset_[j]] = (data.number(row, j) - mean_[j]) * scale_[j];
    }
  }
  return out;
}

std::vector<std::vector<double>> FeatureEncoder::encode_rows(const Dataset& data,
                                                             std::span<const std::size_t> rows) const {
  Matrix out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(encode(data, r));
  return out;
}

namespace {

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double mean_pairwise(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (const auto& x : a)
    for (const auto& y : b) s += euclid(x, y);
  return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double energy_distance(const Matrix& x, const Matrix& y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::EmptyInput, "energy distance needs samples");
  const double e = 2.0 * mean_pairwise(x, y) - mean_pairwise(x, x) - mean_pairwise(y, y);
  return std::max(0.0, e);
}

double mmd_rbf(const Matrix& x, const Matrix& y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::EmptyInput, "mmd needs samples");
  Matrix pooled = x;
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::vector<double> dists;
  dists.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j) dists.push_back(euclid(pooled[i], pooled[j]));
  double median = 1.0;
  if (!dists.empty()) {
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    if (*mid > 0.0) median = *mid;
  }
  const double gamma = 1.0 / (2.0 * median * median);
  auto kmean = [&](const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (const auto& u : a)
      for (const auto& v : b) {
        const double d = euclid(u, v);
        s += std::exp(-gamma * d * d);
      }
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  };
  return std::max(0.0, kmean(x, x) + kmean(y, y) - 2.0 * kmean(x, y));
}

C2stResult c2st(const Matrix& real, const Matrix& synth, const C2stOptions& options) {
  if (real.empty() || synth.empty()) throw Error(ErrorCode::EmptyInput, "c2st needs both samples");
  // Both sides use the same seeded shuffle, so identical samples pair up
  // row for row and score exactly 0.5.
  auto split = [&](std::size_t n) {
    Rng rng(options.seed);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
  };
  const auto ri = split(real.size());
  const auto si = split(synth.size());
  const std::size_t r_train = real.size() / 2;
  const std::size_t s_train = synth.size() / 2;

  struct Example {
    const std::vector<double>* x;
    double y;
  };
  std::vector<Example> train, test;
  for (std::size_t i = 0; i < ri.size(); ++i) (i < r_train ? train : test).push_back({&real[ri[i]], 0.0});
  for (std::size_t i = 0; i < si.size(); ++i) (i < s_train ? train : test).push_back({&synth[si[i]], 1.0});
  if (train.empty() || test.empty()) return {};

  const std::size_t dim = real.front().size();
  std::vector<double> w(dim, 0.0), grad(dim);
  double bias = 0.0;
  const double n = static_cast<double>(train.size());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0.0;
    for (const auto& ex : train) {
      double z = bias;
      for (std::size_t d = 0; d < dim; ++d) z += w[d] * (*ex.x)[d];
      const double err = sigmoid(z) - ex.y;
      for (std::size_t d = 0; d < dim; ++d) grad[d] += err * (*ex.x)[d];
      gb += err;
    }
    for (std::size_t d = 0; d < dim; ++d) w[d] -= options.learning_rate * grad[d] / n;
    bias -= options.learning_rate * gb / n;
  }
  std::size_t correct = 0;
  for (const auto& ex : test) {
    double z = bias;
    for (std::size_t d = 0; d < dim; ++d) z += w[d] * (*ex.x)[d];
    const double pred = z > 0.0 ? 1.0 : 0.0;
    if (pred == ex.y) ++correct;
  }
  C2stResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  r.gap = std::abs(r.accuracy - 0.5);
  return r;
}

std::vector<std::size_t> spread_indices(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> out;
  const std::size_t m = std::min(n, cap);
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(i * n / m);
  return out;
}

MetricReport metric_suite(const Dataset& real, const Dataset& synth,
                          const std::vector<StructuralComponent>& components,
                          const BinSpecMap& specs_in, const SuiteOptions& options) {
  if (!(real.schema() == synth.schema()))
    throw Error(ErrorCode::SchemaMismatch, "metric suite needs a shared schema");
  if (real.empty() || synth.empty()) throw Error(ErrorCode::EmptyInput, "metric suite needs non-empty datasets");
  const BinSpecMap specs = specs_in.empty() ? fit_all_bins(real) : specs_in;

  MetricReport report;
  const auto& schema = real.schema();
  double tvd_sum = 0.0;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& v = schema[j];
    const BinSpec* spec = find_spec(specs, v.name);
    const auto rt = summarize_marginal(real, v.name, spec);
    const auto st = summarize_marginal(synth, v.name, spec);
    const auto p = rt.proportions();
    const auto q = st.proportions();
    UnitMetrics m;
    m.unit = v.name;
    m.kind = UnitKind::Marginal;
    m.tvd = tvd(p, q);
    m.jsd = jsd(p, q);
    m.hellinger = hellinger(p, q);
    m.kl = kl_divergence(p, q);
    if (v.is_continuous()) {
      const auto xs = real.column_numbers(j);
      const auto ys = synth.column_numbers(j);
      m.wasserstein = wasserstein1(xs, ys);
    }
    tvd_sum += m.tvd;
    report.units.push_back(std::move(m));
  }
  for (const auto& c : components) {
    const auto rt = summarize_joint(real, c, specs);
    const auto st = summarize_joint(synth, c, specs);
    const auto [p, q] = aligned(rt, st);
    UnitMetrics m;
    m.unit = c.id;
    m.kind = UnitKind::Joint;
    m.tvd = tvd(p, q);
    m.jsd = jsd(p, q);
    m.hellinger = hellinger(p, q);
    m.kl = kl_divergence(p, q);
    tvd_sum += m.tvd;
    report.units.push_back(std::move(m));
  }
  report.mean_tvd = tvd_sum / static_cast<double>(report.units.size());

  const FeatureEncoder enc(real);
  const std::size_t each = std::min({real.size(), synth.size(), options.max_samples});
  const auto ri = spread_indices(real.size(), each);
  const auto si = spread_indices(synth.size(), each);
  const auto xr = enc.encode_rows(real, ri);
  const auto xs = enc.encode_rows(synth, si);
  report.energy = energy_distance(xr, xs);
  report.mmd = mmd_rbf(xr, xs);
  C2stOptions copt;
  copt.seed = derive_stream(options.seed, "c2st");
  const auto c = c2st(xr, xs, copt);
  report.c2st_accuracy = c.accuracy;
  report.c2st_gap = c.gap;
  return report;
}

nlohmann::json metric_report_to_json(const MetricReport& r) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : r.units) {
    nlohmann::json j = {{"unit", u.unit},
                        {"kind", u.kind == UnitKind::Marginal ? "marginal" : "joint"},
                        {"tvd", u.tvd},
                        {"jsd", u.jsd},
                        {"hellinger", u.hellinger},
                        {"kl", u.kl}};
    if (u.wasserstein) j["wasserstein"] = *u.wasserstein;
    units.push_back(std::move(j));
  }
  return {{"units", std::move(units)},  {"mean_tvd", r.mean_tvd}, {"energy", r.energy},
          {"mmd", r.mmd},               {"c2st_accuracy", r.c2st_accuracy},
          {"c2st_gap", r.c2st_gap}};
}

std::string metric_report_table(const MetricReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-40s %9s %9s %9s %9s %11s\n", "unit", "tvd", "jsd",
                "hellinger", "kl", "wasserstein");
  os << line;
  for (const auto& u : r.units) {
    char w[32] = "-";
    if (u.wasserstein) std::snprintf(w, sizeof w, "%.6g", *u.wasserstein);
    std::snprintf(line, sizeof line, "%-40s %9.6f %9.6f %9.6f %9.6f %11s\n", u.unit.c_str(), u.tvd,
                  u.jsd, u.hellinger, u.kl, w);
    os << line;
  }
  std::snprintf(line, sizeof line,
                "mean_tvd %.6f  energy %.6f  mmd %.6f  c2st_accuracy %.4f  c2st_gap %.4f\n",
                r.mean_tvd, r.energy, r.mmd, r.c2st_accuracy, r.c2st_gap);
  os << line;
  return os.str();
}

}  // namespace distsynth::metrics
