#ifndef STP_CORRELATION_HPP
#define STP_CORRELATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stp/ingest.hpp"
#include "stp/types.hpp"

namespace stp {

constexpr double kEtaMissing = std::numeric_limits<double>::quiet_NaN();

// Per-edge vector of hourly median travel times, plus the per-day medians
// the hour-wise correlation is computed from.
struct EtaVector {
  EdgeKey edge;
  std::array<double, 24> median{};          // seconds
  std::array<int, 24> count{};              // samples behind each bin
  std::array<bool, 24> interpolated{};      // true where filled from neighbors
  std::map<std::int64_t, std::array<double, 24>> day_medians;  // NaN = missing
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Hourly medians over all days; empty bins are linearly interpolated from
// the nearest populated neighbors and flagged.
inline EtaVector build_eta_vector(const std::vector<TravelTimeSample>& samples,
                                  const EdgeKey& edge) {
  std::array<std::vector<double>, 24> bins;
  std::map<std::int64_t, std::array<std::vector<double>, 24>> day_bins;
  for (const auto& s : samples) {
    if (s.edge != edge) continue;
    int h = hour_bin(s.depart_tod_hours);
    bins[h].push_back(s.duration_s);
    day_bins[s.date][h].push_back(s.duration_s);
  }

  EtaVector eta;
  eta.edge = edge;
  bool any = false;
  for (int h = 0; h < 24; ++h) {
    eta.count[h] = static_cast<int>(bins[h].size());
    if (!bins[h].empty()) {
      eta.median[h] = detail::median_of(bins[h]);
      any = true;
    } else {
      eta.median[h] = kEtaMissing;
      eta.interpolated[h] = true;
    }
  }
  if (!any) {
    throw std::invalid_argument("build_eta_vector: edge " + edge.str() +
                                " has no samples in any bin");
  }

  // fill gaps: linear interpolation between populated bins, nearest value
  // beyond the ends
  for (int h = 0; h < 24; ++h) {
    if (!std::isnan(eta.median[h])) continue;
    int prev = -1, next = -1;
    for (int i = h - 1; i >= 0; --i) {
      if (!std::isnan(eta.median[i])) {
        prev = i;
        break;
      }
    }
    for (int i = h + 1; i < 24; ++i) {
      if (!std::isnan(eta.median[i])) {
        next = i;
        break;
      }
    }
    if (prev >= 0 && next >= 0) {
      double f = static_cast<double>(h - prev) / (next - prev);
      eta.median[h] = eta.median[prev] * (1.0 - f) + eta.median[next] * f;
    } else if (prev >= 0) {
      eta.median[h] = eta.median[prev];
    } else {
      eta.median[h] = eta.median[next];
    }
  }

  for (const auto& [day, hb] : day_bins) {
    std::array<double, 24> row;
    for (int h = 0; h < 24; ++h) {
      row[h] = hb[h].empty() ? kEtaMissing : detail::median_of(hb[h]);
    }
    eta.day_medians[day] = row;
  }
  return eta;
}

struct CorrEstimate {
  double value = 0.0;
  bool defined = false;
};

// Sample Pearson correlation; constant inputs are reported as 0, undefined.
inline CorrEstimate pearson_corr(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("pearson_corr: size mismatch");
  }
  if (x.size() < 3) {
    throw std::invalid_argument("pearson_corr: need at least 3 points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return {0.0, false};
  double r = sxy / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), true};
}

// Clamp the off-diagonal of a 2x2 covariance so the determinant stays
// non-negative (eigenvalue flooring at zero for the 2x2 case).
inline double clamp_cross_covariance(double var1, double var2, double cov) {
  double bound = std::sqrt(std::max(var1, 0.0) * std::max(var2, 0.0));
  return std::clamp(cov, -bound, bound);
}

struct CovResult {
  double cov = 0.0;     // seconds^2
  bool estimated = false;  // false when no data supported the estimate
};

// Time-dependent correlation between edges, estimated from hourly median
// vectors and converted to covariance with the caller's posterior sigmas.
// Correlations are computed per hour across days where per-day medians
// exist, falling back to correlation of the whole 24-entry vectors; results
// are memoized per (edge pair, hour pair).
class CorrelationModel {
 public:
  CorrelationModel() = default;

  explicit CorrelationModel(std::map<EdgeKey, EtaVector> etas)
      : etas_(std::move(etas)) {}

  const std::map<EdgeKey, EtaVector>& etas() const { return etas_; }

  void add(EtaVector eta) { etas_[eta.edge] = std::move(eta); }

  CorrEstimate correlation(const EdgeKey& e1, const EdgeKey& e2, int h1,
                           int h2) const {
    if (e1 == e2 && h1 == h2) return {1.0, true};

    std::string key = cache_key(e1, e2, h1, h2);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    CorrEstimate est = compute_correlation(e1, e2, h1, h2);
    {
      std::lock_guard<std::mutex> lock(mu_);
      cache_[key] = est;  // idempotent values, last writer wins
    }
    return est;
  }

  CovResult covariance(const EdgeKey& e1, const EdgeKey& e2, double t_hours,
                       double tp_hours, double sigma1, double sigma2) const {
    if (sigma1 < 0.0 || sigma2 < 0.0) {
      throw std::invalid_argument("covariance: negative sigma");
    }
    int h1 = hour_bin(t_hours);
    int h2 = hour_bin(tp_hours);
    CorrEstimate est = correlation(e1, e2, h1, h2);
    double cov = est.value * sigma1 * sigma2;
    cov = clamp_cross_covariance(sigma1 * sigma1, sigma2 * sigma2, cov);
    return {cov, est.defined};
  }

 private:
  static std::string cache_key(const EdgeKey& e1, const EdgeKey& e2, int h1,
                               int h2) {
    // symmetric: (e1,h1),(e2,h2) and (e2,h2),(e1,h1) share an entry
    std::string a = e1.str() + "@" + std::to_string(h1);
    std::string b = e2.str() + "@" + std::to_string(h2);
    return a <= b ? a + "|" + b : b + "|" + a;
  }

  CorrEstimate compute_correlation(const EdgeKey& e1, const EdgeKey& e2,
                                   int h1, int h2) const {
    auto i1 = etas_.find(e1);
    auto i2 = etas_.find(e2);
    if (i1 == etas_.end() || i2 == etas_.end()) return {0.0, false};
    const EtaVector& a = i1->second;
    const EtaVector& b = i2->second;

    // hour-wise across days
    std::vector<double> xs, ys;
    for (const auto& [day, row] : a.day_medians) {
      auto jt = b.day_medians.find(day);
      if (jt == b.day_medians.end()) continue;
      double va = row[h1];
      double vb = jt->second[h2];
      if (std::isnan(va) || std::isnan(vb)) continue;
      xs.push_back(va);
      ys.push_back(vb);
    }
    if (xs.size() >= 3) {
      CorrEstimate est = pearson_corr(xs, ys);
      if (est.defined) return est;
    }

    // sparse-data fallback: correlate the whole 24-entry vectors
    std::vector<double> va(a.median.begin(), a.median.end());
    std::vector<double> vb(b.median.begin(), b.median.end());
    return pearson_corr(va, vb);
  }

  std::map<EdgeKey, EtaVector> etas_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, CorrEstimate> cache_;
};

}  // namespace stp

#endif  // STP_CORRELATION_HPP
