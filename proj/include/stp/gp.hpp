#ifndef STP_GP_HPP
#define STP_GP_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "stp/rng.hpp"
#include "stp/types.hpp"

namespace stp {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Squared-exponential kernel hyperparameters plus observation noise.
// Inputs are time-of-day hours, outputs seconds.
struct KernelParams {
  double sigma2 = 1.0;   // signal variance, seconds^2
  double length = 1.0;   // length scale, hours
  double noise2 = 1.0;   // noise variance, seconds^2

  bool valid() const { return sigma2 > 0.0 && length > 0.0 && noise2 > 0.0; }
};

inline double kernel_eval(const KernelParams& p, double x, double xp) {
  double d = x - xp;
  return p.sigma2 * std::exp(-d * d / (2.0 * p.length * p.length));
}

// Noise-free Gram matrix.
inline Eigen::MatrixXd kernel_gram(const KernelParams& p,
                                   const Eigen::VectorXd& x) {
  const auto n = x.size();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = p.sigma2;
    for (Eigen::Index j = 0; j < i; ++j) {
      double v = kernel_eval(p, x(i), x(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

namespace detail {

// Cholesky of (K + noise2 I), escalating jitter up to 1e-6 * sigma2.
inline Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(const Eigen::MatrixXd& k,
                                                    const KernelParams& p) {
  Eigen::MatrixXd m = k;
  m.diagonal().array() += p.noise2;
  double jitter = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt;
    double add = (jitter == 0.0 ? 1e-10 : jitter * 99.0) * p.sigma2;
    m.diagonal().array() += add;
    jitter = (jitter == 0.0 ? 1e-10 : jitter * 100.0);
    if (jitter > 1e-6) break;
  }
  throw NumericalError("covariance not positive definite (sigma2=" +
                       std::to_string(p.sigma2) +
                       ", length=" + std::to_string(p.length) +
                       ", noise2=" + std::to_string(p.noise2) + ")");
}

}  // namespace detail

// Log marginal likelihood of y under the GP prior with constant mean
// mean(y) and covariance K_XX + noise2 I.
inline double mll(const KernelParams& p, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 1) {
    throw std::invalid_argument("mll: |X| must equal |y| and be >= 1");
  }
  const auto n = x.size();
  Eigen::VectorXd r = y.array() - y.mean();
  auto llt = detail::chol_with_jitter(kernel_gram(p, x), p);
  Eigen::VectorXd alpha = llt.solve(r);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  }
  return -0.5 * (r.dot(alpha) + logdet +
                 static_cast<double>(n) * std::log(2.0 * M_PI));
}

// mll plus its gradient with respect to (log sigma2, log length, log noise2).
inline double mll_with_grad(const KernelParams& p, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y,
                            Eigen::Vector3d& grad_log) {
  const auto n = x.size();
  Eigen::VectorXd r = y.array() - y.mean();
  Eigen::MatrixXd kse = kernel_gram(p, x);
  auto llt = detail::chol_with_jitter(kse, p);
  Eigen::VectorXd alpha = llt.solve(r);

  Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd outer = alpha * alpha.transpose();

  // dK / d(log sigma2) = K_se
  // dK / d(log length) = K_se .* d^2 / l^2
  // dK / d(log noise2) = noise2 * I
  Eigen::MatrixXd dlen(n, n);
  double inv_l2 = 1.0 / (p.length * p.length);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double d = x(i) - x(j);
      dlen(i, j) = kse(i, j) * d * d * inv_l2;
    }
  }

  Eigen::MatrixXd a = outer - kinv;
  grad_log(0) = 0.5 * (a.cwiseProduct(kse)).sum();
  grad_log(1) = 0.5 * (a.cwiseProduct(dlen)).sum();
  grad_log(2) = 0.5 * p.noise2 * a.trace();

  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  }
  return -0.5 * (r.dot(alpha) + logdet +
                 static_cast<double>(n) * std::log(2.0 * M_PI));
}

// Fitted GP for a single edge. Prior mean is the mean of the observations;
// predictive variance includes the noise term.
struct GpModel {
  std::string edge_id;
  KernelParams params;
  Eigen::VectorXd x;  // time-of-day hours
  Eigen::VectorXd y;  // seconds
  double prior_mean = 0.0;
  bool fallback = false;  // true when hyperparameters were inherited

  // caches, consistent with params and x
  Eigen::MatrixXd chol_l;
  Eigen::VectorXd half_alpha;  // L^-1 (y - prior_mean)

  void refresh() {
    prior_mean = y.mean();
    auto llt = detail::chol_with_jitter(kernel_gram(params, x), params);
    chol_l = llt.matrixL();
    Eigen::VectorXd r = y.array() - prior_mean;
    half_alpha = chol_l.triangularView<Eigen::Lower>().solve(r);
  }

  Gaussian posterior(double t) const {
    const auto n = x.size();
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks(i) = kernel_eval(params, t, x(i));
    Eigen::VectorXd v = chol_l.triangularView<Eigen::Lower>().solve(ks);
    double mean = prior_mean + v.dot(half_alpha);
    double var = params.sigma2 - v.squaredNorm() + params.noise2;
    if (var < 0.0) var = 0.0;
    return {mean, var};
  }
};

struct FitConfig {
  int multistarts = 5;
  std::vector<double> length_inits = {0.5, 1.0, 2.0, 4.0, 8.0};
  int max_iters = 400;
  double learning_rate = 0.08;
  // converged when the relative mll change over this window drops below tol
  int convergence_window = 10;
  double convergence_tol = 1e-5;
  int min_samples = 20;
  // optimizer sees at most this many points (strided after sorting by x);
  // the returned model keeps the full training set
  int max_fit_points = 512;
  std::uint64_t seed = 0;
};

struct FitReport {
  bool converged = false;
  bool diverged_fallback = false;
  double final_mll = 0.0;
  int iterations = 0;
};

namespace detail {

struct AdamState {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  int t = 0;

  Eigen::Vector3d step(const Eigen::Vector3d& grad, double lr) {
    ++t;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad.cwiseProduct(grad).eval();
    Eigen::Vector3d mh = m / (1.0 - std::pow(0.9, t));
    Eigen::Vector3d vh = v / (1.0 - std::pow(0.999, t));
    return lr * mh.cwiseQuotient((vh.cwiseSqrt().array() + 1e-8).matrix());
  }
};

inline Eigen::VectorXd strided_subset(const Eigen::VectorXd& v,
                                      const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

}  // namespace detail

// Maximizes the marginal likelihood over log-hyperparameters with Adam,
// multi-start over length-scale initializations. Deterministic for a fixed
// seed and data.
inline GpModel fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                   const FitConfig& cfg = {}, FitReport* report = nullptr) {
  if (x.size() != y.size()) throw std::invalid_argument("fit: |X| != |y|");
  if (x.size() < cfg.min_samples) {
    throw std::invalid_argument("fit: fewer than min_samples observations");
  }

  Eigen::VectorXd fx = x, fy = y;
  if (x.size() > cfg.max_fit_points) {
    std::vector<Eigen::Index> order(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });
    std::vector<Eigen::Index> pick;
    double stride =
        static_cast<double>(x.size()) / static_cast<double>(cfg.max_fit_points);
    for (int i = 0; i < cfg.max_fit_points; ++i) {
      pick.push_back(order[static_cast<Eigen::Index>(i * stride)]);
    }
    fx = detail::strided_subset(x, pick);
    fy = detail::strided_subset(y, pick);
  }

  double var_y = (fy.array() - fy.mean()).square().mean();
  double floor = std::max(1e-6 * var_y, 1e-12);

  auto clamp_params = [&](Eigen::Vector3d& u) {
    u(0) = std::max(u(0), std::log(floor));
    u(1) = std::clamp(u(1), std::log(1e-3), std::log(1e3));
    u(2) = std::max(u(2), std::log(floor));
  };

  double best_mll = -std::numeric_limits<double>::infinity();
  KernelParams best;
  bool any_ok = false;
  FitReport best_report;

  int starts = std::min<int>(cfg.multistarts,
                             static_cast<int>(cfg.length_inits.size()));
  for (int s = 0; s < starts; ++s) {
    Eigen::Vector3d u;
    u(0) = std::log(std::max(0.8 * var_y, floor));
    u(1) = std::log(cfg.length_inits[s]);
    u(2) = std::log(std::max(0.2 * var_y, floor));
    clamp_params(u);

    detail::AdamState adam;
    std::vector<double> history;
    double cur = -std::numeric_limits<double>::infinity();
    bool failed = false;
    int iters = 0;
    for (int it = 0; it < cfg.max_iters; ++it) {
      KernelParams p{std::exp(u(0)), std::exp(u(1)), std::exp(u(2))};
      Eigen::Vector3d g;
      try {
        cur = mll_with_grad(p, fx, fy, g);
      } catch (const NumericalError&) {
        failed = true;
        break;
      }
      history.push_back(cur);
      iters = it + 1;
      if (static_cast<int>(history.size()) > cfg.convergence_window) {
        double prev = history[history.size() - 1 - cfg.convergence_window];
        if (std::abs(cur - prev) / std::max(1.0, std::abs(cur)) <
            cfg.convergence_tol) {
          break;
        }
      }
      u += adam.step(g, cfg.learning_rate);
      clamp_params(u);
    }
    if (failed || !std::isfinite(cur)) continue;
    any_ok = true;
    if (cur > best_mll) {
      best_mll = cur;
      best = KernelParams{std::exp(u(0)), std::exp(u(1)), std::exp(u(2))};
      best_report.converged = iters < cfg.max_iters;
      best_report.final_mll = cur;
      best_report.iterations = iters;
    }
  }

  GpModel model;
  model.x = x;
  model.y = y;
  if (!any_ok) {
    // every start diverged; fall back to data-scaled defaults
    model.params = KernelParams{std::max(var_y, floor), 2.0,
                                std::max(0.1 * var_y, floor)};
    model.fallback = true;
    best_report.diverged_fallback = true;
  } else {
    model.params = best;
  }
  model.refresh();
  if (report) *report = best_report;
  return model;
}

// Condition a bivariate Gaussian on an observed first coordinate.
inline Gaussian condition(const Eigen::Vector2d& mean,
                          const Eigen::Matrix2d& cov, double observed_first) {
  double v1 = cov(0, 0);
  double c = cov(0, 1);
  if (v1 < 0.0 || cov(1, 1) < 0.0) {
    throw std::invalid_argument("condition: negative variance");
  }
  if (v1 == 0.0) {
    if (observed_first != mean(0)) {
      throw std::invalid_argument(
          "condition: zero-variance coordinate observed away from its mean");
    }
    return {mean(1), cov(1, 1)};
  }
  double m = mean(1) + c / v1 * (observed_first - mean(0));
  double v = cov(1, 1) - c * c / v1;
  if (v < 0.0) v = 0.0;
  return {m, v};
}

// Fits one model per edge. Edges with fewer than min_samples observations
// inherit the network-median hyperparameters and keep their own sample mean.
struct EdgeFitResult {
  std::map<EdgeKey, GpModel> models;
  std::vector<EdgeKey> fallback_edges;
};

inline EdgeFitResult fit_all_edges(
    const std::map<EdgeKey, std::pair<std::vector<double>, std::vector<double>>>&
        samples_by_edge,
    const FitConfig& cfg = {}) {
  EdgeFitResult out;
  std::vector<double> s2s, lens, n2s;
  std::vector<std::pair<EdgeKey, std::pair<std::vector<double>, std::vector<double>>>>
      sparse;

  // fits are independent per edge; run them across the hardware threads
  std::vector<std::pair<EdgeKey, const std::pair<std::vector<double>,
                                                 std::vector<double>>*>>
      dense;
  for (const auto& [key, xy] : samples_by_edge) {
    if (static_cast<int>(xy.first.size()) >= cfg.min_samples) {
      dense.emplace_back(key, &xy);
    } else {
      sparse.emplace_back(key, xy);
    }
  }
  auto fit_one = [&cfg](const EdgeKey& key,
                        const std::pair<std::vector<double>,
                                        std::vector<double>>* xy) {
    const auto& [xs, ys] = *xy;
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size());
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), ys.size());
    GpModel m = fit(x, y, cfg);
    m.edge_id = key.str();
    return m;
  };
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t base = 0; base < dense.size(); base += workers) {
    std::size_t wave = std::min(workers, dense.size() - base);
    std::vector<std::future<GpModel>> jobs;
    for (std::size_t i = 0; i < wave; ++i) {
      jobs.push_back(std::async(std::launch::async, fit_one,
                                dense[base + i].first, dense[base + i].second));
    }
    for (std::size_t i = 0; i < wave; ++i) {
      GpModel m = jobs[i].get();
      s2s.push_back(m.params.sigma2);
      lens.push_back(m.params.length);
      n2s.push_back(m.params.noise2);
      out.models.emplace(dense[base + i].first, std::move(m));
    }
  }

  auto median = [](std::vector<double> v, double dflt) {
    if (v.empty()) return dflt;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  KernelParams med{median(s2s, 900.0), median(lens, 2.0), median(n2s, 100.0)};

  for (auto& [key, xy] : sparse) {
    auto& [xs, ys] = xy;
    GpModel m;
    m.edge_id = key.str();
    m.params = med;
    m.fallback = true;
    if (xs.empty()) {
      // nothing observed at all: prior-mean-only model with one synthetic
      // anchor so the posterior reverts to the network-scale prior
      m.x = Eigen::VectorXd::Zero(0);
      m.y = Eigen::VectorXd::Zero(0);
      m.prior_mean = 0.0;
      out.fallback_edges.push_back(key);
      out.models.emplace(key, std::move(m));
      continue;
    }
    m.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size());
    m.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), ys.size());
    m.refresh();
    out.fallback_edges.push_back(key);
    out.models.emplace(key, std::move(m));
  }
  return out;
}

}  // namespace stp

#endif  // STP_GP_HPP
