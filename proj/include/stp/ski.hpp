#ifndef STP_SKI_HPP
#define STP_SKI_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stp/gp.hpp"
#include "stp/types.hpp"

namespace stp {

// Sparse cubic-convolution interpolation weights: 4 non-zeros per input.
struct InterpWeights {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

namespace detail {

// Keys cubic convolution kernel, a = -1/2.
inline double cubic_kernel(double s) {
  double t = std::abs(s);
  if (t < 1.0) return ((1.5 * t - 2.5) * t) * t + 1.0;
  if (t < 2.0) return (((-0.5 * t) + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

}  // namespace detail

// Weights of x onto an evenly spaced grid of m points over [lo, hi].
// x outside the hull is clamped; the stencil is clamped at the boundary with
// weights accumulated onto edge points, preserving the unit sum.
inline InterpWeights interpolation_weights(double lo, double hi, int m,
                                           double x, bool* clamped = nullptr) {
  if (m < 4) throw std::invalid_argument("interpolation grid needs >= 4 points");
  double h = (hi - lo) / (m - 1);
  if (clamped) *clamped = false;
  if (x < lo) {
    x = lo;
    if (clamped) *clamped = true;
  }
  if (x > hi) {
    x = hi;
    if (clamped) *clamped = true;
  }
  double cell = (x - lo) / h;
  int i = static_cast<int>(std::floor(cell));
  i = std::clamp(i, 0, m - 2);
  double u = cell - i;

  InterpWeights w{};
  for (int k = -1; k <= 2; ++k) {
    int slot = k + 1;
    w.index[slot] = std::clamp(i + k, 0, m - 1);
    w.weight[slot] = detail::cubic_kernel(u - k);
  }
  return w;
}

struct SkiConfig {
  int grid_size = 128;        // m inducing points
  int max_rank = 32;          // r, root factor rank cap
  double grid_lo = 0.0;       // hours
  double grid_hi = 24.0;      // hours
  int refresh_every = 500;    // hyperparameter refresh cadence, 0 = off
  int refresh_steps = 10;     // ascent steps per refresh
};

// Online GP over a 1-D inducing grid. The kernel matrix is approximated as
// W K_UU W^T with sparse cubic interpolation W; sufficient statistics
// (W^T y, W^T 1, y^T y, a rank-r root of W^T W) are updated per observation
// in time independent of n. Targets are centered by the running mean, which
// is added back at prediction.
class SkiModel {
 public:
  SkiModel() = default;

  SkiModel(const SkiConfig& cfg, const KernelParams& params)
      : cfg_(cfg), params_(params) {
    if (cfg.grid_size < 4) {
      throw std::invalid_argument("SkiModel: grid_size must be >= 4");
    }
    grid_.resize(cfg.grid_size);
    double h = (cfg.grid_hi - cfg.grid_lo) / (cfg.grid_size - 1);
    for (int i = 0; i < cfg.grid_size; ++i) grid_(i) = cfg.grid_lo + i * h;
    const int m = cfg.grid_size;
    kuu_ = kernel_gram(params_, grid_);
    root_ = Eigen::MatrixXd::Zero(m, 0);
    kuu_root_ = Eigen::MatrixXd::Zero(m, 0);
    swy_ = Eigen::VectorXd::Zero(m);
    sw1_ = Eigen::VectorXd::Zero(m);
    refresh_caches();
  }

  const SkiConfig& config() const { return cfg_; }
  const KernelParams& params() const { return params_; }
  long count() const { return n_; }
  int rank() const { return static_cast<int>(root_.cols()); }
  const Eigen::VectorXd& grid() const { return grid_; }
  long clamped_inputs() const { return clamped_; }
  long reorthogonalizations() const { return reorth_; }

  InterpWeights weights_of(double x, bool* clamped = nullptr) const {
    return interpolation_weights(cfg_.grid_lo, cfg_.grid_hi, cfg_.grid_size, x,
                                 clamped);
  }

  void update(double x, double y) {
    bool clamped = false;
    InterpWeights w = weights_of(x, &clamped);
    if (clamped) ++clamped_;

    for (int k = 0; k < 4; ++k) {
      swy_(w.index[k]) += w.weight[k] * y;
      sw1_(w.index[k]) += w.weight[k];
    }
    sy_ += y;
    syy_ += y * y;
    ++n_;

    append_root_column(w);
    refresh_caches();

    if (cfg_.refresh_every > 0 && n_ % cfg_.refresh_every == 0) {
      refresh_hyperparameters(cfg_.refresh_steps);
    }
  }

  Gaussian predict(double x) const {
    InterpWeights w = weights_of(x);
    double mean = running_mean();
    double kss = 0.0;
    Eigen::VectorXd kuw = Eigen::VectorXd::Zero(grid_.size());
    for (int k = 0; k < 4; ++k) {
      kuw += w.weight[k] * kuu_.col(w.index[k]);
    }
    for (int k = 0; k < 4; ++k) {
      mean += w.weight[k] * predict_vec_(w.index[k]);
      kss += w.weight[k] * kuw(w.index[k]);
    }

    double var_f = kss;
    if (root_.cols() > 0) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(root_.cols());
      for (int k = 0; k < 4; ++k) {
        c += w.weight[k] * kuu_root_.row(w.index[k]).transpose();
      }
      var_f -= c.dot(q_solver_.solve(c)) / params_.noise2;
    }
    if (var_f < 0.0) var_f = 0.0;
    return {mean, var_f + params_.noise2};
  }

  // Exact SKI log marginal likelihood from the cached statistics (exact up
  // to the rank truncation of W^T W).
  double mll() const {
    if (n_ < 1) throw std::invalid_argument("mll: no observations");
    double s2 = params_.noise2;
    double mu = running_mean();
    Eigen::VectorXd z = swy_ - mu * sw1_;  // W^T (y - mu)
    double yty = syy_ - static_cast<double>(n_) * mu * mu;

    Eigen::VectorXd kz = kuu_ * z;
    double quad = (yty - z.dot(kz) / s2) / s2;
    double logdet_q = 0.0;
    if (root_.cols() > 0) {
      Eigen::VectorXd a = root_.transpose() * kz / s2;
      quad += a.dot(q_solver_.solve(a)) / s2;
      const Eigen::MatrixXd& l = q_solver_.matrixLLT();
      for (Eigen::Index i = 0; i < l.rows(); ++i) {
        logdet_q += 2.0 * std::log(l(i, i));
      }
    }
    return -0.5 * (quad + static_cast<double>(n_) * std::log(s2) + logdet_q +
                   static_cast<double>(n_) * std::log(2.0 * M_PI));
  }

  // Ascent steps on the log-hyperparameters with backtracking; the online
  // mll never decreases across a refresh.
  void refresh_hyperparameters(int steps) {
    if (n_ < 2) return;
    double step = 0.05;
    for (int s = 0; s < steps; ++s) {
      double base = mll();
      Eigen::Vector3d g = mll_grad_fd();
      double gn = g.norm();
      if (gn < 1e-10) break;
      Eigen::Vector3d dir = g / gn;
      KernelParams saved = params_;
      bool accepted = false;
      double len = step;
      for (int bt = 0; bt < 8; ++bt) {
        KernelParams cand{std::exp(std::log(saved.sigma2) + len * dir(0)),
                          std::exp(std::log(saved.length) + len * dir(1)),
                          std::exp(std::log(saved.noise2) + len * dir(2))};
        cand.length = std::clamp(cand.length, 1e-3, 1e3);
        cand.noise2 = std::max(cand.noise2, 1e-8 * cand.sigma2);
        set_params(cand);
        if (mll() > base) {
          accepted = true;
          break;
        }
        len *= 0.5;
      }
      if (!accepted) {
        set_params(saved);
        break;
      }
    }
  }

  void set_params(const KernelParams& p) {
    params_ = p;
    kuu_ = kernel_gram(params_, grid_);
    kuu_root_ = kuu_ * root_;
    refresh_caches();
  }

  double running_mean() const {
    return n_ > 0 ? sy_ / static_cast<double>(n_) : 0.0;
  }

  // Frobenius error of the root factorization against an explicitly
  // accumulated W^T W; diagnostic used by the truncation quality gate.
  double root_error(const Eigen::MatrixXd& wtw_exact) const {
    Eigen::MatrixXd approx = root_ * root_.transpose();
    double denom = wtw_exact.norm();
    return denom > 0.0 ? (approx - wtw_exact).norm() / denom : 0.0;
  }

  // ---- serialization access ----
  struct Snapshot {
    SkiConfig cfg;
    KernelParams params;
    Eigen::MatrixXd root;
    Eigen::VectorXd swy, sw1;
    double sy = 0.0, syy = 0.0;
    long n = 0, clamped = 0, reorth = 0;
  };

  Snapshot snapshot() const {
    return {cfg_, params_, root_, swy_, sw1_, sy_, syy_, n_, clamped_, reorth_};
  }

  static SkiModel restore(const Snapshot& s) {
    SkiModel m(s.cfg, s.params);
    m.root_ = s.root;
    m.kuu_root_ = m.kuu_ * m.root_;
    m.swy_ = s.swy;
    m.sw1_ = s.sw1;
    m.sy_ = s.sy;
    m.syy_ = s.syy;
    m.n_ = s.n;
    m.clamped_ = s.clamped;
    m.reorth_ = s.reorth;
    m.refresh_caches();
    return m;
  }

 private:
  // Append the new interpolation vector as a root column, then truncate the
  // rank with an eigendecomposition of the (r+1)-sized core taken in the
  // K_UU-weighted metric. Inference touches the root only through
  // K_UU^(1/2) L, so directions the kernel cannot see are the ones dropped;
  // a plain Frobenius truncation of W^T W discards the wrong mass.
  void append_root_column(const InterpWeights& w) {
    const int m = cfg_.grid_size;
    const int r = static_cast<int>(root_.cols());

    Eigen::VectorXd wv = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < 4; ++k) wv(w.index[k]) += w.weight[k];
    Eigen::VectorXd kuu_wv = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < 4; ++k) kuu_wv += w.weight[k] * kuu_.col(w.index[k]);

    Eigen::MatrixXd core(r + 1, r + 1);
    core.topLeftCorner(r, r) = root_.transpose() * kuu_root_;
    Eigen::VectorXd cross(r);
    for (int i = 0; i < r; ++i) cross(i) = kuu_root_.col(i).dot(wv);
    core.topRightCorner(r, 1) = cross;
    core.bottomLeftCorner(1, r) = cross.transpose();
    core(r, r) = wv.dot(kuu_wv);
    core = 0.5 * (core + core.transpose()).eval();

    Eigen::MatrixXd ext(m, r + 1);
    ext.leftCols(r) = root_;
    ext.col(r) = wv;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(core);
    if (eig.info() != Eigen::Success) {
      ++reorth_;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> retry(
          core + 1e-12 * core.norm() *
                     Eigen::MatrixXd::Identity(r + 1, r + 1));
      apply_core_rotation(ext, retry.eigenvectors(), retry.eigenvalues());
      return;
    }
    if (eig.eigenvalues().minCoeff() <
        -1e-9 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
      ++reorth_;
    }
    apply_core_rotation(ext, eig.eigenvectors(), eig.eigenvalues());
  }

  void apply_core_rotation(const Eigen::MatrixXd& ext,
                           const Eigen::MatrixXd& vecs,
                           const Eigen::VectorXd& vals) {
    // eigenvalues ascending; keep the top block up to max_rank, dropping
    // numerically zero directions
    const int total = static_cast<int>(vals.size());
    double cutoff = std::max(vals.maxCoeff(), 0.0) * 1e-14;
    int keep = 0;
    for (int i = total - 1; i >= 0 && keep < cfg_.max_rank; --i) {
      if (vals(i) <= cutoff) break;
      ++keep;
    }
    Eigen::MatrixXd v = vecs.rightCols(keep).rowwise().reverse();
    root_ = ext * v;
    // recomputed from the root bits (not rotated incrementally) so that a
    // restored snapshot reproduces predictions bit-exactly
    kuu_root_ = kuu_ * root_;
  }

  void refresh_caches() {
    const int r = static_cast<int>(root_.cols());
    double s2 = params_.noise2;
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(r, r) +
                        root_.transpose() * kuu_root_ / s2;
    q_solver_.compute(0.5 * (q + q.transpose()));

    double mu = running_mean();
    Eigen::VectorXd z = swy_ - mu * sw1_;
    Eigen::VectorXd kz = kuu_ * z;
    if (r > 0) {
      Eigen::VectorXd a = root_.transpose() * kz / s2;
      Eigen::VectorXd b = q_solver_.solve(a);
      predict_vec_ = (kz - kuu_root_ * b) / s2;
    } else {
      predict_vec_ = kz / s2;
    }
  }

  // Central finite differences of mll over log-hyperparameters.
  Eigen::Vector3d mll_grad_fd() {
    const double eps = 1e-5;
    KernelParams saved = params_;
    Eigen::Vector3d g;
    auto eval_at = [&](int dim, double delta) {
      KernelParams p = saved;
      double* fields[3] = {&p.sigma2, &p.length, &p.noise2};
      *fields[dim] = std::exp(std::log(*fields[dim]) + delta);
      set_params(p);
      return mll();
    };
    for (int d = 0; d < 3; ++d) {
      double hi = eval_at(d, eps);
      double lo = eval_at(d, -eps);
      g(d) = (hi - lo) / (2.0 * eps);
    }
    set_params(saved);
    return g;
  }

  SkiConfig cfg_;
  KernelParams params_;
  Eigen::VectorXd grid_;
  Eigen::MatrixXd kuu_;       // m x m
  Eigen::MatrixXd root_;      // L, m x r, K_UU-orthogonal columns
  Eigen::MatrixXd kuu_root_;  // K_UU L cache
  Eigen::VectorXd swy_, sw1_;
  double sy_ = 0.0, syy_ = 0.0;
  long n_ = 0;
  long clamped_ = 0;
  long reorth_ = 0;

  Eigen::LLT<Eigen::MatrixXd> q_solver_;
  Eigen::VectorXd predict_vec_;
};

}  // namespace stp

#endif  // STP_SKI_HPP
