#ifndef STP_PLANNER_HPP
#define STP_PLANNER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stp/correlation.hpp"
#include "stp/graph.hpp"
#include "stp/normal.hpp"
#include "stp/types.hpp"

namespace stp {

// Edge travel-time law at a time of day, from either model backend.
using ModelFn = std::function<Gaussian(const EdgeKey&, double tod_hours)>;

// Covariance between two edge laws evaluated at two times, given their
// posterior sigmas.
using CovFn = std::function<double(const EdgeKey&, const EdgeKey&,
                                   double t_hours, double tp_hours,
                                   double sigma1, double sigma2)>;

inline CovFn zero_covariance() {
  return [](const EdgeKey&, const EdgeKey&, double, double, double, double) {
    return 0.0;
  };
}

inline CovFn covariance_from(const CorrelationModel& m) {
  return [&m](const EdgeKey& e1, const EdgeKey& e2, double t, double tp,
              double s1, double s2) { return m.covariance(e1, e2, t, tp, s1, s2).cov; };
}

struct PlannerOptions {
  double headway_s = 600.0;      // fallback when the feed has no arrivals
  int grid_nodes = 4096;         // optimality integration resolution
  int max_grid_nodes = 65536;    // doubling-on-failure cap
  bool hub_pruning = true;
  double variance_floor_frac = 0.01;  // of mean^2, when assembly degenerates
  double feasibility_sigmas = 3.0;    // buses earlier than mean-3sd are missed
  // Half-width of each path's integration window in sigmas. The integral
  // only needs the 99% interval for the ranking to stabilize, but the
  // two-path closed form is matched to 1e-4 only once tail truncation is
  // pushed below that scale.
  double integration_sigmas = 5.0;
};

struct PathDistribution {
  std::vector<EdgeKey> legs_keys;
  double depart_epoch = 0.0;
  double mean_s = 0.0;
  double var_s2 = 0.0;
  std::vector<Gaussian> legs;
  double cross_cov = 0.0;
  bool var_floored = false;
};

// Total path law at the query time: leg 1 at the departure's time of day,
// leg 2 at the mean arrival time (first-order propagation of entry times);
// variance adds twice the estimated cross-covariance.
inline PathDistribution path_distribution(
    const std::vector<EdgeKey>& legs, double depart_epoch,
    const ModelFn& models, const CovFn& cov, const PlannerOptions& opts = {}) {
  if (legs.empty() || legs.size() > 2) {
    throw std::invalid_argument("path_distribution: need 1 or 2 legs");
  }
  PathDistribution out;
  out.legs_keys = legs;
  out.depart_epoch = depart_epoch;

  double t1 = time_of_day_hours(depart_epoch);
  Gaussian w1 = models(legs[0], t1);
  out.legs.push_back(w1);
  if (legs.size() == 1) {
    out.mean_s = w1.mean;
    out.var_s2 = w1.var;
  } else {
    double t2 = time_of_day_hours(depart_epoch + w1.mean);
    Gaussian w2 = models(legs[1], t2);
    out.legs.push_back(w2);
    double cross = cov(legs[0], legs[1], t1, t2, std::sqrt(std::max(0.0, w1.var)),
                       std::sqrt(std::max(0.0, w2.var)));
    cross = clamp_cross_covariance(w1.var, w2.var, cross);
    out.cross_cov = cross;
    out.mean_s = w1.mean + w2.mean;
    out.var_s2 = w1.var + w2.var + 2.0 * cross;
  }
  if (out.var_s2 <= 0.0) {
    out.var_s2 = opts.variance_floor_frac * out.mean_s * out.mean_s;
    out.var_floored = true;
  }
  return out;
}

struct OptimalityResult {
  std::vector<double> raw;         // pre-normalization integrals
  std::vector<double> normalized;  // reported indices, sum exactly 1
  double raw_sum = 0.0;
  int grid_nodes = 0;
};

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// C_j = P[path j strictly shortest] under pairwise independence:
//   C_j = int f_j(pi) prod_{i != j} [1 - Phi((pi - mu_i) / sigma_i)] dpi
// by fixed-grid trapezoid over a window centered on each f_j. The raw
// indices must sum to 1 within 0.02 or the resolution is declared
// insufficient.
inline OptimalityResult optimality_indices(const std::vector<Gaussian>& dists,
                                           int grid_nodes = 4096,
                                           double window_sigmas = 5.0) {
  if (dists.empty()) throw std::invalid_argument("optimality_indices: empty");
  for (const auto& d : dists) {
    if (!(d.var > 0.0)) {
      throw std::invalid_argument("optimality_indices: non-positive variance");
    }
  }
  const std::size_t k = dists.size();

  OptimalityResult res;
  res.grid_nodes = grid_nodes;
  res.raw.resize(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double sj = dists[j].stddev();
    double lo = dists[j].mean - window_sigmas * sj;
    double hi = dists[j].mean + window_sigmas * sj;
    double h = (hi - lo) / (grid_nodes - 1);
    double acc = 0.0;
    for (int n = 0; n < grid_nodes; ++n) {
      double pi = lo + h * n;
      double fj = normal_pdf((pi - dists[j].mean) / sj) / sj;
      double prod = 1.0;
      for (std::size_t i = 0; i < k && prod > 0.0; ++i) {
        if (i == j) continue;
        prod *= normal_sf((pi - dists[i].mean) / dists[i].stddev());
      }
      double w = (n == 0 || n == grid_nodes - 1) ? 0.5 : 1.0;
      acc += w * fj * prod;
    }
    res.raw[j] = acc * h;
  }
  res.raw_sum = 0.0;
  for (double c : res.raw) res.raw_sum += c;
  if (std::abs(res.raw_sum - 1.0) > 0.02) {
    throw IntegrationError("optimality indices sum to " +
                           std::to_string(res.raw_sum) + " at " +
                           std::to_string(grid_nodes) + " nodes");
  }
  res.normalized.resize(k);
  for (std::size_t j = 0; j < k; ++j) res.normalized[j] = res.raw[j] / res.raw_sum;
  return res;
}

// Doubling-on-failure escalation of the grid.
inline OptimalityResult optimality_indices_auto(
    const std::vector<Gaussian>& dists, const PlannerOptions& opts = {}) {
  int nodes = opts.grid_nodes;
  while (true) {
    try {
      return optimality_indices(dists, nodes, opts.integration_sigmas);
    } catch (const IntegrationError&) {
      if (nodes >= opts.max_grid_nodes) throw;
      nodes *= 2;
    }
  }
}

struct SelectEntry {
  double optimality = 0.0;
  double sigma = 0.0;
  double mean = 0.0;
};

// Among candidates within 1% of the maximum optimality index, the one with
// the least variance; sigma ties break to the smaller mean, then to the
// earlier (stable) position.
inline std::size_t select_shortest(const std::vector<SelectEntry>& entries,
                                   double band = 0.99) {
  if (entries.empty()) throw std::invalid_argument("select_shortest: empty");
  double cmax = 0.0;
  for (const auto& e : entries) cmax = std::max(cmax, e.optimality);
  std::size_t best = entries.size();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].optimality < band * cmax) continue;
    if (best == entries.size()) {
      best = i;
      continue;
    }
    const auto& cur = entries[best];
    const auto& cand = entries[i];
    if (cand.sigma < cur.sigma ||
        (cand.sigma == cur.sigma && cand.mean < cur.mean)) {
      best = i;
    }
  }
  return best;
}

// Probability the incoming leg arrives no later than the outgoing bus
// (a successful transfer).
inline double transfer_probability(const Gaussian& arrival_current,
                                   const Gaussian& arrival_next_bus) {
  if (arrival_current.var < 0.0 || arrival_next_bus.var < 0.0) {
    throw std::invalid_argument("transfer_probability: negative variance");
  }
  double sv = arrival_current.var + arrival_next_bus.var;
  if (sv == 0.0) {
    return arrival_current.mean <= arrival_next_bus.mean ? 1.0 : 0.0;
  }
  return normal_cdf((arrival_next_bus.mean - arrival_current.mean) /
                    std::sqrt(sv));
}

struct EtaArrival {
  double t_epoch = 0.0;
  std::optional<double> stddev_s;  // Gaussian arrival when present
};

// Upcoming bus arrivals per (stop, route), sorted ascending.
class EtaFeed {
 public:
  void add(const std::string& stop, const std::string& route,
           EtaArrival arrival) {
    auto& v = entries_[{stop, route}];
    v.push_back(arrival);
    std::sort(v.begin(), v.end(), [](const EtaArrival& a, const EtaArrival& b) {
      return a.t_epoch < b.t_epoch;
    });
  }

  bool empty() const { return entries_.empty(); }

  bool has_any(const std::string& stop,
               const std::vector<std::string>& routes) const {
    for (const auto& r : routes) {
      if (entries_.count({stop, r})) return true;
    }
    return false;
  }

  // Earliest arrival at or after the cutoff over the given routes.
  std::optional<std::pair<EtaArrival, std::string>> earliest(
      const std::string& stop, const std::vector<std::string>& routes,
      double cutoff_epoch) const {
    std::optional<std::pair<EtaArrival, std::string>> best;
    for (const auto& r : routes) {
      auto it = entries_.find({stop, r});
      if (it == entries_.end()) continue;
      for (const EtaArrival& a : it->second) {
        if (a.t_epoch < cutoff_epoch) continue;
        if (!best || a.t_epoch < best->first.t_epoch) best = {{a, r}};
        break;  // sorted: first feasible per route is the earliest
      }
    }
    return best;
  }

  const std::map<std::pair<std::string, std::string>, std::vector<EtaArrival>>&
  entries() const {
    return entries_;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::vector<EtaArrival>>
      entries_;
};

struct RankedPath {
  PathCandidate candidate;
  std::vector<std::string> chosen_routes;  // one per leg; empty = headway
  std::vector<double> waits_s;             // one per boarding
  std::vector<Gaussian> legs;
  double total_mean_s = 0.0;   // waits + leg means
  double total_var_s2 = 0.0;
  double optimality = 0.0;     // normalized index
  double feasibility = 1.0;    // transfer success probability
  double cross_cov = 0.0;
  bool var_floored = false;
};

struct PlanResult {
  std::vector<RankedPath> ranked;  // selected path first, then by index
  double raw_index_sum = 0.0;
  int grid_nodes = 0;
  bool candidates_overlap = false;  // independence premise is stressed
  int excluded_no_feasible_bus = 0;
  std::string reason;  // set when ranked is empty

  bool empty() const { return ranked.empty(); }
  const RankedPath& selected() const { return ranked.front(); }
};

namespace detail {

struct LegBoard {
  double wait_s = 0.0;
  double board_epoch = 0.0;
  std::string route;   // empty when on headway fallback
  double feasibility = 1.0;
  bool feasible = true;
};

inline LegBoard board_first_leg(const EtaFeed& eta, const std::string& stop,
                                const std::vector<std::string>& routes,
                                double depart_epoch,
                                const PlannerOptions& opts) {
  LegBoard b;
  if (eta.has_any(stop, routes)) {
    auto hit = eta.earliest(stop, routes, depart_epoch);
    if (!hit) {
      b.feasible = false;
      return b;
    }
    b.wait_s = hit->first.t_epoch - depart_epoch;
    b.board_epoch = hit->first.t_epoch;
    b.route = hit->second;
  } else {
    b.wait_s = 0.5 * opts.headway_s;
    b.board_epoch = depart_epoch + b.wait_s;
    b.route = routes.empty() ? "" : routes.front();
  }
  return b;
}

inline LegBoard board_transfer_leg(const EtaFeed& eta, const std::string& stop,
                                   const std::vector<std::string>& routes,
                                   const Gaussian& arrival,
                                   const PlannerOptions& opts) {
  LegBoard b;
  if (eta.has_any(stop, routes)) {
    double cutoff =
        arrival.mean - opts.feasibility_sigmas * std::sqrt(std::max(0.0, arrival.var));
    auto hit = eta.earliest(stop, routes, cutoff);
    if (!hit) {
      b.feasible = false;
      return b;
    }
    Gaussian bus{hit->first.t_epoch,
                 hit->first.stddev_s ? *hit->first.stddev_s * *hit->first.stddev_s
                                     : 0.0};
    b.feasibility = transfer_probability(arrival, bus);
    b.wait_s = std::max(0.0, hit->first.t_epoch - arrival.mean);
    b.board_epoch = std::max(hit->first.t_epoch, arrival.mean);
    b.route = hit->second;
  } else {
    b.wait_s = 0.5 * opts.headway_s;
    b.board_epoch = arrival.mean + b.wait_s;
    b.route = routes.empty() ? "" : routes.front();
  }
  return b;
}

}  // namespace detail

namespace detail {

// Routes serving every leg of a candidate (non-empty iff no vehicle change
// is needed).
inline std::vector<std::string> shared_routes(const PathCandidate& cand) {
  if (cand.leg_routes.size() < 2) return cand.leg_routes.empty() ? std::vector<std::string>{} : cand.leg_routes[0];
  std::vector<std::string> shared;
  for (const auto& r : cand.leg_routes[0]) {
    if (std::find(cand.leg_routes[1].begin(), cand.leg_routes[1].end(), r) !=
        cand.leg_routes[1].end()) {
      shared.push_back(r);
    }
  }
  return shared;
}

}  // namespace detail

// Ranks all candidates for (s, t) at the departure time. Leg times are
// evaluated at the boarding times implied by the ETA feed (or the headway
// fallback). A two-leg candidate whose legs share a route is one bus ride
// and has a single boarding; a true transfer adds a second boarding, where
// buses arriving more than feasibility_sigmas before the user's mean
// arrival are skipped and candidates with no feasible bus are excluded.
inline PlanResult ranked_paths(const TransitGraph& g, const std::string& s,
                               const std::string& t, double depart_epoch,
                               const ModelFn& models, const CovFn& cov,
                               const EtaFeed& eta = {},
                               const PlannerOptions& opts = {}) {
  PlanResult result;
  auto cands = enumerate_paths(g, s, t, {.hub_pruning = opts.hub_pruning});
  if (cands.empty()) {
    result.reason = "no candidate paths";
    return result;
  }

  std::vector<RankedPath> paths;
  for (const auto& cand : cands) {
    RankedPath rp;
    rp.candidate = cand;
    const Edge& leg1 = g.edges[cand.legs[0]];
    bool single_ride = cand.legs.size() == 1 || !cand.requires_transfer;
    std::vector<std::string> board1_routes =
        single_ride ? detail::shared_routes(cand) : cand.leg_routes[0];

    detail::LegBoard b1 = detail::board_first_leg(eta, leg1.tail,
                                                  board1_routes, depart_epoch,
                                                  opts);
    if (!b1.feasible) {
      ++result.excluded_no_feasible_bus;
      continue;
    }
    double t1 = time_of_day_hours(b1.board_epoch);
    Gaussian w1 = models(leg1.key(), t1);
    rp.legs.push_back(w1);
    rp.waits_s.push_back(b1.wait_s);
    rp.chosen_routes.push_back(b1.route);

    if (cand.legs.size() == 1) {
      rp.total_mean_s = b1.wait_s + w1.mean;
      rp.total_var_s2 = w1.var;
    } else {
      const Edge& leg2 = g.edges[cand.legs[1]];
      Gaussian arrival{b1.board_epoch + w1.mean, w1.var};
      detail::LegBoard b2;
      if (single_ride) {
        // staying on the same vehicle: no second wait, no feasibility risk
        b2.wait_s = 0.0;
        b2.board_epoch = arrival.mean;
        b2.route = b1.route;
      } else {
        b2 = detail::board_transfer_leg(eta, leg2.tail, cand.leg_routes[1],
                                        arrival, opts);
        if (!b2.feasible) {
          ++result.excluded_no_feasible_bus;
          continue;
        }
        rp.waits_s.push_back(b2.wait_s);
        rp.feasibility = b2.feasibility;
      }
      double t2 = time_of_day_hours(b2.board_epoch);
      Gaussian w2 = models(leg2.key(), t2);
      rp.legs.push_back(w2);
      rp.chosen_routes.push_back(b2.route);

      double cross =
          cov(leg1.key(), leg2.key(), t1, t2, std::sqrt(std::max(0.0, w1.var)),
              std::sqrt(std::max(0.0, w2.var)));
      cross = clamp_cross_covariance(w1.var, w2.var, cross);
      rp.cross_cov = cross;
      rp.total_mean_s = b1.wait_s + w1.mean + b2.wait_s + w2.mean;
      rp.total_var_s2 = w1.var + w2.var + 2.0 * cross;
    }
    if (rp.total_var_s2 <= 0.0) {
      rp.total_var_s2 =
          opts.variance_floor_frac * rp.total_mean_s * rp.total_mean_s;
      rp.var_floored = true;
    }
    paths.push_back(std::move(rp));
  }

  if (paths.empty()) {
    result.reason = "no feasible candidate";
    return result;
  }

  std::vector<Gaussian> dists;
  dists.reserve(paths.size());
  for (const auto& p : paths) dists.push_back({p.total_mean_s, p.total_var_s2});
  OptimalityResult opt = optimality_indices_auto(dists, opts);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    paths[i].optimality = opt.normalized[i];
  }
  result.raw_index_sum = opt.raw_sum;
  result.grid_nodes = opt.grid_nodes;

  std::vector<SelectEntry> entries;
  for (const auto& p : paths) {
    entries.push_back({p.optimality, std::sqrt(p.total_var_s2), p.total_mean_s});
  }
  std::size_t chosen = select_shortest(entries);

  // overlap: any two candidates sharing an edge stresses the independence
  // premise of the integral
  for (std::size_t i = 0; i < paths.size() && !result.candidates_overlap; ++i) {
    for (std::size_t j = i + 1; j < paths.size(); ++j) {
      for (int ei : paths[i].candidate.legs) {
        for (int ej : paths[j].candidate.legs) {
          if (ei == ej) {
            result.candidates_overlap = true;
            break;
          }
        }
        if (result.candidates_overlap) break;
      }
      if (result.candidates_overlap) break;
    }
  }

  std::vector<std::size_t> order(paths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (a == chosen) return true;
    if (b == chosen) return false;
    return paths[a].optimality > paths[b].optimality;
  });
  for (std::size_t idx : order) result.ranked.push_back(std::move(paths[idx]));
  return result;
}

struct ReplanResult {
  PlanResult plan;
  bool switch_recommended = false;
  int remaining_rank = -1;  // index of the current path's suffix in the plan
  std::string reason;
};

// Re-plans from the current stop; recommends leaving the active path only
// when its remaining suffix falls outside the 1% similarity band of the
// best candidate.
inline ReplanResult replan(const TransitGraph& g, const PathCandidate& active,
                           const std::string& target,
                           const std::string& current_stop, double tau_now,
                           const ModelFn& models, const CovFn& cov,
                           const EtaFeed& eta = {},
                           const PlannerOptions& opts = {}) {
  ReplanResult out;
  if (current_stop == target) {
    out.reason = "at destination";
    return out;
  }

  // remaining suffix of the active path from the current stop
  std::vector<int> remaining;
  for (std::size_t i = 0; i < active.legs.size(); ++i) {
    if (!remaining.empty() || g.edges[active.legs[i]].tail == current_stop) {
      remaining.push_back(active.legs[i]);
    }
  }
  if (remaining.empty()) {
    throw std::invalid_argument("replan: current stop not on the active path");
  }

  out.plan = ranked_paths(g, current_stop, target, tau_now, models, cov, eta,
                          opts);
  if (out.plan.empty()) {
    out.reason = out.plan.reason;
    return out;
  }

  for (std::size_t i = 0; i < out.plan.ranked.size(); ++i) {
    if (out.plan.ranked[i].candidate.legs == remaining) {
      out.remaining_rank = static_cast<int>(i);
      break;
    }
  }
  double c_best = 0.0;
  for (const auto& p : out.plan.ranked) c_best = std::max(c_best, p.optimality);
  if (out.remaining_rank < 0) {
    out.switch_recommended = true;
    out.reason = "current path no longer available";
  } else {
    double c_rem = out.plan.ranked[out.remaining_rank].optimality;
    out.switch_recommended = c_rem < 0.99 * c_best;
  }
  return out;
}

}  // namespace stp

#endif  // STP_PLANNER_HPP
