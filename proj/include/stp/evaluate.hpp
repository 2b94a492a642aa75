#ifndef STP_EVALUATE_HPP
#define STP_EVALUATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "stp/planner.hpp"

namespace stp {

// Static timetable: scheduled arrival seconds-of-day per (route, stop),
// aligned by trip index along each route.
class ScheduleTable {
 public:
  void add(const std::string& route, const std::string& stop,
           double arrival_sec_of_day) {
    arrivals_[{route, stop}].push_back(arrival_sec_of_day);
  }

  bool empty() const { return arrivals_.empty(); }

  // Scheduled traversal time of (tail -> head) under a route: median over
  // trip-aligned arrival differences.
  std::optional<double> edge_duration(const std::string& route,
                                      const std::string& tail,
                                      const std::string& head) const {
    auto a = arrivals_.find({route, tail});
    auto b = arrivals_.find({route, head});
    if (a == arrivals_.end() || b == arrivals_.end()) return std::nullopt;
    std::size_t n = std::min(a->second.size(), b->second.size());
    if (n == 0) return std::nullopt;
    std::vector<double> durs;
    for (std::size_t i = 0; i < n; ++i) {
      double d = b->second[i] - a->second[i];
      if (d > 0.0) durs.push_back(d);
    }
    if (durs.empty()) return std::nullopt;
    std::sort(durs.begin(), durs.end());
    return durs[durs.size() / 2];
  }

  // Next scheduled arrival at or after a second-of-day; wraps to the first
  // trip of the next day.
  std::optional<double> wait_after(const std::string& route,
                                   const std::string& stop,
                                   double sec_of_day) const {
    auto it = arrivals_.find({route, stop});
    if (it == arrivals_.end() || it->second.empty()) return std::nullopt;
    std::vector<double> sorted = it->second;
    std::sort(sorted.begin(), sorted.end());
    for (double t : sorted) {
      if (t >= sec_of_day) return t - sec_of_day;
    }
    return sorted.front() + kSecondsPerDay - sec_of_day;
  }

  const std::map<std::pair<std::string, std::string>, std::vector<double>>&
  arrivals() const {
    return arrivals_;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::vector<double>> arrivals_;
};

struct EvalQuery {
  std::string source;
  std::string target;
  int hour = 8;
  std::int64_t day = 0;
};

struct EvalRow {
  EvalQuery query;
  std::string stochastic_choice;  // transfer stop key, or "direct"
  std::string static_choice;
  double realized_stochastic_s = 0.0;
  double realized_static_s = 0.0;
  double savings_frac = 0.0;  // (static - stochastic) / static
};

struct LikelihoodPoint {
  std::string source;
  std::string target;
  std::string transfer_key;
  int hour = 0;
  double index = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  int skipped = 0;
  double wins_fraction = 0.0;       // strictly lower realized time
  double mean_savings_frac = 0.0;
  double fraction_savings_10_40 = 0.0;
  std::vector<LikelihoodPoint> curves;
};

namespace detail {

inline std::string candidate_key(const PathCandidate& c) {
  return c.transfer_stop.value_or("direct");
}

// Realized travel time of a candidate on a given day: per-(edge, day, hour)
// median realized durations, entry times propagated, plus the same
// deterministic waiting convention the planner uses (headway / 2 per
// boarding; a same-route continuation is not a boarding). Nothing when an
// edge lacks a realized sample.
inline std::optional<double> realized_time(
    const TransitGraph& g, const PathCandidate& cand,
    const std::map<std::tuple<std::string, std::int64_t, int>, double>&
        realized,
    std::int64_t day, int hour, const PlannerOptions& opts) {
  double tod_s = hour * 3600.0;
  double total = 0.0;
  for (std::size_t li = 0; li < cand.legs.size(); ++li) {
    const Edge& e = g.edges[cand.legs[li]];
    bool boarding = li == 0 || cand.requires_transfer;
    if (boarding) {
      double wait = 0.5 * opts.headway_s;
      total += wait;
      tod_s += wait;
    }
    int h = hour_bin(tod_s / 3600.0);
    auto it = realized.find({e.key().str(), day, h});
    if (it == realized.end()) return std::nullopt;
    total += it->second;
    tod_s += it->second;
  }
  return total;
}

// Scheduled travel time of a candidate at a query hour: scheduled edge
// durations plus scheduled waits, one wait per boarding.
inline std::optional<double> scheduled_time(const TransitGraph& g,
                                            const PathCandidate& cand,
                                            const ScheduleTable& schedule,
                                            int hour,
                                            const PlannerOptions& opts) {
  bool single_ride = cand.legs.size() == 1 || !cand.requires_transfer;
  double tod_s = hour * 3600.0;

  if (single_ride) {
    // one bus covering every leg: one wait, summed scheduled durations
    std::vector<std::string> routes = cand.leg_routes[0];
    if (cand.leg_routes.size() > 1) {
      std::vector<std::string> shared;
      for (const auto& r : cand.leg_routes[0]) {
        if (std::find(cand.leg_routes[1].begin(), cand.leg_routes[1].end(),
                      r) != cand.leg_routes[1].end()) {
          shared.push_back(r);
        }
      }
      routes = shared;
    }
    const Edge& first = g.edges[cand.legs[0]];
    std::optional<double> best;
    for (const std::string& r : routes) {
      double dur_sum = 0.0;
      bool ok = true;
      for (int leg : cand.legs) {
        const Edge& e = g.edges[leg];
        auto dur = schedule.edge_duration(r, e.tail, e.head);
        if (!dur) {
          ok = false;
          break;
        }
        dur_sum += *dur;
      }
      if (!ok) continue;
      auto wait = schedule.wait_after(r, first.tail,
                                      std::fmod(tod_s, kSecondsPerDay));
      double total = (wait ? *wait : 0.5 * opts.headway_s) + dur_sum;
      if (!best || total < *best) best = total;
    }
    return best;
  }

  double total = 0.0;
  for (std::size_t li = 0; li < cand.legs.size(); ++li) {
    const Edge& e = g.edges[cand.legs[li]];
    double best_wait = -1.0;
    double best_dur = -1.0;
    for (const std::string& r : cand.leg_routes[li]) {
      auto dur = schedule.edge_duration(r, e.tail, e.head);
      if (!dur) continue;
      auto wait =
          schedule.wait_after(r, e.tail, std::fmod(tod_s, kSecondsPerDay));
      double w = wait ? *wait : 0.5 * opts.headway_s;
      if (best_dur < 0.0 || w + *dur < best_wait + best_dur) {
        best_wait = w;
        best_dur = *dur;
      }
    }
    if (best_dur < 0.0) return std::nullopt;
    total += best_wait + best_dur;
    tod_s += best_wait + best_dur;
  }
  return total;
}

}  // namespace detail

// Realized travel time of the model-chosen path against the
// schedule-shortest path's, over (OD, hour, day) queries; also emits the
// per-transfer-point shortest-likelihood curves by hour.
inline EvalReport evaluate_static_vs_stochastic(
    const TransitGraph& g, const ModelFn& models, const CovFn& cov,
    const std::vector<TravelTimeSample>& history, const ScheduleTable& schedule,
    const std::vector<EvalQuery>& queries, const PlannerOptions& opts = {}) {
  EvalReport report;

  // (edge, day, hour) -> median realized duration
  std::map<std::tuple<std::string, std::int64_t, int>, std::vector<double>>
      realized_all;
  for (const auto& s : history) {
    realized_all[{s.edge.str(), s.date, hour_bin(s.depart_tod_hours)}]
        .push_back(s.duration_s);
  }
  std::map<std::tuple<std::string, std::int64_t, int>, double> realized;
  for (auto& [key, v] : realized_all) {
    std::sort(v.begin(), v.end());
    realized[key] = v[v.size() / 2];
  }

  // likelihood curves per distinct OD over the full day
  std::vector<std::pair<std::string, std::string>> ods;
  for (const auto& q : queries) {
    std::pair<std::string, std::string> od{q.source, q.target};
    if (std::find(ods.begin(), ods.end(), od) == ods.end()) ods.push_back(od);
  }
  for (const auto& [src, dst] : ods) {
    for (int h = 0; h < 24; ++h) {
      PlanResult plan;
      try {
        plan = ranked_paths(g, src, dst, h * 3600.0, models, cov, {}, opts);
      } catch (const IntegrationError&) {
        continue;
      }
      for (const auto& p : plan.ranked) {
        report.curves.push_back(
            {src, dst, detail::candidate_key(p.candidate), h, p.optimality});
      }
    }
  }

  int wins = 0;
  int in_band = 0;
  double savings_sum = 0.0;
  for (const auto& q : queries) {
    double depart = static_cast<double>(q.day) * kSecondsPerDay + q.hour * 3600.0;
    PlanResult plan;
    try {
      plan = ranked_paths(g, q.source, q.target, depart, models, cov, {}, opts);
    } catch (const IntegrationError&) {
      ++report.skipped;
      continue;
    }
    if (plan.empty()) {
      ++report.skipped;
      continue;
    }

    auto cands = enumerate_paths(g, q.source, q.target,
                                 {.hub_pruning = opts.hub_pruning});
    const PathCandidate* static_choice = nullptr;
    double static_total = 0.0;
    for (const auto& c : cands) {
      auto sched = detail::scheduled_time(g, c, schedule, q.hour, opts);
      if (!sched) continue;
      if (!static_choice || *sched < static_total) {
        static_choice = &c;
        static_total = *sched;
      }
    }
    if (!static_choice) {
      ++report.skipped;
      continue;
    }

    auto r_stoch = detail::realized_time(g, plan.selected().candidate, realized,
                                         q.day, q.hour, opts);
    auto r_static =
        detail::realized_time(g, *static_choice, realized, q.day, q.hour, opts);
    if (!r_stoch || !r_static || *r_static <= 0.0) {
      ++report.skipped;
      continue;
    }

    EvalRow row;
    row.query = q;
    row.stochastic_choice = detail::candidate_key(plan.selected().candidate);
    row.static_choice = detail::candidate_key(*static_choice);
    row.realized_stochastic_s = *r_stoch;
    row.realized_static_s = *r_static;
    row.savings_frac = (*r_static - *r_stoch) / *r_static;
    savings_sum += row.savings_frac;
    if (*r_stoch < *r_static) ++wins;
    if (row.savings_frac >= 0.10 && row.savings_frac <= 0.40) ++in_band;
    report.rows.push_back(std::move(row));
  }

  if (!report.rows.empty()) {
    report.wins_fraction = static_cast<double>(wins) / report.rows.size();
    report.mean_savings_frac = savings_sum / report.rows.size();
    report.fraction_savings_10_40 =
        static_cast<double>(in_band) / report.rows.size();
  }
  return report;
}

}  // namespace stp

#endif  // STP_EVALUATE_HPP
