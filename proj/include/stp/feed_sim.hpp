#ifndef STP_FEED_SIM_HPP
#define STP_FEED_SIM_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stp/geo.hpp"
#include "stp/graph.hpp"
#include "stp/ingest.hpp"
#include "stp/rng.hpp"
#include "stp/types.hpp"

namespace stp {

// Piecewise-linear function of time-of-day, clamped outside the knot range.
struct HourlyCurve {
  std::vector<std::pair<double, double>> knots;  // (hour, value), sorted

  double at(double hour) const {
    if (knots.empty()) throw std::invalid_argument("HourlyCurve: no knots");
    if (hour <= knots.front().first) return knots.front().second;
    if (hour >= knots.back().first) return knots.back().second;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (hour <= knots[i].first) {
        double f = (hour - knots[i - 1].first) /
                   (knots[i].first - knots[i - 1].first);
        return knots[i - 1].second * (1.0 - f) + knots[i].second * f;
      }
    }
    return knots.back().second;
  }

  static HourlyCurve constant(double v) { return {{{0.0, v}, {24.0, v}}}; }
};

// Ground-truth generative law for one edge: mean/std of the traversal time
// by hour of entry, plus per-hour correlation to other edges.
struct GroundTruthEdgeLaw {
  EdgeKey edge;
  HourlyCurve mean_s;
  HourlyCurve std_s;
  std::map<EdgeKey, HourlyCurve> corr;  // coefficient by hour, in [-1, 1]

  double corr_at(const EdgeKey& other, double hour) const {
    auto it = corr.find(other);
    return it == corr.end() ? 0.0 : std::clamp(it->second.at(hour), -1.0, 1.0);
  }
};

struct SimConfig {
  double ping_period_s = 10.0;
  double drop_prob = 0.0;
  double gps_noise_m = 0.0;
  int trips_per_route_per_day = 8;
  int days = 30;
  std::uint64_t seed = 0;
  double service_start_h = 5.0;
  double service_end_h = 23.0;
  double min_duration_s = 30.0;  // truncation keeps travel times positive
  double start_jitter_frac = 0.5;  // trip start jitter within its slot

  void validate() const {
    if (ping_period_s <= 0.0) throw std::invalid_argument("ping period <= 0");
    if (drop_prob < 0.0 || drop_prob > 1.0) {
      throw std::invalid_argument("drop probability outside [0, 1]");
    }
    if (gps_noise_m < 0.0) throw std::invalid_argument("negative gps noise");
    if (trips_per_route_per_day < 1 || days < 1) {
      throw std::invalid_argument("trips/days must be positive");
    }
    if (service_end_h <= service_start_h) {
      throw std::invalid_argument("empty service window");
    }
  }
};

// What actually happened on one simulated trip; the oracle the extraction
// pipeline is checked against.
struct TripTruth {
  std::string vid;
  std::string rid;
  int day = 0;
  double start_epoch = 0.0;
  std::vector<EdgeKey> edges;
  std::vector<double> enter_epoch;
  std::vector<double> exit_epoch;
};

struct SimResult {
  std::vector<GpsPing> pings;
  std::vector<TripTruth> truths;
};

namespace detail {

// Joint covariance for a route's edge durations at their entry hours,
// eigenvalue-floored to PSD.
inline Eigen::MatrixXd route_covariance(
    const std::vector<const GroundTruthEdgeLaw*>& laws,
    const std::vector<double>& entry_hours) {
  const int k = static_cast<int>(laws.size());
  Eigen::MatrixXd cov(k, k);
  for (int i = 0; i < k; ++i) {
    double si = laws[i]->std_s.at(entry_hours[i]);
    cov(i, i) = si * si;
    for (int j = 0; j < i; ++j) {
      double sj = laws[j]->std_s.at(entry_hours[j]);
      // pairwise coefficient indexed by the earlier edge's entry hour
      double rho = laws[j]->corr_at(laws[i]->edge, entry_hours[j]);
      cov(i, j) = rho * si * sj;
      cov(j, i) = cov(i, j);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * vals.asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace detail

inline void emit_pings(const TransitGraph& g, const RouteDef& route,
                       const TripTruth& truth, const SimConfig& cfg, Rng& rng,
                       std::vector<GpsPing>& sink);

// Synthetic GPS feed: per trip, edge durations drawn jointly from the
// ground-truth law (entry times propagated through the means), the vehicle
// moved linearly along straight-line edge geometry, pings emitted on the
// period with dropouts and position noise. Byte-identical for a fixed seed.
inline SimResult simulate_feed(const TransitGraph& g,
                               const std::vector<GroundTruthEdgeLaw>& laws,
                               const SimConfig& cfg) {
  cfg.validate();
  std::map<EdgeKey, const GroundTruthEdgeLaw*> law_of;
  for (const auto& l : laws) law_of[l.edge] = &l;
  for (const auto& e : g.edges) {
    if (!law_of.count(e.key())) {
      throw std::invalid_argument("simulate_feed: no law for edge " +
                                  e.key().str());
    }
  }

  std::vector<std::string> route_ids;
  for (const auto& [rid, r] : g.routes) route_ids.push_back(rid);
  std::sort(route_ids.begin(), route_ids.end());

  SimResult out;
  double window_h = cfg.service_end_h - cfg.service_start_h;
  double slot_h = window_h / cfg.trips_per_route_per_day;

  for (int day = 0; day < cfg.days; ++day) {
    for (std::size_t ri = 0; ri < route_ids.size(); ++ri) {
      const RouteDef& route = g.routes.at(route_ids[ri]);
      for (int k = 0; k < cfg.trips_per_route_per_day; ++k) {
        Rng rng(derive_seed(cfg.seed, day, ri, static_cast<std::uint64_t>(k)));

        double start_h = cfg.service_start_h + slot_h * k +
                         slot_h * cfg.start_jitter_frac * rng.uniform();
        double start_epoch = day * kSecondsPerDay + start_h * 3600.0;

        // entry hours by mean propagation, then one joint draw
        std::vector<const GroundTruthEdgeLaw*> trip_laws;
        std::vector<double> entry_hours;
        double cursor_h = start_h;
        for (std::size_t i = 0; i + 1 < route.stops.size(); ++i) {
          const GroundTruthEdgeLaw* law =
              law_of.at(EdgeKey{route.stops[i], route.stops[i + 1]});
          trip_laws.push_back(law);
          entry_hours.push_back(cursor_h);
          cursor_h += law->mean_s.at(cursor_h) / 3600.0;
        }

        const int ne = static_cast<int>(trip_laws.size());
        Eigen::MatrixXd cov = detail::route_covariance(trip_laws, entry_hours);
        Eigen::LLT<Eigen::MatrixXd> llt(
            cov + 1e-9 * Eigen::MatrixXd::Identity(ne, ne));
        Eigen::VectorXd z(ne);
        for (int i = 0; i < ne; ++i) z(i) = rng.normal();
        Eigen::VectorXd draw = Eigen::MatrixXd(llt.matrixL()) * z;

        TripTruth truth;
        truth.vid = "d" + std::to_string(day) + "_r" + route_ids[ri] + "_t" +
                    std::to_string(k);
        truth.rid = route_ids[ri];
        truth.day = day;
        truth.start_epoch = start_epoch;
        double t = start_epoch;
        for (int i = 0; i < ne; ++i) {
          double dur = std::max(cfg.min_duration_s,
                                trip_laws[i]->mean_s.at(entry_hours[i]) + draw(i));
          truth.edges.push_back(trip_laws[i]->edge);
          truth.enter_epoch.push_back(t);
          truth.exit_epoch.push_back(t + dur);
          t += dur;
        }

        emit_pings(g, route, truth, cfg, rng, out.pings);
        out.truths.push_back(std::move(truth));
      }
    }
  }
  return out;
}

inline void emit_pings(const TransitGraph& g, const RouteDef& route,
                       const TripTruth& truth, const SimConfig& cfg, Rng& rng,
                       std::vector<GpsPing>& sink) {
  double trip_end = truth.exit_epoch.back();
  std::size_t seg = 0;
  for (double t = truth.start_epoch; t <= trip_end; t += cfg.ping_period_s) {
    while (seg + 1 < truth.edges.size() && t >= truth.exit_epoch[seg]) ++seg;
    const Stop* a = g.find_stop(route.stops[seg]);
    const Stop* b = g.find_stop(route.stops[seg + 1]);
    double t0 = truth.enter_epoch[seg];
    double t1 = truth.exit_epoch[seg];
    double f = std::clamp((t - t0) / std::max(1e-9, t1 - t0), 0.0, 1.0);
    double lat = a->lat + f * (b->lat - a->lat);
    double lon = a->lon + f * (b->lon - a->lon);
    double speed =
        haversine_m(a->lat, a->lon, b->lat, b->lon) / std::max(1e-9, t1 - t0);

    // draw noise before the dropout decision so the stream of random
    // numbers, and hence every later trip draw, is independent of drops
    double nlat = rng.normal();
    double nlon = rng.normal();
    double u = rng.uniform();
    if (u < cfg.drop_prob) continue;
    if (cfg.gps_noise_m > 0.0) {
      lat += meters_to_dlat(cfg.gps_noise_m * nlat);
      lon += meters_to_dlon(cfg.gps_noise_m * nlon, lat);
    }
    GpsPing p;
    p.vid = truth.vid;
    p.rid = truth.rid;
    p.ts = static_cast<std::int64_t>(std::llround(t));
    p.lat = lat;
    p.lon = lon;
    p.speed_mps = speed;
    sink.push_back(std::move(p));
  }
}

}  // namespace stp

#endif  // STP_FEED_SIM_HPP
