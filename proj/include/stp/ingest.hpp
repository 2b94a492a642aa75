#ifndef STP_INGEST_HPP
#define STP_INGEST_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "stp/geo.hpp"
#include "stp/graph.hpp"
#include "stp/types.hpp"

namespace stp {

struct GpsPing {
  std::string vid;
  std::string rid;
  std::int64_t ts = 0;  // epoch seconds
  double lat = 0.0;
  double lon = 0.0;
  std::optional<double> speed_mps;
};

struct TravelTimeSample {
  EdgeKey edge;
  double duration_s = 0.0;
  double depart_tod_hours = 0.0;  // [0, 24)
  std::int64_t date = 0;          // day index
  double approach_tail_m = 0.0;   // min distance at the upstream stop
  double approach_head_m = 0.0;   // min distance at the downstream stop
};

struct IngestDiagnostics {
  std::int64_t pings_total = 0;
  std::int64_t pings_malformed = 0;
  std::int64_t pings_duplicate = 0;
  std::int64_t pings_unmatched_route = 0;
  std::int64_t trips_total = 0;
  std::int64_t stop_encounters = 0;
  std::int64_t stop_encounters_resolved = 0;
  std::int64_t samples_emitted = 0;
  std::int64_t samples_nonpositive_dropped = 0;

  double coverage_fraction() const {
    return stop_encounters > 0
               ? static_cast<double>(stop_encounters_resolved) / stop_encounters
               : 0.0;
  }
};

// A vehicle's pings over one run of one route, sorted by timestamp.
struct Trip {
  std::string vid;
  std::string rid;
  std::vector<GpsPing> pings;
};

constexpr double kArrivalMaxDistanceM = 100.0;
constexpr std::int64_t kTripGapSeconds = 15 * 60;

// Arrival estimate at a stop: the timestamp of the ping nearest to the stop
// (earliest among ties). Nothing if the trip never came within 100 m.
struct ArrivalEstimate {
  std::int64_t ts = 0;
  double distance_m = 0.0;
};

inline std::optional<ArrivalEstimate> estimate_arrival_time(
    const std::vector<GpsPing>& trip, const Stop& stop) {
  if (trip.empty()) return std::nullopt;
  ArrivalEstimate best{0, std::numeric_limits<double>::infinity()};
  for (const GpsPing& p : trip) {
    double d = haversine_m(p.lat, p.lon, stop.lat, stop.lon);
    if (d < best.distance_m) {
      best = {p.ts, d};
    }
  }
  if (best.distance_m > kArrivalMaxDistanceM) return std::nullopt;
  return best;
}

// Dedupe by (vehicle, timestamp), sort, and split a vehicle's pings into
// trips wherever the route changes or the gap exceeds 15 minutes.
inline std::vector<Trip> segment_trips(std::vector<GpsPing> pings,
                                       IngestDiagnostics* diag = nullptr) {
  std::stable_sort(pings.begin(), pings.end(),
                   [](const GpsPing& a, const GpsPing& b) {
                     if (a.vid != b.vid) return a.vid < b.vid;
                     return a.ts < b.ts;
                   });
  std::vector<Trip> trips;
  const GpsPing* prev = nullptr;
  for (const GpsPing& p : pings) {
    if (prev && prev->vid == p.vid && prev->ts == p.ts) {
      if (diag) ++diag->pings_duplicate;
      continue;
    }
    bool fresh = !prev || prev->vid != p.vid || prev->rid != p.rid ||
                 p.ts - prev->ts > kTripGapSeconds;
    if (fresh) {
      trips.push_back(Trip{p.vid, p.rid, {}});
    }
    trips.back().pings.push_back(p);
    prev = &trips.back().pings.back();
  }
  if (diag) diag->trips_total += static_cast<std::int64_t>(trips.size());
  return trips;
}

// One sample per edge per trip where both endpoint arrivals resolved within
// 100 m; duration is the raw arrival-time difference, so dwell time at the
// downstream stop's approach is included. Non-positive durations are dropped
// and counted.
inline std::vector<TravelTimeSample> extract_travel_times(
    const std::vector<Trip>& trips, const TransitGraph& g,
    IngestDiagnostics* diag = nullptr) {
  std::vector<TravelTimeSample> samples;
  for (const Trip& trip : trips) {
    auto rit = g.routes.find(trip.rid);
    if (rit == g.routes.end()) {
      if (diag) {
        diag->pings_unmatched_route +=
            static_cast<std::int64_t>(trip.pings.size());
      }
      continue;
    }
    const RouteDef& route = rit->second;

    std::vector<std::optional<ArrivalEstimate>> arrivals;
    arrivals.reserve(route.stops.size());
    for (const std::string& sid : route.stops) {
      const Stop* stop = g.find_stop(sid);
      if (diag) ++diag->stop_encounters;
      auto arr = stop ? estimate_arrival_time(trip.pings, *stop) : std::nullopt;
      if (diag && arr) ++diag->stop_encounters_resolved;
      arrivals.push_back(arr);
    }

    for (std::size_t i = 0; i + 1 < route.stops.size(); ++i) {
      if (!arrivals[i] || !arrivals[i + 1]) continue;
      double duration =
          static_cast<double>(arrivals[i + 1]->ts - arrivals[i]->ts);
      if (duration <= 0.0) {
        if (diag) ++diag->samples_nonpositive_dropped;
        continue;
      }
      TravelTimeSample s;
      s.edge = EdgeKey{route.stops[i], route.stops[i + 1]};
      s.duration_s = duration;
      s.depart_tod_hours =
          time_of_day_hours(static_cast<double>(arrivals[i]->ts));
      s.date = day_index(static_cast<double>(arrivals[i]->ts));
      s.approach_tail_m = arrivals[i]->distance_m;
      s.approach_head_m = arrivals[i + 1]->distance_m;
      samples.push_back(s);
      if (diag) ++diag->samples_emitted;
    }
  }
  return samples;
}

// 24 hour bins keyed by floor(depart time-of-day).
inline std::array<std::vector<TravelTimeSample>, 24> hourly_samples(
    const std::vector<TravelTimeSample>& samples, const EdgeKey& edge) {
  std::array<std::vector<TravelTimeSample>, 24> bins;
  for (const auto& s : samples) {
    if (s.edge != edge) continue;
    bins[hour_bin(s.depart_tod_hours)].push_back(s);
  }
  return bins;
}

// (time-of-day hours, duration) pairs per edge, the shape model fitting
// consumes.
inline std::map<EdgeKey, std::pair<std::vector<double>, std::vector<double>>>
samples_by_edge(const std::vector<TravelTimeSample>& samples) {
  std::map<EdgeKey, std::pair<std::vector<double>, std::vector<double>>> out;
  for (const auto& s : samples) {
    out[s.edge].first.push_back(s.depart_tod_hours);
    out[s.edge].second.push_back(s.duration_s);
  }
  return out;
}

}  // namespace stp

#endif  // STP_INGEST_HPP
