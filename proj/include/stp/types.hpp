#ifndef STP_TYPES_HPP
#define STP_TYPES_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <tuple>

namespace stp {

// Directed edge between two stops; parallel routes are collapsed onto it,
// so (tail, head) identifies an edge uniquely within a network.
struct EdgeKey {
  std::string tail;
  std::string head;

  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;

  std::string str() const { return tail + "->" + head; }
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& e) const {
    std::size_t h = std::hash<std::string>{}(e.tail);
    h ^= std::hash<std::string>{}(e.head) + 0x9e3779b97f4a7c15ULL + (h << 6) +
         (h >> 2);
    return h;
  }
};

// A scalar Gaussian law, (mean, variance).
struct Gaussian {
  double mean = 0.0;
  double var = 0.0;

  double stddev() const { return std::sqrt(var); }
};

constexpr double kSecondsPerDay = 86400.0;

// Time-of-day in hours, in [0, 24).
inline double time_of_day_hours(double epoch_s) {
  double s = std::fmod(epoch_s, kSecondsPerDay);
  if (s < 0) s += kSecondsPerDay;
  return s / 3600.0;
}

// Calendar day index since the epoch origin.
inline std::int64_t day_index(double epoch_s) {
  return static_cast<std::int64_t>(std::floor(epoch_s / kSecondsPerDay));
}

// Hour bin in {0, ..., 23} for a time-of-day in hours.
inline int hour_bin(double tod_hours) {
  int h = static_cast<int>(std::floor(tod_hours));
  if (h < 0) h = 0;
  if (h > 23) h = 23;
  return h;
}

}  // namespace stp

#endif  // STP_TYPES_HPP
