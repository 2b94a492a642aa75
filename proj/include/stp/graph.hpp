#ifndef STP_GRAPH_HPP
#define STP_GRAPH_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stp/types.hpp"

namespace stp {

struct Stop {
  std::string id;
  std::string name;
  double lat = 0.0;
  double lon = 0.0;
};

struct RouteDef {
  std::string id;
  std::vector<std::string> stops;  // ordered, length >= 2
};

struct Edge {
  std::string tail;
  std::string head;
  std::vector<std::string> routes;  // sorted, unique, non-empty

  EdgeKey key() const { return EdgeKey{tail, head}; }
};

// A candidate journey: one or two edges, head-to-tail contiguous.
// transfer_stop is present iff there are two legs. A two-leg candidate
// whose legs share a route needs no actual vehicle change.
struct PathCandidate {
  std::vector<int> legs;  // edge indices into TransitGraph::edges
  std::optional<std::string> transfer_stop;
  std::vector<std::vector<std::string>> leg_routes;  // route options per leg
  bool requires_transfer = false;
};

// Immutable after build; safe for concurrent reads.
class TransitGraph {
 public:
  std::vector<Stop> stops;
  std::vector<Edge> edges;
  std::unordered_map<std::string, RouteDef> routes;

  const Stop* find_stop(const std::string& id) const {
    auto it = stop_index_.find(id);
    return it == stop_index_.end() ? nullptr : &stops[it->second];
  }

  bool has_stop(const std::string& id) const {
    return stop_index_.count(id) > 0;
  }

  // Edge index for (tail, head), or -1.
  int edge_index(const std::string& tail, const std::string& head) const {
    auto it = out_.find(tail);
    if (it == out_.end()) return -1;
    auto jt = it->second.find(head);
    return jt == it->second.end() ? -1 : jt->second;
  }

  const Edge* find_edge(const std::string& tail,
                        const std::string& head) const {
    int i = edge_index(tail, head);
    return i < 0 ? nullptr : &edges[i];
  }

  // Out-neighbors with edge indices, ordered by head id.
  const std::map<std::string, int>& out_edges(const std::string& stop) const {
    static const std::map<std::string, int> empty;
    auto it = out_.find(stop);
    return it == out_.end() ? empty : it->second;
  }

  const std::set<std::string>& in_neighbors(const std::string& stop) const {
    static const std::set<std::string> empty;
    auto it = in_.find(stop);
    return it == in_.end() ? empty : it->second;
  }

  bool is_hub(const std::string& stop) const { return hubs_.count(stop) > 0; }

  const std::set<std::string>& hubs() const { return hubs_; }

  friend TransitGraph build_graph(const std::vector<Stop>&,
                                  const std::vector<RouteDef>&);

 private:
  std::unordered_map<std::string, std::size_t> stop_index_;
  std::unordered_map<std::string, std::map<std::string, int>> out_;
  std::unordered_map<std::string, std::set<std::string>> in_;
  std::set<std::string> hubs_;
};

// A stop is a non-hub iff all traffic arrives from exactly one neighbor and
// departs toward exactly one neighbor; everything else (including sources,
// sinks and isolated stops) is a hub.
inline std::set<std::string> classify_hubs(const TransitGraph& g) {
  std::set<std::string> hubs;
  for (const auto& s : g.stops) {
    std::size_t in = g.in_neighbors(s.id).size();
    std::size_t out = g.out_edges(s.id).size();
    if (!(in == 1 && out == 1)) hubs.insert(s.id);
  }
  return hubs;
}

inline TransitGraph build_graph(const std::vector<Stop>& stops,
                                const std::vector<RouteDef>& routes) {
  TransitGraph g;
  g.stops = stops;
  for (std::size_t i = 0; i < g.stops.size(); ++i) {
    const Stop& s = g.stops[i];
    if (s.lat < -90.0 || s.lat > 90.0 || s.lon < -180.0 || s.lon > 180.0) {
      throw std::invalid_argument("stop " + s.id + ": coordinates out of range");
    }
    if (!g.stop_index_.emplace(s.id, i).second) {
      throw std::invalid_argument("duplicate stop id: " + s.id);
    }
  }

  std::map<std::pair<std::string, std::string>, std::set<std::string>>
      edge_routes;
  for (const RouteDef& r : routes) {
    if (r.stops.size() < 2) {
      throw std::invalid_argument("route " + r.id + ": fewer than two stops");
    }
    for (const std::string& sid : r.stops) {
      if (!g.stop_index_.count(sid)) {
        throw std::invalid_argument("route " + r.id + ": unknown stop id " +
                                    sid);
      }
    }
    for (std::size_t j = 0; j + 1 < r.stops.size(); ++j) {
      if (r.stops[j] == r.stops[j + 1]) {
        throw std::invalid_argument("route " + r.id +
                                    ": self-loop at stop " + r.stops[j]);
      }
      edge_routes[{r.stops[j], r.stops[j + 1]}].insert(r.id);
    }
    if (g.routes.count(r.id)) {
      throw std::invalid_argument("duplicate route id: " + r.id);
    }
    g.routes.emplace(r.id, r);
  }

  g.edges.reserve(edge_routes.size());
  for (const auto& [key, rids] : edge_routes) {
    Edge e;
    e.tail = key.first;
    e.head = key.second;
    e.routes.assign(rids.begin(), rids.end());
    int idx = static_cast<int>(g.edges.size());
    g.out_[e.tail][e.head] = idx;
    g.in_[e.head].insert(e.tail);
    g.edges.push_back(std::move(e));
  }

  g.hubs_ = classify_hubs(g);
  return g;
}

inline bool edges_share_route(const Edge& a, const Edge& b) {
  // both route lists are sorted
  std::size_t i = 0, j = 0;
  while (i < a.routes.size() && j < b.routes.size()) {
    int c = a.routes[i].compare(b.routes[j]);
    if (c == 0) return true;
    if (c < 0)
      ++i;
    else
      ++j;
  }
  return false;
}

struct EnumerateOptions {
  // When true, a two-leg candidate requiring a vehicle change is only
  // considered if the transfer stop is a hub. Two-leg paths whose legs share
  // a route involve no transfer and are always enumerated.
  bool hub_pruning = true;
};

// Candidates from s to t: the direct edge (if present) plus two-leg paths
// s -> v -> t, deduplicated by transfer stop, ordered direct-first then by
// transfer stop id.
inline std::vector<PathCandidate> enumerate_paths(
    const TransitGraph& g, const std::string& s, const std::string& t,
    const EnumerateOptions& opts = {}) {
  if (s == t) throw std::invalid_argument("enumerate_paths: source == target");
  if (!g.has_stop(s)) throw std::invalid_argument("unknown stop id: " + s);
  if (!g.has_stop(t)) throw std::invalid_argument("unknown stop id: " + t);

  std::vector<PathCandidate> out;
  if (int direct = g.edge_index(s, t); direct >= 0) {
    PathCandidate c;
    c.legs = {direct};
    c.leg_routes = {g.edges[direct].routes};
    out.push_back(std::move(c));
  }
  for (const auto& [v, e1] : g.out_edges(s)) {
    if (v == t) continue;
    int e2 = g.edge_index(v, t);
    if (e2 < 0) continue;
    bool same_route = edges_share_route(g.edges[e1], g.edges[e2]);
    if (opts.hub_pruning && !same_route && !g.is_hub(v)) continue;
    PathCandidate c;
    c.legs = {e1, e2};
    c.transfer_stop = v;
    c.leg_routes = {g.edges[e1].routes, g.edges[e2].routes};
    c.requires_transfer = !same_route;
    out.push_back(std::move(c));
  }
  return out;
}

struct ReachabilityStats {
  double fraction_direct = 0.0;
  double fraction_one_transfer = 0.0;
};

// Structural reachability averaged over sources: how many of the other stops
// can be reached along one edge, and along at most two edges through any
// intermediate stop. Hub pruning does not apply here.
inline ReachabilityStats reachability_stats(const TransitGraph& g) {
  if (g.stops.empty()) {
    throw std::invalid_argument("reachability_stats: empty graph");
  }
  std::size_t n = g.stops.size();
  if (n == 1) return {};

  double direct_sum = 0.0;
  double one_transfer_sum = 0.0;
  for (const auto& s : g.stops) {
    std::unordered_set<std::string> direct;
    std::unordered_set<std::string> within;
    for (const auto& [v, e1] : g.out_edges(s.id)) {
      if (v != s.id) {
        direct.insert(v);
        within.insert(v);
      }
      for (const auto& [w, e2] : g.out_edges(v)) {
        if (w != s.id) within.insert(w);
      }
    }
    direct_sum += static_cast<double>(direct.size()) / (n - 1);
    one_transfer_sum += static_cast<double>(within.size()) / (n - 1);
  }
  return {direct_sum / n, one_transfer_sum / n};
}

}  // namespace stp

#endif  // STP_GRAPH_HPP
