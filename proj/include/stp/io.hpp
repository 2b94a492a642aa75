#ifndef STP_IO_HPP
#define STP_IO_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stp/correlation.hpp"
#include "stp/evaluate.hpp"
#include "stp/feed_sim.hpp"
#include "stp/gp.hpp"
#include "stp/graph.hpp"
#include "stp/ingest.hpp"
#include "stp/planner.hpp"
#include "stp/ski.hpp"

namespace stp {

using nlohmann::json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io_detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  return f;
}

inline std::ofstream open_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << std::setprecision(17);
  return f;
}

// Minimal CSV field splitter with double-quote handling.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace io_detail

// ---- network ----

inline json network_to_json(const std::vector<Stop>& stops,
                            const std::vector<RouteDef>& routes) {
  json j;
  j["stops"] = json::array();
  for (const auto& s : stops) {
    j["stops"].push_back(
        {{"id", s.id}, {"name", s.name}, {"lat", s.lat}, {"lon", s.lon}});
  }
  j["routes"] = json::array();
  for (const auto& r : routes) {
    j["routes"].push_back({{"id", r.id}, {"stops", r.stops}});
  }
  return j;
}

inline std::pair<std::vector<Stop>, std::vector<RouteDef>> network_from_json(
    const json& j) {
  std::vector<Stop> stops;
  std::vector<RouteDef> routes;
  if (!j.contains("stops") || !j.contains("routes")) {
    throw IoError("network json needs 'stops' and 'routes'");
  }
  for (const auto& s : j.at("stops")) {
    stops.push_back({s.at("id").get<std::string>(),
                     s.value("name", std::string{}), s.at("lat").get<double>(),
                     s.at("lon").get<double>()});
  }
  for (const auto& r : j.at("routes")) {
    routes.push_back({r.at("id").get<std::string>(),
                      r.at("stops").get<std::vector<std::string>>()});
  }
  return {stops, routes};
}

inline TransitGraph load_network_json(const std::string& path) {
  auto f = io_detail::open_in(path);
  json j = json::parse(f);
  auto [stops, routes] = network_from_json(j);
  return build_graph(stops, routes);
}

inline void save_network_json(const std::string& path,
                              const std::vector<Stop>& stops,
                              const std::vector<RouteDef>& routes) {
  auto f = io_detail::open_out(path);
  f << network_to_json(stops, routes).dump(2) << "\n";
}

// GTFS subset: stops.txt (stop_id, stop_name, stop_lat, stop_lon) plus
// route_stops.txt (route_id, stop_sequence, stop_id) with rows in any order.
inline TransitGraph load_network_gtfs(const std::string& dir) {
  namespace fs = std::filesystem;
  auto stops_f = io_detail::open_in((fs::path(dir) / "stops.txt").string());

  std::string line;
  std::getline(stops_f, line);
  auto header = io_detail::split_csv(line);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw IoError("stops.txt: missing column " + name);
  };
  int c_id = col("stop_id"), c_name = col("stop_name"), c_lat = col("stop_lat"),
      c_lon = col("stop_lon");

  std::vector<Stop> stops;
  while (std::getline(stops_f, line)) {
    if (line.empty()) continue;
    auto f = io_detail::split_csv(line);
    stops.push_back({f.at(c_id), f.at(c_name), std::stod(f.at(c_lat)),
                     std::stod(f.at(c_lon))});
  }

  auto routes_f =
      io_detail::open_in((fs::path(dir) / "route_stops.txt").string());
  std::getline(routes_f, line);
  auto rheader = io_detail::split_csv(line);
  auto rcol = [&](const std::string& name) {
    for (std::size_t i = 0; i < rheader.size(); ++i) {
      if (rheader[i] == name) return static_cast<int>(i);
    }
    throw IoError("route_stops.txt: missing column " + name);
  };
  int r_id = rcol("route_id"), r_seq = rcol("stop_sequence"),
      r_stop = rcol("stop_id");

  std::map<std::string, std::map<int, std::string>> by_route;
  while (std::getline(routes_f, line)) {
    if (line.empty()) continue;
    auto f = io_detail::split_csv(line);
    by_route[f.at(r_id)][std::stoi(f.at(r_seq))] = f.at(r_stop);
  }
  std::vector<RouteDef> routes;
  for (const auto& [rid, seq] : by_route) {
    RouteDef rd;
    rd.id = rid;
    for (const auto& [k, sid] : seq) rd.stops.push_back(sid);
    routes.push_back(std::move(rd));
  }
  return build_graph(stops, routes);
}

inline std::string network_hash(const std::vector<Stop>& stops,
                                const std::vector<RouteDef>& routes) {
  return io_detail::hex64(
      io_detail::fnv1a64(network_to_json(stops, routes).dump()));
}

inline std::string network_hash(const TransitGraph& g) {
  std::vector<RouteDef> routes;
  for (const auto& [id, r] : std::map<std::string, RouteDef>(g.routes.begin(),
                                                             g.routes.end())) {
    routes.push_back(r);
  }
  return network_hash(g.stops, routes);
}

// ---- GPS feed (JSONL, one ping per line) ----

inline void write_feed_jsonl(std::ostream& os,
                             const std::vector<GpsPing>& pings) {
  os << std::setprecision(17);
  for (const auto& p : pings) {
    json j = {{"vid", p.vid}, {"rid", p.rid}, {"ts", p.ts},
              {"lat", p.lat}, {"lon", p.lon}};
    if (p.speed_mps) j["speed"] = *p.speed_mps;
    os << j.dump() << "\n";
  }
}

inline void write_feed_jsonl(const std::string& path,
                             const std::vector<GpsPing>& pings) {
  auto f = io_detail::open_out(path);
  write_feed_jsonl(f, pings);
}

// Malformed lines are skipped and counted, never fatal.
inline std::vector<GpsPing> read_feed_jsonl(std::istream& is,
                                            IngestDiagnostics* diag = nullptr) {
  std::vector<GpsPing> pings;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (diag) ++diag->pings_total;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("vid") || !j.contains("rid") ||
        !j.contains("ts") || !j.contains("lat") || !j.contains("lon") ||
        !j.at("ts").is_number() || !j.at("lat").is_number() ||
        !j.at("lon").is_number()) {
      if (diag) ++diag->pings_malformed;
      continue;
    }
    GpsPing p;
    p.vid = j.at("vid").get<std::string>();
    p.rid = j.at("rid").get<std::string>();
    p.ts = j.at("ts").get<std::int64_t>();
    p.lat = j.at("lat").get<double>();
    p.lon = j.at("lon").get<double>();
    double lat_ok = p.lat >= -90.0 && p.lat <= 90.0;
    double lon_ok = p.lon >= -180.0 && p.lon <= 180.0;
    if (p.ts <= 0 || !lat_ok || !lon_ok) {
      if (diag) ++diag->pings_malformed;
      continue;
    }
    if (j.contains("speed") && j.at("speed").is_number()) {
      p.speed_mps = j.at("speed").get<double>();
    }
    pings.push_back(std::move(p));
  }
  return pings;
}

inline std::vector<GpsPing> read_feed_jsonl(const std::string& path,
                                            IngestDiagnostics* diag = nullptr) {
  auto f = io_detail::open_in(path);
  return read_feed_jsonl(f, diag);
}

// ---- travel-time samples (CSV) ----

inline void write_samples_csv(const std::string& path,
                              const std::vector<TravelTimeSample>& samples) {
  auto f = io_detail::open_out(path);
  f << "tail,head,duration_s,depart_hour,date,approach_tail_m,approach_head_m\n";
  for (const auto& s : samples) {
    f << s.edge.tail << "," << s.edge.head << "," << s.duration_s << ","
      << s.depart_tod_hours << "," << s.date << "," << s.approach_tail_m << ","
      << s.approach_head_m << "\n";
  }
}

inline std::vector<TravelTimeSample> read_samples_csv(const std::string& path) {
  auto f = io_detail::open_in(path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<TravelTimeSample> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto v = io_detail::split_csv(line);
    if (v.size() != 7) throw IoError("samples csv: bad row: " + line);
    TravelTimeSample s;
    s.edge = {v[0], v[1]};
    s.duration_s = std::stod(v[2]);
    s.depart_tod_hours = std::stod(v[3]);
    s.date = std::stoll(v[4]);
    s.approach_tail_m = std::stod(v[5]);
    s.approach_head_m = std::stod(v[6]);
    out.push_back(std::move(s));
  }
  return out;
}

inline json diagnostics_to_json(const IngestDiagnostics& d) {
  return {{"pings_total", d.pings_total},
          {"pings_malformed", d.pings_malformed},
          {"pings_duplicate", d.pings_duplicate},
          {"pings_unmatched_route", d.pings_unmatched_route},
          {"trips_total", d.trips_total},
          {"stop_encounters", d.stop_encounters},
          {"stop_encounters_resolved", d.stop_encounters_resolved},
          {"samples_emitted", d.samples_emitted},
          {"samples_nonpositive_dropped", d.samples_nonpositive_dropped},
          {"coverage_fraction", d.coverage_fraction()}};
}

// ---- batch model store (one json per edge + an index) ----

inline json gp_model_to_json(const GpModel& m) {
  json j;
  j["schema_version"] = 1;
  j["edge"] = m.edge_id;
  j["params"] = {{"sigma2", m.params.sigma2},
                 {"length", m.params.length},
                 {"noise2", m.params.noise2}};
  j["prior_mean"] = m.prior_mean;
  j["fallback"] = m.fallback;
  j["x"] = std::vector<double>(m.x.data(), m.x.data() + m.x.size());
  j["y"] = std::vector<double>(m.y.data(), m.y.data() + m.y.size());
  return j;
}

inline GpModel gp_model_from_json(const json& j) {
  if (j.value("schema_version", 0) != 1) {
    throw IoError("gp model: unsupported schema version");
  }
  GpModel m;
  m.edge_id = j.at("edge").get<std::string>();
  m.params.sigma2 = j.at("params").at("sigma2").get<double>();
  m.params.length = j.at("params").at("length").get<double>();
  m.params.noise2 = j.at("params").at("noise2").get<double>();
  m.fallback = j.value("fallback", false);
  auto xs = j.at("x").get<std::vector<double>>();
  auto ys = j.at("y").get<std::vector<double>>();
  if (xs.size() != ys.size()) throw IoError("gp model: |x| != |y|");
  m.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size());
  m.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), ys.size());
  if (xs.empty()) {
    m.prior_mean = j.at("prior_mean").get<double>();
  } else {
    m.refresh();
  }
  return m;
}

inline std::string edge_file_stem(const EdgeKey& e) {
  // content-derived, filesystem-safe
  return io_detail::hex64(io_detail::fnv1a64(e.str()));
}

inline void save_models(const std::string& dir,
                        const std::map<EdgeKey, GpModel>& models,
                        const json& meta = json::object()) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json index;
  index["schema_version"] = 1;
  index["meta"] = meta;
  index["edges"] = json::array();
  for (const auto& [key, m] : models) {
    std::string stem = edge_file_stem(key);
    auto f = io_detail::open_out((fs::path(dir) / (stem + ".json")).string());
    f << gp_model_to_json(m).dump(2) << "\n";
    index["edges"].push_back(
        {{"tail", key.tail}, {"head", key.head}, {"file", stem + ".json"}});
  }
  auto f = io_detail::open_out((fs::path(dir) / "index.json").string());
  f << index.dump(2) << "\n";
}

inline std::map<EdgeKey, GpModel> load_models(const std::string& dir) {
  namespace fs = std::filesystem;
  auto idx = io_detail::open_in((fs::path(dir) / "index.json").string());
  json index = json::parse(idx);
  std::map<EdgeKey, GpModel> out;
  for (const auto& e : index.at("edges")) {
    EdgeKey key{e.at("tail").get<std::string>(),
                e.at("head").get<std::string>()};
    auto f = io_detail::open_in(
        (fs::path(dir) / e.at("file").get<std::string>()).string());
    out.emplace(key, gp_model_from_json(json::parse(f)));
  }
  return out;
}

// ---- online model store ----

inline json ski_model_to_json(const SkiModel& m) {
  auto s = m.snapshot();
  json j;
  j["schema_version"] = 1;
  j["config"] = {{"grid_size", s.cfg.grid_size},
                 {"max_rank", s.cfg.max_rank},
                 {"grid_lo", s.cfg.grid_lo},
                 {"grid_hi", s.cfg.grid_hi},
                 {"refresh_every", s.cfg.refresh_every},
                 {"refresh_steps", s.cfg.refresh_steps}};
  j["params"] = {{"sigma2", s.params.sigma2},
                 {"length", s.params.length},
                 {"noise2", s.params.noise2}};
  j["root"] = json::array();
  for (Eigen::Index c = 0; c < s.root.cols(); ++c) {
    j["root"].push_back(std::vector<double>(
        s.root.col(c).data(), s.root.col(c).data() + s.root.rows()));
  }
  j["swy"] = std::vector<double>(s.swy.data(), s.swy.data() + s.swy.size());
  j["sw1"] = std::vector<double>(s.sw1.data(), s.sw1.data() + s.sw1.size());
  j["sy"] = s.sy;
  j["syy"] = s.syy;
  j["n"] = s.n;
  j["clamped"] = s.clamped;
  j["reorth"] = s.reorth;
  return j;
}

inline SkiModel ski_model_from_json(const json& j) {
  if (j.value("schema_version", 0) != 1) {
    throw IoError("ski model: unsupported schema version");
  }
  SkiModel::Snapshot s;
  s.cfg.grid_size = j.at("config").at("grid_size").get<int>();
  s.cfg.max_rank = j.at("config").at("max_rank").get<int>();
  s.cfg.grid_lo = j.at("config").at("grid_lo").get<double>();
  s.cfg.grid_hi = j.at("config").at("grid_hi").get<double>();
  s.cfg.refresh_every = j.at("config").at("refresh_every").get<int>();
  s.cfg.refresh_steps = j.at("config").at("refresh_steps").get<int>();
  s.params.sigma2 = j.at("params").at("sigma2").get<double>();
  s.params.length = j.at("params").at("length").get<double>();
  s.params.noise2 = j.at("params").at("noise2").get<double>();
  const auto& cols = j.at("root");
  s.root.resize(s.cfg.grid_size, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    auto v = cols[c].get<std::vector<double>>();
    if (static_cast<int>(v.size()) != s.cfg.grid_size) {
      throw IoError("ski model: root column size mismatch");
    }
    s.root.col(c) = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  }
  auto swy = j.at("swy").get<std::vector<double>>();
  auto sw1 = j.at("sw1").get<std::vector<double>>();
  s.swy = Eigen::Map<const Eigen::VectorXd>(swy.data(), swy.size());
  s.sw1 = Eigen::Map<const Eigen::VectorXd>(sw1.data(), sw1.size());
  s.sy = j.at("sy").get<double>();
  s.syy = j.at("syy").get<double>();
  s.n = j.at("n").get<long>();
  s.clamped = j.at("clamped").get<long>();
  s.reorth = j.at("reorth").get<long>();
  return SkiModel::restore(s);
}

inline void save_ski_models(const std::string& dir,
                            const std::map<EdgeKey, SkiModel>& models,
                            const json& meta = json::object()) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json index;
  index["schema_version"] = 1;
  index["meta"] = meta;
  index["edges"] = json::array();
  for (const auto& [key, m] : models) {
    std::string stem = edge_file_stem(key);
    auto f =
        io_detail::open_out((fs::path(dir) / (stem + ".ski.json")).string());
    f << ski_model_to_json(m).dump() << "\n";
    index["edges"].push_back(
        {{"tail", key.tail}, {"head", key.head}, {"file", stem + ".ski.json"}});
  }
  auto f = io_detail::open_out((fs::path(dir) / "index.json").string());
  f << index.dump(2) << "\n";
}

inline std::map<EdgeKey, SkiModel> load_ski_models(const std::string& dir) {
  namespace fs = std::filesystem;
  auto idx = io_detail::open_in((fs::path(dir) / "index.json").string());
  json index = json::parse(idx);
  std::map<EdgeKey, SkiModel> out;
  for (const auto& e : index.at("edges")) {
    EdgeKey key{e.at("tail").get<std::string>(),
                e.at("head").get<std::string>()};
    auto f = io_detail::open_in(
        (fs::path(dir) / e.at("file").get<std::string>()).string());
    out.emplace(key, ski_model_from_json(json::parse(f)));
  }
  return out;
}

// ---- hourly median store (CSV + per-day companion) ----

inline void write_eta_store(const std::string& path,
                            const std::map<EdgeKey, EtaVector>& etas,
                            const std::string& day_path = {}) {
  auto f = io_detail::open_out(path);
  f << "tail,head,hour,median_s,count,interpolated\n";
  for (const auto& [key, eta] : etas) {
    for (int h = 0; h < 24; ++h) {
      f << key.tail << "," << key.head << "," << h << "," << eta.median[h]
        << "," << eta.count[h] << "," << (eta.interpolated[h] ? 1 : 0) << "\n";
    }
  }
  if (!day_path.empty()) {
    auto d = io_detail::open_out(day_path);
    d << "tail,head,day,hour,median_s\n";
    for (const auto& [key, eta] : etas) {
      for (const auto& [day, row] : eta.day_medians) {
        for (int h = 0; h < 24; ++h) {
          if (std::isnan(row[h])) continue;
          d << key.tail << "," << key.head << "," << day << "," << h << ","
            << row[h] << "\n";
        }
      }
    }
  }
}

inline std::map<EdgeKey, EtaVector> read_eta_store(
    const std::string& path, const std::string& day_path = {}) {
  auto f = io_detail::open_in(path);
  std::string line;
  std::getline(f, line);
  std::map<EdgeKey, EtaVector> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto v = io_detail::split_csv(line);
    if (v.size() != 6) throw IoError("eta csv: bad row: " + line);
    EdgeKey key{v[0], v[1]};
    auto& eta = out[key];
    eta.edge = key;
    int h = std::stoi(v[2]);
    eta.median[h] = std::stod(v[3]);
    eta.count[h] = std::stoi(v[4]);
    eta.interpolated[h] = v[5] == "1";
  }
  if (!day_path.empty() && std::filesystem::exists(day_path)) {
    auto d = io_detail::open_in(day_path);
    std::getline(d, line);
    while (std::getline(d, line)) {
      if (line.empty()) continue;
      auto v = io_detail::split_csv(line);
      if (v.size() != 5) throw IoError("eta day csv: bad row: " + line);
      EdgeKey key{v[0], v[1]};
      auto it = out.find(key);
      if (it == out.end()) continue;
      std::int64_t day = std::stoll(v[2]);
      auto [rit, inserted] = it->second.day_medians.try_emplace(day);
      if (inserted) rit->second.fill(kEtaMissing);
      rit->second[std::stoi(v[3])] = std::stod(v[4]);
    }
  }
  return out;
}

// ---- eta feed / schedule ----

inline EtaFeed read_eta_feed_json(const std::string& path) {
  auto f = io_detail::open_in(path);
  json j = json::parse(f);
  EtaFeed feed;
  for (const auto& e : j.at("entries")) {
    std::string stop = e.at("stop").get<std::string>();
    std::string route = e.at("route").get<std::string>();
    for (const auto& a : e.at("arrivals")) {
      EtaArrival arr;
      if (a.is_number()) {
        arr.t_epoch = a.get<double>();
      } else {
        arr.t_epoch = a.at("t").get<double>();
        if (a.contains("std")) arr.stddev_s = a.at("std").get<double>();
      }
      feed.add(stop, route, arr);
    }
  }
  return feed;
}

inline ScheduleTable read_schedule_csv(const std::string& path) {
  auto f = io_detail::open_in(path);
  std::string line;
  std::getline(f, line);
  ScheduleTable table;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto v = io_detail::split_csv(line);
    if (v.size() != 3) throw IoError("schedule csv: bad row: " + line);
    table.add(v[0], v[1], std::stod(v[2]));
  }
  return table;
}

inline void write_schedule_csv(const std::string& path,
                               const ScheduleTable& table) {
  auto f = io_detail::open_out(path);
  f << "route,stop,arrival_sec_of_day\n";
  for (const auto& [key, times] : table.arrivals()) {
    for (double t : times) {
      f << key.first << "," << key.second << "," << t << "\n";
    }
  }
}

// ---- ground-truth laws (for the simulator) ----

inline json law_to_json(const GroundTruthEdgeLaw& law) {
  auto curve = [](const HourlyCurve& c) {
    json arr = json::array();
    for (const auto& [h, v] : c.knots) arr.push_back({{"hour", h}, {"value", v}});
    return arr;
  };
  json j;
  j["tail"] = law.edge.tail;
  j["head"] = law.edge.head;
  j["mean_s"] = curve(law.mean_s);
  j["std_s"] = curve(law.std_s);
  j["corr"] = json::array();
  for (const auto& [other, c] : law.corr) {
    j["corr"].push_back(
        {{"tail", other.tail}, {"head", other.head}, {"coeff", curve(c)}});
  }
  return j;
}

inline GroundTruthEdgeLaw law_from_json(const json& j) {
  auto curve = [](const json& arr) {
    HourlyCurve c;
    for (const auto& k : arr) {
      c.knots.emplace_back(k.at("hour").get<double>(),
                           k.at("value").get<double>());
    }
    return c;
  };
  GroundTruthEdgeLaw law;
  law.edge = {j.at("tail").get<std::string>(), j.at("head").get<std::string>()};
  law.mean_s = curve(j.at("mean_s"));
  law.std_s = curve(j.at("std_s"));
  if (j.contains("corr")) {
    for (const auto& c : j.at("corr")) {
      EdgeKey other{c.at("tail").get<std::string>(),
                    c.at("head").get<std::string>()};
      law.corr[other] = curve(c.at("coeff"));
    }
  }
  return law;
}

inline std::vector<GroundTruthEdgeLaw> read_laws_json(const std::string& path) {
  auto f = io_detail::open_in(path);
  json j = json::parse(f);
  std::vector<GroundTruthEdgeLaw> laws;
  for (const auto& l : j.at("laws")) laws.push_back(law_from_json(l));
  return laws;
}

inline void write_laws_json(const std::string& path,
                            const std::vector<GroundTruthEdgeLaw>& laws) {
  json j;
  j["laws"] = json::array();
  for (const auto& l : laws) j["laws"].push_back(law_to_json(l));
  auto f = io_detail::open_out(path);
  f << j.dump(2) << "\n";
}

}  // namespace stp

#endif  // STP_IO_HPP
