// Command-line surface for the stochastic transit planner: simulate a GPS
// feed, ingest it into travel-time samples, fit edge models (batch or
// online), estimate correlations, answer plan/replan queries, replay an
// online training stream, run the schedule-comparison evaluation, and emit
// the normality evidence reports.

#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stp/evaluate.hpp"
#include "stp/feed_sim.hpp"
#include "stp/gp.hpp"
#include "stp/graph.hpp"
#include "stp/ingest.hpp"
#include "stp/io.hpp"
#include "stp/planner.hpp"
#include "stp/ski.hpp"
#include "stp/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitNumerical = 3;

struct Config {
  std::uint64_t seed = 0;
  double headway_s = 600.0;
  int grid_nodes = 4096;
  bool hub_pruning = true;  // off: validate against unpruned enumeration
  int min_samples = 20;
  int max_fit_points = 512;
  int online_grid = 128;
  int online_rank = 32;
  int online_refresh = 500;
  double sim_ping_period_s = 10.0;
  double sim_drop_prob = 0.0;
  double sim_gps_noise_m = 0.0;
  int sim_trips_per_day = 8;
  int sim_days = 30;

  static Config from_json(const json& j) {
    Config c;
    std::map<std::string, std::function<void(const json&)>> keys = {
        {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
        {"headway_s", [&](const json& v) { c.headway_s = v.get<double>(); }},
        {"grid_nodes", [&](const json& v) { c.grid_nodes = v.get<int>(); }},
        {"hub_pruning", [&](const json& v) { c.hub_pruning = v.get<bool>(); }},
        {"min_samples", [&](const json& v) { c.min_samples = v.get<int>(); }},
        {"max_fit_points",
         [&](const json& v) { c.max_fit_points = v.get<int>(); }},
        {"online_grid", [&](const json& v) { c.online_grid = v.get<int>(); }},
        {"online_rank", [&](const json& v) { c.online_rank = v.get<int>(); }},
        {"online_refresh",
         [&](const json& v) { c.online_refresh = v.get<int>(); }},
        {"sim_ping_period_s",
         [&](const json& v) { c.sim_ping_period_s = v.get<double>(); }},
        {"sim_drop_prob",
         [&](const json& v) { c.sim_drop_prob = v.get<double>(); }},
        {"sim_gps_noise_m",
         [&](const json& v) { c.sim_gps_noise_m = v.get<double>(); }},
        {"sim_trips_per_day",
         [&](const json& v) { c.sim_trips_per_day = v.get<int>(); }},
        {"sim_days", [&](const json& v) { c.sim_days = v.get<int>(); }},
    };
    for (const auto& [key, value] : j.items()) {
      auto it = keys.find(key);
      if (it == keys.end()) {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
      it->second(value);
    }
    c.validate();
    return c;
  }

  void validate() const {
    if (headway_s < 0.0 || grid_nodes < 16 || min_samples < 1 ||
        online_grid < 4 || online_rank < 1 || sim_ping_period_s <= 0.0 ||
        sim_drop_prob < 0.0 || sim_drop_prob > 1.0 || sim_days < 1 ||
        sim_trips_per_day < 1) {
      throw std::invalid_argument("config: value out of range");
    }
  }

  json to_json() const {
    return {{"seed", seed},
            {"headway_s", headway_s},
            {"grid_nodes", grid_nodes},
            {"hub_pruning", hub_pruning},
            {"min_samples", min_samples},
            {"max_fit_points", max_fit_points},
            {"online_grid", online_grid},
            {"online_rank", online_rank},
            {"online_refresh", online_refresh},
            {"sim_ping_period_s", sim_ping_period_s},
            {"sim_drop_prob", sim_drop_prob},
            {"sim_gps_noise_m", sim_gps_noise_m},
            {"sim_trips_per_day", sim_trips_per_day},
            {"sim_days", sim_days}};
  }

  std::string hash() const {
    return stp::io_detail::hex64(stp::io_detail::fnv1a64(to_json().dump()));
  }
};

// Serializes commands that share a store directory.
class StoreLock {
 public:
  explicit StoreLock(const std::string& dir) {
    fs::create_directories(dir);
    path_ = (fs::path(dir) / ".lock").string();
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ >= 0) ::flock(fd_, LOCK_EX);
  }
  ~StoreLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

 private:
  std::string path_;
  int fd_ = -1;
};

stp::TransitGraph load_network(const std::string& path) {
  if (fs::is_directory(path)) return stp::load_network_gtfs(path);
  return stp::load_network_json(path);
}

json meta_json(const Config& cfg) {
  return {{"seed", cfg.seed}, {"config_hash", cfg.hash()}};
}

stp::ModelFn model_fn_batch(std::shared_ptr<std::map<stp::EdgeKey, stp::GpModel>> m) {
  return [m](const stp::EdgeKey& e, double tod) {
    auto it = m->find(e);
    if (it == m->end()) {
      throw std::invalid_argument("no fitted model for edge " + e.str());
    }
    return it->second.posterior(tod);
  };
}

stp::ModelFn model_fn_online(std::shared_ptr<std::map<stp::EdgeKey, stp::SkiModel>> m) {
  return [m](const stp::EdgeKey& e, double tod) {
    auto it = m->find(e);
    if (it == m->end()) {
      throw std::invalid_argument("no online model for edge " + e.str());
    }
    return it->second.predict(tod);
  };
}

int cmd_simulate(const Config& cfg, const std::string& network_path,
                 const std::string& laws_path, const std::string& out_dir) {
  stp::TransitGraph g = load_network(network_path);
  auto laws = stp::read_laws_json(laws_path);
  stp::SimConfig sim;
  sim.ping_period_s = cfg.sim_ping_period_s;
  sim.drop_prob = cfg.sim_drop_prob;
  sim.gps_noise_m = cfg.sim_gps_noise_m;
  sim.trips_per_route_per_day = cfg.sim_trips_per_day;
  sim.days = cfg.sim_days;
  sim.seed = cfg.seed;
  stp::SimResult result = stp::simulate_feed(g, laws, sim);

  StoreLock lock(out_dir);
  stp::write_feed_jsonl((fs::path(out_dir) / "feed.jsonl").string(),
                        result.pings);
  json truths = json::array();
  for (const auto& t : result.truths) {
    json legs = json::array();
    for (std::size_t i = 0; i < t.edges.size(); ++i) {
      legs.push_back({{"edge", t.edges[i].str()},
                      {"enter_epoch", t.enter_epoch[i]},
                      {"exit_epoch", t.exit_epoch[i]}});
    }
    truths.push_back({{"vid", t.vid},
                      {"rid", t.rid},
                      {"day", t.day},
                      {"start_epoch", t.start_epoch},
                      {"legs", legs}});
  }
  json out = meta_json(cfg);
  out["pings"] = result.pings.size();
  out["trips"] = result.truths.size();
  {
    auto f = stp::io_detail::open_out(
        (fs::path(out_dir) / "truths.json").string());
    f << json{{"meta", meta_json(cfg)}, {"trips", truths}}.dump() << "\n";
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_ingest(const Config& cfg, const std::string& feed_path,
               const std::string& network_path, const std::string& out_dir) {
  stp::TransitGraph g = load_network(network_path);
  stp::IngestDiagnostics diag;
  auto pings = stp::read_feed_jsonl(feed_path, &diag);
  auto trips = stp::segment_trips(std::move(pings), &diag);
  auto samples = stp::extract_travel_times(trips, g, &diag);

  StoreLock lock(out_dir);
  stp::write_samples_csv((fs::path(out_dir) / "samples.csv").string(), samples);
  json d = stp::diagnostics_to_json(diag);
  d["meta"] = meta_json(cfg);
  {
    auto f = stp::io_detail::open_out(
        (fs::path(out_dir) / "ingest_diagnostics.json").string());
    f << d.dump(2) << "\n";
  }
  std::cout << d.dump(2) << "\n";
  return kExitOk;
}

int cmd_fit(const Config& cfg, const std::string& samples_path,
            const std::string& network_path, const std::string& out_dir) {
  stp::TransitGraph g = load_network(network_path);
  auto samples = stp::read_samples_csv(samples_path);
  auto by_edge = stp::samples_by_edge(samples);

  stp::FitConfig fit_cfg;
  fit_cfg.min_samples = cfg.min_samples;
  fit_cfg.max_fit_points = cfg.max_fit_points;
  fit_cfg.seed = cfg.seed;
  auto result = stp::fit_all_edges(by_edge, fit_cfg);

  StoreLock lock(out_dir);
  std::string dir =
      (fs::path(out_dir) / stp::network_hash(g) / "batch").string();
  json meta = meta_json(cfg);
  meta["fallback_edges"] = json::array();
  for (const auto& e : result.fallback_edges) {
    meta["fallback_edges"].push_back(e.str());
  }
  stp::save_models(dir, result.models, meta);

  json out = meta_json(cfg);
  out["models"] = result.models.size();
  out["fallback_edges"] = result.fallback_edges.size();
  out["store"] = dir;
  if (!result.fallback_edges.empty()) {
    std::cerr << json{{"warning", "edges below min_samples use inherited "
                                  "hyperparameters"},
                      {"count", result.fallback_edges.size()}}
                     .dump()
              << "\n";
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_corr(const Config& cfg, const std::string& samples_path,
             const std::string& out_dir) {
  auto samples = stp::read_samples_csv(samples_path);
  std::map<stp::EdgeKey, stp::EtaVector> etas;
  std::map<stp::EdgeKey, bool> seen;
  for (const auto& s : samples) seen[s.edge] = true;
  for (const auto& [edge, _] : seen) {
    etas[edge] = stp::build_eta_vector(samples, edge);
  }
  StoreLock lock(out_dir);
  stp::write_eta_store((fs::path(out_dir) / "eta.csv").string(), etas,
                       (fs::path(out_dir) / "eta_days.csv").string());
  json out = meta_json(cfg);
  out["edges"] = etas.size();
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_plan(const Config& cfg, const std::string& network_path,
             const std::string& store_dir, const std::string& eta_store,
             const std::string& eta_feed_path, const std::string& backend,
             const std::string& source, const std::string& target,
             double depart_epoch, const std::string& out_path) {
  stp::TransitGraph g = load_network(network_path);
  if (source == target) {
    throw std::invalid_argument("source equals target");
  }
  if (!g.has_stop(source) || !g.has_stop(target)) {
    throw std::invalid_argument("unknown stop id");
  }

  std::string net = stp::network_hash(g);
  stp::ModelFn models;
  if (backend == "batch") {
    auto m = std::make_shared<std::map<stp::EdgeKey, stp::GpModel>>(
        stp::load_models((fs::path(store_dir) / net / "batch").string()));
    models = model_fn_batch(m);
  } else if (backend == "online") {
    auto m = std::make_shared<std::map<stp::EdgeKey, stp::SkiModel>>(
        stp::load_ski_models((fs::path(store_dir) / net / "online").string()));
    models = model_fn_online(m);
  } else {
    throw std::invalid_argument("backend must be batch or online");
  }

  auto corr = std::make_shared<stp::CorrelationModel>();
  if (!eta_store.empty()) {
    fs::path p(eta_store);
    std::string days = (p.parent_path() / "eta_days.csv").string();
    corr = std::make_shared<stp::CorrelationModel>(
        stp::read_eta_store(eta_store, days));
  }
  stp::CovFn cov = [corr](const stp::EdgeKey& a, const stp::EdgeKey& b,
                          double t, double tp, double s1, double s2) {
    return corr->covariance(a, b, t, tp, s1, s2).cov;
  };

  stp::EtaFeed feed;
  if (!eta_feed_path.empty()) feed = stp::read_eta_feed_json(eta_feed_path);

  stp::PlannerOptions opts;
  opts.headway_s = cfg.headway_s;
  opts.grid_nodes = cfg.grid_nodes;
  opts.hub_pruning = cfg.hub_pruning;

  auto t0 = std::chrono::steady_clock::now();
  stp::PlanResult plan =
      stp::ranked_paths(g, source, target, depart_epoch, models, cov, feed, opts);
  auto t1 = std::chrono::steady_clock::now();

  json out = meta_json(cfg);
  out["source"] = source;
  out["target"] = target;
  out["depart_epoch"] = depart_epoch;
  out["backend"] = backend;
  out["wall_ms"] =
      std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() /
      1000.0;
  out["raw_index_sum"] = plan.raw_index_sum;
  out["grid_nodes"] = plan.grid_nodes;
  out["candidates_overlap"] = plan.candidates_overlap;
  out["excluded_no_feasible_bus"] = plan.excluded_no_feasible_bus;
  out["reason"] = plan.reason;
  out["ranked"] = json::array();
  for (const auto& p : plan.ranked) {
    json legs = json::array();
    for (int leg : p.candidate.legs) legs.push_back(g.edges[leg].key().str());
    out["ranked"].push_back(
        {{"legs", legs},
         {"transfer_stop", p.candidate.transfer_stop.value_or("")},
         {"requires_transfer", p.candidate.requires_transfer},
         {"routes", p.chosen_routes},
         {"optimality", p.optimality},
         {"mean_s", p.total_mean_s},
         {"sigma_s", std::sqrt(p.total_var_s2)},
         {"feasibility", p.feasibility},
         {"waits_s", p.waits_s},
         {"var_floored", p.var_floored}});
  }
  if (plan.empty()) {
    std::cout << out.dump(2) << "\n";
    std::cerr << json{{"error", plan.reason}, {"code", kExitBadInput}}.dump()
              << "\n";
    return kExitBadInput;
  }
  std::cout << out.dump(2) << "\n";
  if (!out_path.empty()) {
    auto f = stp::io_detail::open_out(out_path);
    f << out.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_replay_online(const Config& cfg, const std::string& samples_path,
                      const std::string& network_path,
                      const std::string& out_dir, const std::string& edge_arg) {
  auto samples = stp::read_samples_csv(samples_path);
  std::sort(samples.begin(), samples.end(),
            [](const stp::TravelTimeSample& a, const stp::TravelTimeSample& b) {
              double ta = a.date * stp::kSecondsPerDay +
                          a.depart_tod_hours * 3600.0;
              double tb = b.date * stp::kSecondsPerDay +
                          b.depart_tod_hours * 3600.0;
              return ta < tb;
            });

  std::map<stp::EdgeKey, std::vector<stp::TravelTimeSample>> streams;
  for (const auto& s : samples) streams[s.edge].push_back(s);
  if (!edge_arg.empty()) {
    auto pos = edge_arg.find("->");
    if (pos == std::string::npos) {
      throw std::invalid_argument("--edge must be TAIL->HEAD");
    }
    stp::EdgeKey key{edge_arg.substr(0, pos), edge_arg.substr(pos + 2)};
    if (!streams.count(key)) {
      throw std::invalid_argument("no samples for edge " + edge_arg);
    }
    auto kept = streams[key];
    streams.clear();
    streams[key] = kept;
  }

  StoreLock lock(out_dir);
  std::map<stp::EdgeKey, stp::SkiModel> store;
  auto metrics = stp::io_detail::open_out(
      (fs::path(out_dir) / "replay_metrics.csv").string());
  metrics << "edge,gp_loss,batch_rmse,batch_nll,online_rmse,online_nll,regret,"
             "test_rmse,test_nll,noise,step_time,step\n";

  for (auto& [edge, stream] : streams) {
    // 5% warm start; remaining 95% split 80/20 train/test (every 5th held out)
    std::size_t warm = std::max<std::size_t>(1, stream.size() / 20);
    std::vector<stp::TravelTimeSample> train, test;
    for (std::size_t i = warm; i < stream.size(); ++i) {
      if ((i - warm) % 5 == 4) {
        test.push_back(stream[i]);
      } else {
        train.push_back(stream[i]);
      }
    }

    stp::KernelParams init{900.0, 2.0, 100.0};
    if (warm >= static_cast<std::size_t>(cfg.min_samples)) {
      Eigen::VectorXd x(warm), y(warm);
      for (std::size_t i = 0; i < warm; ++i) {
        x(i) = stream[i].depart_tod_hours;
        y(i) = stream[i].duration_s;
      }
      stp::FitConfig fc;
      fc.min_samples = 1;
      fc.max_fit_points = cfg.max_fit_points;
      init = stp::fit(x, y, fc).params;
    }
    stp::SkiConfig sc;
    sc.grid_size = cfg.online_grid;
    sc.max_rank = cfg.online_rank;
    sc.refresh_every = cfg.online_refresh;
    stp::SkiModel model(sc, init);
    for (std::size_t i = 0; i < warm; ++i) {
      model.update(stream[i].depart_tod_hours, stream[i].duration_s);
    }

    // batch reference over a bounded subsample, refreshed periodically
    std::vector<double> seen_x, seen_y;
    for (std::size_t i = 0; i < warm; ++i) {
      seen_x.push_back(stream[i].depart_tod_hours);
      seen_y.push_back(stream[i].duration_s);
    }
    std::optional<stp::GpModel> batch;
    auto refit_batch = [&]() {
      if (seen_x.size() < static_cast<std::size_t>(cfg.min_samples)) return;
      Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(seen_x.data(),
                                                            seen_x.size());
      Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(seen_y.data(),
                                                            seen_y.size());
      stp::FitConfig fc;
      fc.min_samples = 1;
      fc.max_fit_points = 256;
      fc.max_iters = 150;
      stp::GpModel m = stp::fit(x, y, fc);
      if (x.size() > 512) {
        // bound the posterior cost: keep an evenly strided subsample
        Eigen::VectorXd xs(512), ys(512);
        double stride = static_cast<double>(x.size()) / 512.0;
        for (int i = 0; i < 512; ++i) {
          auto idx = static_cast<Eigen::Index>(i * stride);
          xs(i) = x(idx);
          ys(i) = y(idx);
        }
        m.x = xs;
        m.y = ys;
        m.refresh();
      }
      batch = std::move(m);
    };
    refit_batch();

    double online_cum_sq = 0.0, batch_cum_sq = 0.0;
    double online_cum_nll = 0.0, batch_cum_nll = 0.0;
    double step_time_acc = 0.0;
    int step_time_count = 0;
    long step = 0;

    auto nll_of = [](const stp::Gaussian& p, double y) {
      double var = std::max(p.var, 1e-12);
      double d = y - p.mean;
      return 0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
    };

    for (const auto& s : train) {
      stp::Gaussian po = model.predict(s.depart_tod_hours);
      online_cum_sq += (po.mean - s.duration_s) * (po.mean - s.duration_s);
      online_cum_nll += nll_of(po, s.duration_s);
      if (batch) {
        stp::Gaussian pb = batch->posterior(s.depart_tod_hours);
        batch_cum_sq += (pb.mean - s.duration_s) * (pb.mean - s.duration_s);
        batch_cum_nll += nll_of(pb, s.duration_s);
      }
      auto u0 = std::chrono::steady_clock::now();
      model.update(s.depart_tod_hours, s.duration_s);
      auto u1 = std::chrono::steady_clock::now();
      step_time_acc +=
          std::chrono::duration<double>(u1 - u0).count();
      ++step_time_count;
      seen_x.push_back(s.depart_tod_hours);
      seen_y.push_back(s.duration_s);
      ++step;
      if (step % 500 == 0) refit_batch();

      if (step % 100 == 0 || static_cast<std::size_t>(step) == train.size()) {
        double test_sq = 0.0, test_nll = 0.0;
        for (const auto& ts : test) {
          stp::Gaussian pt = model.predict(ts.depart_tod_hours);
          test_sq += (pt.mean - ts.duration_s) * (pt.mean - ts.duration_s);
          test_nll += nll_of(pt, ts.duration_s);
        }
        double n_test = std::max<std::size_t>(1, test.size());
        metrics << edge.str() << "," << -model.mll() / model.count() << ","
                << std::sqrt(batch_cum_sq / step) << ","
                << batch_cum_nll / step << ","
                << std::sqrt(online_cum_sq / step) << ","
                << online_cum_nll / step << ","
                << (online_cum_sq - batch_cum_sq) / std::max<long>(1, step)
                << "," << std::sqrt(test_sq / n_test) << ","
                << test_nll / n_test << "," << model.params().noise2 << ","
                << step_time_acc / std::max(1, step_time_count) << "," << step
                << "\n";
        step_time_acc = 0.0;
        step_time_count = 0;
      }
    }
    store.emplace(edge, std::move(model));
  }

  std::string dir = out_dir;
  if (!network_path.empty()) {
    stp::TransitGraph g = load_network(network_path);
    dir = (fs::path(out_dir) / stp::network_hash(g) / "online").string();
  } else {
    dir = (fs::path(out_dir) / "online").string();
  }
  stp::save_ski_models(dir, store, meta_json(cfg));

  json out = meta_json(cfg);
  out["edges"] = store.size();
  out["store"] = dir;
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_evaluate(const Config& cfg, const std::string& network_path,
                 const std::string& store_dir, const std::string& eta_store,
                 const std::string& history_path,
                 const std::string& schedule_path,
                 const std::string& queries_path, const std::string& out_dir) {
  stp::TransitGraph g = load_network(network_path);
  auto m = std::make_shared<std::map<stp::EdgeKey, stp::GpModel>>(
      stp::load_models((fs::path(store_dir) / stp::network_hash(g) / "batch")
                           .string()));
  stp::ModelFn models = model_fn_batch(m);

  auto corr = std::make_shared<stp::CorrelationModel>();
  if (!eta_store.empty()) {
    fs::path p(eta_store);
    corr = std::make_shared<stp::CorrelationModel>(stp::read_eta_store(
        eta_store, (p.parent_path() / "eta_days.csv").string()));
  }
  stp::CovFn cov = [corr](const stp::EdgeKey& a, const stp::EdgeKey& b,
                          double t, double tp, double s1, double s2) {
    return corr->covariance(a, b, t, tp, s1, s2).cov;
  };

  auto history = stp::read_samples_csv(history_path);
  stp::ScheduleTable schedule = stp::read_schedule_csv(schedule_path);

  std::vector<stp::EvalQuery> queries;
  {
    auto f = stp::io_detail::open_in(queries_path);
    json j = json::parse(f);
    for (const auto& q : j.at("queries")) {
      queries.push_back({q.at("source").get<std::string>(),
                         q.at("target").get<std::string>(),
                         q.at("hour").get<int>(),
                         q.value("day", std::int64_t{0})});
    }
  }

  stp::PlannerOptions opts;
  opts.headway_s = cfg.headway_s;
  opts.grid_nodes = cfg.grid_nodes;
  opts.hub_pruning = cfg.hub_pruning;
  stp::EvalReport report = stp::evaluate_static_vs_stochastic(
      g, models, cov, history, schedule, queries, opts);

  StoreLock lock(out_dir);
  {
    auto f = stp::io_detail::open_out(
        (fs::path(out_dir) / "eval_rows.csv").string());
    f << "source,target,hour,day,stochastic_choice,static_choice,"
         "realized_stochastic_s,realized_static_s,savings_frac\n";
    for (const auto& r : report.rows) {
      f << r.query.source << "," << r.query.target << "," << r.query.hour
        << "," << r.query.day << "," << r.stochastic_choice << ","
        << r.static_choice << "," << r.realized_stochastic_s << ","
        << r.realized_static_s << "," << r.savings_frac << "\n";
    }
  }
  {
    auto f = stp::io_detail::open_out(
        (fs::path(out_dir) / "likelihood_curves.csv").string());
    f << "source,target,transfer_key,hour,index\n";
    for (const auto& c : report.curves) {
      f << c.source << "," << c.target << "," << c.transfer_key << ","
        << c.hour << "," << c.index << "\n";
    }
  }
  json out = meta_json(cfg);
  out["queries"] = queries.size();
  out["rows"] = report.rows.size();
  out["skipped"] = report.skipped;
  out["wins_fraction"] = report.wins_fraction;
  out["mean_savings_frac"] = report.mean_savings_frac;
  out["fraction_savings_10_40"] = report.fraction_savings_10_40;
  {
    auto f = stp::io_detail::open_out(
        (fs::path(out_dir) / "eval_report.json").string());
    f << out.dump(2) << "\n";
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_gaussianity(const Config& cfg, const std::string& samples_path,
                    const std::string& out_dir, int iterations) {
  auto samples = stp::read_samples_csv(samples_path);
  auto by_edge = stp::samples_by_edge(samples);

  StoreLock lock(out_dir);
  json report = meta_json(cfg);
  report["edges"] = json::array();
  std::vector<std::pair<std::string, std::vector<double>>> kld_input;
  std::vector<double> pvals;

  for (const auto& [edge, xy] : by_edge) {
    const auto& ys = xy.second;
    if (ys.size() < 3) continue;
    stp::SampleSet std_set;
    try {
      std_set = stp::standardize(ys);
    } catch (const std::invalid_argument&) {
      continue;
    }
    stp::KsResult ks = stp::ks_test(std_set);
    pvals.push_back(ks.p_value);
    kld_input.emplace_back(edge.str(), ys);

    std::string stem = stp::edge_file_stem(edge);
    {
      auto f = stp::io_detail::open_out(
          (fs::path(out_dir) / (stem + ".qq.csv")).string());
      f << "theoretical_quantile,sample_quantile\n";
      for (const auto& [a, b] : stp::qq_points(std_set)) {
        f << a << "," << b << "\n";
      }
    }
    {
      auto f = stp::io_detail::open_out(
          (fs::path(out_dir) / (stem + ".pp.csv")).string());
      f << "theoretical_cdf,empirical_cdf\n";
      for (const auto& [a, b] : stp::pp_points(std_set)) {
        f << a << "," << b << "\n";
      }
    }
    {
      // histogram of the standardized values, cube-root bin count
      auto f = stp::io_detail::open_out(
          (fs::path(out_dir) / (stem + ".hist.csv")).string());
      f << "bin_lo,bin_hi,count\n";
      auto sorted = std_set.values;
      std::sort(sorted.begin(), sorted.end());
      int bins = std::max(
          1, static_cast<int>(std::ceil(std::cbrt(double(sorted.size())))));
      double lo = sorted.front(), hi = sorted.back();
      std::vector<int> counts(bins, 0);
      for (double v : sorted) {
        int b = hi > lo ? std::min(bins - 1, static_cast<int>((v - lo) /
                                                              (hi - lo) * bins))
                        : 0;
        counts[b]++;
      }
      for (int b = 0; b < bins; ++b) {
        f << lo + (hi - lo) * b / bins << "," << lo + (hi - lo) * (b + 1) / bins
          << "," << counts[b] << "\n";
      }
    }
    report["edges"].push_back({{"edge", edge.str()},
                               {"n", ys.size()},
                               {"ks_d", ks.d},
                               {"ks_p", ks.p_value},
                               {"reject_at_05", ks.reject_at_05},
                               {"qq", stem + ".qq.csv"},
                               {"pp", stem + ".pp.csv"},
                               {"hist", stem + ".hist.csv"}});
  }

  if (!pvals.empty()) {
    std::sort(pvals.begin(), pvals.end());
    report["median_ks_p"] = pvals[pvals.size() / 2];
  }

  auto kld = stp::relative_kld_experiment(kld_input, iterations, cfg.seed);
  json kj;
  kj["fraction_inside"] = kld.fraction_inside;
  kj["baselines"] = json::array();
  for (const auto& env : kld.baselines) {
    kj["baselines"].push_back({{"sample_size", env.sample_size},
                               {"min", env.min},
                               {"mean", env.mean},
                               {"max", env.max}});
  }
  kj["reference_envelopes"] = json::array();
  for (const auto& env : kld.reference_envelopes) {
    kj["reference_envelopes"].push_back({{"sample_size", env.sample_size},
                                         {"min", env.min},
                                         {"mean", env.mean},
                                         {"max", env.max}});
  }
  kj["edges"] = json::array();
  for (const auto& row : kld.edges) {
    kj["edges"].push_back({{"edge", row.edge_id},
                           {"n", row.sample_size},
                           {"kld", row.kld},
                           {"inside_envelope", row.inside_envelope}});
  }
  report["relative_kld"] = kj;
  {
    auto f = stp::io_detail::open_out(
        (fs::path(out_dir) / "gaussianity_report.json").string());
    f << report.dump(2) << "\n";
  }
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic transit trip planner"};
  app.require_subcommand(1);

  std::string config_path, network, laws, feed, samples, store, eta_store,
      eta_feed, schedule, queries, out, edge_arg, backend = "batch";
  std::string source, target, out_file;
  double depart = 0.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int iterations = 10000;

  app.add_option("--config", config_path, "config json")->envname("STP_CONFIG");
  auto seed_opt = app.add_option("--seed", seed, "master RNG seed");

  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic GPS feed");
  c_sim->add_option("--network", network)->required();
  c_sim->add_option("--laws", laws)->required();
  c_sim->add_option("--out", out)->required();

  auto* c_ing = app.add_subcommand("ingest", "extract travel-time samples");
  c_ing->add_option("--feed", feed)->required();
  c_ing->add_option("--network", network)->required();
  c_ing->add_option("--out", out)->required();

  auto* c_fit = app.add_subcommand("fit", "fit batch edge models");
  c_fit->add_option("--samples", samples)->required();
  c_fit->add_option("--network", network)->required();
  c_fit->add_option("--out", out)->required();

  auto* c_corr = app.add_subcommand("corr", "hourly medians for correlation");
  c_corr->add_option("--samples", samples)->required();
  c_corr->add_option("--out", out)->required();

  auto* c_plan = app.add_subcommand("plan", "rank paths for a query");
  c_plan->add_option("--network", network)->required();
  c_plan->add_option("--models", store)->required();
  c_plan->add_option("--eta-store", eta_store);
  c_plan->add_option("--eta-feed", eta_feed);
  c_plan->add_option("--backend", backend)
      ->check(CLI::IsMember({"batch", "online"}));
  c_plan->add_option("--source", source)->required();
  c_plan->add_option("--target", target)->required();
  c_plan->add_option("--depart", depart)->required();
  c_plan->add_option("--out", out_file);

  auto* c_rep = app.add_subcommand("replay-online",
                                   "stream samples through the online model");
  c_rep->add_option("--samples", samples)->required();
  c_rep->add_option("--network", network);
  c_rep->add_option("--out", out)->required();
  c_rep->add_option("--edge", edge_arg, "restrict to TAIL->HEAD");

  auto* c_eval = app.add_subcommand("evaluate",
                                    "stochastic vs static schedule planning");
  c_eval->add_option("--network", network)->required();
  c_eval->add_option("--models", store)->required();
  c_eval->add_option("--eta-store", eta_store);
  c_eval->add_option("--samples", samples)->required();
  c_eval->add_option("--schedule", schedule)->required();
  c_eval->add_option("--queries", queries)->required();
  c_eval->add_option("--out", out)->required();

  auto* c_gauss = app.add_subcommand("gaussianity", "normality evidence suite");
  c_gauss->add_option("--samples", samples)->required();
  c_gauss->add_option("--out", out)->required();
  c_gauss->add_option("--iterations", iterations);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", e.what()}, {"code", kExitBadInput}}.dump()
              << "\n";
    return kExitBadInput;
  }
  seed_set = seed_opt->count() > 0;

  try {
    Config cfg;
    if (!config_path.empty()) {
      auto f = stp::io_detail::open_in(config_path);
      cfg = Config::from_json(json::parse(f));
    }
    if (seed_set) cfg.seed = seed;

    if (c_sim->parsed()) return cmd_simulate(cfg, network, laws, out);
    if (c_ing->parsed()) return cmd_ingest(cfg, feed, network, out);
    if (c_fit->parsed()) return cmd_fit(cfg, samples, network, out);
    if (c_corr->parsed()) return cmd_corr(cfg, samples, out);
    if (c_plan->parsed()) {
      return cmd_plan(cfg, network, store, eta_store, eta_feed, backend,
                      source, target, depart, out_file);
    }
    if (c_rep->parsed()) {
      return cmd_replay_online(cfg, samples, network, out, edge_arg);
    }
    if (c_eval->parsed()) {
      return cmd_evaluate(cfg, network, store, eta_store, samples, schedule,
                          queries, out);
    }
    if (c_gauss->parsed()) return cmd_gaussianity(cfg, samples, out, iterations);
    return kExitBadInput;
  } catch (const stp::NumericalError& e) {
    std::cerr << json{{"error", e.what()}, {"code", kExitNumerical}}.dump()
              << "\n";
    return kExitNumerical;
  } catch (const stp::IntegrationError& e) {
    std::cerr << json{{"error", e.what()}, {"code", kExitNumerical}}.dump()
              << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << json{{"error", e.what()}, {"code", kExitBadInput}}.dump()
              << "\n";
    return kExitBadInput;
  } catch (const stp::IoError& e) {
    std::cerr << json{{"error", e.what()}, {"code", kExitBadInput}}.dump()
              << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"code", kExitNumerical}}.dump()
              << "\n";
    return kExitNumerical;
  }
}
