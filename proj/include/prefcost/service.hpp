#pragma once

// Local HTTP front end: persistent scenarios, in-memory sessions, and a
// recover-and-plan call that the interactive UI drives.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "prefcost/bench.hpp"
#include "prefcost/error.hpp"
#include "prefcost/io.hpp"
#include "prefcost/metrics.hpp"
#include "prefcost/planner.hpp"
#include "prefcost/recovery.hpp"
#include "prefcost/terrain.hpp"

// After Eigen: <resolv.h>, pulled in here, defines a macro named _res.
#include <httplib.h>

namespace prefcost::service {

using json = nlohmann::json;

inline constexpr int kPreviewMax = 128;

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::EmptyContext: return 422;
    case ErrorCode::NoPath: return 409;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

inline json error_body(ErrorCode code, const std::string& message) {
  return {{"code", std::string(to_string(code))}, {"message", message}};
}

/// Block-averaged copy no larger than kPreviewMax on either side.
inline json preview(const Costmap& c) {
  const int f = std::max(1, (std::max(c.rows(), c.cols()) + kPreviewMax - 1) / kPreviewMax);
  const int rows = (c.rows() + f - 1) / f, cols = (c.cols() + f - 1) / f;
  json values = json::array();
  for (int r = 0; r < rows; ++r) {
    json row = json::array();
    for (int col = 0; col < cols; ++col) {
      double sum = 0.0;
      int n = 0;
      for (int i = r * f; i < std::min(c.rows(), (r + 1) * f); ++i)
        for (int j = col * f; j < std::min(c.cols(), (col + 1) * f); ++j) {
          sum += c(i, j);
          ++n;
        }
      row.push_back(sum / n);
    }
    values.push_back(row);
  }
  return {{"rows", rows}, {"cols", cols}, {"factor", f}, {"values", values}};
}

namespace detail {

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::InvalidArgument, std::string("bad field ") + key);
  }
}

inline SynthParams synth_params_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidArgument, "scenario parameters must be an object");
  SynthParams p;
  p.classes = field(j, "classes", p.classes);
  p.pairs = field(j, "pairs", p.pairs);
  p.grid_n = field(j, "grid_n", p.grid_n);
  p.seed = field(j, "seed", p.seed);
  p.roughness = field(j, "roughness", p.roughness);
  p.cost_pool = field(j, "cost_pool", p.cost_pool);
  return p;
}

inline json synth_params_to_json(const SynthParams& p) {
  return {{"classes", p.classes}, {"pairs", p.pairs}, {"grid_n", p.grid_n}, {"seed", p.seed}, {"roughness", p.roughness}, {"cost_pool", p.cost_pool}};
}

/// Accepts [r, c], [r, c, h] or {"row", "col", "heading"}.
inline Pose pose_from_json(const json& j) {
  try {
    if (j.is_array()) {
      if (j.size() != 2 && j.size() != 3) fail(ErrorCode::InvalidArgument, "pose needs 2 or 3 entries");
      return {j[0].get<int>(), j[1].get<int>(), j.size() == 3 ? j[2].get<int>() : 0};
    }
    return {j.at("row").get<int>(), j.at("col").get<int>(), j.value("heading", 0)};
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("bad pose: ") + e.what());
  }
}

inline PlannerConfig planner_from_json(const json& j) {
  PlannerConfig p;
  if (j.is_null()) return p;
  p.headings = field(j, "headings", p.headings);
  p.step_radius = field(j, "step_radius", p.step_radius);
  p.max_turn_bins = field(j, "max_turn_bins", p.max_turn_bins);
  const std::string mode = field<std::string>(j, "mode", "lattice");
  if (mode == "grid8")
    p.mode = PlannerMode::Grid8;
  else if (mode != "lattice")
    fail(ErrorCode::InvalidArgument, "planner mode must be lattice or grid8");
  p.validate();
  return p;
}

struct SolverSpec {
  bool gradient = false;
  LossMode mode = LossMode::Combined;
  double lambda = kDefaultLambda;

  json to_json() const {
    const char* m = mode == LossMode::L1Only ? "l1" : mode == LossMode::L2Only ? "l2" : "l1l2";
    return {{"kind", gradient ? "gd" : "ls"}, {"mode", m}, {"lambda", lambda}};
  }
};

inline SolverSpec solver_from_json(const json& j) {
  SolverSpec s;
  if (j.is_null()) return s;
  const std::string kind = field<std::string>(j, "kind", "ls");
  if (kind != "ls" && kind != "gd") fail(ErrorCode::InvalidArgument, "solver kind must be ls or gd");
  s.gradient = kind == "gd";
  const std::string mode = field<std::string>(j, "mode", "l1l2");
  if (mode == "l1")
    s.mode = LossMode::L1Only;
  else if (mode == "l2")
    s.mode = LossMode::L2Only;
  else if (mode != "l1l2")
    fail(ErrorCode::InvalidArgument, "solver mode must be l1, l2 or l1l2");
  s.lambda = field(j, "lambda", s.lambda);
  return s;
}

}  // namespace detail

struct Session {
  std::string scenario_id;
  PreferenceContext context;
  std::string last_costmap_id;
  std::int64_t revision = 0;
  std::mutex lock;  // serializes mutations of this session
};

/// Transport-independent request handling. Methods take decoded JSON and
/// throw prefcost::Error; the HTTP binding maps codes to status lines.
class Service {
 public:
  Service(std::filesystem::path store, TerrainBank bank) : store_(std::move(store)), bank_(std::move(bank)) {
    bank_.validate();
    std::string fingerprint;
    for (const auto& [id, tile] : bank_.textures) {
      const io::Bytes png = io::encode_png(tile);
      fingerprint += std::to_string(id) + ":" + io::sha256_hex(std::string(png.begin(), png.end())) + ";";
    }
    bank_hash_ = io::sha256_hex(fingerprint);
    std::filesystem::create_directories(store_ / "scenarios");
  }

  const TerrainBank& bank() const noexcept { return bank_; }

  /// Content-addressed and idempotent: the id hashes the parameters and bank.
  json create_scenario(const json& params) {
    const SynthParams p = detail::synth_params_from_json(params);
    const json canonical = detail::synth_params_to_json(p);
    const std::string id = io::sha256_hex(bank_hash_ + canonical.dump()).substr(0, 16);
    if (!find_scenario(id)) {
      auto s = std::make_shared<const Scenario>(synthesize_scenario(bank_, p));
      const auto dir = store_ / "scenarios" / id;
      io::save_scenario(*s, dir);
      io::write_text(dir / "params.json", canonical.dump(2));
      std::unique_lock guard(scenarios_mutex_);
      scenarios_.emplace(id, std::move(s));
    }
    return describe(id);
  }

  json describe(const std::string& id) {
    const auto s = scenario(id);
    json classes = json::array();
    for (int m = 0; m < s->masks.count(); ++m) {
      const ClassId c = s->masks.class_of_mask(m);
      classes.push_back({{"class", c}, {"mask", m}, {"label", s->labels.at(c)}, {"cost", s->class_costs.at(c)}, {"area", s->masks.area(m)}});
    }
    return {{"scenario_id", id}, {"rows", s->masks.rows()}, {"cols", s->masks.cols()}, {"seed", s->seed},
            {"classes", classes}, {"context", io::context_to_json(s->context)}};
  }

  io::Bytes image_png(const std::string& id) { return io::encode_png(scenario(id)->image); }

  json masks(const std::string& id) { return io::masks_to_json(scenario(id)->masks); }

  json resolve(const std::string& id, const json& body) {
    const auto s = scenario(id);
    const Pose p = detail::pose_from_json(body.contains("pixel") ? body.at("pixel") : body);
    if (!s->masks.labels().contains(p.cell())) fail(ErrorCode::OutOfBounds, "pixel outside the image");
    return {{"class", s->masks.class_at(p.row, p.col)}, {"mask", s->masks.labels()(p.row, p.col)}};
  }

  /// Body: {"context", "start"?, "goal"?, "solver"?, "planner"?}. Missing
  /// endpoints fall back to the benchmark's sampling rule.
  json recover_plan(const std::string& id, const json& body) {
    if (!body.is_object()) fail(ErrorCode::InvalidArgument, "request must be a JSON object");
    const PreferenceContext context = io::context_from_json(body.contains("context") ? body.at("context") : json::array());
    return compute(id, context, body);
  }

  json create_session(const json& body) {
    const std::string scenario_id = detail::field<std::string>(body, "scenario_id", "");
    scenario(scenario_id);
    auto session = std::make_shared<Session>();
    session->scenario_id = scenario_id;
    if (body.contains("context")) session->context = io::context_from_json(body.at("context"));
    std::unique_lock guard(sessions_mutex_);
    const std::string sid = "s" + std::to_string(++session_counter_);
    sessions_.emplace(sid, session);
    return session_json(sid, *session);
  }

  json get_session(const std::string& sid) {
    auto s = session(sid);
    std::lock_guard guard(s->lock);
    return session_json(sid, *s);
  }

  json put_context(const std::string& sid, const json& body) {
    auto s = session(sid);
    const PreferenceContext context = io::context_from_json(body.contains("context") ? body.at("context") : body);
    std::lock_guard guard(s->lock);
    s->context = context;
    ++s->revision;
    return session_json(sid, *s);
  }

  json session_recover_plan(const std::string& sid, const json& body) {
    auto s = session(sid);
    std::lock_guard guard(s->lock);
    json out = compute(s->scenario_id, s->context, body.is_object() ? body : json::object());
    s->last_costmap_id = out.at("costmap_id").get<std::string>();
    out["revision"] = s->revision;
    out["session_id"] = sid;
    return out;
  }

 private:
  std::shared_ptr<const Scenario> find_scenario(const std::string& id) {
    {
      std::shared_lock guard(scenarios_mutex_);
      auto it = scenarios_.find(id);
      if (it != scenarios_.end()) return it->second;
    }
    const auto dir = store_ / "scenarios" / id;
    if (id.find_first_not_of("0123456789abcdef") != std::string::npos || id.empty() || !std::filesystem::exists(dir / "meta.json"))
      return nullptr;
    auto s = std::make_shared<const Scenario>(io::load_scenario(dir));
    std::unique_lock guard(scenarios_mutex_);
    return scenarios_.emplace(id, std::move(s)).first->second;
  }

  std::shared_ptr<const Scenario> scenario(const std::string& id) {
    auto s = find_scenario(id);
    if (!s) fail(ErrorCode::NotFound, "unknown scenario " + id);
    return s;
  }

  std::shared_ptr<Session> session(const std::string& sid) {
    std::lock_guard guard(sessions_mutex_);
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) fail(ErrorCode::NotFound, "unknown session " + sid);
    return it->second;
  }

  static json session_json(const std::string& sid, const Session& s) {
    return {{"session_id", sid}, {"scenario_id", s.scenario_id}, {"context", io::context_to_json(s.context)},
            {"last_costmap_id", s.last_costmap_id}, {"revision", s.revision}};
  }

  json compute(const std::string& id, const PreferenceContext& context, const json& body) {
    const auto s = scenario(id);
    const detail::SolverSpec solver = detail::solver_from_json(body.value("solver", json()));
    const PlannerConfig planner = detail::planner_from_json(body.value("planner", json()));
    if (context.empty()) fail(ErrorCode::EmptyContext, "context has no preferences");

    Pose start, goal;
    if (body.contains("start") != body.contains("goal")) fail(ErrorCode::InvalidArgument, "give both start and goal or neither");
    if (body.contains("start")) {
      start = detail::pose_from_json(body.at("start"));
      goal = detail::pose_from_json(body.at("goal"));
    } else {
      Rng rng(mix_seed(s->seed, 7));
      std::tie(start, goal) = bench::sample_endpoints(*s, rng);
    }

    const json key_context = io::context_to_json(context);
    const std::string costmap_id = io::sha256_hex(id + key_context.dump() + solver.to_json().dump()).substr(0, 16);
    const std::string cache_key = io::sha256_hex(costmap_id + json{{"start", {start.row, start.col, start.heading}},
                                                                   {"goal", {goal.row, goal.col, goal.heading}},
                                                                   {"planner", {planner.headings, planner.step_radius, planner.max_turn_bins,
                                                                                planner.mode == PlannerMode::Grid8}}}
                                                                  .dump());
    {
      std::lock_guard guard(cache_mutex_);
      auto it = cache_.find(cache_key);
      if (it != cache_.end()) return it->second;
    }

    Costmap raw;
    SolveReport report;
    if (!solver.gradient) {
      report = recover_class_costs(s->masks, context);
      raw = paint_costmap(s->masks, report.class_costs);
    } else {
      LossConfig lc;
      lc.mode = solver.mode;
      lc.lambda = solver.lambda;
      const Costmap flat(s->masks.rows(), s->masks.cols(), 0.5);
      if (lc.mode != LossMode::L1Only) lc.prior = flat;
      auto r = optimize_costmap(s->masks, context, lc, flat);
      raw = std::move(r.costmap);
      report = r.report;
    }
    const Costmap& gt = s->target_costmap;
    const Costmap recovered = normalize_to_range(raw, min_value(gt), max_value(gt));
    const LatticePath gt_path = plan(gt, start, goal, planner);
    const LatticePath path = plan(recovered, start, goal, planner);
    const RegretPair rg = regret(gt, recovered, gt_path, path);
    const MaeBreakdown m = mae(recovered, gt, s->masks);

    json per_class = json::object(), fractions = json::object();
    for (const auto& [c, v] : m.per_class) per_class[std::to_string(c)] = v;
    for (const auto& [c, v] : m.class_fractions) fractions[std::to_string(c)] = v;
    json out = {{"scenario_id", id},
                {"costmap_id", costmap_id},
                {"costmap_pgm", io::base64_encode(io::encode_pgm(recovered))},
                {"preview", preview(recovered)},
                {"class_costs", io::class_costs_to_json(report.class_costs)},
                {"report", io::solve_report_to_json(report)},
                {"path", io::path_to_json(path, path_cost(recovered, path))},
                {"gt_path", io::path_to_json(gt_path, path_cost(gt, gt_path))},
                {"regret", {{"rho_star", rg.rho_star}, {"rho_hat", rg.rho_hat}}},
                {"hausdorff", hausdorff(gt_path, path)},
                {"mae", {{"total", m.total}, {"per_class", per_class}, {"class_fractions", fractions}}}};
    std::lock_guard guard(cache_mutex_);
    cache_.emplace(cache_key, out);
    return out;
  }

  std::filesystem::path store_;
  TerrainBank bank_;
  std::string bank_hash_;

  std::shared_mutex scenarios_mutex_;
  std::map<std::string, std::shared_ptr<const Scenario>> scenarios_;

  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t session_counter_ = 0;

  std::mutex cache_mutex_;
  std::map<std::string, json> cache_;
};

namespace detail {

template <typename Fn>
void respond(httplib::Response& res, Fn&& fn) {
  try {
    const json body = fn();
    res.status = 200;
    res.set_content(body.dump(), "application/json");
  } catch (const Error& e) {
    res.status = http_status(e.code());
    res.set_content(error_body(e.code(), e.what()).dump(), "application/json");
  } catch (const std::exception& e) {
    res.status = 500;
    res.set_content(error_body(ErrorCode::IoError, e.what()).dump(), "application/json");
  }
}

inline json request_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

}  // namespace detail

/// Registers every route on `server`. `svc` must outlive it.
inline void bind(httplib::Server& server, Service& svc) {
  using httplib::Request;
  using httplib::Response;
  using detail::request_json;
  using detail::respond;

  server.Post("/scenarios", [&](const Request& req, Response& res) { respond(res, [&] { return svc.create_scenario(request_json(req)); }); });
  server.Get(R"(/scenarios/([^/]+))", [&](const Request& req, Response& res) { respond(res, [&] { return svc.describe(req.matches[1]); }); });
  server.Get(R"(/scenarios/([^/]+)/image)", [&](const Request& req, Response& res) {
    try {
      const io::Bytes png = svc.image_png(req.matches[1]);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(error_body(e.code(), e.what()).dump(), "application/json");
    }
  });
  server.Get(R"(/scenarios/([^/]+)/masks)", [&](const Request& req, Response& res) { respond(res, [&] { return svc.masks(req.matches[1]); }); });
  server.Post(R"(/scenarios/([^/]+)/resolve)", [&](const Request& req, Response& res) {
    respond(res, [&] { return svc.resolve(req.matches[1], request_json(req)); });
  });
  server.Post(R"(/scenarios/([^/]+)/recover-plan)", [&](const Request& req, Response& res) {
    respond(res, [&] { return svc.recover_plan(req.matches[1], request_json(req)); });
  });
  server.Post("/sessions", [&](const Request& req, Response& res) { respond(res, [&] { return svc.create_session(request_json(req)); }); });
  server.Get(R"(/sessions/([^/]+))", [&](const Request& req, Response& res) { respond(res, [&] { return svc.get_session(req.matches[1]); }); });
  server.Put(R"(/sessions/([^/]+)/context)", [&](const Request& req, Response& res) {
    respond(res, [&] { return svc.put_context(req.matches[1], request_json(req)); });
  });
  server.Post(R"(/sessions/([^/]+)/recover-plan)", [&](const Request& req, Response& res) {
    respond(res, [&] { return svc.session_recover_plan(req.matches[1], request_json(req)); });
  });
}

}  // namespace prefcost::service
