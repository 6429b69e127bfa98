#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefcost/error.hpp"
#include "prefcost/io.hpp"
#include "prefcost/metrics.hpp"
#include "prefcost/planner.hpp"
#include "prefcost/preference.hpp"
#include "prefcost/recovery.hpp"
#include "prefcost/rng.hpp"
#include "prefcost/terrain.hpp"

namespace prefcost::bench {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "prefcost 0.1.0";

enum class Solver { LeastSquares, GradientDescent };
enum class Corruption { None, FlattenAlpha, DropPairs, ShufflePairs };
enum class PriorKind { Uniform, Perturbed };

struct PriorSpec {
  PriorKind kind = PriorKind::Perturbed;
  double noise = 0.25;  // half-width of the per-class cost perturbation
};

struct BenchmarkConfig {
  int n_environments = 5;
  int scenarios_per_env = 20;
  int k_classes = 4;
  int k_pairs = 6;
  int grid_n = 5;
  double roughness = 0.6;
  std::vector<double> cost_pool = default_cost_pool();
  std::vector<double> strength_schedule{1.0};
  Solver solver = Solver::LeastSquares;
  std::vector<LossMode> loss_modes{LossMode::Combined};
  double lambda = kDefaultLambda;
  bool calibrate_lambda = false;
  double huber_delta = kDefaultHuberDelta;
  PriorSpec prior;
  OptimizeOptions optimizer;
  PlannerConfig planner;
  std::uint64_t seed = 1;
  Corruption corruption = Corruption::None;
  double drop_probability = 0.0;
  int workers = 1;

  void validate() const {
    if (n_environments < 1 || scenarios_per_env < 1) fail(ErrorCode::InvalidArgument, "need >= 1 environment and scenario");
    if (strength_schedule.empty()) fail(ErrorCode::InvalidArgument, "strength schedule is empty");
    for (double m : strength_schedule)
      if (!(m > 0.0 && m <= 1.0)) fail(ErrorCode::InvalidArgument, "strength multipliers must lie in (0, 1]");
    if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) fail(ErrorCode::InvalidArgument, "drop probability outside [0, 1]");
    if (solver == Solver::GradientDescent && loss_modes.empty()) fail(ErrorCode::InvalidArgument, "no loss modes");
    if (!(prior.noise >= 0.0)) fail(ErrorCode::InvalidArgument, "prior noise must be >= 0");
    planner.validate();
  }
};

// ---------------------------------------------------------------------------
// Config JSON.

inline std::string mode_name(LossMode m) {
  switch (m) {
    case LossMode::L1Only: return "l1";
    case LossMode::L2Only: return "l2";
    case LossMode::Combined: return "l1l2";
  }
  return "l1l2";
}

inline LossMode parse_mode(const std::string& s) {
  if (s == "l1") return LossMode::L1Only;
  if (s == "l2") return LossMode::L2Only;
  if (s == "l1l2") return LossMode::Combined;
  fail(ErrorCode::InvalidArgument, "unknown loss mode '" + s + "'");
}

inline std::string planner_mode_name(PlannerMode m) { return m == PlannerMode::Grid8 ? "grid8" : "lattice"; }

inline PlannerMode parse_planner_mode(const std::string& s) {
  if (s == "grid8") return PlannerMode::Grid8;
  if (s == "lattice") return PlannerMode::Lattice;
  fail(ErrorCode::InvalidArgument, "unknown planner mode '" + s + "'");
}

inline json planner_to_json(const PlannerConfig& p) {
  return {{"headings", p.headings}, {"step_radius", p.step_radius}, {"max_turn_bins", p.max_turn_bins}, {"mode", planner_mode_name(p.mode)}};
}

inline PlannerConfig planner_from_json(const json& j) {
  PlannerConfig p;
  p.headings = j.value("headings", p.headings);
  p.step_radius = j.value("step_radius", p.step_radius);
  p.max_turn_bins = j.value("max_turn_bins", p.max_turn_bins);
  p.mode = parse_planner_mode(j.value("mode", std::string("lattice")));
  p.validate();
  return p;
}

/// Experiment definition; the worker count is read but not echoed, so reports
/// do not depend on it.
inline json config_to_json(const BenchmarkConfig& c) {
  json modes = json::array();
  for (LossMode m : c.loss_modes) modes.push_back(mode_name(m));
  json corruption = nullptr;
  if (c.corruption == Corruption::FlattenAlpha) corruption = {{"kind", "flatten_alpha"}};
  if (c.corruption == Corruption::DropPairs) corruption = {{"kind", "drop_pairs"}, {"p", c.drop_probability}};
  if (c.corruption == Corruption::ShufflePairs) corruption = {{"kind", "shuffle_pairs"}};
  return {{"schema", kSchemaVersion},
          {"n_environments", c.n_environments},
          {"scenarios_per_env", c.scenarios_per_env},
          {"k_classes", c.k_classes},
          {"K_pairs", c.k_pairs},
          {"grid_n", c.grid_n},
          {"roughness", c.roughness},
          {"cost_pool", c.cost_pool},
          {"strength_schedule", c.strength_schedule},
          {"solver", c.solver == Solver::LeastSquares ? "ls" : "gd"},
          {"loss_modes", modes},
          {"lambda", c.lambda},
          {"calibrate_lambda", c.calibrate_lambda},
          {"huber_delta", c.huber_delta},
          {"prior", {{"kind", c.prior.kind == PriorKind::Uniform ? "uniform" : "perturbed"}, {"noise", c.prior.noise}}},
          {"optimizer", {{"max_iters", c.optimizer.max_iters}, {"tol", c.optimizer.tol}}},
          {"planner", planner_to_json(c.planner)},
          {"seed", c.seed},
          {"corruption", corruption}};
}

inline BenchmarkConfig config_from_json(const json& j) {
  BenchmarkConfig c;
  try {
    if (j.value("schema", 0) != kSchemaVersion) fail(ErrorCode::FormatError, "unsupported config schema");
    c.n_environments = j.value("n_environments", c.n_environments);
    c.scenarios_per_env = j.value("scenarios_per_env", c.scenarios_per_env);
    c.k_classes = j.value("k_classes", c.k_classes);
    c.k_pairs = j.value("K_pairs", c.k_pairs);
    c.grid_n = j.value("grid_n", c.grid_n);
    c.roughness = j.value("roughness", c.roughness);
    if (j.contains("cost_pool")) c.cost_pool = j["cost_pool"].get<std::vector<double>>();
    if (j.contains("strength_schedule")) c.strength_schedule = j["strength_schedule"].get<std::vector<double>>();
    const std::string solver = j.value("solver", std::string("ls"));
    if (solver != "ls" && solver != "gd") fail(ErrorCode::InvalidArgument, "solver must be ls or gd");
    c.solver = solver == "ls" ? Solver::LeastSquares : Solver::GradientDescent;
    if (j.contains("loss_modes")) {
      c.loss_modes.clear();
      for (const auto& m : j["loss_modes"]) c.loss_modes.push_back(parse_mode(m.get<std::string>()));
    }
    c.lambda = j.value("lambda", c.lambda);
    c.calibrate_lambda = j.value("calibrate_lambda", c.calibrate_lambda);
    c.huber_delta = j.value("huber_delta", c.huber_delta);
    if (j.contains("prior")) {
      const std::string kind = j["prior"].value("kind", std::string("perturbed"));
      if (kind != "uniform" && kind != "perturbed") fail(ErrorCode::InvalidArgument, "prior kind must be uniform or perturbed");
      c.prior.kind = kind == "uniform" ? PriorKind::Uniform : PriorKind::Perturbed;
      c.prior.noise = j["prior"].value("noise", c.prior.noise);
    }
    if (j.contains("optimizer")) {
      c.optimizer.max_iters = j["optimizer"].value("max_iters", c.optimizer.max_iters);
      c.optimizer.tol = j["optimizer"].value("tol", c.optimizer.tol);
    }
    if (j.contains("planner")) c.planner = planner_from_json(j["planner"]);
    c.seed = j.value("seed", c.seed);
    if (j.contains("corruption") && !j["corruption"].is_null()) {
      const std::string kind = j["corruption"].value("kind", std::string("none"));
      if (kind == "flatten_alpha") c.corruption = Corruption::FlattenAlpha;
      else if (kind == "drop_pairs") {
        c.corruption = Corruption::DropPairs;
        c.drop_probability = j["corruption"].value("p", 0.0);
      } else if (kind == "shuffle_pairs") c.corruption = Corruption::ShufflePairs;
      else if (kind != "none") fail(ErrorCode::InvalidArgument, "unknown corruption '" + kind + "'");
    }
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, std::string("benchmark config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Protocol pieces.

/// Scales every target log-odds by `multiplier` and re-derives α; the class
/// ordering is unchanged.
inline PreferenceContext scale_strengths(const PreferenceContext& context, double multiplier) {
  if (multiplier == 1.0) return context;
  PreferenceContext out = context;
  for (auto& p : out) p.strength = strength_from_costs(0.0, multiplier * logodds_from_strength(p.strength));
  return out;
}

inline PreferenceContext corrupt(const PreferenceContext& context, Corruption kind, double drop_p, Rng& rng) {
  PreferenceContext out;
  switch (kind) {
    case Corruption::None: return context;
    case Corruption::FlattenAlpha:
      out = context;
      for (auto& p : out) p.strength = 0.0;
      return out;
    case Corruption::DropPairs:
      for (const auto& p : context)
        if (!rng.bernoulli(drop_p)) out.push_back(p);
      return out;
    case Corruption::ShufflePairs: {
      out = context;
      std::vector<double> strengths;
      for (const auto& p : out) strengths.push_back(p.strength);
      rng.shuffle(strengths);
      for (std::size_t i = 0; i < out.size(); ++i) out[i].strength = strengths[i];
      return out;
    }
  }
  return context;
}

/// Start and goal drawn uniformly from cells of the cheapest class, at least
/// half the grid side apart.
inline std::pair<Pose, Pose> sample_endpoints(const Scenario& s, Rng& rng) {
  ClassId cheapest = s.class_costs.begin()->first;
  for (const auto& [id, cost] : s.class_costs)
    if (cost < s.class_costs.at(cheapest)) cheapest = id;
  const int mask = s.masks.mask_of(cheapest);
  std::vector<Cell> cells;
  for (int r = 0; r < s.masks.rows(); ++r)
    for (int c = 0; c < s.masks.cols(); ++c)
      if (s.masks.labels()(r, c) == mask) cells.push_back({r, c});
  const double min_sep = 0.5 * std::min(s.masks.rows(), s.masks.cols());
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Cell a = cells[static_cast<std::size_t>(rng.below(cells.size()))];
    const Cell b = cells[static_cast<std::size_t>(rng.below(cells.size()))];
    if (std::hypot(a.row - b.row, a.col - b.col) >= min_sep) return {{a.row, a.col, 0}, {b.row, b.col, 0}};
  }
  fail(ErrorCode::NoPath, "cheapest class has no sufficiently separated cell pair");
}

inline Costmap scaled(const Costmap& c, double m) {
  Costmap out = c;
  for (double& v : out.storage()) v *= m;
  return out;
}

/// Prior for the L2 term: the target painted from class costs perturbed by
/// uniform noise (a stale terrain prior), or a flat 0.5 map.
inline Costmap make_prior(const Scenario& s, const BenchmarkConfig& cfg, double multiplier, Rng& rng) {
  if (cfg.prior.kind == PriorKind::Uniform) return Costmap(s.masks.rows(), s.masks.cols(), 0.5);
  ClassCosts noisy;
  for (const auto& [id, cost] : s.class_costs)
    noisy[id] = std::max(0.0, multiplier * (cost + rng.uniform(-cfg.prior.noise, cfg.prior.noise)));
  return paint_costmap(s.masks, noisy);
}

struct MethodSpec {
  std::string name;
  Solver solver;
  LossMode mode;
};

inline std::vector<MethodSpec> methods_of(const BenchmarkConfig& cfg) {
  if (cfg.solver == Solver::LeastSquares) return {{"ls", Solver::LeastSquares, LossMode::Combined}};
  std::vector<MethodSpec> out;
  for (LossMode m : cfg.loss_modes) out.push_back({"gd:" + mode_name(m), Solver::GradientDescent, m});
  return out;
}

struct Recovered {
  Costmap raw;
  Costmap normalized;  // min-max matched to the ground-truth range
  SolveReport report;
  double lambda = 0.0;
};

inline Recovered recover(const Scenario& s, const PreferenceContext& context, const MethodSpec& method,
                         const BenchmarkConfig& cfg, const Costmap& prior, double lo, double hi) {
  Recovered out;
  if (method.solver == Solver::LeastSquares) {
    out.report = recover_class_costs(s.masks, context);
    out.raw = paint_costmap(s.masks, out.report.class_costs);
  } else {
    LossConfig lc;
    lc.mode = method.mode;
    lc.lambda = cfg.lambda;
    lc.huber_delta = cfg.huber_delta;
    if (method.mode != LossMode::L1Only) lc.prior = prior;
    const Costmap init(s.masks.rows(), s.masks.cols(), 0.5);
    if (cfg.calibrate_lambda && method.mode == LossMode::Combined) lc.lambda = calibrate_lambda(init, s.masks, context, lc);
    auto r = optimize_costmap(s.masks, context, lc, init, cfg.optimizer);
    out.raw = std::move(r.costmap);
    out.report = r.report;
    out.lambda = lc.lambda;
  }
  out.normalized = normalize_to_range(out.raw, lo, hi);
  return out;
}

// ---------------------------------------------------------------------------
// Reports.

struct ScenarioRecord {
  int env = 0;
  int scenario = 0;
  std::uint64_t seed = 0;
  double multiplier = 1.0;
  std::string method;
  bool ok = true;
  std::string error;
  double mae = 0.0;
  double hausdorff = 0.0;
  double rho_star = 0.0;
  double rho_hat = 0.0;
  // Ablation extras (L1-only): MAE of the raw map and of the map divided by its maximum.
  std::optional<double> mae_unnormalized;
  std::optional<double> mae_max_normalized;
  std::optional<double> drift;  // mean |raw − anchored least-squares| over cells
};

struct ReportRow {
  int env = 0;
  std::string method;
  double multiplier = 1.0;
  int count = 0;
  double mae = 0.0;
  double hausdorff = 0.0;
  double rho_star = 0.0;
  double rho_hat = 0.0;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<ScenarioRecord> records;
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;
};

inline json record_to_json(const ScenarioRecord& r) {
  json j = {{"env", r.env}, {"scenario", r.scenario}, {"seed", r.seed}, {"multiplier", r.multiplier}, {"method", r.method}, {"ok", r.ok}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["mae"] = r.mae;
  j["hausdorff"] = r.hausdorff;
  j["rho_star"] = r.rho_star;
  j["rho_hat"] = r.rho_hat;
  if (r.mae_unnormalized) j["mae_unnormalized"] = *r.mae_unnormalized;
  if (r.mae_max_normalized) j["mae_max_normalized"] = *r.mae_max_normalized;
  if (r.drift) j["drift"] = *r.drift;
  return j;
}

/// Means per (environment, method, multiplier) over successful records, in
/// record order.
inline std::vector<ReportRow> aggregate(const std::vector<ScenarioRecord>& records) {
  std::vector<ReportRow> rows;
  std::map<std::tuple<int, std::string, double>, std::size_t> index;
  for (const auto& r : records) {
    if (!r.ok) continue;
    const auto key = std::make_tuple(r.env, r.method, r.multiplier);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({r.env, r.method, r.multiplier});
    }
    ReportRow& row = rows[it->second];
    ++row.count;
    row.mae += r.mae;
    row.hausdorff += r.hausdorff;
    row.rho_star += r.rho_star;
    row.rho_hat += r.rho_hat;
  }
  for (auto& row : rows) {
    row.mae /= row.count;
    row.hausdorff /= row.count;
    row.rho_star /= row.count;
    row.rho_hat /= row.count;
  }
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.env, a.method, a.multiplier) < std::tie(b.env, b.method, b.multiplier);
  });
  return rows;
}

inline json report_to_json(const BenchmarkReport& rep) {
  const json cfg = config_to_json(rep.config);
  json rows = json::array(), records = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"env", r.env}, {"method", r.method}, {"multiplier", r.multiplier}, {"count", r.count},
                    {"mae", r.mae}, {"hausdorff", r.hausdorff}, {"rho_star", r.rho_star}, {"rho_hat", r.rho_hat}});
  for (const auto& r : rep.records) records.push_back(record_to_json(r));
  return {{"schema", kSchemaVersion},
          {"metadata", {{"version", kVersion}, {"config_hash", io::sha256_hex(cfg.dump())}, {"seed", rep.config.seed}}},
          {"config", cfg},
          {"rows", rows},
          {"records", records},
          {"notes", rep.notes}};
}

inline std::string report_to_csv(const BenchmarkReport& rep) {
  std::ostringstream out;
  out << "env,method,multiplier,count,mae,hausdorff,rho_star,rho_hat\n";
  for (const auto& r : rep.rows)
    out << r.env << ',' << r.method << ',' << io::format_double(r.multiplier) << ',' << r.count << ',' << io::format_double(r.mae)
        << ',' << io::format_double(r.hausdorff) << ',' << io::format_double(r.rho_star) << ',' << io::format_double(r.rho_hat) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

inline std::uint64_t scenario_seed(const BenchmarkConfig& cfg, int env, int scenario) {
  return mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(env)), static_cast<std::uint64_t>(scenario));
}

inline SynthParams synth_params(const BenchmarkConfig& cfg, std::uint64_t seed) {
  SynthParams p;
  p.classes = cfg.k_classes;
  p.pairs = cfg.k_pairs;
  p.grid_n = cfg.grid_n;
  p.cost_pool = cfg.cost_pool;
  p.seed = seed;
  p.roughness = cfg.roughness;
  return p;
}

/// Runs `job(i)` for i in [0, n) on `workers` threads; results land by index.
template <typename Job>
auto parallel_map(int n, int workers, Job job) {
  using Result = decltype(job(0));
  std::vector<Result> results(static_cast<std::size_t>(n));
  const int w = std::max(1, std::min(workers, n));
  if (w == 1) {
    for (int i = 0; i < n; ++i) results[static_cast<std::size_t>(i)] = job(i);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) results[static_cast<std::size_t>(i)] = job(i);
    });
  for (auto& th : pool) th.join();
  return results;
}

inline std::vector<ScenarioRecord> evaluate_scenario(const TerrainBank& bank, const BenchmarkConfig& cfg, int env, int index,
                                                     bool plan_paths, bool ablation_extras) {
  std::vector<ScenarioRecord> out;
  const std::uint64_t seed = scenario_seed(cfg, env, index);
  const auto methods = methods_of(cfg);
  auto record = [&](double m, const std::string& method) {
    ScenarioRecord r;
    r.env = env;
    r.scenario = index;
    r.seed = seed;
    r.multiplier = m;
    r.method = method;
    return r;
  };
  auto failure = [&](double m, const std::string& method, const std::string& what) {
    ScenarioRecord r = record(m, method);
    r.ok = false;
    r.error = what;
    out.push_back(r);
  };

  Scenario s;
  std::pair<Pose, Pose> ends;
  try {
    s = synthesize_scenario(bank, synth_params(cfg, seed));
    if (plan_paths) {
      Rng rng(mix_seed(seed, 7));
      ends = sample_endpoints(s, rng);
    }
  } catch (const Error& e) {
    for (double m : cfg.strength_schedule)
      for (const auto& method : methods) failure(m, method.name, e.what());
    return out;
  }

  for (std::size_t mi = 0; mi < cfg.strength_schedule.size(); ++mi) {
    const double m = cfg.strength_schedule[mi];
    const Costmap gt = scaled(s.target_costmap, m);
    const double lo = min_value(gt), hi = max_value(gt);
    Rng rng(mix_seed(seed, 100 + mi));
    const PreferenceContext context = corrupt(scale_strengths(s.context, m), cfg.corruption, cfg.drop_probability, rng);
    const Costmap prior = make_prior(s, cfg, m, rng);

    std::optional<LatticePath> gt_path;
    std::string gt_error;
    if (plan_paths) {
      try {
        gt_path = plan(gt, ends.first, ends.second, cfg.planner);
      } catch (const Error& e) {
        gt_error = e.what();
      }
    }
    std::optional<Costmap> anchored;
    for (const auto& method : methods) {
      if (plan_paths && !gt_path) {
        failure(m, method.name, gt_error);
        continue;
      }
      try {
        const Recovered rec = recover(s, context, method, cfg, prior, lo, hi);
        ScenarioRecord r = record(m, method.name);
        r.mae = prefcost::mae(rec.normalized, gt, s.masks).total;
        if (plan_paths) {
          const LatticePath pred_path = plan(rec.normalized, ends.first, ends.second, cfg.planner);
          const RegretPair rg = regret(gt, rec.normalized, *gt_path, pred_path);
          r.rho_star = rg.rho_star;
          r.rho_hat = rg.rho_hat;
          r.hausdorff = hausdorff(*gt_path, pred_path);
        }
        if (ablation_extras && method.mode == LossMode::L1Only && method.solver == Solver::GradientDescent) {
          r.mae_unnormalized = prefcost::mae(rec.raw, gt, s.masks).total;
          r.mae_max_normalized = prefcost::mae(normalize_by_max(rec.raw), gt, s.masks).total;
          if (!context.empty()) {
            if (!anchored) anchored = paint_costmap(s.masks, recover_class_costs(s.masks, context).class_costs);
            double d = 0.0;
            for (std::size_t i = 0; i < rec.raw.size(); ++i) d += std::abs(rec.raw.storage()[i] - anchored->storage()[i]);
            r.drift = d / static_cast<double>(rec.raw.size());
          }
        }
        out.push_back(r);
      } catch (const Error& e) {
        failure(m, method.name, e.what());
      }
    }
  }
  return out;
}

inline BenchmarkReport run_protocol(const TerrainBank& bank, const BenchmarkConfig& cfg, bool plan_paths, bool ablation_extras) {
  cfg.validate();
  const int total = cfg.n_environments * cfg.scenarios_per_env;
  auto per_job = parallel_map(total, cfg.workers, [&](int i) {
    return evaluate_scenario(bank, cfg, i / cfg.scenarios_per_env, i % cfg.scenarios_per_env, plan_paths, ablation_extras);
  });
  BenchmarkReport rep;
  rep.config = cfg;
  for (auto& recs : per_job) rep.records.insert(rep.records.end(), recs.begin(), recs.end());
  rep.rows = aggregate(rep.records);
  rep.notes.push_back("real-vs-synthetic training data axis not reproduced: no real deployment data is available");
  return rep;
}

/// Synthesize, recover, normalize, plan on ground truth and recovery, score.
inline BenchmarkReport run_benchmark(const TerrainBank& bank, const BenchmarkConfig& cfg) {
  return run_protocol(bank, cfg, true, false);
}

/// Gradient-descent solver under every configured loss mode; MAE only, plus
/// the L1-only raw, max-normalized and drift statistics.
inline BenchmarkReport ablation_suite(const TerrainBank& bank, BenchmarkConfig cfg) {
  if (cfg.loss_modes.empty()) fail(ErrorCode::InvalidArgument, "ablation needs at least one loss mode");
  cfg.solver = Solver::GradientDescent;
  return run_protocol(bank, cfg, false, true);
}

}  // namespace prefcost::bench
