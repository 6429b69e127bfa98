// prefcost command line: synthesize scenarios, recover costmaps, plan, score,
// run the benchmark and serve the HTTP API.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "prefcost/bench.hpp"
#include "prefcost/io.hpp"
#include "prefcost/metrics.hpp"
#include "prefcost/planner.hpp"
#include "prefcost/recovery.hpp"
#include "prefcost/service.hpp"
#include "prefcost/terrain.hpp"

using namespace prefcost;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

TerrainBank bank_or_placeholder(const std::string& dir) {
  return dir.empty() ? make_placeholder_bank() : io::load_bank(dir);
}

Pose parse_cell(const std::string& text) {
  int r = 0, c = 0, h = 0;
  char sep = 0, sep2 = 0;
  std::istringstream in(text);
  if (!(in >> r >> sep >> c) || sep != ',') fail(ErrorCode::InvalidArgument, "expected r,c[,h] but got '" + text + "'");
  if (in >> sep2 >> h && sep2 != ',') fail(ErrorCode::InvalidArgument, "expected r,c[,h] but got '" + text + "'");
  return {r, c, h};
}

LossMode parse_mode(const std::string& s) { return bench::parse_mode(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-conditioned terrain costmaps and lattice planning"};
  app.require_subcommand(1);

  // synth
  std::string bank_dir, out_dir;
  SynthParams sp;
  auto* synth = app.add_subcommand("synth", "Synthesize one scenario directory");
  synth->add_option("--bank", bank_dir, "Terrain bank directory (default: built-in placeholder tiles)");
  synth->add_option("--classes", sp.classes, "Number of terrain classes k")->capture_default_str();
  synth->add_option("--pairs", sp.pairs, "Number of preference pairs K")->capture_default_str();
  synth->add_option("--size", sp.grid_n, "Grid exponent n; side is 2^n+1")->capture_default_str();
  synth->add_option("--seed", sp.seed)->capture_default_str();
  synth->add_option("--roughness", sp.roughness)->capture_default_str();
  synth->add_option("--cost-pool", sp.cost_pool, "Candidate per-class costs in [0,1]");
  synth->add_option("--out", out_dir)->required();

  // make-bank
  int bank_count = 12, bank_tile = 16;
  auto* make_bank = app.add_subcommand("make-bank", "Write the placeholder terrain bank to a directory");
  make_bank->add_option("--count", bank_count)->capture_default_str();
  make_bank->add_option("--tile", bank_tile)->capture_default_str();
  make_bank->add_option("--out", out_dir)->required();

  // recover
  std::string scenario_dir, context_path, solver = "ls", mode = "l1l2", prior_path, out_path;
  double lambda = kDefaultLambda;
  bool raw = false;
  auto* recover = app.add_subcommand("recover", "Recover a costmap from a preference context");
  recover->add_option("--scenario", scenario_dir)->required();
  recover->add_option("--context", context_path, "Context JSON (default: the scenario's own)");
  recover->add_option("--solver", solver)->check(CLI::IsMember({"ls", "gd"}))->capture_default_str();
  recover->add_option("--mode", mode)->check(CLI::IsMember({"l1", "l2", "l1l2"}))->capture_default_str();
  recover->add_option("--lambda", lambda)->capture_default_str();
  recover->add_option("--prior", prior_path, "Prior costmap PGM for the L2 term (default: flat 0.5)");
  recover->add_flag("--raw", raw, "Skip min-max normalization to the ground-truth range");
  recover->add_option("--out", out_path)->required();

  // plan
  std::string costmap_path, start_s, goal_s, planner_mode = "lattice";
  PlannerConfig pc;
  auto* plan_cmd = app.add_subcommand("plan", "Plan a lattice path on a costmap");
  plan_cmd->add_option("--costmap", costmap_path)->required();
  plan_cmd->add_option("--start", start_s, "r,c or r,c,heading")->required();
  plan_cmd->add_option("--goal", goal_s, "r,c")->required();
  plan_cmd->add_option("--headings", pc.headings)->capture_default_str();
  plan_cmd->add_option("--radius", pc.step_radius)->capture_default_str();
  plan_cmd->add_option("--max-turn", pc.max_turn_bins)->capture_default_str();
  plan_cmd->add_option("--mode", planner_mode)->check(CLI::IsMember({"lattice", "grid8"}))->capture_default_str();
  plan_cmd->add_option("--out", out_path)->required();

  // eval
  std::string gt_path, pred_path, masks_path;
  std::vector<std::string> path_files;
  auto* eval = app.add_subcommand("eval", "Score a predicted costmap and path against ground truth");
  eval->add_option("--gt", gt_path)->required();
  eval->add_option("--pred", pred_path)->required();
  eval->add_option("--masks", masks_path)->required();
  eval->add_option("--paths", path_files, "gt_path.json,pred_path.json")->delimiter(',')->expected(2);

  // bench / ablation
  std::string config_path, csv_path;
  int workers = 0;
  auto* bench_cmd = app.add_subcommand("bench", "Run the planning benchmark");
  bench_cmd->add_option("--config", config_path)->required();
  bench_cmd->add_option("--bank", bank_dir);
  bench_cmd->add_option("--workers", workers, "Override the config's worker count");
  bench_cmd->add_option("--out", out_path)->required();
  bench_cmd->add_option("--csv", csv_path);
  auto* ablation = app.add_subcommand("ablation", "Run the loss-mode ablation");
  ablation->add_option("--config", config_path)->required();
  ablation->add_option("--bank", bank_dir);
  ablation->add_option("--workers", workers);
  ablation->add_option("--out", out_path)->required();
  ablation->add_option("--csv", csv_path);

  // serve
  int port = 8080;
  std::string store = "prefcost-store", ui_dir, host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--store", store)->capture_default_str();
  serve->add_option("--bank", bank_dir);
  serve->add_option("--ui", ui_dir, "Static UI bundle to mount at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const Scenario s = synthesize_scenario(bank_or_placeholder(bank_dir), sp);
      io::save_scenario(s, out_dir);
      std::cout << io::scenario_meta(s).dump(2) << "\n";
    } else if (*make_bank) {
      io::save_bank(make_placeholder_bank(bank_count, bank_tile), out_dir);
    } else if (*recover) {
      const Scenario s = io::load_scenario(scenario_dir);
      const PreferenceContext ctx =
          context_path.empty() ? s.context : io::context_from_json(io::parse_json(io::read_text(context_path), context_path));
      Costmap result;
      SolveReport report;
      if (solver == "ls") {
        report = recover_class_costs(s.masks, ctx);
        result = paint_costmap(s.masks, report.class_costs);
      } else {
        LossConfig lc;
        lc.mode = parse_mode(mode);
        lc.lambda = lambda;
        const Costmap init(s.masks.rows(), s.masks.cols(), 0.5);
        if (lc.mode != LossMode::L1Only) lc.prior = prior_path.empty() ? init : io::read_pgm(prior_path);
        auto r = optimize_costmap(s.masks, ctx, lc, init);
        result = std::move(r.costmap);
        report = r.report;
      }
      if (!raw) result = normalize_to_range(result, min_value(s.target_costmap), max_value(s.target_costmap));
      io::write_pgm(out_path, result);
      std::cout << io::solve_report_to_json(report).dump(2) << "\n";
    } else if (*plan_cmd) {
      pc.mode = bench::parse_planner_mode(planner_mode);
      const Costmap cm = io::read_pgm(costmap_path);
      const LatticePath p = plan(cm, parse_cell(start_s), parse_cell(goal_s), pc);
      const json j = io::path_to_json(p, path_cost(cm, p));
      io::write_text(out_path, j.dump());
      std::cout << json{{"cost", j.at("cost")}, {"poses", p.poses.size()}, {"cells", p.cells.size()}}.dump() << "\n";
    } else if (*eval) {
      const Costmap gt = io::read_pgm(gt_path), pred = io::read_pgm(pred_path);
      const auto masks = io::masks_from_json(io::parse_json(io::read_text(masks_path), masks_path));
      const MaeBreakdown m = mae(pred, gt, masks);
      json per_class = json::object(), fractions = json::object();
      for (const auto& [c, v] : m.per_class) per_class[std::to_string(c)] = v;
      for (const auto& [c, v] : m.class_fractions) fractions[std::to_string(c)] = v;
      json out = {{"mae", {{"total", m.total}, {"per_class", per_class}, {"class_fractions", fractions}}}};
      if (path_files.size() == 2) {
        const LatticePath g = io::path_from_json(io::parse_json(io::read_text(path_files[0]), path_files[0]));
        const LatticePath p = io::path_from_json(io::parse_json(io::read_text(path_files[1]), path_files[1]));
        const RegretPair r = regret(gt, pred, g, p);
        out["regret"] = {{"rho_star", r.rho_star}, {"rho_hat", r.rho_hat}};
        out["hausdorff"] = hausdorff(g, p);
      }
      std::cout << out.dump(2) << "\n";
    } else if (*bench_cmd || *ablation) {
      bench::BenchmarkConfig cfg = bench::config_from_json(io::parse_json(io::read_text(config_path), config_path));
      if (workers > 0) cfg.workers = workers;
      const TerrainBank bank = bank_or_placeholder(bank_dir);
      const bench::BenchmarkReport rep = *bench_cmd ? bench::run_benchmark(bank, cfg) : bench::ablation_suite(bank, cfg);
      io::write_text(out_path, bench::report_to_json(rep).dump(2) + "\n");
      if (!csv_path.empty()) io::write_text(csv_path, bench::report_to_csv(rep));
      std::size_t failed = 0;
      for (const auto& r : rep.records) failed += r.ok ? 0 : 1;
      std::cout << json{{"records", rep.records.size()}, {"failed", failed}, {"rows", rep.rows.size()}}.dump() << "\n";
    } else if (*serve) {
      service::Service svc(store, bank_or_placeholder(bank_dir));
      httplib::Server server;
      service::bind(server, svc);
      if (!ui_dir.empty() && !server.set_mount_point("/", ui_dir)) fail(ErrorCode::IoError, "cannot mount UI directory " + ui_dir);
      std::cerr << "listening on http://" << host << ":" << port << "\n";
      if (!server.listen(host, port)) fail(ErrorCode::IoError, "cannot listen on port " + std::to_string(port));
    }
  } catch (const Error& e) {
    std::cerr << service::error_body(e.code(), e.what()).dump() << "\n";
    return 1;
  }
  return 0;
}
