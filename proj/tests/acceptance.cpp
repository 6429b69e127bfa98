// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "prefcost/bench.hpp"
#include "prefcost/io.hpp"
#include "prefcost/metrics.hpp"
#include "prefcost/planner.hpp"
#include "prefcost/recovery.hpp"
#include "prefcost/rng.hpp"
#include "prefcost/terrain.hpp"

using namespace prefcost;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = dt <= budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s  %-34s %s [%.2fs / %.0fs]%s\n", pass ? "PASS" : "FAIL", name, o.detail.c_str(), dt, budget_s,
              in_time ? "" : " over time budget");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const TerrainBank& bank() {
  static const TerrainBank b = make_placeholder_bank();
  return b;
}

double bt_alpha(double g_pref, double g_other) { return 2.0 / (1.0 + std::exp(-(g_other - g_pref))) - 1.0; }

bool connected(const Scenario& s) {
  std::map<ClassId, ClassId> parent;
  for (const auto& [id, c] : s.class_costs) parent[id] = id;
  std::function<ClassId(ClassId)> root = [&](ClassId x) { return parent[x] == x ? x : parent[x] = root(parent[x]); };
  for (const auto& p : s.context) parent[root(p.preferred)] = root(p.other);
  std::set<ClassId> roots;
  for (const auto& [id, c] : s.class_costs) roots.insert(root(id));
  return roots.size() == 1;
}

Costmap random_map(Rng& rng, int rows, int cols, double lo, double hi) {
  Costmap m(rows, cols);
  for (double& v : m.storage()) v = rng.uniform(lo, hi);
  return m;
}

SegmentationMaskSet stripes(int k, int rows, int width) {
  Grid<int> labels(rows, k * width, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < k * width; ++c) labels(r, c) = c / width;
  return SegmentationMaskSet::from_labels(labels, k);
}

}  // namespace

int main() {
  criterion("bradley-terry round trip", 1, [] {
    Rng rng(101);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double d = rng.uniform(0.0, 13.0);
      worst = std::max(worst, std::abs(logodds_from_strength(strength_from_costs(0.0, d)) - d));
    }
    return Outcome{worst < 1e-9, fmt("max |err| = %.2e over 10000 draws (tol 1e-9)", worst)};
  });

  criterion("generator consistency", 30, [] {
    Rng rng(202);
    double worst = 0.0;
    bool partition = true;
    for (int i = 0; i < 500; ++i) {
      SynthParams p;
      p.classes = 2 + static_cast<int>(rng.below(7));
      p.pairs = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.classes * (p.classes - 1) / 2) + 1));
      p.grid_n = 3 + static_cast<int>(rng.below(3));
      p.seed = rng.next_u64();
      const Scenario s = synthesize_scenario(bank(), p);
      for (const auto& t : s.context)
        worst = std::max(worst, std::abs(t.strength - bt_alpha(s.class_costs.at(t.preferred), s.class_costs.at(t.other))));
      Grid<int> cover(s.masks.rows(), s.masks.cols(), 0);
      for (int m = 0; m < s.masks.count(); ++m) {
        const Grid<bool> g = s.masks.mask(m);
        for (std::size_t c = 0; c < g.size(); ++c) cover.storage()[c] += g.storage()[c] ? 1 : 0;
      }
      for (int v : cover.values()) partition = partition && v == 1;
      partition = partition && static_cast<int>(s.context.size()) == p.pairs;
    }
    return Outcome{worst < 1e-9 && partition, fmt("500 scenarios, max |alpha err| = %.2e, masks partition: %s", worst, partition ? "yes" : "no")};
  });

  criterion("exact recovery", 120, [] {
    int done = 0, mae_bad = 0, rho_bad = 0, haus_bad = 0;
    double worst_mae = 0.0;
    for (std::uint64_t seed = 0; done < 200; ++seed) {
      SynthParams p;
      p.classes = 2 + static_cast<int>(seed % 6);
      p.pairs = p.classes - 1 + static_cast<int>(seed % 3);
      p.pairs = std::min(p.pairs, p.classes * (p.classes - 1) / 2);
      p.grid_n = 5;
      p.seed = seed;
      const Scenario s = synthesize_scenario(bank(), p);
      if (!connected(s)) continue;
      Rng rng(mix_seed(seed, 7));
      std::pair<Pose, Pose> ends;
      try {
        ends = bench::sample_endpoints(s, rng);
      } catch (const Error&) {
        continue;
      }
      ++done;
      const auto r = recover_class_costs(s.masks, s.context);
      const Costmap& gt = s.target_costmap;
      const Costmap rec = normalize_to_range(paint_costmap(s.masks, r.class_costs), min_value(gt), max_value(gt));
      const double e = mae(rec, gt, s.masks).total;
      worst_mae = std::max(worst_mae, e);
      mae_bad += e < 1e-6 ? 0 : 1;
      const LatticePath a = plan(gt, ends.first, ends.second, PlannerConfig{});
      const LatticePath b = plan(rec, ends.first, ends.second, PlannerConfig{});
      rho_bad += regret(gt, rec, a, b).rho_star == 0.0 ? 0 : 1;
      haus_bad += hausdorff(a, b) == 0.0 ? 0 : 1;
    }
    return Outcome{mae_bad + rho_bad + haus_bad == 0,
                   fmt("200 connected scenarios, max MAE %.2e, rho*!=0: %d, hausdorff!=0: %d", worst_mae, rho_bad, haus_bad)};
  });

  criterion("inconsistent triangle", 10, [] {
    const double a = strength_from_costs(0.0, 1.0);
    const PreferenceContext ctx{{0, 1, a}, {1, 2, a}, {0, 2, a}};
    const auto masks = stripes(3, 4, 3);
    const auto ls = recover_class_costs(masks, ctx);
    const double ls_err = std::max({std::abs(ls.class_costs.at(0)), std::abs(ls.class_costs.at(1) - 2.0 / 3.0),
                                    std::abs(ls.class_costs.at(2) - 4.0 / 3.0)});
    LossConfig cfg;
    cfg.mode = LossMode::L1Only;
    const auto gd = optimize_costmap(masks, ctx, cfg, Costmap(masks.rows(), masks.cols(), 0.5));
    const auto m = mask_means(gd.costmap, masks);
    const double gd_err = std::max(std::abs(m[1] - m[0] - 2.0 / 3.0), std::abs(m[2] - m[0] - 4.0 / 3.0));
    return Outcome{ls_err < 1e-9 && gd_err < 1e-4 && ls.residual_norm > 0,
                   fmt("least squares err %.2e (tol 1e-9), gradient descent err %.2e (tol 1e-4)", ls_err, gd_err)};
  });

  criterion("l1 shift invariance", 10, [] {
    Rng rng(303);
    double worst = 0.0;
    int bitwise = 0;
    for (int t = 0; t < 100; ++t) {
      const int k = 2 + static_cast<int>(rng.below(5));
      const auto masks = stripes(k, 2 + static_cast<int>(rng.below(6)), 1 + static_cast<int>(rng.below(4)));
      PreferenceContext ctx;
      for (int i = 0; i < 2 * k; ++i) {
        const ClassId a = static_cast<ClassId>(rng.below(k)), b = static_cast<ClassId>(rng.below(k));
        if (a != b) ctx.push_back({a, b, rng.uniform()});
      }
      Costmap c = random_map(rng, masks.rows(), masks.cols(), -2.0, 2.0);
      const double b = rng.uniform(-10.0, 10.0);
      Costmap shifted = c;
      for (double& v : shifted.storage()) v += b;
      LossConfig cfg;
      cfg.mode = LossMode::L1Only;
      const double l0 = loss(c, masks, ctx, cfg).l1, l1 = loss(shifted, masks, ctx, cfg).l1;
      bitwise += l0 == l1 ? 1 : 0;
      worst = std::max(worst, std::abs(l0 - l1));
    }
    return Outcome{worst < 1e-12, fmt("100 maps, max |l1(C+b) - l1(C)| = %.2e (tol 1e-12), bitwise equal %d/100", worst, bitwise)};
  });

  criterion("gradient check", 30, [] {
    Rng rng(404);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const LossMode mode = t % 3 == 0 ? LossMode::L1Only : t % 3 == 1 ? LossMode::L2Only : LossMode::Combined;
      const int k = 2 + static_cast<int>(rng.below(4));
      const auto masks = stripes(k, 2 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(3)));
      PreferenceContext ctx;
      for (int i = 0; i < 2 * k; ++i) {
        const ClassId a = static_cast<ClassId>(rng.below(k)), b = static_cast<ClassId>(rng.below(k));
        if (a != b) ctx.push_back({a, b, rng.uniform(0.0, 0.99)});
      }
      LossConfig cfg;
      cfg.mode = mode;
      cfg.lambda = rng.uniform(0.05, 2.0);
      cfg.prior = random_map(rng, masks.rows(), masks.cols(), 0.0, 1.0);
      const Costmap x = random_map(rng, masks.rows(), masks.cols(), -1.0, 3.0);
      const Costmap g = loss_gradient(x, masks, ctx, cfg);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        Costmap up = x, dn = x;
        up.storage()[i] += 1e-5;
        dn.storage()[i] -= 1e-5;
        const double fd = (loss(up, masks, ctx, cfg).total - loss(dn, masks, ctx, cfg).total) / 2e-5;
        num += (fd - g.storage()[i]) * (fd - g.storage()[i]);
        den += g.storage()[i] * g.storage()[i];
      }
      worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
    }
    return Outcome{worst < 1e-5, fmt("100 points over 3 modes, max relative error %.2e (tol 1e-5)", worst)};
  });

  criterion("planner optimality", 120, [] {
    Rng rng(505);
    int mismatches = 0, compared = 0;
    PlannerConfig grid8;
    grid8.mode = PlannerMode::Grid8;
    for (int t = 0; t < 100; ++t) {
      const int rows = 8 + static_cast<int>(rng.below(57)), cols = 8 + static_cast<int>(rng.below(57));
      const Costmap m = random_map(rng, rows, cols, 0.0, 1.0);
      const Pose s{static_cast<int>(rng.below(rows)), static_cast<int>(rng.below(cols)), static_cast<int>(rng.below(40))};
      const Pose g{static_cast<int>(rng.below(rows)), static_cast<int>(rng.below(cols)), 0};
      for (const PlannerConfig& cfg : {PlannerConfig{}, grid8}) {
        const std::int64_t want = oracle::dijkstra(m, s.cell(), s.heading, g.cell(), cfg);
        ++compared;
        if (want < 0) {
          bool threw = false;
          try {
            plan(m, s, g, cfg);
          } catch (const Error& e) {
            threw = e.code() == ErrorCode::NoPath;
          }
          mismatches += threw ? 0 : 1;
          continue;
        }
        mismatches += path_cost_units(m, plan(m, s, g, cfg)) == want ? 0 : 1;
      }
    }
    int exhaustive_bad = 0;
    for (int t = 0; t < 20; ++t) {
      const Costmap m = random_map(rng, 5, 5, 0.5, 1.5);
      for (const PlannerConfig& cfg : {PlannerConfig{}, grid8}) {
        const Cell a{static_cast<int>(rng.below(5)), static_cast<int>(rng.below(5))};
        const std::int64_t want = oracle::exhaustive(m, a, {4 - a.row, 4 - a.col}, cfg);
        if (want < 0) continue;
        exhaustive_bad += path_cost_units(m, plan(m, {a.row, a.col, 0}, {4 - a.row, 4 - a.col, 0}, cfg)) == want ? 0 : 1;
      }
    }
    return Outcome{mismatches == 0 && exhaustive_bad == 0,
                   fmt("%d A*/Dijkstra comparisons, %d mismatches; 5x5 exhaustive mismatches %d", compared, mismatches, exhaustive_bad)};
  });

  criterion("regret nonnegativity", 60, [] {
    Rng rng(606);
    int negative = 0;
    double min_star = 1e300, min_hat = 1e300;
    for (int t = 0; t < 200; ++t) {
      const int n = 12 + static_cast<int>(rng.below(37));
      const Costmap gt = random_map(rng, n, n, 0.0, 1.0);
      Costmap pred = gt;
      const double jitter = rng.uniform(0.0, 1.0);
      for (double& v : pred.storage()) v = std::max(0.0, v + rng.uniform(-jitter, jitter));
      const Pose s{static_cast<int>(rng.below(n)), 0, 0}, g{static_cast<int>(rng.below(n)), n - 1, 0};
      PlannerConfig cfg;
      if (t % 2) cfg.mode = PlannerMode::Grid8;
      const RegretPair r = regret(gt, pred, plan(gt, s, g, cfg), plan(pred, s, g, cfg));
      negative += (r.rho_star < 0.0 || r.rho_hat < 0.0) ? 1 : 0;
      min_star = std::min(min_star, r.rho_star);
      min_hat = std::min(min_hat, r.rho_hat);
    }
    return Outcome{negative == 0, fmt("200 pairs, min rho* = %.3g, min rho^ = %.3g, negatives %d", min_star, min_hat, negative)};
  });

  criterion("strength monotonicity", 30, [] {
    SynthParams p;
    p.classes = 2;
    p.pairs = 1;
    p.seed = 11;
    const Scenario s = synthesize_scenario(bank(), p);
    const ScaledPreference base = s.context.front();
    LossConfig cfg;
    cfg.mode = LossMode::Combined;
    cfg.prior = Costmap(s.masks.rows(), s.masks.cols(), 0.5);
    double prev_ls = -1.0, prev_gd = -1.0, worst_logit = 0.0;
    bool strict = true;
    for (double a : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99}) {
      const PreferenceContext ctx{{base.preferred, base.other, a}};
      const auto r = recover_class_costs(s.masks, ctx);
      const double gap = r.class_costs.at(base.other) - r.class_costs.at(base.preferred);
      worst_logit = std::max(worst_logit, std::abs(gap - logodds_from_strength(a)));
      const auto gd = optimize_costmap(s.masks, ctx, cfg, *cfg.prior);
      const double gd_gap = gd.report.class_costs.at(base.other) - gd.report.class_costs.at(base.preferred);
      strict = strict && gap > prev_ls && gd_gap > prev_gd;
      prev_ls = gap;
      prev_gd = gd_gap;
    }
    return Outcome{strict && worst_logit < 1e-12,
                   fmt("11 strengths, gaps strictly increasing: %s, max |gap - logit| = %.2e", strict ? "yes" : "no", worst_logit)};
  });

  criterion("corruption benchmark", 300, [] {
    bench::BenchmarkConfig cfg;
    cfg.n_environments = 50;
    cfg.scenarios_per_env = 10;
    cfg.seed = 2024;
    cfg.workers = 4;
    const auto clean = bench::run_benchmark(bank(), cfg);
    cfg.corruption = bench::Corruption::FlattenAlpha;
    const auto flat = bench::run_benchmark(bank(), cfg);
    std::map<int, double> c, f;
    for (const auto& r : clean.rows) c[r.env] = r.rho_star;
    for (const auto& r : flat.rows) f[r.env] = r.rho_star;
    int above = 0;
    for (int e = 0; e < cfg.n_environments; ++e) above += (f.count(e) && c.count(e) && f[e] > c[e]) ? 1 : 0;
    return Outcome{above >= 45, fmt("flattened arm above clean in %d/50 environments (need >= 45)", above)};
  });

  criterion("ablation ordering", 300, [] {
    bench::BenchmarkConfig cfg;
    cfg.n_environments = 1;
    cfg.scenarios_per_env = 50;
    cfg.loss_modes = {LossMode::L1Only, LossMode::L2Only, LossMode::Combined};
    cfg.calibrate_lambda = true;
    cfg.seed = 1;
    cfg.workers = 4;
    const auto rep = bench::ablation_suite(bank(), cfg);
    std::map<int, std::map<std::string, double>> by;
    for (const auto& r : rep.records) {
      if (!r.ok) continue;
      by[r.scenario][r.method] = r.mae;
      if (r.mae_max_normalized) by[r.scenario]["l1/max"] = *r.mae_max_normalized;
    }
    double comb = 0, l2 = 0, l1 = 0, l1_minmax = 0;
    int best = 0, n = 0;
    for (auto& [i, m] : by) {
      if (m.size() < 4) continue;
      ++n;
      comb += m["gd:l1l2"];
      l2 += m["gd:l2"];
      l1 += m["l1/max"];
      l1_minmax += m["gd:l1"];
      best += (m["gd:l1l2"] < m["gd:l2"] && m["gd:l1l2"] < m["l1/max"]) ? 1 : 0;
    }
    comb /= n;
    l2 /= n;
    l1 /= n;
    l1_minmax /= n;
    const bool ok = n == 50 && comb <= l2 && comb <= l1 && best >= 40;
    return Outcome{ok, fmt("mean MAE L1+L2 %.4f, L2 %.4f, L1 (max-normalized) %.4f [L1 min-max %.4f]; L1+L2 strictly best %d/%d", comb,
                           l2, l1, l1_minmax, best, n)};
  });

  criterion("format round trips", 60, [] {
    Rng rng(707);
    bool pgm = true;
    for (int t = 0; t < 50; ++t) {
      const Costmap m = random_map(rng, 1 + static_cast<int>(rng.below(64)), 1 + static_cast<int>(rng.below(64)), 0.0, 5.0);
      const Costmap once = io::decode_pgm(io::encode_pgm(m));
      const io::Bytes bytes = io::encode_pgm(once);
      pgm = pgm && io::decode_pgm(bytes) == once && io::encode_pgm(io::decode_pgm(bytes)) == bytes;
    }
    bool scenario = true;
    const auto dir = std::filesystem::temp_directory_path() / "prefcost_acceptance_scenario";
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SynthParams p;
      p.classes = 3 + static_cast<int>(seed % 4);
      p.pairs = 2;
      p.grid_n = 4;
      p.seed = seed;
      const Scenario s = synthesize_scenario(bank(), p);
      std::filesystem::remove_all(dir);
      io::save_scenario(s, dir);
      scenario = scenario && io::load_scenario(dir) == s;
      scenario = scenario && io::masks_from_json(io::masks_to_json(s.masks)) == s.masks &&
                 io::context_from_json(io::context_to_json(s.context)) == s.context;
    }
    std::filesystem::remove_all(dir);
    bench::BenchmarkConfig cfg;
    cfg.n_environments = 3;
    cfg.scenarios_per_env = 5;
    cfg.strength_schedule = {0.5, 1.0};
    cfg.corruption = bench::Corruption::ShufflePairs;
    const std::string a = bench::report_to_json(bench::run_benchmark(bank(), cfg)).dump(2);
    cfg.workers = 3;
    const std::string b = bench::report_to_json(bench::run_benchmark(bank(), cfg)).dump(2);
    return Outcome{pgm && scenario && a == b, fmt("pgm bit-exact: %s, scenario exact: %s, report byte-identical: %s", pgm ? "yes" : "no",
                                                  scenario ? "yes" : "no", a == b ? "yes" : "no")};
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
