#include "pathwise/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "pathwise/arbitrage.hpp"
#include "pathwise/calculus.hpp"
#include "pathwise/detail/parallel.hpp"
#include "pathwise/detail/rng.hpp"
#include "pathwise/generators.hpp"
#include "pathwise/hedging.hpp"
#include "pathwise/metrics.hpp"
#include "pathwise/partitions.hpp"
#include "pathwise/portfolio.hpp"

namespace pathwise {

const char* kVersion = "pathwise-lab 0.1.0";

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- csv sink

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_ << header << '\n';
  }

  // %.17g for doubles keeps reruns byte-identical and round-trips exactly.
  void field(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    sep();
    row_ += buf;
  }
  void field(int v) { field(static_cast<long long>(v)); }
  void field(std::size_t v) { field(static_cast<long long>(v)); }
  void field(long long v) {
    sep();
    row_ += std::to_string(v);
  }
  void field(const std::string& v) {
    sep();
    row_ += v;
  }
  void end_row() {
    out_ << row_ << '\n';
    row_.clear();
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) row_ += ',';
    first_ = false;
  }
  std::ofstream out_;
  std::string row_;
  bool first_ = true;
};

// ---------------------------------------------------------- config parsing

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

const json& need(const json& j, const char* key, const char* ctx) {
  if (!j.contains(key)) fail(std::string(ctx) + ": missing required key '" + key + "'");
  return j.at(key);
}

double need_number(const json& j, const char* key, const char* ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_number()) fail(std::string(ctx) + ": '" + key + "' must be a number");
  return v.get<double>();
}

PartitionSequence parse_partition(const json& cfg) {
  const json& p = need(cfg, "partition", "config");
  const double horizon = need_number(p, "T", "partition");
  const std::string rule = p.value("rule", "dyadic");
  const int max_level = static_cast<int>(need_number(p, "max_level", "partition"));
  const int base = static_cast<int>(p.value("base", 2.0));
  if (rule != "dyadic" && rule != "uniform") fail("partition: unknown rule " + rule);
  try {
    return PartitionSequence(
        horizon, rule == "dyadic" ? PartitionRule::dyadic : PartitionRule::uniform,
        max_level, base);
  } catch (const std::invalid_argument& e) {
    fail(std::string("partition: ") + e.what());
  }
}

JumpTimeSource parse_jump_source(const json& j) {
  const std::string type = need(j, "type", "jumps").get<std::string>();
  if (type == "poisson") return PoissonSource{need_number(j, "rate", "jumps")};
  if (type == "explicit") {
    ExplicitTimesSource src;
    for (const json& t : need(j, "times", "jumps")) src.times.push_back(t.get<double>());
    return src;
  }
  if (type == "renewal") {
    const json& arr = need(j, "arrival", "jumps");
    const std::string at = need(arr, "type", "arrival").get<std::string>();
    if (at == "exponential") {
      return RenewalSource{ExponentialArrival{need_number(arr, "rate", "arrival")}};
    }
    if (at == "uniform") {
      return RenewalSource{UniformArrival{need_number(arr, "lo", "arrival"),
                                          need_number(arr, "hi", "arrival")}};
    }
    if (at == "rational") {
      return RenewalSource{RationalArrival{
          static_cast<long>(need_number(arr, "denominator", "arrival")),
          static_cast<long>(need_number(arr, "max_numerator", "arrival"))}};
    }
    fail("arrival: unknown type " + at);
  }
  fail("jumps: unknown type " + type);
}

JumpSizeDist parse_jump_sizes(const json& j) {
  const std::string type = need(j, "type", "sizes").get<std::string>();
  if (type == "constant") return ConstantSize{need_number(j, "a", "sizes")};
  if (type == "uniform") {
    return UniformSize{need_number(j, "lo", "sizes"), need_number(j, "hi", "sizes")};
  }
  if (type == "discrete") {
    DiscreteSize d;
    for (const json& v : need(j, "values", "sizes")) d.values.push_back(v.get<double>());
    return d;
  }
  fail("sizes: unknown type " + type);
}

ClassSpec parse_class_spec(const json& cfg, double horizon) {
  const json& c = need(cfg, "class", "config");
  const std::string kind = need(c, "kind", "class").get<std::string>();
  ClassSpec spec;
  spec.horizon = horizon;
  spec.x0 = need_number(c, "x0", "class");
  if (kind == "continuous_qv") {
    ContinuousQVSpec cq;
    cq.sigma = need_number(c, "sigma", "class");
    const json gen = c.value("generator", json{{"type", "bm"}});
    const std::string gt = gen.value("type", "bm");
    if (gt == "bm") {
      cq.generator = BrownianGen{};
    } else if (gt == "bm_plus_fbm") {
      cq.generator = BrownianPlusFbmGen{need_number(gen, "hurst", "generator")};
    } else if (gt == "bm_plus_reflected") {
      cq.generator = BrownianPlusReflectedGen{need_number(gen, "rho", "generator"),
                                              gen.value("bound", 0.0)};
    } else {
      fail("generator: unknown type " + gt);
    }
    spec.model = cq;
  } else if (kind == "geometric_poisson") {
    GeometricPoissonSpec gp;
    gp.mu = need_number(c, "mu", "class");
    gp.a = need_number(c, "a", "class");
    gp.source = parse_jump_source(need(c, "jumps", "class"));
    spec.model = gp;
  } else if (kind == "jump_diffusion") {
    JumpDiffusionSpec jd;
    jd.mu = need_number(c, "mu", "class");
    jd.sigma = need_number(c, "sigma", "class");
    jd.sizes = parse_jump_sizes(need(c, "sizes", "class"));
    jd.source = parse_jump_source(need(c, "jumps", "class"));
    spec.model = jd;
  } else {
    fail("class: unknown kind " + kind);
  }
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    fail(std::string("class: ") + e.what());
  }
  return spec;
}

Payoff parse_payoff(const json& cfg) {
  const json& h = need(cfg, "payoff", "config");
  const std::string kind = need(h, "kind", "payoff").get<std::string>();
  if (kind == "call") return CallPayoff{need_number(h, "strike", "payoff")};
  if (kind == "put") return PutPayoff{need_number(h, "strike", "payoff")};
  if (kind == "tabulated") {
    TabulatedPayoff t;
    for (const json& v : need(h, "x", "payoff")) t.xs.push_back(v.get<double>());
    for (const json& v : need(h, "h", "payoff")) t.hs.push_back(v.get<double>());
    t.lipschitz = need_number(h, "lipschitz", "payoff");
    if (t.xs.size() != t.hs.size() || t.xs.size() < 2) fail("payoff: bad table");
    return t;
  }
  fail("payoff: unknown kind " + kind);
}

std::vector<int> parse_levels(const json& cfg, int max_level) {
  std::vector<int> levels;
  for (const json& l : need(cfg, "levels", "config")) {
    const int level = l.get<int>();
    if (level < 1 || level > max_level) fail("levels: level outside [1, max_level]");
    levels.push_back(level);
  }
  if (levels.empty()) fail("levels: empty");
  if (!std::is_sorted(levels.begin(), levels.end())) fail("levels: must increase");
  return levels;
}

// ------------------------------------------------------------- experiments

struct Context {
  const ExperimentConfig& cfg;
  std::filesystem::path out;
  std::uint64_t seed;
  int threads;
  std::vector<std::string> artifacts;

  const json& j() const { return cfg.effective; }
  std::filesystem::path artifact(const std::string& name) {
    artifacts.push_back(name);
    return out / name;
  }
};

void write_hedge_report(Context& ctx, const HedgeReport& report) {
  CsvFile rows(ctx.artifact("hedge_report.csv"),
               "level,path_id,terminal_value,payoff,abs_error");
  for (const auto& r : report.rows) {
    rows.field(r.level);
    rows.field(r.path_id);
    rows.field(r.terminal_value);
    rows.field(r.payoff);
    rows.field(r.abs_error);
    rows.end_row();
  }
  CsvFile summary(ctx.artifact("hedge_summary.csv"),
                  "level,median_error,max_error,est_order");
  for (std::size_t i = 0; i < report.summary.size(); ++i) {
    const auto& s = report.summary[i];
    summary.field(s.level);
    summary.field(s.median_error);
    summary.field(s.max_error);
    if (i == 0) {
      summary.field(std::string(""));
    } else {
      const auto& prev = report.summary[i - 1];
      const double order =
          prev.median_error > 0.0 && s.median_error > 0.0
              ? std::log2(prev.median_error / s.median_error) /
                    static_cast<double>(s.level - prev.level)
              : 0.0;
      summary.field(order);
    }
    summary.end_row();
  }
}

int run_replicate_bs(Context& ctx) {
  const PartitionSequence p = parse_partition(ctx.j());
  const ClassSpec spec = parse_class_spec(ctx.j(), p.horizon());
  const Payoff payoff = parse_payoff(ctx.j());
  const std::vector<int> levels = parse_levels(ctx.j(), p.max_level());
  const std::size_t bundle_size = ctx.j().value("bundle_size", 64);

  const auto* cq = std::get_if<ContinuousQVSpec>(&spec.model);
  if (cq == nullptr) fail("replicate_bs needs a continuous_qv class");
  const json pde = ctx.j().value("pde", json::object());
  PdeGridSpec grid;
  grid.space_cells = pde.value("space_cells", 800);
  grid.time_steps = pde.value("time_steps", 800);
  grid.center = spec.x0;
  const double rate = pde.value("rate", 0.0);

  const ValueSurface surface = solve_bs_pde(payoff, cq->sigma, rate, p.horizon(), grid);
  const Portfolio hedge = build_bs_hedge(surface, spec.x0);
  const std::vector<Trajectory> bundle =
      generate_bundle(spec, p, ctx.seed, bundle_size, ctx.threads);
  const HedgeReport report = replicate(hedge, bundle, payoff, p, levels, ctx.threads);
  write_hedge_report(ctx, report);
  return 0;
}

int run_replicate_poisson(Context& ctx) {
  const PartitionSequence p = parse_partition(ctx.j());
  const ClassSpec spec = parse_class_spec(ctx.j(), p.horizon());
  const Payoff payoff = parse_payoff(ctx.j());
  const std::vector<int> levels = parse_levels(ctx.j(), p.max_level());
  const std::size_t bundle_size = ctx.j().value("bundle_size", 64);
  const int k_trunc = ctx.j().value("k_trunc", 60);
  const int max_jumps = ctx.j().value("max_jumps", -1);

  const auto* gp = std::get_if<GeometricPoissonSpec>(&spec.model);
  if (gp == nullptr) fail("replicate_poisson needs a geometric_poisson class");
  if (!(gp->a * gp->mu < 0.0)) fail("replicate_poisson requires a*mu < 0");

  const Portfolio hedge =
      build_poisson_hedge(payoff, gp->mu, gp->a, p.horizon(), k_trunc, spec.x0);
  std::vector<Trajectory> bundle =
      generate_bundle(spec, p, ctx.seed, bundle_size, ctx.threads);
  if (max_jumps >= 0) {
    std::erase_if(bundle, [max_jumps](const Trajectory& x) {
      return x.jumps().size() > static_cast<std::size_t>(max_jumps);
    });
    if (bundle.empty()) fail("max_jumps filter removed every path");
  }
  const HedgeReport report = replicate(hedge, bundle, payoff, p, levels, ctx.threads);
  write_hedge_report(ctx, report);
  return 0;
}

int run_ito_residual(Context& ctx) {
  const PartitionSequence p = parse_partition(ctx.j());
  const ClassSpec spec = parse_class_spec(ctx.j(), p.horizon());
  const std::vector<int> levels = parse_levels(ctx.j(), p.max_level());
  const std::size_t bundle_size = ctx.j().value("bundle_size", 32);
  const int power = ctx.j().value("power", 2);

  const SmoothFunction f = make_power_function(power);
  const std::vector<Trajectory> bundle =
      generate_bundle(spec, p, ctx.seed, bundle_size, ctx.threads);

  CsvFile rows(ctx.artifact("residuals.csv"), "level,path_id,residual");
  CsvFile summary(ctx.artifact("residual_summary.csv"), "level,median_residual");
  for (int level : levels) {
    std::vector<double> residuals(bundle.size());
    detail::parallel_for(bundle.size(), ctx.threads, [&](std::size_t i) {
      residuals[i] = ito_follmer_residual(f, bundle[i], {}, p, level);
    });
    for (std::size_t i = 0; i < residuals.size(); ++i) {
      rows.field(level);
      rows.field(i);
      rows.field(residuals[i]);
      rows.end_row();
    }
    std::vector<double> sorted = residuals;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.size() % 2 == 1
                              ? sorted[sorted.size() / 2]
                              : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                       sorted[sorted.size() / 2]);
    summary.field(level);
    summary.field(median);
    summary.end_row();
  }
  return 0;
}

int run_qv_profile(Context& ctx) {
  const PartitionSequence p = parse_partition(ctx.j());
  const ClassSpec spec = parse_class_spec(ctx.j(), p.horizon());
  const std::size_t bundle_size = ctx.j().value("bundle_size", 64);
  std::vector<double> eval_times;
  if (ctx.j().contains("eval_times")) {
    for (const json& t : ctx.j().at("eval_times")) eval_times.push_back(t.get<double>());
  } else {
    for (int k = 1; k <= 4; ++k) eval_times.push_back(p.horizon() * k / 4.0);
  }

  const std::vector<Trajectory> bundle =
      generate_bundle(spec, p, ctx.seed, bundle_size, ctx.threads);

  CsvFile rows(ctx.artifact("qv.csv"), "path_id,t,total,continuous,atomic");
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    const QVDecomposition qv = quadratic_variation(bundle[i], p, eval_times);
    for (std::size_t k = 0; k < qv.times.size(); ++k) {
      rows.field(i);
      rows.field(qv.times[k]);
      rows.field(qv.total[k]);
      rows.field(qv.continuous_part[k]);
      rows.field(qv.atomic_part[k]);
      rows.end_row();
    }
  }

  const C0Report c0 = check_c0_membership(bundle, spec);
  CsvFile report(ctx.artifact("c0_report.csv"), "path_id,pass,qv_relative_dev,detail");
  for (std::size_t i = 0; i < c0.paths.size(); ++i) {
    report.field(i);
    report.field(std::string(c0.paths[i].pass ? "1" : "0"));
    report.field(c0.paths[i].qv_relative_dev);
    report.field(c0.paths[i].detail);
    report.end_row();
  }
  return 0;
}

Trajectory build_smallball_target(const json& target, const ClassSpec& spec,
                                  const PartitionSequence& p) {
  const std::string type = target.value("type", "constant");
  if (type == "class_sample") {
    return generate_trajectory(spec, p, target.value("seed", 1ULL));
  }
  double mu = 0.0, a = 0.0;
  if (const auto* gp = std::get_if<GeometricPoissonSpec>(&spec.model)) {
    mu = gp->mu;
    a = gp->a;
  }
  if (type == "constant") {
    return make_geometric_poisson_path(spec.x0, 0.0, 0.0, {}, spec.horizon, 1);
  }
  if (type == "deterministic_drift") {
    return make_geometric_poisson_path(spec.x0, mu, 0.0, {}, spec.horizon, 256);
  }
  if (type == "explicit_jumps") {
    std::vector<double> times;
    for (const json& t : need(target, "times", "target")) times.push_back(t.get<double>());
    return make_geometric_poisson_path(spec.x0, mu, a, times, spec.horizon, 256);
  }
  fail("target: unknown type " + type);
}

int run_smallball(Context& ctx) {
  const PartitionSequence p = parse_partition(ctx.j());
  const ClassSpec spec = parse_class_spec(ctx.j(), p.horizon());
  const json& sb = need(ctx.j(), "smallball", "config");
  const std::string metric_name = sb.value("metric", "uniform");
  const Metric metric = metric_name == "skorohod" ? Metric::skorohod : Metric::uniform;
  const std::size_t n_samples = static_cast<std::size_t>(
      need_number(sb, "n_samples", "smallball"));
  const int grid_level = sb.value("grid_level", 10);
  std::vector<double> epsilons;
  for (const json& e : need(sb, "epsilons", "smallball")) epsilons.push_back(e.get<double>());

  const Trajectory target =
      build_smallball_target(sb.value("target", json{{"type", "constant"}}), spec, p);

  CsvFile rows(ctx.artifact("smallball.csv"),
               "target_id,metric,epsilon,n_samples,hits,hit_fraction,wilson_lb");
  for (double eps : epsilons) {
    const SmallBallEstimate est = small_ball_estimate(
        target, spec, metric, eps, n_samples, ctx.seed, grid_level, ctx.threads);
    rows.field(std::size_t{0});
    rows.field(metric_name);
    rows.field(eps);
    rows.field(est.n_samples);
    rows.field(est.hits);
    rows.field(est.hit_fraction);
    rows.field(est.wilson_lower_bound);
    rows.end_row();
  }
  return 0;
}

int run_v_continuity(Context& ctx) {
  const PartitionSequence p = parse_partition(ctx.j());
  const ClassSpec spec = parse_class_spec(ctx.j(), p.horizon());
  const json& vc = need(ctx.j(), "v_continuity", "config");
  const auto* gp = std::get_if<GeometricPoissonSpec>(&spec.model);
  if (gp == nullptr) fail("v_continuity needs a geometric_poisson class");

  const double switch_time = vc.value("switch_time", 0.5);
  const int n_terms = vc.value("n_terms", 40);
  const int n_start = vc.value("n_start", 10);
  const int level = vc.value("level", std::min(12, p.max_level()));
  const std::string metric_name = vc.value("metric", "skorohod");
  const Metric metric = metric_name == "uniform" ? Metric::uniform : Metric::skorohod;
  const std::string kind = vc.value("portfolio", "simple_hold_then_cash");
  const double horizon = p.horizon();
  if (!(switch_time > 0.0) || !(switch_time < horizon)) {
    fail("v_continuity: switch_time must be interior");
  }

  const double mu = gp->mu, a = gp->a, x0 = spec.x0;
  const std::size_t cells = 256;
  const Trajectory base =
      make_geometric_poisson_path(x0, mu, a, {switch_time}, horizon, cells);
  auto perturb = [=](int n) {
    const double s = switch_time + 1.0 / static_cast<double>(n_start + n - 1);
    return make_geometric_poisson_path(x0, mu, a, {s}, horizon, cells);
  };

  Portfolio portfolio = [&]() {
    if (kind == "simple_hold_then_cash") {
      std::vector<SimplePiece> pieces;
      pieces.push_back({switch_time, [](double, double) { return 1.0; }, true});
      pieces.push_back({horizon, [](double, double) { return 0.0; }, true});
      return Portfolio::simple_strategy(std::move(pieces), x0, 0.0, 0.0);
    }
    if (kind == "smooth_markovian") {
      return Portfolio::smooth_markovian(
          [x0](double, double x) { return x / x0; }, x0, 0.0, 0.0);
    }
    fail("v_continuity: unknown portfolio " + kind);
  }();

  ContinuityProbeConfig probe_cfg;
  probe_cfg.gap_threshold = vc.value("gap_threshold", 1e-6);
  const ContinuityReport report = v_continuity_probe(
      portfolio, base, perturb, metric, n_terms, p, level, probe_cfg);

  CsvFile rows(ctx.artifact("continuity.csv"), "n,distance,gap,signed_gap");
  for (std::size_t i = 0; i < report.distances.size(); ++i) {
    rows.field(i + 1);
    rows.field(report.distances[i]);
    rows.field(report.gaps[i]);
    rows.field(report.signed_gaps[i]);
    rows.end_row();
  }
  const char* verdict =
      report.verdict == ContinuityReport::Verdict::discontinuity_witness
          ? "discontinuity_witness"
          : report.verdict == ContinuityReport::Verdict::lower_semicontinuity_witness
                ? "lower_semicontinuity_witness"
                : "consistent_with_continuity";
  CsvFile vrow(ctx.artifact("continuity_verdict.csv"), "verdict,base_terminal");
  vrow.field(std::string(verdict));
  vrow.field(report.base_terminal);
  vrow.end_row();
  return 0;
}

int run_arbitrage_scan(Context& ctx) {
  const PartitionSequence p = parse_partition(ctx.j());
  const ClassSpec spec = parse_class_spec(ctx.j(), p.horizon());
  const json& arb = need(ctx.j(), "arbitrage", "config");
  const std::string kind = need(arb, "portfolio", "arbitrage").get<std::string>();
  const int level = arb.value("level", std::min(10, p.max_level()));
  const double tol = arb.value("tol", 1e-6);
  const std::size_t bundle_size = ctx.j().value("bundle_size", 256);
  const std::string restrict_rule = arb.value("restrict", "none");

  std::vector<Trajectory> bundle =
      generate_bundle(spec, p, ctx.seed, bundle_size, ctx.threads);
  if (restrict_rule == "terminal_above_x0") {
    std::erase_if(bundle, [&](const Trajectory& x) {
      return !(x.value(x.horizon()) > spec.x0);
    });
    if (bundle.empty()) fail("restriction removed every path");
  } else if (restrict_rule != "none") {
    fail("arbitrage: unknown restrict rule " + restrict_rule);
  }

  Portfolio portfolio = [&]() {
    if (kind == "zero") return Portfolio::zero_position(0.0, 0.0);
    if (kind == "buy_and_hold_financed") {
      // v0 defaults to 0; a nonzero value exercises the precondition check
      return Portfolio::buy_and_hold(1.0, arb.value("v0", 0.0), 0.0, 2.0 * spec.x0);
    }
    if (kind == "delta_hedge_minus_price") {
      const auto* cq = std::get_if<ContinuousQVSpec>(&spec.model);
      if (cq == nullptr) fail("delta_hedge_minus_price needs a continuous_qv class");
      const Payoff payoff = parse_payoff(ctx.j());
      PdeGridSpec grid;
      const json pde = ctx.j().value("pde", json::object());
      grid.space_cells = pde.value("space_cells", 800);
      grid.time_steps = pde.value("time_steps", 800);
      grid.center = spec.x0;
      const ValueSurface surface =
          solve_bs_pde(payoff, cq->sigma, 0.0, p.horizon(), grid);
      return build_bs_hedge(surface, spec.x0).with_initial_value(0.0);
    }
    fail("arbitrage: unknown portfolio " + kind);
  }();

  const ArbitrageVerdict verdict =
      scan_arbitrage(portfolio, bundle, p, level, tol, ctx.threads);

  CsvFile terminals(ctx.artifact("arbitrage_terminals.csv"), "path_id,terminal");
  for (std::size_t i = 0; i < verdict.terminals.size(); ++i) {
    terminals.field(i);
    terminals.field(verdict.terminals[i]);
    terminals.end_row();
  }
  const char* outcome =
      verdict.outcome == ArbitrageVerdict::Outcome::arbitrage_found
          ? "arbitrage_found"
          : verdict.outcome == ArbitrageVerdict::Outcome::no_arbitrage_in_bundle
                ? "no_arbitrage_in_bundle"
                : "precondition_failed";
  CsvFile vfile(ctx.artifact("arbitrage_verdict.csv"),
                "outcome,witness_path,witness_terminal,bundle_size,level,tolerance,caveat");
  vfile.field(std::string(outcome));
  if (verdict.witness_path) {
    vfile.field(*verdict.witness_path);
  } else {
    vfile.field(std::string(""));
  }
  vfile.field(verdict.witness_terminal);
  vfile.field(verdict.bundle_size);
  vfile.field(verdict.level);
  vfile.field(verdict.tolerance);
  vfile.field(verdict.caveat);
  vfile.end_row();
  return verdict.outcome == ArbitrageVerdict::Outcome::precondition_failed ? 4 : 0;
}

void write_manifest(const std::filesystem::path& out, const ExperimentConfig& cfg,
                    std::uint64_t seed, int threads, const std::string& status,
                    const std::string& message, long long wall_ms,
                    const std::vector<std::string>& artifacts) {
  json manifest;
  manifest["config"] = cfg.effective;
  manifest["seed"] = seed;
  manifest["threads"] = threads;
  manifest["version"] = kVersion;
  manifest["status"] = status;
  if (!message.empty()) manifest["message"] = message;
  manifest["wall_ms"] = wall_ms;
  manifest["artifacts"] = artifacts;
  std::ofstream f(out / "manifest.json", std::ios::binary);
  f << manifest.dump(2) << '\n';
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.effective = j;
  if (!j.contains("experiment")) fail("config: missing 'experiment'");
  cfg.experiment = j.at("experiment").get<std::string>();
  static const std::set<std::string> known = {
      "replicate_bs", "replicate_poisson", "ito_residual",  "qv_profile",
      "smallball",    "v_continuity",      "arbitrage_scan"};
  if (known.count(cfg.experiment) == 0) {
    fail("config: unknown experiment '" + cfg.experiment + "'");
  }
  if (!j.contains("seed")) fail("config: 'seed' is mandatory");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.threads = j.value("threads", 0);

  // Structural validation: parse everything the run will need.
  const PartitionSequence p = parse_partition(j);
  const ClassSpec spec = parse_class_spec(j, p.horizon());
  if (cfg.experiment == "replicate_bs" || cfg.experiment == "replicate_poisson") {
    parse_payoff(j);
    parse_levels(j, p.max_level());
    if (cfg.experiment == "replicate_bs" &&
        !std::holds_alternative<ContinuousQVSpec>(spec.model)) {
      fail("replicate_bs needs a continuous_qv class");
    }
    if (cfg.experiment == "replicate_poisson") {
      const auto* gp = std::get_if<GeometricPoissonSpec>(&spec.model);
      if (gp == nullptr) fail("replicate_poisson needs a geometric_poisson class");
      if (!(gp->a * gp->mu < 0.0)) fail("replicate_poisson requires a*mu < 0");
    }
  } else if (cfg.experiment == "ito_residual") {
    parse_levels(j, p.max_level());
  } else if (cfg.experiment == "smallball") {
    const json& sb = need(j, "smallball", "config");
    need(sb, "n_samples", "smallball");
    need(sb, "epsilons", "smallball");
  } else if (cfg.experiment == "v_continuity") {
    need(j, "v_continuity", "config");
    if (!std::holds_alternative<GeometricPoissonSpec>(spec.model)) {
      fail("v_continuity needs a geometric_poisson class");
    }
  } else if (cfg.experiment == "arbitrage_scan") {
    const json& arb = need(j, "arbitrage", "config");
    need(arb, "portfolio", "arbitrage");
  }
  return cfg;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                          std::optional<std::uint64_t> seed_override,
                          int thread_override) {
  namespace fs = std::filesystem;
  RunOutcome outcome;
  fs::create_directories(out_dir);

  Context ctx{cfg, fs::path(out_dir),
              seed_override.value_or(cfg.seed),
              thread_override > 0
                  ? thread_override
                  : (cfg.threads > 0 ? cfg.threads : detail::default_threads()),
              {}};

  const auto start = std::chrono::steady_clock::now();
  std::string status = "ok";
  try {
    if (cfg.experiment == "replicate_bs") {
      outcome.exit_code = run_replicate_bs(ctx);
    } else if (cfg.experiment == "replicate_poisson") {
      outcome.exit_code = run_replicate_poisson(ctx);
    } else if (cfg.experiment == "ito_residual") {
      outcome.exit_code = run_ito_residual(ctx);
    } else if (cfg.experiment == "qv_profile") {
      outcome.exit_code = run_qv_profile(ctx);
    } else if (cfg.experiment == "smallball") {
      outcome.exit_code = run_smallball(ctx);
    } else if (cfg.experiment == "v_continuity") {
      outcome.exit_code = run_v_continuity(ctx);
    } else if (cfg.experiment == "arbitrage_scan") {
      outcome.exit_code = run_arbitrage_scan(ctx);
    }
    if (outcome.exit_code == 4) {
      status = "precondition_failed";
      outcome.message = "scan precondition failed";
    }
  } catch (const std::exception& e) {
    status = "error";
    outcome.exit_code = 3;
    outcome.message = e.what();
  }
  const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  write_manifest(ctx.out, cfg, ctx.seed, ctx.threads, status, outcome.message,
                 wall_ms, ctx.artifacts);
  outcome.artifacts = ctx.artifacts;
  return outcome;
}

}  // namespace pathwise
