#include "optstop/experiments.hpp"

#include "optstop/error.hpp"
#include "optstop/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace optstop {

namespace fs = std::filesystem;

std::uint64_t repeat_seed(std::uint64_t seed, std::size_t r) { return r == 0 ? seed : derive_seed(seed, r); }

namespace {

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& input, const RunOptions& options) {
  ExperimentConfig cfg = input;
  finalize_config(cfg);
  const TimeGrid grid = build_grid(cfg);
  const Problem problem = make_problem(build_model(cfg), build_payoff(cfg), grid);
  const NetworkLayout layout = build_layout(cfg);

  fs::path dir;
  if (options.write_artifacts) {
    dir = cfg.output;
    fs::create_directories(dir);
    open_out(dir / "config.ini") << emit_config(cfg);
  }

  RunReport report;
  std::ofstream curve;
  for (std::size_t r = 0; r < cfg.evaluation.repeats; ++r) {
    TrainRunConfig run = build_run(cfg);
    run.seed = repeat_seed(cfg.seed, r);
    const bool first = r == 0;
    const bool want_curve = first && options.curve_every > 0;
    auto price_at = [&](std::uint64_t step, const StoppingPolicy& policy) {
      const PriceEstimate est = estimate_price(policy, problem, options.curve_paths, run.seed, run.eval_chunk);
      const double ref = options.curve_reference;
      const double rel = ref != 0.0 ? std::abs(est.mean - ref) / std::abs(ref) : 0.0;
      if (curve.is_open()) curve << step << ',' << est.mean << ',' << rel << '\n';
    };
    if (want_curve && options.write_artifacts) {
      curve = open_out(dir / "curve.csv");
      curve << "step,price,relative_error\n";
      price_at(0, init_policy(layout, problem.steps, RngStream{run.seed, 0}, problem.deterministic_start));
    }
    StepObserver observer;
    if (want_curve) {
      observer = [&](const LogRecord& rec, const StoppingPolicy& policy) {
        if (rec.step % options.curve_every == 0) price_at(rec.step, policy);
      };
    }

    const auto start = std::chrono::steady_clock::now();
    TrainResult trained = train(problem, layout, run, observer);
    RepeatResult rep;
    rep.seed = run.seed;
    rep.price = estimate_price(trained.policy, problem, run.eval_paths, run.seed, run.eval_chunk);
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rep.objective_improved = objective_improved(trained.objectives);
    report.repeats.push_back(rep);
    if (options.console && cfg.evaluation.repeats > 1) {
      *options.console << "repeat " << r + 1 << "/" << cfg.evaluation.repeats << ": " << num(rep.price.mean)
                       << " (" << num(rep.runtime_seconds, 1) << " s)\n";
    }
    if (first) {
      report.policy = std::move(trained.policy);
      report.log = std::move(trained.log);
    }
  }

  const auto count = static_cast<double>(report.repeats.size());
  double total_time = 0.0;
  for (const auto& rep : report.repeats) {
    report.mean += rep.price.mean / count;
    total_time += rep.runtime_seconds;
  }
  double var = 0.0;
  for (const auto& rep : report.repeats) var += (rep.price.mean - report.mean) * (rep.price.mean - report.mean);
  report.std_dev = std::sqrt(var / count);
  report.runtime_seconds = total_time / count;

  if (options.write_artifacts) {
    auto log = open_out(dir / "training_log.csv");
    log << "step,objective,learning_rate,elapsed_seconds\n";
    for (const auto& rec : report.log) {
      log << rec.step << ',' << rec.objective << ',' << rec.learning_rate << ',' << rec.elapsed_seconds << '\n';
    }
    auto price = open_out(dir / "price.csv");
    price << "mean,std,stderr,ci_low,ci_high,J0,seed,runtime_seconds\n";
    for (const auto& rep : report.repeats) {
      const PriceEstimate& p = rep.price;
      price << p.mean << ',' << p.sample_std << ',' << p.std_error << ',' << p.ci_low << ',' << p.ci_high << ','
            << p.paths << ',' << rep.seed << ',' << rep.runtime_seconds << '\n';
    }
    auto reps = open_out(dir / "repeats.csv");
    reps << "repeat,price\n";
    for (std::size_t r = 0; r < report.repeats.size(); ++r) reps << r + 1 << ',' << report.repeats[r].price.mean << '\n';
    reps << "mean," << report.mean << "\nstd," << report.std_dev << '\n';
    save_policy(report.policy, (dir / "policy.bin").string());
  }
  return report;
}

std::string price_line(const ExperimentConfig& cfg, const RunReport& report) {
  std::ostringstream out;
  const PriceEstimate& p = report.repeats.front().price;
  out << cfg.name << ": price " << num(report.mean);
  if (report.repeats.size() > 1) {
    out << " std " << num(report.std_dev) << " over " << report.repeats.size() << " repeats";
  } else {
    out << " stderr " << num(p.std_error) << " ci [" << num(p.ci_low) << ", " << num(p.ci_high) << "]";
  }
  out << " J0 " << p.paths << " runtime " << num(report.runtime_seconds, 1) << " s";
  return out.str();
}

// ---------------------------------------------------------------------------
// benchmark registry

namespace {

PiecewiseSchedule three_phase(double base, std::uint64_t first, std::uint64_t second) {
  return PiecewiseSchedule{{{first, base * 1e-2}, {second, base * 1e-3}}, base * 1e-4};
}

// 5 * [1e-2 on [1, M/3], 1e-3 on (M/3, 2M/3], 1e-4 after]
PiecewiseSchedule thirds(std::uint64_t steps) { return three_phase(5.0, steps / 3, 2 * steps / 3); }

ExperimentConfig base_config(const std::string& name, double maturity, std::size_t steps) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.seed = 1;
  cfg.output = "out/" + name;
  cfg.maturity = maturity;
  cfg.steps = steps;
  return cfg;
}

void set_training(ExperimentConfig& cfg, std::uint64_t steps, double batch, const PiecewiseSchedule& rate,
                  double eps) {
  cfg.training.steps = steps;
  cfg.training.batch = PiecewiseSchedule::constant(batch);
  cfg.training.rate = rate;
  cfg.training.eps = eps;
  cfg.training.log_every = std::max<std::uint64_t>(1, steps / 100);
}

void set_evaluation(ExperimentConfig& cfg, Scale scale) {
  cfg.evaluation.paths = scale == Scale::kFull ? 4096000 : std::size_t{1} << 18;
  cfg.evaluation.repeats = scale == Scale::kFull ? 10 : 1;
}

BenchRow finish_row(std::string label, ExperimentConfig cfg, Scale scale, double reference, std::string provenance) {
  if (scale == Scale::kDesk) apply_desk_caps(cfg);
  finalize_config(cfg);
  BenchRow row;
  row.label = std::move(label);
  row.config = std::move(cfg);
  row.reference = reference;
  row.provenance = std::move(provenance);
  return row;
}

Benchmark two_exercise(Scale scale) {
  Benchmark b{"two_exercise", "Bermudan two-exercise put on a correlated Brownian motion", scale, {}, 0};
  const std::vector<std::pair<std::size_t, double>> rows = {{1, 7.890},   {5, 7.892},   {10, 7.892}, {50, 7.890},
                                                            {100, 7.891}, {500, 7.891}, {1000, 7.892}};
  for (const auto& [d, ref] : rows) {
    if (scale == Scale::kDesk && d > 5) continue;
    ExperimentConfig cfg = base_config("two_exercise_d" + std::to_string(d), 1.0, 2);
    cfg.model.kind = "brownian";
    cfg.model.dim = d;
    cfg.model.correlation = d > 1 ? 0.1 : 0.0;
    cfg.payoff = {"bm_put", 0.02, 90.0, 0.3, 95.0, "ten_over_dim", {}};
    set_training(cfg, 500, scale == Scale::kFull ? 8192 : 2048, three_phase(5.0, 100, 300), 1e-8);
    set_evaluation(cfg, scale);
    BenchRow row = finish_row("d=" + std::to_string(d), cfg, scale, ref, "reported mean of 10 runs");
    row.tolerance = scale == Scale::kDesk ? 0.05 : 0.015;
    b.rows.push_back(std::move(row));
  }
  return b;
}

Benchmark bm_american_put(Scale scale) {
  Benchmark b{"bm_american_put", "American put-type option on a standard Brownian motion", scale, {}, 0};
  for (std::size_t d : {1, 5, 10, 50, 100, 500, 1000}) {
    if (scale == Scale::kDesk && d > 1) continue;
    ExperimentConfig cfg = base_config("bm_american_put_d" + std::to_string(d), 1.0, 50);
    cfg.model.kind = "brownian";
    cfg.model.dim = d;
    cfg.payoff = {"bm_put", 0.06, 40.0, 0.4, 40.0, "inverse_sqrt", {}};
    std::uint64_t steps = d <= 50 ? 1500 : d <= 100 ? 1800 : 3000;
    double batch = d <= 50 ? 8192 : d <= 100 ? 4096 : 2048;
    if (scale == Scale::kDesk) {
      steps = 800;
      batch = 1024;
    }
    set_training(cfg, steps, batch, thirds(steps), 1e-3);
    set_evaluation(cfg, scale);
    BenchRow row = finish_row("d=" + std::to_string(d), cfg, scale, 5.318, "CRR binomial tree, 20000 steps");
    row.tolerance = (scale == Scale::kDesk ? 0.015 : 0.005) * 5.318;
    b.rows.push_back(std::move(row));
  }
  return b;
}

Benchmark ga_put(Scale scale) {
  Benchmark b{"ga_put", "American geometric-average put on distinguishable stocks", scale, {}, 0};
  for (std::size_t d : {40, 80, 120, 160, 200}) {
    if (scale == Scale::kDesk && d > 40) continue;
    ExperimentConfig cfg = base_config("ga_put_d" + std::to_string(d), 1.0, 100);
    const double r = 0.6;
    const double sd = std::sqrt(static_cast<double>(d));
    double norm2 = 0.0;
    cfg.model.kind = "gbm";
    cfg.model.dim = d;
    cfg.model.spot = {std::pow(100.0, 1.0 / sd)};
    for (std::size_t i = 1; i <= d; ++i) {
      const double k = static_cast<double>((i - 1) % 40);
      const double beta = std::min(0.04 * k, 1.6 - 0.04 * k);
      cfg.model.vol.push_back(beta);
      norm2 += beta * beta;
    }
    const double rho = norm2 / static_cast<double>(d);
    for (std::size_t i = 1; i <= d; ++i) {
      const double delta = r - rho / static_cast<double>(d) * (static_cast<double>(i) - 0.5) - 1.0 / (5.0 * sd);
      cfg.model.drift.push_back(r - delta);
    }
    cfg.payoff.kind = "geometric_put";
    cfg.payoff.rate = r;
    cfg.payoff.strike = 95.0;
    std::uint64_t steps = d <= 120 ? 1800 : 3000;
    double batch = d <= 120 ? 8192 : 4096;
    if (scale == Scale::kDesk) {
      steps = 1500;
      batch = 512;
    }
    set_training(cfg, steps, batch, thirds(steps), 1e-8);
    set_evaluation(cfg, scale);
    BenchRow row = finish_row("d=" + std::to_string(d), cfg, scale, 6.545,
                              "CRR binomial tree of the reduced problem, 20000 steps");
    if (scale == Scale::kDesk) {
      // still climbing at the desk caps (6.13 at M=1500, J_m=2048)
      row.check = CheckKind::kLowBias;
      row.low = 0.9 * 6.545;
    } else {
      row.tolerance = 0.01 * 6.545;
    }
    b.rows.push_back(std::move(row));
  }
  return b;
}

Benchmark ga_call_corr(Scale scale) {
  Benchmark b{"ga_call_corr", "American geometric-average call on correlated stocks", scale, {}, 0};
  const std::vector<std::pair<std::size_t, double>> rows = {{3, 0.10719}, {20, 0.10033}, {100, 0.09935}};
  for (const auto& [d, ref] : rows) {
    if (scale == Scale::kDesk && d > 20) continue;
    ExperimentConfig cfg = base_config("ga_call_corr_d" + std::to_string(d), 2.0, 50);
    cfg.model.kind = "gbm";
    cfg.model.dim = d;
    cfg.model.spot = {1.0};
    cfg.model.drift = {-0.02};
    cfg.model.vol = {0.25};
    cfg.model.correlation = 0.75;
    cfg.model.orientation = "adjoint_factor";
    cfg.payoff.kind = "geometric_call";
    cfg.payoff.rate = 0.0;
    cfg.payoff.strike = 1.0;
    std::uint64_t steps = 1600;
    double batch = 8192;
    PiecewiseSchedule rate = three_phase(5.0, 400, 800);
    if (scale == Scale::kDesk) {
      steps = 800;
      batch = 1024;
      rate = thirds(steps);
    }
    set_training(cfg, steps, batch, rate, 1e-8);
    set_evaluation(cfg, scale);
    BenchRow row = finish_row("d=" + std::to_string(d), cfg, scale, ref,
                              "CRR binomial tree of the reduced problem, 20000 steps");
    row.tolerance = (scale == Scale::kDesk ? 0.02 : 0.005) * ref;
    b.rows.push_back(std::move(row));
  }
  return b;
}

Benchmark ga_call_distinct(Scale scale) {
  Benchmark b{"ga_call_distinct", "American geometric-average call on distinguishable stocks", scale, {}, 0};
  const std::vector<std::pair<std::size_t, double>> rows = {{40, 23.6883},  {80, 23.7235},  {120, 23.7357},
                                                            {160, 23.7419}, {200, 23.7456}, {400, 23.7531}};
  for (const auto& [d, ref] : rows) {
    if (scale == Scale::kDesk && d > 40) continue;
    const double dd = static_cast<double>(d);
    ExperimentConfig cfg = base_config("ga_call_distinct_d" + std::to_string(d), 3.0, 50);
    cfg.model.kind = "gbm";
    cfg.model.dim = d;
    cfg.model.spot = {100.0};
    double alpha_sum = 0.0;
    double norm2 = 0.0;
    for (std::size_t i = 1; i <= d; ++i) {
      const double k = static_cast<double>((i - 1) % 40);
      const double alpha = std::min(0.01 * k, 0.4 - 0.01 * k);
      const double beta = 0.4 * static_cast<double>(i) / dd;
      cfg.model.drift.push_back(alpha);
      cfg.model.vol.push_back(beta);
      alpha_sum += alpha;
      norm2 += beta * beta;
    }
    cfg.payoff.kind = "geometric_call";
    cfg.payoff.rate = alpha_sum / dd - (dd - 1.0) / (2.0 * dd * dd) * norm2;
    cfg.payoff.strike = 95.0;
    std::uint64_t steps = 1500;
    double batch = 8192;
    if (scale == Scale::kDesk) {
      steps = 600;
      batch = 1024;
    }
    set_training(cfg, steps, batch, thirds(steps), 1e-8);
    set_evaluation(cfg, scale);
    BenchRow row = finish_row("d=" + std::to_string(d), cfg, scale, ref,
                              "closed-form European value of the reduced problem");
    row.tolerance = (scale == Scale::kDesk ? 0.005 : 0.001) * ref;
    b.rows.push_back(std::move(row));
  }
  return b;
}

ExperimentConfig max_call_config(const std::string& name, std::size_t d, double spot) {
  ExperimentConfig cfg = base_config(name, 3.0, 9);
  cfg.model.kind = "gbm";
  cfg.model.dim = d;
  cfg.model.spot = {spot};
  cfg.model.drift = {0.05 - 0.1};
  cfg.model.vol = {0.2};
  cfg.payoff.kind = "max_call";
  cfg.payoff.rate = 0.05;
  cfg.payoff.strike = 100.0;
  return cfg;
}

Benchmark max_call_std(Scale scale) {
  Benchmark b{"max_call_std", "Bermudan max-call on independent stocks", scale, {}, 0};
  struct Entry {
    std::size_t d;
    double spot, ref, low, high;
    const char* provenance;
  };
  const char* kCi = "reported mean of 10 runs; literature 95% CI upper end as ceiling";
  const char* kMean = "reported mean of 10 runs";
  const std::vector<Entry> rows = {
      {2, 90, 8.072, 7.99, 8.082, kCi},       {2, 100, 13.899, 13.76, 13.934, kCi},
      {2, 110, 21.344, 21.13, 21.359, kCi},   {3, 90, 11.275, 11.16, 11.308, kCi},
      {3, 100, 18.687, 18.50, 18.728, kCi},   {3, 110, 27.560, 27.28, 27.663, kCi},
      {5, 90, 16.628, 16.46, 16.653, kCi},    {5, 100, 26.144, 25.90, 26.17, kCi},
      {5, 110, 36.763, 36.40, 36.798, kCi},   {10, 90, 26.200, 0, 0, kMean},
      {10, 100, 38.278, 0, 0, kMean},         {10, 110, 50.817, 0, 0, kMean},
      {20, 90, 37.697, 0, 0, kMean},          {20, 100, 51.569, 0, 0, kMean},
      {20, 110, 65.514, 0, 0, kMean},         {30, 90, 44.822, 0, 0, kMean},
      {30, 100, 59.521, 0, 0, kMean},         {30, 110, 74.231, 0, 0, kMean},
      {50, 90, 53.897, 0, 0, kMean},          {50, 100, 69.574, 0, 0, kMean},
      {50, 110, 85.256, 0, 0, kMean},         {100, 90, 66.361, 0, 0, kMean},
      {100, 100, 83.386, 0, 0, kMean},        {100, 110, 100.429, 0, 0, kMean},
      {200, 90, 78.996, 0, 0, kMean},         {200, 100, 97.411, 0, 0, kMean},
      {200, 110, 115.827, 0, 0, kMean},       {500, 90, 95.976, 0, 0, kMean},
      {500, 100, 116.249, 0, 0, kMean},       {500, 110, 136.541, 0, 0, kMean},
  };
  for (const Entry& e : rows) {
    if (scale == Scale::kDesk && e.d > 5) continue;
    const std::string tag = "d=" + std::to_string(e.d) + " xi=" + std::to_string(static_cast<int>(e.spot));
    ExperimentConfig cfg = max_call_config(
        "max_call_std_d" + std::to_string(e.d) + "_xi" + std::to_string(static_cast<int>(e.spot)), e.d, e.spot);
    const auto d = static_cast<std::uint64_t>(e.d);
    if (scale == Scale::kFull) {
      set_training(cfg, 3000 + d, 8192, three_phase(5.0, 500 + d / 5, 1500 + 3 * d / 5), 0.1);
    } else {
      set_training(cfg, 1200, 2048, three_phase(5.0, 300, 800), 0.1);
    }
    set_evaluation(cfg, scale);
    BenchRow row = finish_row(tag, cfg, scale, e.ref, e.provenance);
    if (scale == Scale::kDesk) {
      row.check = CheckKind::kRange;
      row.low = e.low;
      row.high = e.high;
    } else {
      row.tolerance = 0.03;
    }
    b.rows.push_back(std::move(row));
  }
  return b;
}

Benchmark max_call_big(Scale scale) {
  Benchmark b{"max_call_big", "High-dimensional Bermudan max-call", scale, {}, 0};
  if (scale == Scale::kFull) {
    ExperimentConfig cfg = max_call_config("max_call_big_d5000", 5000, 100.0);
    set_training(cfg, 2000, 1024, three_phase(1.0, 2000, 4000), 1e-8);
    cfg.evaluation.paths = std::size_t{1} << 20;
    cfg.evaluation.repeats = 1;
    BenchRow row = finish_row("d=5000 M=2000", cfg, scale, 165.452, "reported single run, 95% CI [165.400, 165.505]");
    row.check = CheckKind::kLowBias;
    row.low = 165.0;
    row.aside = 165.430;
    row.aside_provenance = "reported run with M=6000, used as the error reference";
    b.rows.push_back(std::move(row));
    b.curve_every = 10;
    return b;
  }
  // d = 5000 does not fit a desk budget; d = 100 stands in
  ExperimentConfig cfg = max_call_config("max_call_big_d100", 100, 100.0);
  set_training(cfg, 300, 512, three_phase(5.0, 100, 200), 0.1);
  set_evaluation(cfg, scale);
  BenchRow row = finish_row("d=100 stand-in", cfg, scale, 83.386, "reported mean of 10 runs at d=100");
  row.check = CheckKind::kLowBias;
  row.low = 0.97 * 83.386;
  b.rows.push_back(std::move(row));
  b.curve_every = 25;
  return b;
}

Benchmark max_call_equity(Scale scale) {
  Benchmark b{"max_call_equity", "Bermudan max-call on correlated non-dividend stocks", scale, {}, 0};
  struct Entry {
    std::size_t d;
    double maturity, strike, ref, european, literature;
  };
  const std::vector<Entry> rows = {
      {10, 1, 35, 10.365, 10.365, 10.36},  {10, 1, 40, 5.540, 5.540, 5.54},    {10, 1, 45, 1.897, 1.896, 1.90},
      {10, 4, 35, 16.519, 16.520, 16.53},  {10, 4, 40, 11.869, 11.870, 11.87}, {10, 4, 45, 7.801, 7.804, 7.81},
      {10, 7, 35, 20.913, 20.916, 20.92},  {10, 7, 40, 16.374, 16.374, 16.38}, {10, 7, 45, 12.271, 12.277, 12.28},
      {400, 12, 35, 55.712, 55.714, 0},    {400, 12, 40, 50.969, 50.964, 0},   {400, 12, 45, 46.233, 46.234, 0},
  };
  const double month = 30.0 / 365.0;
  for (const Entry& e : rows) {
    if (scale == Scale::kDesk && e.d > 100) continue;
    const int t = static_cast<int>(e.maturity);
    const int k = static_cast<int>(e.strike);
    ExperimentConfig cfg = base_config(
        "max_call_equity_d" + std::to_string(e.d) + "_T" + std::to_string(t) + "_K" + std::to_string(k), e.maturity, 10);
    cfg.model.kind = "gbm";
    cfg.model.dim = e.d;
    cfg.model.spot = {40.0};
    cfg.model.drift = {0.05 * month};
    cfg.model.vol = {0.4 * std::sqrt(month)};
    cfg.model.correlation = 0.5;
    cfg.model.orientation = "adjoint_factor";
    cfg.payoff.kind = "max_call";
    cfg.payoff.rate = 0.05 * month;
    cfg.payoff.strike = e.strike;
    if (scale == Scale::kFull) {
      set_training(cfg, 1600, 8192, three_phase(5.0, 400, 800), 1e-3);
    } else {
      if (t == 1) {
        set_training(cfg, 600, 2048, three_phase(5.0, 200, 400), 1e-3);
      } else {
        set_training(cfg, 1500, 2048, three_phase(5.0, 500, 1000), 1e-3);
      }
    }
    set_evaluation(cfg, scale);
    BenchRow row = finish_row("d=" + std::to_string(e.d) + " T=" + std::to_string(t) + " K=" + std::to_string(k), cfg,
                              scale, e.ref, "reported mean of 10 runs");
    // T = 7 at J0 = 2^18: standard error ~0.026, so 0.05 would be under 2 SE
    row.tolerance = scale == Scale::kDesk ? (t == 1 ? 0.03 : t == 4 ? 0.05 : 0.08) : 0.01;
    row.aside = e.european;
    row.aside_provenance = "European value, Monte Carlo with 2e10 samples";
    b.rows.push_back(std::move(row));
  }
  return b;
}

Benchmark strangle_spread(Scale scale) {
  Benchmark b{"strangle_spread", "American strangle spread on a five-stock basket", scale, {}, 0};
  ExperimentConfig cfg = base_config("strangle_spread", 1.0, 48);
  cfg.model.kind = "gbm";
  cfg.model.dim = 5;
  cfg.model.spot = {100.0};
  cfg.model.drift = {0.05};
  cfg.model.vol = {1.0};
  cfg.model.factor = {{0.3024, 0.1354, 0.0722, 0.1367, 0.1641},
                      {0.1354, 0.2270, 0.0613, 0.1264, 0.1610},
                      {0.0722, 0.0613, 0.0717, 0.0884, 0.0699},
                      {0.1367, 0.1264, 0.0884, 0.2937, 0.1394},
                      {0.1641, 0.1610, 0.0699, 0.1394, 0.2535}};
  cfg.payoff.kind = "strangle_spread";
  cfg.payoff.rate = 0.05;
  cfg.payoff.strikes = {75, 90, 110, 125};
  if (scale == Scale::kFull) {
    set_training(cfg, 750, 8192, three_phase(5.0, 250, 500), 1e-8);
  } else {
    set_training(cfg, 750, 2048, three_phase(5.0, 250, 500), 1e-8);
  }
  set_evaluation(cfg, scale);
  BenchRow row = finish_row("d=5", cfg, scale, 11.75, "literature lower bound");
  row.check = CheckKind::kRange;
  row.low = scale == Scale::kDesk ? 11.65 : 11.75;
  row.high = 11.85;
  row.aside = 11.794;
  row.aside_provenance = "reported mean of 10 runs";
  b.rows.push_back(std::move(row));
  return b;
}

Benchmark dupire_put(Scale scale) {
  Benchmark b{"dupire_put", "American basket put under a local volatility model", scale, {}, 0};
  struct Entry {
    double dividend;
    std::size_t steps;
    double ref;
  };
  const std::vector<Entry> rows = {{0.0, 5, 1.935},  {0.0, 10, 1.978}, {0.0, 50, 1.975}, {0.0, 100, 1.971},
                                   {0.1, 5, 6.301},  {0.1, 10, 6.303}, {0.1, 50, 6.304}, {0.1, 100, 6.303}};
  for (const Entry& e : rows) {
    if (scale == Scale::kDesk && e.steps > 10) continue;
    const int pct = static_cast<int>(std::lround(e.dividend * 100));
    ExperimentConfig cfg =
        base_config("dupire_put_div" + std::to_string(pct) + "_N" + std::to_string(e.steps), 1.0, e.steps);
    cfg.model.kind = "dupire";
    cfg.model.dim = 5;
    cfg.model.spot = {100.0};
    cfg.model.rate = 0.05;
    cfg.model.dividend = e.dividend;
    cfg.model.coarse_steps = 10;
    cfg.payoff.kind = "basket_put_exp";
    cfg.payoff.rate = 0.05;
    cfg.payoff.strike = 100.0;
    if (scale == Scale::kFull) {
      set_training(cfg, 1200, 8192, three_phase(5.0, 400, 800), 1e-8);
    } else {
      set_training(cfg, 1200, 2048, three_phase(5.0, 400, 800), 1e-8);
    }
    set_evaluation(cfg, scale);
    BenchRow row = finish_row("div=" + std::to_string(pct) + "% N=" + std::to_string(e.steps), cfg, scale, e.ref,
                              "reported mean of 10 runs");
    row.tolerance = (scale == Scale::kDesk ? 0.02 : 0.005) * e.ref;
    row.aside = e.dividend > 0 ? 6.304 : 1.741;
    row.aside_provenance = "European value, Monte Carlo with 1e10 samples";
    b.rows.push_back(std::move(row));
  }
  return b;
}

Benchmark ratio_derivative(Scale scale) {
  Benchmark b{"ratio_derivative", "Path-dependent ratio derivative on a single stock", scale, {}, 0};
  const std::vector<std::pair<std::size_t, double>> rows = {
      {100, 1.2721}, {150, 1.2821}, {200, 1.2894}, {250, 1.2959}, {1000, 1.3002}};
  for (const auto& [horizon, ref] : rows) {
    if (scale == Scale::kDesk && horizon > 100) continue;
    ExperimentConfig cfg = base_config("ratio_derivative_T" + std::to_string(horizon), static_cast<double>(horizon),
                                       horizon);
    cfg.model.kind = "ratio";
    cfg.model.spot = {1.0};
    cfg.model.rate = 0.0004;
    cfg.model.vol = {0.02};
    cfg.model.window = 100;
    cfg.payoff.kind = "ratio_last";
    cfg.payoff.rate = 0.0004;
    std::uint64_t steps = horizon <= 150 ? 1200 : horizon <= 250 ? 1500 : 3000;
    double batch = horizon <= 150 ? 8192 : horizon <= 250 ? 4096 : 512;
    if (scale == Scale::kDesk) {
      steps = 600;
      batch = 512;
    }
    set_training(cfg, steps, batch, thirds(steps), 1e-8);
    set_evaluation(cfg, scale);
    BenchRow row = finish_row("T=" + std::to_string(horizon), cfg, scale, ref, "reported mean of 10 runs");
    if (scale == Scale::kDesk) {
      // E[max_n payoff] on this model is about 1.251, below the reference, so
      // no stopping rule reaches it; only a lower-biased estimate is checked.
      row.check = CheckKind::kLowBias;
      row.low = 0.9 * ref;
    } else {
      row.tolerance = 0.002;
    }
    row.aside = 1.282;
    row.aside_provenance = "literature lower bound for the infinite horizon";
    b.rows.push_back(std::move(row));
  }
  return b;
}

}  // namespace

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {
      "two_exercise", "bm_american_put", "ga_put",          "ga_call_corr",    "ga_call_distinct", "max_call_std",
      "max_call_big", "max_call_equity", "strangle_spread", "dupire_put",      "ratio_derivative"};
  return names;
}

Benchmark make_benchmark(const std::string& name, Scale scale) {
  if (name == "two_exercise") return two_exercise(scale);
  if (name == "bm_american_put") return bm_american_put(scale);
  if (name == "ga_put") return ga_put(scale);
  if (name == "ga_call_corr") return ga_call_corr(scale);
  if (name == "ga_call_distinct") return ga_call_distinct(scale);
  if (name == "max_call_std") return max_call_std(scale);
  if (name == "max_call_big") return max_call_big(scale);
  if (name == "max_call_equity") return max_call_equity(scale);
  if (name == "strangle_spread") return strangle_spread(scale);
  if (name == "dupire_put") return dupire_put(scale);
  if (name == "ratio_derivative") return ratio_derivative(scale);
  std::string known;
  for (const auto& n : benchmark_names()) known += (known.empty() ? "" : ", ") + n;
  throw InvalidArgument("unknown benchmark '" + name + "' (known: " + known + ")");
}

void apply_desk_caps(ExperimentConfig& cfg) {
  if (cfg.model.dim > 100) throw InvalidArgument("desk scale caps the dimension at 100");
  cfg.training.steps = std::min<std::uint64_t>(cfg.training.steps, 1500);
  auto cap = [](PiecewiseSchedule& s) {
    for (auto& seg : s.segments) seg.second = std::min(seg.second, 2048.0);
    s.terminal = std::min(s.terminal, 2048.0);
  };
  cap(cfg.training.batch);
  cfg.evaluation.paths = std::min<std::size_t>(cfg.evaluation.paths, std::size_t{1} << 18);
}

bool check_row(const BenchRow& row, const RunReport& report) {
  for (const auto& rep : report.repeats) {
    if (!rep.objective_improved) return false;
  }
  const double mean = report.mean;
  switch (row.check) {
    case CheckKind::kWithin:
      return std::abs(mean - row.reference) <= row.tolerance;
    case CheckKind::kRange:
      return mean >= row.low && mean <= row.high;
    case CheckKind::kLowBias:
      return report.repeats.front().price.ci_low <= row.reference && mean >= row.low;
  }
  return false;
}

std::vector<BenchRowResult> run_benchmark(const Benchmark& bench, const RunOptions& options) {
  std::vector<BenchRowResult> results;
  for (const BenchRow& row : bench.rows) {
    RunOptions row_options = options;
    row_options.curve_every = bench.curve_every;
    row_options.curve_reference = row.aside.value_or(row.reference);
    if (options.console) *options.console << "running " << bench.name << " " << row.label << "\n" << std::flush;
    BenchRowResult res;
    res.row = &row;
    res.report = run_experiment(row.config, row_options);
    res.relative_error = std::abs(res.report.mean - row.reference) / std::abs(row.reference);
    res.passed = check_row(row, res.report);
    results.push_back(std::move(res));
  }
  return results;
}

void print_bench_table(std::ostream& out, const Benchmark& bench, const std::vector<BenchRowResult>& results) {
  out << bench.name << " (" << (bench.scale == Scale::kDesk ? "desk" : "full") << "): " << bench.title << "\n";
  out << std::left << std::setw(18) << "row" << std::right << std::setw(12) << "mean" << std::setw(10) << "std"
      << std::setw(12) << "reference" << std::setw(10) << "rel.err" << std::setw(11) << "runtime s" << std::setw(7)
      << "check" << "  provenance\n";
  for (const BenchRowResult& r : results) {
    const BenchRow& row = *r.row;
    out << std::left << std::setw(18) << row.label << std::right << std::setw(12) << num(r.report.mean, 5)
        << std::setw(10) << num(r.report.std_dev, 5) << std::setw(12) << num(row.reference, 5) << std::setw(10)
        << num(r.relative_error, 5) << std::setw(11) << num(r.report.runtime_seconds, 1) << std::setw(7)
        << (r.passed ? "pass" : "FAIL") << "  " << row.provenance;
    if (row.aside) out << "; " << row.aside_provenance << ": " << num(*row.aside, 5);
    for (const auto& rep : r.report.repeats) {
      if (!rep.objective_improved) {
        out << " [training objective did not improve]";
        break;
      }
    }
    out << "\n";
  }
}

}  // namespace optstop
