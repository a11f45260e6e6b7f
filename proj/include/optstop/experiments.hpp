#pragma once

#include "optstop/config.hpp"
#include "optstop/training.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace optstop {

struct RunOptions {
  bool write_artifacts = true;  // files under cfg.output
  std::ostream* console = nullptr;
  // Figure-style curve: every `curve_every` steps the current policy is
  // priced on `curve_paths` paths and (step, price, relative error) logged.
  std::uint64_t curve_every = 0;
  std::size_t curve_paths = 1 << 14;
  double curve_reference = 0.0;
};

struct RepeatResult {
  std::uint64_t seed = 0;
  PriceEstimate price;
  double runtime_seconds = 0.0;
  bool objective_improved = true;  // trailing-100 mean of phi at M above the one at step 100
};

struct RunReport {
  std::vector<RepeatResult> repeats;
  double mean = 0.0;        // over repeats
  double std_dev = 0.0;     // uncorrected, over repeats
  double runtime_seconds = 0.0;  // average per repeat
  StoppingPolicy policy;    // from the first repeat
  std::vector<LogRecord> log;
};

/// Seed of repeat r: the config seed for r = 0, then derived seeds.
std::uint64_t repeat_seed(std::uint64_t seed, std::size_t r);

/// Trains and prices `repeats` times. With write_artifacts, writes
/// training_log.csv, price.csv, repeats.csv, policy.bin and config.ini
/// (plus curve.csv when requested) into cfg.output.
RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Text of the price line printed after a run.
std::string price_line(const ExperimentConfig& cfg, const RunReport& report);

enum class Scale { kDesk, kFull };

enum class CheckKind {
  kWithin,   // |mean - reference| <= tolerance
  kRange,    // low <= mean <= high
  kLowBias,  // ci_low <= reference and mean >= low
};

struct BenchRow {
  std::string label;
  ExperimentConfig config;
  double reference = 0.0;
  std::string provenance;
  CheckKind check = CheckKind::kWithin;
  double tolerance = 0.0;
  double low = 0.0;
  double high = 0.0;
  // a second quoted value, e.g. a European price or a literature bound
  std::optional<double> aside;
  std::string aside_provenance;
};

struct Benchmark {
  std::string name;
  std::string title;
  Scale scale = Scale::kDesk;
  std::vector<BenchRow> rows;
  std::uint64_t curve_every = 0;
};

/// Registered ids, in display order.
const std::vector<std::string>& benchmark_names();

/// Throws InvalidArgument for an unknown id.
Benchmark make_benchmark(const std::string& name, Scale scale);

/// Caps applied at desk scale: d <= 100, M <= 1500, J_m <= 2048, J0 <= 2^18.
void apply_desk_caps(ExperimentConfig& cfg);

struct BenchRowResult {
  const BenchRow* row = nullptr;
  RunReport report;
  double relative_error = 0.0;
  bool passed = false;
};

/// True when the row's check accepts the report and every repeat's training
/// objective improved.
bool check_row(const BenchRow& row, const RunReport& report);

std::vector<BenchRowResult> run_benchmark(const Benchmark& bench, const RunOptions& options);

/// Human table followed by nothing else; CSV goes to bench.csv when
/// artifacts are written.
void print_bench_table(std::ostream& out, const Benchmark& bench, const std::vector<BenchRowResult>& results);

}  // namespace optstop
