#pragma once

#include "riskbo/loop.hpp"

#include <map>
#include <string>
#include <vector>

namespace riskbo {

inline constexpr const char* kCodeVersion = "0.1.0";

struct ExperimentSpec {
  std::string problem = "branin";
  ZMode z_mode = ZMode::Discrete;
  double alpha = 0.1;
  int iterations = 60;
  int repeats = 10;
  std::uint64_t master_seed = 2024;
  std::vector<std::string> algorithms = {"vucb-prob"};
  std::string out_dir;
  int workers = 0;  // 0: leave the OpenMP default
  std::string beta_kind = "practical";
  double beta_B = 1.0;
  double beta_delta = 0.1;
  int n_init = -1;  // -1: per-problem default (3, 10 for hartmann)
  int refit_every = 3;
  std::string recommend = "mean-var";
  int env_sample_count = 100;
  int metric_z_samples = 10000;
  PinballConfig pinball;
  LnsoConfig lnso;
  OptimKnobs knobs;
  LvSearchConfig lv_search;
};

// JSON file -> spec with defaults filled; unknown keys are rejected with
// the offending key path in the message.
ExperimentSpec parse_spec_file(const std::string& path);
ExperimentSpec parse_spec_text(const std::string& text);
std::string spec_to_json(const ExperimentSpec& spec);

// Flag-style overrides ("alpha" -> "0.2", ...); beats spec-file values.
void apply_overrides(ExperimentSpec& spec,
                     const std::map<std::string, std::string>& overrides);

RunConfig make_run_config(const ExperimentSpec& spec, const std::string& algo);

struct RunOutcome {
  std::string algorithm;
  std::uint64_t seed = 0;
  int repeat = 0;
  RunTrace trace;
  std::string error;  // empty on success
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  int failures = 0;
};

// Executes repeats x algorithms seeded runs on an OpenMP worker pool and
// writes trace_<alg>_<seed>.jsonl, summary.csv, fixtures and
// manifest.json under spec.out_dir. Returns nonzero failure count on
// partial failure.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Recompute summary.csv from the trace files in a directory.
void summarize_dir(const std::string& dir);

// summary.csv -> plotdata.csv (iteration, algorithm, median, lo, hi).
void emit_plotdata(const std::string& dir);

// per-(iteration, algorithm) aggregation used by both writers
struct SummaryRow {
  int iteration;
  std::string algorithm;
  double median_log10_metric;
  double p15;
  double p85;
};
std::vector<SummaryRow> summarize_traces(
    const std::vector<RunOutcome>& runs,
    const std::vector<std::string>& algorithm_order, double metric_eps);

std::string trace_to_jsonl(const RunOutcome& run, const ExperimentSpec& spec);
RunOutcome trace_from_jsonl(const std::string& text);

}  // namespace riskbo
