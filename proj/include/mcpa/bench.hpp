#pragma once

#include <string>
#include <vector>

#include "mcpa/optimizer.hpp"
#include "mcpa/synth.hpp"

namespace mcpa {

struct BenchCell {
  int n_poses = 50;
  int n_points = 1000;
  double sigma_max = 4.0;
};

struct BenchSpec {
  std::vector<BenchCell> cells;
  std::vector<SolveMode> modes = {SolveMode::MCPA, SolveMode::MCPALR, SolveMode::BaselineBA};
  int trials = 1;
  std::uint64_t seed_base = 0;
  RigPreset preset = RigPreset::Forward;
  TrajectoryKind trajectory = TrajectoryKind::Linear;
  SolverSettings settings;
  BaseStrategy strategy = BaseStrategy::Roundness;
};

struct BenchRow {
  BenchCell cell;
  SolveMode mode = SolveMode::MCPA;
  int trial = 0;
  std::size_t observations = 0;
  double runtime_s = 0.0;
  std::uint64_t hessian_bytes = 0;
  Metrics metrics;
  std::string status = "ok";  // failures keep the run going
};

/// One row per (cell, trial, mode); cells share the trial's generated problem
/// so every mode optimizes identical data.
std::vector<BenchRow> run_bench(const BenchSpec& spec);

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path);

/// Median aggregation over trials per (cell, mode).
void write_bench_summary_csv(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace mcpa
