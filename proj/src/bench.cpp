#include "mcpa/bench.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "mcpa/problem_io.hpp"

namespace mcpa {

namespace {

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

BenchRow run_mode(const Problem& base_problem, const BenchCell& cell, SolveMode mode, int trial) {
  BenchRow row;
  row.cell = cell;
  row.mode = mode;
  row.trial = trial;
  try {
    Problem problem = base_problem;
    problem.mode = mode;
    row.observations = problem.observation_count();

    SolveReport report;
    std::vector<std::optional<Vec3>> points;
    if (mode == SolveMode::BaselineBA) {
      report = baseline_ba_solve(problem, &points);
    } else {
      report = lm_solve(problem);
      points = triangulate_all(problem, problem.poses, /*use_sot=*/true);
    }
    row.runtime_s = report.wall_time_s;
    row.hessian_bytes = report.hessian_bytes;

    std::vector<std::optional<Vec3>> gt_points(problem.tracks.size());
    for (std::size_t tk = 0; tk < problem.tracks.size(); ++tk)
      gt_points[tk] = problem.tracks[tk].world_hint;
    row.metrics = error_metrics(problem.poses, problem.gt_poses, points, gt_points, problem);
  } catch (const std::exception& e) {
    row.status = e.what();
  }
  return row;
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchSpec& spec) {
  std::vector<BenchRow> rows;
  for (std::size_t cell_index = 0; cell_index < spec.cells.size(); ++cell_index) {
    const BenchCell& cell = spec.cells[cell_index];
    for (int trial = 0; trial < spec.trials; ++trial) {
      SynthSpec synth;
      synth.rig_preset = spec.preset;
      synth.trajectory = spec.trajectory;
      synth.n_poses = cell.n_poses;
      synth.n_points = cell.n_points;
      synth.sigma_max = cell.sigma_max;
      // Isolated stream per (cell, trial).
      synth.seed = spec.seed_base + 1000003ull * cell_index + trial;
      try {
        SynthResult data = generate_problem(synth);
        data.problem.settings = spec.settings;
        finalize_tracks(data.problem, spec.strategy, synth.seed);
        for (const SolveMode mode : spec.modes)
          rows.push_back(run_mode(data.problem, cell, mode, trial));
      } catch (const std::exception& e) {
        for (const SolveMode mode : spec.modes) {
          BenchRow row;
          row.cell = cell;
          row.mode = mode;
          row.trial = trial;
          row.status = e.what();
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write bench file: " + path);
  out << "poses,points,sigma_max,mode,trial,observations,runtime_s,hessian_bytes,"
         "eps_R,eps_t,eps_X,status\n";
  for (const BenchRow& r : rows) {
    out << r.cell.n_poses << ',' << r.cell.n_points << ',' << format_double(r.cell.sigma_max)
        << ',' << to_string(r.mode) << ',' << r.trial << ',' << r.observations << ','
        << format_double(r.runtime_s) << ',' << r.hessian_bytes << ','
        << format_double(r.metrics.rot_err_rad) << ',' << format_double(r.metrics.trans_err_rel)
        << ',' << format_double(r.metrics.recon_err_m) << ',' << r.status << '\n';
  }
}

void write_bench_summary_csv(const std::vector<BenchRow>& rows, const std::string& path) {
  struct Key {
    int poses, points;
    double sigma;
    std::string mode;
    bool operator<(const Key& o) const {
      return std::tie(poses, points, sigma, mode) < std::tie(o.poses, o.points, o.sigma, o.mode);
    }
  };
  struct Agg {
    std::vector<double> runtime, bytes, eps_r, eps_t, eps_x;
  };
  std::map<Key, Agg> groups;
  for (const BenchRow& r : rows) {
    if (r.status != "ok") continue;
    Agg& a = groups[{r.cell.n_poses, r.cell.n_points, r.cell.sigma_max, to_string(r.mode)}];
    a.runtime.push_back(r.runtime_s);
    a.bytes.push_back(static_cast<double>(r.hessian_bytes));
    a.eps_r.push_back(r.metrics.rot_err_rad);
    a.eps_t.push_back(r.metrics.trans_err_rel);
    a.eps_x.push_back(r.metrics.recon_err_m);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write bench summary: " + path);
  out << "poses,points,sigma_max,mode,trials,runtime_s_median,hessian_bytes_median,"
         "eps_R_median,eps_t_median,eps_X_median\n";
  for (const auto& [key, agg] : groups) {
    out << key.poses << ',' << key.points << ',' << format_double(key.sigma) << ',' << key.mode
        << ',' << agg.runtime.size() << ',' << format_double(median(agg.runtime)) << ','
        << format_double(median(agg.bytes)) << ',' << format_double(median(agg.eps_r)) << ','
        << format_double(median(agg.eps_t)) << ',' << format_double(median(agg.eps_x)) << '\n';
  }
}

}  // namespace mcpa
