#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "mcpa/bench.hpp"
#include "mcpa/optimizer.hpp"
#include "mcpa/problem_io.hpp"
#include "mcpa/synth.hpp"
#include "mcpa/triangulate.hpp"

namespace {

using namespace mcpa;

const char* status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::SmallGradient: return "small_gradient";
    case SolveStatus::Stalled: return "stalled";
    case SolveStatus::LinearSolveFailure: return "linear_solve_failure";
  }
  return "unknown";
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (const char c : text) {
    if (c == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  return parts;
}

struct SynthArgs {
  std::string preset = "forward";
  std::string trajectory = "linear";
  int poses = 50;
  int points = 1000;
  double sigma_max = 0.0;
  double rot_perturb = 2.0;
  double trans_perturb = 0.5;
  double step = 2.0;
  double radius = 100.0;
  std::uint64_t seed = 0;
  std::string out;
};

SynthSpec to_spec(const SynthArgs& a) {
  SynthSpec spec;
  const auto preset = rig_preset_from_string(a.preset);
  const auto trajectory = trajectory_from_string(a.trajectory);
  if (!preset) throw CLI::ValidationError("--preset must be forward or omni");
  if (!trajectory) throw CLI::ValidationError("--trajectory must be linear or curve");
  spec.rig_preset = *preset;
  spec.trajectory = *trajectory;
  spec.n_poses = a.poses;
  spec.n_points = a.points;
  spec.sigma_max = a.sigma_max;
  spec.rot_perturb_deg = a.rot_perturb;
  spec.trans_perturb_m = a.trans_perturb;
  spec.linear_step_m = a.step;
  spec.curve_radius_m = a.radius;
  spec.seed = a.seed;
  return spec;
}

int run_synth(const SynthArgs& args) {
  const SynthResult result = generate_problem(to_spec(args));
  write_problem(result.problem, args.out);
  std::cout << "wrote " << args.out << ": " << result.problem.pose_count() << " poses, "
            << result.problem.tracks.size() << " tracks, "
            << result.problem.observation_count() << " observations\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose-only pose adjustment for calibrated multi-camera rigs"};
  app.require_subcommand(1);

  // ---- synth ----
  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic problem file");
  synth->add_option("--preset", synth_args.preset, "Rig preset: forward|omni");
  synth->add_option("--trajectory", synth_args.trajectory, "Trajectory: linear|curve");
  synth->add_option("--poses", synth_args.poses, "Number of rig poses");
  synth->add_option("--points", synth_args.points, "Number of scene points");
  synth->add_option("--sigma-max", synth_args.sigma_max, "Max pixel noise std (px)");
  synth->add_option("--rot-perturb", synth_args.rot_perturb, "Initial rotation offset (deg)");
  synth->add_option("--trans-perturb", synth_args.trans_perturb, "Initial translation std (m)");
  synth->add_option("--step", synth_args.step, "Linear trajectory step (m)");
  synth->add_option("--radius", synth_args.radius, "Curve trajectory radius (m)");
  synth->add_option("--seed", synth_args.seed, "RNG seed");
  synth->add_option("--out", synth_args.out, "Output problem file")->required();

  // ---- select-bases ----
  std::string sb_in, sb_out, sb_update, sb_strategy = "roundness";
  std::uint64_t sb_seed = 0;
  CLI::App* select = app.add_subcommand("select-bases", "Select base observations per track");
  select->add_option("--in", sb_in, "Problem file")->required();
  select->add_option("--out", sb_out, "Output CSV (track_id,left,right)")->required();
  select->add_option("--update", sb_update, "Also write the problem with bases filled in");
  select->add_option("--base-strategy", sb_strategy,
                     "roundness|max-theta|max-disparity|random|first");
  select->add_option("--seed", sb_seed, "Seed for the random strategy");

  // ---- optimize ----
  std::string opt_in, opt_mode = "mcpa", opt_report, opt_summary, opt_poses_out;
  std::string opt_strategy = "roundness";
  std::uint64_t opt_seed = 0;
  SolverSettings opt_settings;
  bool opt_serial = false;
  CLI::App* optimize = app.add_subcommand("optimize", "Run pose adjustment");
  optimize->add_option("--in", opt_in, "Problem file")->required();
  optimize->add_option("--mode", opt_mode, "mcpa|mcpalr|ba");
  optimize->add_option("--max-iters", opt_settings.max_iters, "LM iteration cap");
  optimize->add_option("--lambda-init", opt_settings.lambda_init, "Initial LM damping");
  optimize->add_option("--cost-rel-tol", opt_settings.cost_rel_tol, "Relative cost tolerance");
  optimize->add_option("--gradient-tol", opt_settings.gradient_tol, "Gradient tolerance");
  optimize->add_option("--seed", opt_seed, "Seed for the random base strategy");
  optimize->add_option("--base-strategy", opt_strategy,
                       "roundness|max-theta|max-disparity|random|first");
  optimize->add_option("--report", opt_report, "Per-iteration CSV");
  optimize->add_option("--summary", opt_summary, "Summary JSON (metrics, Hessian bytes)");
  optimize->add_option("--poses-out", opt_poses_out, "Optimized poses JSON");
  optimize->add_flag("--serial", opt_serial, "Single-threaded evaluation");

  // ---- triangulate ----
  std::string tri_in, tri_poses, tri_out, tri_method = "sot";
  CLI::App* triangulate = app.add_subcommand("triangulate", "Reconstruct points per track");
  triangulate->add_option("--in", tri_in, "Problem file")->required();
  triangulate->add_option("--poses", tri_poses, "Poses JSON (defaults to the problem's poses)");
  triangulate->add_option("--method", tri_method, "sot|midpoint");
  triangulate->add_option("--out", tri_out, "Output CSV (track_id,x,y,z)")->required();

  // ---- bench ----
  std::string bench_poses = "50", bench_points = "1000", bench_sigmas = "4";
  std::string bench_modes = "mcpa,mcpalr,ba", bench_out, bench_summary;
  std::string bench_preset = "forward", bench_trajectory = "linear";
  std::string bench_strategy = "roundness";
  int bench_trials = 1, bench_max_iters = 10;
  std::uint64_t bench_seed = 0;
  CLI::App* bench = app.add_subcommand("bench", "Grid comparison of solvers");
  bench->add_option("--poses", bench_poses, "Comma list of pose counts");
  bench->add_option("--points", bench_points, "Comma list of point counts");
  bench->add_option("--sigma-max", bench_sigmas, "Comma list of max pixel noise (px)");
  bench->add_option("--modes", bench_modes, "Comma list from mcpa,mcpalr,ba");
  bench->add_option("--trials", bench_trials, "Trials per cell");
  bench->add_option("--seed", bench_seed, "Base seed");
  bench->add_option("--preset", bench_preset, "Rig preset: forward|omni");
  bench->add_option("--trajectory", bench_trajectory, "linear|curve");
  bench->add_option("--base-strategy", bench_strategy, "Base selection strategy");
  bench->add_option("--max-iters", bench_max_iters, "LM iteration cap");
  bench->add_option("--out", bench_out, "Raw CSV output")->required();
  bench->add_option("--summary", bench_summary, "Median summary CSV");

  // ---- import-colmap ----
  std::string ic_dir, ic_rig, ic_map, ic_out;
  CLI::App* import = app.add_subcommand("import-colmap", "Import a COLMAP text model");
  import->add_option("--dir", ic_dir, "Directory with cameras.txt/images.txt/points3D.txt")
      ->required();
  import->add_option("--rig", ic_rig, "Rig config JSON")->required();
  import->add_option("--rig-map", ic_map, "Image-to-(pose,camera) map JSON")->required();
  import->add_option("--out", ic_out, "Output problem file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(synth_args);

    if (*select) {
      Problem problem = read_problem(sb_in);
      const auto strategy = base_strategy_from_string(sb_strategy);
      if (!strategy) throw std::runtime_error("unknown base strategy: " + sb_strategy);
      const FinalizeStats stats = finalize_tracks(problem, *strategy, sb_seed);
      write_bases_csv(problem.tracks, sb_out);
      if (!sb_update.empty()) write_problem(problem, sb_update);
      std::cout << "selected bases for " << stats.kept << " tracks ("
                << stats.no_valid_pair << " without a valid pair, " << stats.negative_depth
                << " behind-camera)\n";
      return 0;
    }

    if (*optimize) {
      Problem problem = read_problem(opt_in);
      const auto mode = solve_mode_from_string(opt_mode);
      if (!mode) throw std::runtime_error("unknown mode: " + opt_mode);
      const auto strategy = base_strategy_from_string(opt_strategy);
      if (!strategy) throw std::runtime_error("unknown base strategy: " + opt_strategy);
      problem.mode = *mode;
      problem.settings = opt_settings;
      const ExecutionPolicy policy =
          opt_serial ? ExecutionPolicy::Serial : ExecutionPolicy::Parallel;

      const FinalizeStats stats = finalize_tracks(problem, *strategy, opt_seed);
      SolveReport report;
      std::vector<std::optional<Vec3>> points;
      if (*mode == SolveMode::BaselineBA) {
        report = baseline_ba_solve(problem, &points, policy);
      } else {
        report = lm_solve(problem, policy);
        points = triangulate_all(problem, problem.poses, /*use_sot=*/true, policy);
      }
      std::cout << to_string(*mode) << ": " << status_name(report.status) << " after "
                << report.iterations << " iterations, cost " << report.initial_cost << " -> "
                << report.final_cost << " (" << report.wall_time_s << " s)\n";

      if (!opt_report.empty()) write_report_csv(report, opt_report);
      if (!opt_poses_out.empty()) write_poses(problem.poses, opt_poses_out);
      if (!opt_summary.empty()) {
        nlohmann::ordered_json j;
        j["mode"] = to_string(*mode);
        j["status"] = status_name(report.status);
        j["iterations"] = report.iterations;
        j["accepted_steps"] = report.accepted_steps;
        j["initial_cost"] = report.initial_cost;
        j["final_cost"] = report.final_cost;
        j["hessian_bytes"] = report.hessian_bytes;
        j["hessian_dense_bytes"] = report.hessian_dense_bytes;
        j["poses"] = problem.pose_count();
        j["tracks"] = problem.tracks.size();
        j["observations"] = problem.observation_count();
        j["tracks_dropped"] =
            stats.no_valid_pair + stats.negative_depth + stats.too_few_observations;
        if (!problem.gt_poses.empty()) {
          std::vector<std::optional<Vec3>> gt_points(problem.tracks.size());
          for (std::size_t tk = 0; tk < problem.tracks.size(); ++tk)
            gt_points[tk] = problem.tracks[tk].world_hint;
          const Metrics m =
              error_metrics(problem.poses, problem.gt_poses, points, gt_points, problem);
          j["metrics"] = {{"rot_err_rad", m.rot_err_rad},
                          {"trans_err_rel", m.trans_err_rel},
                          {"trans_err_abs_m", m.trans_err_abs_m},
                          {"reproj_err_px", m.reproj_err_px},
                          {"recon_err_m", m.recon_err_m}};
        }
        std::ofstream out(opt_summary, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write summary: " + opt_summary);
        out << j.dump(1) << "\n";
      }
      return 0;
    }

    if (*triangulate) {
      Problem problem = read_problem(tri_in);
      if (!tri_poses.empty()) {
        auto poses = read_poses(tri_poses);
        if (poses.size() != problem.poses.size())
          throw std::runtime_error("poses file count does not match the problem");
        problem.poses = std::move(poses);
      }
      if (tri_method != "sot" && tri_method != "midpoint")
        throw std::runtime_error("unknown method: " + tri_method);
      const auto points =
          triangulate_all(problem, problem.poses, /*use_sot=*/tri_method == "sot");
      write_points_csv(points, tri_out);
      std::size_t solved = 0;
      for (const auto& p : points) solved += p.has_value();
      std::cout << "triangulated " << solved << "/" << points.size() << " tracks\n";
      return 0;
    }

    if (*bench) {
      BenchSpec spec;
      spec.cells.clear();
      for (const std::string& p : split(bench_poses, ','))
        for (const std::string& m : split(bench_points, ','))
          for (const std::string& s : split(bench_sigmas, ','))
            spec.cells.push_back({std::stoi(p), std::stoi(m), std::stod(s)});
      spec.modes.clear();
      for (const std::string& m : split(bench_modes, ',')) {
        const auto mode = solve_mode_from_string(m);
        if (!mode) throw std::runtime_error("unknown mode: " + m);
        spec.modes.push_back(*mode);
      }
      const auto preset = rig_preset_from_string(bench_preset);
      const auto trajectory = trajectory_from_string(bench_trajectory);
      const auto strategy = base_strategy_from_string(bench_strategy);
      if (!preset || !trajectory) throw std::runtime_error("bad preset/trajectory");
      if (!strategy) throw std::runtime_error("unknown base strategy: " + bench_strategy);
      spec.preset = *preset;
      spec.trajectory = *trajectory;
      spec.strategy = *strategy;
      spec.trials = bench_trials;
      spec.seed_base = bench_seed;
      spec.settings.max_iters = bench_max_iters;
      const auto rows = run_bench(spec);
      write_bench_csv(rows, bench_out);
      if (!bench_summary.empty()) write_bench_summary_csv(rows, bench_summary);
      std::cout << "bench: " << rows.size() << " rows -> " << bench_out << "\n";
      return 0;
    }

    if (*import) {
      const RigConfig rig = load_rig(ic_rig);
      const RigMap map = load_rig_map(ic_map);
      const Problem problem = import_colmap_text(ic_dir, rig, map);
      write_problem(problem, ic_out);
      std::cout << "imported " << problem.pose_count() << " poses, " << problem.tracks.size()
                << " tracks, " << problem.observation_count() << " observations\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
