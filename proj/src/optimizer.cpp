#include "mcpa/optimizer.hpp"

#include <omp.h>

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <cstdlib>

#include "mcpa/triangulate.hpp"

namespace mcpa {

std::string to_string(SolveMode mode) {
  switch (mode) {
    case SolveMode::MCPA: return "mcpa";
    case SolveMode::MCPALR: return "mcpalr";
    case SolveMode::BaselineBA: return "ba";
  }
  return "mcpa";
}

std::optional<SolveMode> solve_mode_from_string(const std::string& name) {
  if (name == "mcpa") return SolveMode::MCPA;
  if (name == "mcpalr") return SolveMode::MCPALR;
  if (name == "ba") return SolveMode::BaselineBA;
  return std::nullopt;
}

std::size_t Problem::observation_count() const {
  std::size_t n = 0;
  for (const Track& t : tracks) n += t.observations.size();
  return n;
}

int thread_count() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("MCPA_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0 && cap < n) n = cap;
  }
  return n;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Visits every pose-only residual of one track; fn(ResidualBlock) must accept
// the block. Returns the number of residuals skipped as degenerate.
template <typename Fn>
int for_each_residual(const Problem& problem, const Track& track, std::span<const Pose> poses,
                      bool with_jacobians, Fn&& fn) {
  int dropped = 0;
  if (!track.base.valid()) return 0;
  const bool both = problem.mode == SolveMode::MCPALR;
  for (int i = 0; i < track.size(); ++i) {
    if (i != track.base.l) {
      if (auto block = residual_left(track, i, poses, with_jacobians))
        fn(*block);
      else
        ++dropped;
    }
    if (both && i != track.base.r) {
      if (auto block = residual_right(track, i, poses, with_jacobians))
        fn(*block);
      else
        ++dropped;
    }
  }
  return dropped;
}

struct Accumulator {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double cost = 0.0;
  int dropped = 0;

  void init(int dim, bool with_hessian) {
    if (with_hessian) {
      H.setZero(dim, dim);
      g.setZero(dim);
    }
    cost = 0.0;
    dropped = 0;
  }

  void add(const ResidualBlock& block, bool with_hessian) {
    cost += block.e.squaredNorm();
    if (!with_hessian) return;
    ResidualBlock::PoseBlock pb[3];
    const int n = block.pose_blocks(pb);
    for (int a = 0; a < n; ++a) {
      g.segment<6>(6 * pb[a].pose_id) -= pb[a].jac.transpose() * block.e;
      for (int b = 0; b < n; ++b) {
        H.block<6, 6>(6 * pb[a].pose_id, 6 * pb[b].pose_id) +=
            pb[a].jac.transpose() * pb[b].jac;
      }
    }
  }
};

// Occupied 6x6 blocks of the lower triangle, before the gauge clamp.
std::uint64_t occupied_block_bytes(const Eigen::MatrixXd& H) {
  const int blocks = static_cast<int>(H.rows()) / 6;
  std::uint64_t occupied = 0;
  for (int a = 0; a < blocks; ++a)
    for (int b = 0; b <= a; ++b)
      if (!H.block<6, 6>(6 * a, 6 * b).isZero(0.0)) ++occupied;
  return occupied * 36 * sizeof(double);
}

void clamp_gauge(Eigen::MatrixXd& H, Eigen::VectorXd& g) {
  H.topRows<6>().setZero();
  H.leftCols<6>().setZero();
  H.topLeftCorner<6, 6>().setIdentity();
  g.head<6>().setZero();
}

// Shared accumulation core. Hessian accumulation allocates one dense copy per
// thread; callers pass Serial when that is unwanted.
void accumulate(const Problem& problem, std::span<const Pose> poses, bool with_hessian,
                ExecutionPolicy policy, Accumulator& out) {
  const int dim = 6 * problem.pose_count();
  out.init(dim, with_hessian);
  const int n_tracks = static_cast<int>(problem.tracks.size());

  if (policy == ExecutionPolicy::Serial) {
    for (int tk = 0; tk < n_tracks; ++tk) {
      out.dropped += for_each_residual(problem, problem.tracks[tk], poses, with_hessian,
                                       [&](const ResidualBlock& b) { out.add(b, with_hessian); });
    }
    return;
  }

  const int n_threads = thread_count();
  std::vector<Accumulator> partial(n_threads);
  for (auto& acc : partial) acc.init(dim, with_hessian);
#pragma omp parallel for schedule(static) num_threads(n_threads)
  for (int tk = 0; tk < n_tracks; ++tk) {
    Accumulator& acc = partial[omp_get_thread_num()];
    acc.dropped += for_each_residual(problem, problem.tracks[tk], poses, with_hessian,
                                     [&](const ResidualBlock& b) { acc.add(b, with_hessian); });
  }
  // Combine in thread order so repeated runs sum in the same order.
  for (const Accumulator& acc : partial) {
    out.cost += acc.cost;
    out.dropped += acc.dropped;
    if (with_hessian) {
      out.H += acc.H;
      out.g += acc.g;
    }
  }
}

}  // namespace

double build_cost(const Problem& problem, std::span<const Pose> poses, ExecutionPolicy policy,
                  int* dropped_residuals) {
  Accumulator acc;
  accumulate(problem, poses, /*with_hessian=*/false, policy, acc);
  if (dropped_residuals) *dropped_residuals = acc.dropped;
  return acc.cost;
}

double build_cost(const Problem& problem) { return build_cost(problem, problem.poses); }

NormalEquations build_normal_equations(const Problem& problem, std::span<const Pose> poses,
                                       ExecutionPolicy policy) {
  Accumulator acc;
  accumulate(problem, poses, /*with_hessian=*/true, policy, acc);
  NormalEquations ne;
  ne.cost = acc.cost;
  ne.dropped_residuals = acc.dropped;
  ne.block_bytes = occupied_block_bytes(acc.H);
  ne.dense_bytes = static_cast<std::uint64_t>(acc.H.rows()) * acc.H.rows() * sizeof(double);
  clamp_gauge(acc.H, acc.g);
  ne.H = std::move(acc.H);
  ne.g = std::move(acc.g);
  return ne;
}

NormalEquations build_normal_equations(const Problem& problem) {
  return build_normal_equations(problem, problem.poses);
}

namespace {

std::vector<Pose> apply_step(std::span<const Pose> poses, const Eigen::VectorXd& delta) {
  std::vector<Pose> out(poses.begin(), poses.end());
  for (std::size_t k = 1; k < out.size(); ++k) {
    Perturbation d;
    d.phi = delta.segment<3>(6 * k);
    d.dt = delta.segment<3>(6 * k + 3);
    out[k] = apply_right_perturbation(out[k], d);
    out[k].R = project_to_so3(out[k].R);  // bound orthonormality drift
  }
  return out;
}

}  // namespace

SolveReport lm_solve(Problem& problem, ExecutionPolicy policy) {
  const auto start = Clock::now();
  SolveReport report;
  std::vector<Pose> poses = problem.poses;

  double cost = build_cost(problem, poses, policy);
  report.initial_cost = cost;
  report.final_cost = cost;

  const SolverSettings& s = problem.settings;
  double lambda = s.lambda_init;
  report.status = SolveStatus::MaxIterations;

  for (int iter = 1; iter <= s.max_iters; ++iter) {
    report.iterations = iter;
    NormalEquations ne = build_normal_equations(problem, poses, policy);
    report.hessian_bytes = std::max(report.hessian_bytes, ne.block_bytes);
    report.hessian_dense_bytes = ne.dense_bytes;
    report.dropped_tracks = ne.dropped_residuals;

    if (ne.g.lpNorm<Eigen::Infinity>() < s.gradient_tol) {
      report.status = SolveStatus::SmallGradient;
      break;
    }

    bool accepted = false;
    int consecutive_solver_failures = 0;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      const auto attempt_start = Clock::now();
      Eigen::MatrixXd damped = ne.H;
      damped.diagonal() += lambda * ne.H.diagonal();
      const Eigen::LLT<Eigen::MatrixXd> llt(damped);
      double new_cost = std::numeric_limits<double>::infinity();
      std::vector<Pose> candidate;
      bool solver_ok = llt.info() == Eigen::Success;
      if (solver_ok) {
        Eigen::VectorXd delta = llt.solve(ne.g);
        delta.head<6>().setZero();  // gauge anchor
        solver_ok = delta.allFinite();
        if (solver_ok) {
          candidate = apply_step(poses, delta);
          new_cost = build_cost(problem, candidate, policy);
        }
      }
      accepted = solver_ok && new_cost < cost;
      report.trace.push_back({iter, accepted ? new_cost : cost, lambda, accepted,
                              1e3 * seconds_since(attempt_start)});
      if (accepted) {
        poses = std::move(candidate);
        cost = new_cost;
        lambda /= s.lambda_down;
        ++report.accepted_steps;
      } else {
        lambda *= s.lambda_up;
        consecutive_solver_failures = solver_ok ? 0 : consecutive_solver_failures + 1;
        if (consecutive_solver_failures >= 10) {
          report.status = SolveStatus::LinearSolveFailure;
          break;
        }
      }
    }
    if (report.status == SolveStatus::LinearSolveFailure) break;
    if (!accepted) {
      report.status = SolveStatus::Stalled;
      break;
    }
    const double prev = report.final_cost;
    report.final_cost = cost;
    if (std::abs(prev - cost) <= s.cost_rel_tol * std::max(prev, 1e-300)) {
      report.status = SolveStatus::Converged;
      break;
    }
  }
  report.final_cost = cost;
  problem.poses = poses;
  report.wall_time_s = seconds_since(start);
  return report;
}

std::vector<std::optional<Vec3>> triangulate_all(const Problem& problem,
                                                 std::span<const Pose> poses, bool use_sot,
                                                 ExecutionPolicy policy) {
  const int n = static_cast<int>(problem.tracks.size());
  std::vector<std::optional<Vec3>> points(n);
  const auto solve_one = [&](int tk) {
    const Track& track = problem.tracks[tk];
    const auto result =
        use_sot ? triangulate_sot(track, poses) : triangulate_midpoint(track, poses);
    if (result) points[tk] = result->point;
  };
  if (policy == ExecutionPolicy::Serial) {
    for (int tk = 0; tk < n; ++tk) solve_one(tk);
  } else {
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (int tk = 0; tk < n; ++tk) solve_one(tk);
  }
  return points;
}

FinalizeStats finalize_tracks(Problem& problem, BaseStrategy strategy, std::uint64_t seed) {
  FinalizeStats stats;
  const int n = static_cast<int>(problem.tracks.size());
  std::vector<signed char> verdict(n, 0);  // 0 keep, 1 few obs, 2 no pair, 3 depth

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int tk = 0; tk < n; ++tk) {
    Track& track = problem.tracks[tk];
    if (track.size() < 2) {
      verdict[tk] = 1;
      continue;
    }
    const auto base = select_bases(track, problem.poses, strategy, seed + tk);
    if (!base) {
      verdict[tk] = 2;
      continue;
    }
    track.base = *base;
    const ObservationRay& obs_l = track.observations[base->l];
    const auto scale = scale_left(obs_l, track.observations[base->r],
                                  problem.poses[obs_l.pose_id],
                                  problem.poses[track.observations[base->r].pose_id]);
    if (!scale) {
      verdict[tk] = 2;
      continue;
    }
    // Cheirality: the implied point must lie at positive depth along every
    // observation of the track.
    const Vec3 X = reconstruct_from_base(obs_l, problem.poses[obs_l.pose_id], scale->s);
    for (const ObservationRay& obs : track.observations) {
      const double depth = obs.f.dot(problem.poses[obs.pose_id].to_body(X) - obs.v);
      if (depth <= 0.0) {
        verdict[tk] = 3;
        break;
      }
    }
  }

  std::vector<Track> kept;
  kept.reserve(n);
  for (int tk = 0; tk < n; ++tk) {
    switch (verdict[tk]) {
      case 0: kept.push_back(std::move(problem.tracks[tk])); break;
      case 1: ++stats.too_few_observations; break;
      case 2: ++stats.no_valid_pair; break;
      default: ++stats.negative_depth; break;
    }
  }
  problem.tracks = std::move(kept);
  stats.kept = static_cast<int>(problem.tracks.size());
  return stats;
}

Metrics error_metrics(std::span<const Pose> est_poses, std::span<const Pose> gt_poses,
                      std::span<const std::optional<Vec3>> est_points,
                      std::span<const std::optional<Vec3>> gt_points, const Problem& problem) {
  Metrics m;
  const int n = static_cast<int>(est_poses.size());
  int translation_terms = 0;
  for (int i = 0; i < n; ++i) {
    const double c = std::clamp((gt_poses[i].R * est_poses[i].R.transpose()).trace() * 0.5 - 0.5,
                                -1.0, 1.0);
    m.rot_err_rad += std::acos(c);
    const double dt = (gt_poses[i].t - est_poses[i].t).norm();
    m.trans_err_abs_m += dt;
    const double gt_norm = gt_poses[i].t.norm();
    if (gt_norm < 1e-12) {
      ++m.excluded_translations;
    } else {
      m.trans_err_rel += dt / gt_norm;
      ++translation_terms;
    }
  }
  if (n > 0) {
    m.rot_err_rad /= n;
    m.trans_err_abs_m /= n;
  }
  if (translation_terms > 0) m.trans_err_rel /= translation_terms;

  std::size_t reproj_terms = 0;
  for (std::size_t tk = 0; tk < problem.tracks.size(); ++tk) {
    const bool has_est = tk < est_points.size() && est_points[tk].has_value();
    if (has_est && tk < gt_points.size() && gt_points[tk].has_value()) {
      m.recon_err_m += (*est_points[tk] - *gt_points[tk]).norm();
      ++m.compared_points;
    }
    if (!has_est) continue;
    for (const ObservationRay& obs : problem.tracks[tk].observations) {
      const auto proj =
          project(problem.rig, obs.camera_id, est_poses[obs.pose_id], *est_points[tk]);
      if (!proj) continue;
      m.reproj_err_px += (proj->pixel - obs.pixel).norm();
      ++reproj_terms;
    }
  }
  if (m.compared_points > 0) m.recon_err_m /= m.compared_points;
  if (reproj_terms > 0) m.reproj_err_px /= static_cast<double>(reproj_terms);
  return m;
}

}  // namespace mcpa
