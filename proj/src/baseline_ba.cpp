#include <omp.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>

#include "mcpa/optimizer.hpp"
#include "mcpa/triangulate.hpp"

// MultiCol-style baseline: joint pose + point refinement minimizing the 2D
// reprojection error, with Schur elimination of the point blocks.

namespace mcpa {

namespace {

using Clock = std::chrono::steady_clock;
using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct ObsJacobian {
  Vec2 r;
  Mat26 J_pose;
  Mat23 J_point;
  int pose_id;
  bool valid = false;
};

ObsJacobian evaluate_observation(const RigConfig& rig, const ObservationRay& obs,
                                 const Pose& pose, const Vec3& X, bool with_jacobians) {
  ObsJacobian out;
  out.pose_id = obs.pose_id;
  const Camera& cam = rig.cameras[obs.camera_id];
  const Mat3 Rc_t = cam.extrinsics.R.transpose();
  const Vec3 x_cam = Rc_t * (pose.to_body(X) - cam.extrinsics.t);
  const double z = x_cam.z();
  if (z <= 1e-9) return out;  // behind camera: no contribution this iteration
  const CameraIntrinsics& k = cam.intrinsics;
  out.r = Vec2(k.fx * x_cam.x() / z + k.cx, k.fy * x_cam.y() / z + k.cy) - obs.pixel;
  out.valid = true;
  if (!with_jacobians) return out;
  Mat23 dr_dxc;
  dr_dxc << k.fx / z, 0.0, -k.fx * x_cam.x() / (z * z),
            0.0, k.fy / z, -k.fy * x_cam.y() / (z * z);
  out.J_pose.leftCols<3>() = dr_dxc * (-Rc_t * pose.R * skew(X));
  out.J_pose.rightCols<3>() = dr_dxc * Rc_t;
  out.J_point = dr_dxc * (Rc_t * pose.R);
  return out;
}

// Per-point (track) normal-equation pieces; cross blocks keyed by pose id.
struct PointBlocks {
  Mat3 Hll = Mat3::Zero();
  Vec3 gl = Vec3::Zero();
  std::vector<std::pair<int, Mat63>> cross;  // sorted by pose id
  bool active = false;

  Mat63& cross_block(int pose_id) {
    for (auto& [id, block] : cross)
      if (id == pose_id) return block;
    cross.emplace_back(pose_id, Mat63::Zero());
    return cross.back().second;
  }
};

struct BaState {
  Eigen::MatrixXd Hpp;
  Eigen::VectorXd gp;
  std::vector<PointBlocks> points;
  double cost = 0.0;
  int behind_camera = 0;
};

double ba_cost(const Problem& problem, std::span<const Pose> poses,
               std::span<const std::optional<Vec3>> points, ExecutionPolicy policy,
               int* behind = nullptr) {
  const int n_tracks = static_cast<int>(problem.tracks.size());
  const int n_threads = policy == ExecutionPolicy::Serial ? 1 : thread_count();
  std::vector<double> partial(n_threads, 0.0);
  std::vector<int> skipped(n_threads, 0);
#pragma omp parallel for schedule(static) num_threads(n_threads)
  for (int tk = 0; tk < n_tracks; ++tk) {
    if (!points[tk]) continue;
    const int tid = omp_get_thread_num();
    for (const ObservationRay& obs : problem.tracks[tk].observations) {
      const auto ev = evaluate_observation(problem.rig, obs, poses[obs.pose_id], *points[tk],
                                           /*with_jacobians=*/false);
      if (ev.valid)
        partial[tid] += ev.r.squaredNorm();
      else
        ++skipped[tid];
    }
  }
  double cost = 0.0;
  int behind_total = 0;
  for (int t = 0; t < n_threads; ++t) {
    cost += partial[t];
    behind_total += skipped[t];
  }
  if (behind) *behind = behind_total;
  return cost;
}

void ba_accumulate(const Problem& problem, std::span<const Pose> poses,
                   std::span<const std::optional<Vec3>> points, ExecutionPolicy policy,
                   BaState& state) {
  const int dim = 6 * problem.pose_count();
  const int n_tracks = static_cast<int>(problem.tracks.size());
  state.points.assign(n_tracks, PointBlocks{});
  state.cost = 0.0;
  state.behind_camera = 0;

  const int n_threads = policy == ExecutionPolicy::Serial ? 1 : thread_count();
  std::vector<Eigen::MatrixXd> Hpp(n_threads, Eigen::MatrixXd::Zero(dim, dim));
  std::vector<Eigen::VectorXd> gp(n_threads, Eigen::VectorXd::Zero(dim));
  std::vector<double> cost(n_threads, 0.0);
  std::vector<int> behind(n_threads, 0);

#pragma omp parallel for schedule(static) num_threads(n_threads)
  for (int tk = 0; tk < n_tracks; ++tk) {
    if (!points[tk]) continue;
    const int tid = omp_get_thread_num();
    PointBlocks& pb = state.points[tk];
    pb.active = true;
    for (const ObservationRay& obs : problem.tracks[tk].observations) {
      const auto ev = evaluate_observation(problem.rig, obs, poses[obs.pose_id], *points[tk],
                                           /*with_jacobians=*/true);
      if (!ev.valid) {
        ++behind[tid];
        continue;
      }
      cost[tid] += ev.r.squaredNorm();
      const int p = ev.pose_id;
      Hpp[tid].block<6, 6>(6 * p, 6 * p) += ev.J_pose.transpose() * ev.J_pose;
      gp[tid].segment<6>(6 * p) -= ev.J_pose.transpose() * ev.r;
      pb.Hll += ev.J_point.transpose() * ev.J_point;
      pb.gl -= ev.J_point.transpose() * ev.r;
      pb.cross_block(p) += ev.J_pose.transpose() * ev.J_point;
    }
  }

  state.Hpp = Eigen::MatrixXd::Zero(dim, dim);
  state.gp = Eigen::VectorXd::Zero(dim);
  for (int t = 0; t < n_threads; ++t) {
    state.Hpp += Hpp[t];
    state.gp += gp[t];
    state.cost += cost[t];
    state.behind_camera += behind[t];
  }
}

std::uint64_t ba_block_bytes(const BaState& state) {
  const int blocks = static_cast<int>(state.Hpp.rows()) / 6;
  std::uint64_t occupied = 0;
  for (int a = 0; a < blocks; ++a)
    for (int b = 0; b <= a; ++b)
      if (!state.Hpp.block<6, 6>(6 * a, 6 * b).isZero(0.0)) ++occupied;
  std::uint64_t bytes = occupied * 36 * sizeof(double);
  for (const PointBlocks& pb : state.points) {
    if (!pb.active) continue;
    bytes += 9 * sizeof(double);                    // point block
    bytes += pb.cross.size() * 18 * sizeof(double); // 6x3 cross blocks
  }
  return bytes;
}

struct SchurResult {
  Eigen::VectorXd delta_poses;
  bool ok = false;
};

// Reduced camera system S dp = g~ with point blocks eliminated; dl recovered
// per point afterwards.
SchurResult schur_solve(const BaState& state, double lambda,
                        std::vector<Vec3>& delta_points) {
  const int dim = static_cast<int>(state.Hpp.rows());
  Eigen::MatrixXd S = state.Hpp;
  S.diagonal() += lambda * state.Hpp.diagonal();
  Eigen::VectorXd g = state.gp;

  std::vector<Mat3> W_inv(state.points.size(), Mat3::Zero());
  for (std::size_t j = 0; j < state.points.size(); ++j) {
    const PointBlocks& pb = state.points[j];
    if (!pb.active) continue;
    Mat3 W = pb.Hll;
    W.diagonal() += lambda * pb.Hll.diagonal();
    const Eigen::LDLT<Mat3> ldlt(W);
    if (ldlt.info() != Eigen::Success) return {};
    W_inv[j] = ldlt.solve(Mat3::Identity());
    const Vec3 Wg = W_inv[j] * pb.gl;
    for (const auto& [a, Ha] : pb.cross) {
      g.segment<6>(6 * a) -= Ha * Wg;
      for (const auto& [b, Hb] : pb.cross) {
        S.block<6, 6>(6 * a, 6 * b) -= Ha * W_inv[j] * Hb.transpose();
      }
    }
  }

  // Gauge anchor.
  S.topRows<6>().setZero();
  S.leftCols<6>().setZero();
  S.topLeftCorner<6, 6>().setIdentity();
  g.head<6>().setZero();

  SchurResult out;
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) return {};
  out.delta_poses = llt.solve(g);
  if (!out.delta_poses.allFinite()) return {};
  out.delta_poses.head<6>().setZero();

  delta_points.assign(state.points.size(), Vec3::Zero());
  for (std::size_t j = 0; j < state.points.size(); ++j) {
    const PointBlocks& pb = state.points[j];
    if (!pb.active) continue;
    Vec3 rhs = pb.gl;
    for (const auto& [a, Ha] : pb.cross) rhs -= Ha.transpose() * out.delta_poses.segment<6>(6 * a);
    delta_points[j] = W_inv[j] * rhs;
  }
  (void)dim;
  out.ok = true;
  return out;
}

std::vector<Pose> ba_apply(std::span<const Pose> poses, const Eigen::VectorXd& delta) {
  std::vector<Pose> out(poses.begin(), poses.end());
  for (std::size_t k = 1; k < out.size(); ++k) {
    Perturbation d;
    d.phi = delta.segment<3>(6 * k);
    d.dt = delta.segment<3>(6 * k + 3);
    out[k] = apply_right_perturbation(out[k], d);
    out[k].R = project_to_so3(out[k].R);
  }
  return out;
}

}  // namespace

SolveReport baseline_ba_solve(Problem& problem, std::vector<std::optional<Vec3>>* points_out,
                              ExecutionPolicy policy) {
  const auto start = Clock::now();
  SolveReport report;
  std::vector<Pose> poses = problem.poses;

  // Initial structure from geometric multi-view triangulation at the initial
  // poses. Tracks that fail, or whose initial point lands behind one of its
  // cameras, stay out of the adjustment.
  std::vector<std::optional<Vec3>> points =
      triangulate_all(problem, poses, /*use_sot=*/false, policy);
  for (std::size_t tk = 0; tk < points.size(); ++tk) {
    if (points[tk]) {
      for (const ObservationRay& obs : problem.tracks[tk].observations) {
        const Camera& cam = problem.rig.cameras[obs.camera_id];
        const Vec3 xc =
            cam.extrinsics.R.transpose() * (poses[obs.pose_id].to_body(*points[tk]) -
                                            cam.extrinsics.t);
        if (xc.z() <= 1e-9) {
          points[tk].reset();
          break;
        }
      }
    }
    if (!points[tk]) ++report.dropped_tracks;
  }

  double cost = ba_cost(problem, poses, points, policy);
  report.initial_cost = cost;
  report.final_cost = cost;

  const SolverSettings& s = problem.settings;
  double lambda = s.lambda_init;
  report.status = SolveStatus::MaxIterations;

  BaState state;
  for (int iter = 1; iter <= s.max_iters; ++iter) {
    report.iterations = iter;
    ba_accumulate(problem, poses, points, policy, state);
    report.hessian_bytes = std::max(report.hessian_bytes, ba_block_bytes(state));
    const std::uint64_t full_dim =
        6ull * problem.pose_count() + 3ull * problem.tracks.size();
    report.hessian_dense_bytes = full_dim * full_dim * sizeof(double);

    double grad_inf = state.gp.lpNorm<Eigen::Infinity>();
    for (const PointBlocks& pb : state.points)
      if (pb.active) grad_inf = std::max(grad_inf, pb.gl.lpNorm<Eigen::Infinity>());
    if (grad_inf < s.gradient_tol) {
      report.status = SolveStatus::SmallGradient;
      break;
    }

    bool accepted = false;
    int consecutive_solver_failures = 0;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      const auto attempt_start = Clock::now();
      std::vector<Vec3> delta_points;
      const SchurResult sr = schur_solve(state, lambda, delta_points);
      double new_cost = std::numeric_limits<double>::infinity();
      std::vector<Pose> cand_poses;
      std::vector<std::optional<Vec3>> cand_points;
      if (sr.ok) {
        cand_poses = ba_apply(poses, sr.delta_poses);
        cand_points = points;
        for (std::size_t j = 0; j < cand_points.size(); ++j)
          if (cand_points[j]) *cand_points[j] += delta_points[j];
        new_cost = ba_cost(problem, cand_poses, cand_points, policy);
      }
      accepted = sr.ok && new_cost < cost;
      report.trace.push_back({iter, accepted ? new_cost : cost, lambda, accepted,
                              1e3 * seconds_since(attempt_start)});
      if (accepted) {
        poses = std::move(cand_poses);
        points = std::move(cand_points);
        cost = new_cost;
        lambda /= s.lambda_down;
        ++report.accepted_steps;
      } else {
        lambda *= s.lambda_up;
        consecutive_solver_failures = sr.ok ? 0 : consecutive_solver_failures + 1;
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
  if (points_out) *points_out = std::move(points);
  report.wall_time_s = seconds_since(start);
  return report;
}

}  // namespace mcpa
