#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mcpa/bench.hpp"
#include "mcpa/problem_io.hpp"
#include "mcpa/synth.hpp"

using namespace mcpa;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mcpa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Problem sample_problem() {
  SynthSpec spec;
  spec.n_poses = 4;
  spec.n_points = 50;
  spec.sigma_max = 2.0;
  spec.seed = 12;
  return generate_problem(spec).problem;
}

}  // namespace

TEST_CASE("problem files round trip structurally") {
  const Problem problem = sample_problem();
  TempDir dir;
  write_problem(problem, dir.file("p.json"));
  const Problem back = read_problem(dir.file("p.json"));

  REQUIRE(back.pose_count() == problem.pose_count());
  REQUIRE(back.tracks.size() == problem.tracks.size());
  REQUIRE(back.gt_poses.size() == problem.gt_poses.size());
  for (int p = 0; p < problem.pose_count(); ++p) {
    CHECK(back.poses[p].R == problem.poses[p].R);
    CHECK(back.poses[p].t == problem.poses[p].t);
  }
  for (std::size_t tk = 0; tk < problem.tracks.size(); ++tk) {
    const Track& a = problem.tracks[tk];
    const Track& b = back.tracks[tk];
    REQUIRE(a.size() == b.size());
    CHECK(a.world_hint.has_value() == b.world_hint.has_value());
    if (a.world_hint) CHECK(*a.world_hint == *b.world_hint);
    for (int i = 0; i < a.size(); ++i) {
      CHECK(a.observations[i].pixel == b.observations[i].pixel);
      CHECK(a.observations[i].pose_id == b.observations[i].pose_id);
      CHECK(a.observations[i].camera_id == b.observations[i].camera_id);
      CHECK(a.observations[i].sigma_px == b.observations[i].sigma_px);
      // Rays are recomputed from pixels on read.
      CHECK((a.observations[i].f - b.observations[i].f).norm() == 0.0);
      CHECK(a.observations[i].v == b.observations[i].v);
    }
  }
}

TEST_CASE("problem writes are deterministic") {
  const Problem problem = sample_problem();
  CHECK(problem_to_json_string(problem) == problem_to_json_string(problem));
  TempDir dir;
  write_problem(problem, dir.file("a.json"));
  write_problem(problem, dir.file("b.json"));
  CHECK(read_file(dir.file("a.json")) == read_file(dir.file("b.json")));
}

TEST_CASE("problem parse failures name the offense") {
  const Problem problem = sample_problem();
  const std::string text = problem_to_json_string(problem);

  SUBCASE("truncated file") {
    CHECK_THROWS_AS(problem_from_json_string(text.substr(0, text.size() / 2)), ParseError);
  }

  SUBCASE("unknown version tag") {
    std::string bad = text;
    const auto at = bad.find(kProblemVersion);
    REQUIRE(at != std::string::npos);
    bad.replace(at, std::string(kProblemVersion).size(), "mcpa-problem/9");
    CHECK_THROWS_AS(problem_from_json_string(bad), VersionMismatch);
  }

  SUBCASE("missing version tag") {
    CHECK_THROWS_AS(problem_from_json_string("{\"poses\":[]}"), VersionMismatch);
  }

  SUBCASE("out-of-range pose reference names the track") {
    std::string bad =
        "{\"version\":\"mcpa-problem/1\",\"rig\":{\"cameras\":[{\"fx\":1,\"fy\":1,\"cx\":0,"
        "\"cy\":0,\"width\":2,\"height\":2,\"R\":[1,0,0,0,1,0,0,0,1],\"t\":[0,0,0]}]},"
        "\"poses\":[{\"R\":[1,0,0,0,1,0,0,0,1],\"t\":[0,0,0]}],\"tracks\":[{\"observations\":"
        "[{\"pose_id\":7,\"camera_id\":0,\"u\":0,\"v\":0}]}]}";
    try {
      problem_from_json_string(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("track 0") != std::string::npos);
    }
  }
}

TEST_CASE("pose file round trip") {
  const Problem problem = sample_problem();
  TempDir dir;
  write_poses(problem.poses, dir.file("poses.json"));
  const auto back = read_poses(dir.file("poses.json"));
  REQUIRE(back.size() == problem.poses.size());
  for (std::size_t p = 0; p < back.size(); ++p) {
    CHECK(back[p].R == problem.poses[p].R);
    CHECK(back[p].t == problem.poses[p].t);
  }
}

TEST_CASE("COLMAP import") {
  TempDir dir;
  write_file(dir.file("cameras.txt"),
             "# Camera list with one line of data per camera:\n"
             "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n"
             "1 PINHOLE 1080 960 540 540 540 480\n");
  // Two images at identity-ish poses, one shared 3D point.
  write_file(dir.file("images.txt"),
             "# Image list with two lines of data per image:\n"
             "1 1 0 0 0 0 0 0 1 cam0_000.png\n"
             "700.5 500.25 9\n"
             "2 1 0 0 0 -1 0 0 1 cam1_000.png\n"
             "650.125 498 9\n");
  write_file(dir.file("points3D.txt"),
             "# 3D point list:\n"
             "9 0.5 0.25 5.0 120 110 100 0.8 1 0 2 0\n");

  RigConfig rig;
  Camera cam;
  cam.intrinsics.fx = cam.intrinsics.fy = 540;
  cam.intrinsics.cx = 540;
  cam.intrinsics.cy = 480;
  cam.intrinsics.width = 1080;
  cam.intrinsics.height = 960;
  rig.cameras.push_back(cam);
  cam.extrinsics.t = Vec3(1, 0, 0);
  rig.cameras.push_back(cam);

  RigMap map;
  map.emplace_back("cam0_000.png", RigMapEntry{0, 0});
  map.emplace_back("cam1_000.png", RigMapEntry{0, 1});

  SUBCASE("hand-written model produces one two-observation track") {
    const Problem problem = import_colmap_text(dir.path.string(), rig, map);
    CHECK(problem.pose_count() == 1);
    REQUIRE(problem.tracks.size() == 1);
    REQUIRE(problem.tracks[0].size() == 2);
    CHECK(problem.tracks[0].observations[0].pixel == Vec2(700.5, 500.25));
    CHECK(problem.tracks[0].observations[1].pixel == Vec2(650.125, 498.0));
    CHECK(problem.tracks[0].observations[1].camera_id == 1);
    REQUIRE(problem.tracks[0].world_hint.has_value());
    CHECK(*problem.tracks[0].world_hint == Vec3(0.5, 0.25, 5.0));
    // Default pixel covariance is identity.
    CHECK(problem.tracks[0].observations[0].sigma_px == Mat2::Identity());
    // Rig pose derived from the camera-0 image (identity here).
    CHECK(problem.poses[0].R.isIdentity(1e-12));

    // Import -> write -> read is structurally stable.
    write_problem(problem, dir.file("imported.json"));
    const Problem again = read_problem(dir.file("imported.json"));
    CHECK(problem_to_json_string(again) == problem_to_json_string(problem));
  }

  SUBCASE("empty points3D gives zero tracks") {
    write_file(dir.file("points3D.txt"), "# empty\n");
    const Problem problem = import_colmap_text(dir.path.string(), rig, map);
    CHECK(problem.tracks.empty());
    CHECK(problem.pose_count() == 1);
  }

  SUBCASE("duplicate slot assignment is rejected") {
    RigMap bad = map;
    bad[1].second = RigMapEntry{0, 0};
    CHECK_THROWS_AS(import_colmap_text(dir.path.string(), rig, bad), InconsistentRig);
  }

  SUBCASE("malformed image line is a parse error with location") {
    write_file(dir.file("images.txt"), "1 1 0 0 0 0 0 zero 1 cam0_000.png\n\n");
    try {
      import_colmap_text(dir.path.string(), rig, map);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("images.txt:1") != std::string::npos);
    }
  }

  SUBCASE("out-of-range 2D reference is a parse error") {
    write_file(dir.file("points3D.txt"), "9 0.5 0.25 5.0 120 110 100 0.8 1 3\n");
    CHECK_THROWS_AS(import_colmap_text(dir.path.string(), rig, map), ParseError);
  }
}

TEST_CASE("bench produces one row per cell-trial-mode") {
  BenchSpec spec;
  spec.cells = {{5, 60, 1.0}};
  spec.modes = {SolveMode::MCPA};
  spec.trials = 1;
  spec.seed_base = 3;
  spec.settings.max_iters = 3;
  const auto rows = run_bench(spec);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].status == "ok");
  CHECK(rows[0].observations > 0);

  TempDir dir;
  write_bench_csv(rows, dir.file("raw.csv"));
  const std::string text = read_file(dir.file("raw.csv"));
  CHECK(text.find("poses,points,sigma_max,mode,trial,observations,runtime_s,hessian_bytes,"
                  "eps_R,eps_t,eps_X,status") == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);  // header + 1 data row
  CHECK(text.find("mcpa") != std::string::npos);
}

TEST_CASE("bench summary medians match an independent recomputation") {
  BenchSpec spec;
  spec.cells = {{5, 60, 1.0}};
  spec.modes = {SolveMode::MCPA, SolveMode::MCPALR};
  spec.trials = 5;
  spec.seed_base = 4;
  spec.settings.max_iters = 3;
  const auto rows = run_bench(spec);
  REQUIRE(rows.size() == 10);
  for (const auto& row : rows) CHECK(row.status == "ok");

  TempDir dir;
  write_bench_summary_csv(rows, dir.file("summary.csv"));
  std::ifstream in(dir.file("summary.csv"));
  std::string header, line;
  std::getline(in, header);
  CHECK(header ==
        "poses,points,sigma_max,mode,trials,runtime_s_median,hessian_bytes_median,"
        "eps_R_median,eps_t_median,eps_X_median");
  int found = 0;
  while (std::getline(in, line)) {
    const std::string mode = line.find(",mcpalr,") != std::string::npos ? "mcpalr" : "mcpa";
    std::vector<double> eps_r;
    for (const auto& row : rows)
      if (to_string(row.mode) == mode) eps_r.push_back(row.metrics.rot_err_rad);
    std::sort(eps_r.begin(), eps_r.end());
    const double expected = eps_r[eps_r.size() / 2];
    // eps_R_median is the 8th comma-separated field.
    std::stringstream ss(line);
    std::string field;
    for (int k = 0; k < 8; ++k) std::getline(ss, field, ',');
    CHECK(std::stod(field) == doctest::Approx(expected).epsilon(1e-12));
    ++found;
  }
  CHECK(found == 2);
}

TEST_CASE("bench mode names stay in the schema") {
  for (const auto mode : {SolveMode::MCPA, SolveMode::MCPALR, SolveMode::BaselineBA}) {
    const std::string name = to_string(mode);
    CHECK((name == "mcpa" || name == "mcpalr" || name == "ba"));
    CHECK(solve_mode_from_string(name) == mode);
  }
}
