/*
 * Copyright 2026 The WCL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// wcl: command-line front end.
//
// Results go to stdout as JSON; diagnostics go to stderr.
// Exit codes: 0 ok, 1 input-domain error (including bad flags), 2 numerical
// degeneracy or failed optimisation, 3 capacity exceeded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wcl/consistency_loss.hpp"
#include "wcl/errors.hpp"
#include "wcl/evalmetrics.hpp"
#include "wcl/geometry.hpp"
#include "wcl/grad_check.hpp"
#include "wcl/io.hpp"
#include "wcl/sinkhorn.hpp"
#include "wcl/toyopt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitCapacity = 3;

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

// ---------------------------------------------------------------------------
// sinkhorn

struct SinkhornArgs {
  std::string a;
  std::string b;
  double eps = 1e-3;
  int iters = 100;
  double tol = 1e-9;
  std::string mode = "log_domain";
  std::string plan_out;
};

void run_sinkhorn(const SinkhornArgs& args) {
  const wcl::PointCloud x = wcl::io::read_cloud(args.a, "X");
  const wcl::PointCloud y = wcl::io::read_cloud(args.b, "Y");
  wcl::SinkhornConfig cfg;
  cfg.epsilon = args.eps;
  cfg.max_iters = args.iters;
  cfg.tol = args.tol;
  cfg.mode = args.mode == "naive" ? wcl::SinkhornMode::naive
                                  : wcl::SinkhornMode::log_domain;
  const wcl::SinkhornResult r = wcl::sinkhorn(wcl::cost_matrix(x, y), cfg);
  if (!args.plan_out.empty()) wcl::io::write_plan(args.plan_out, r.plan.matrix());
  emit({{"distance", r.distance},
        {"iters_run", r.iterations},
        {"marginal_violation", r.marginal_violation}});
}

// ---------------------------------------------------------------------------
// wcl

struct WclArgs {
  std::string depth_a;
  std::string depth_b;
  std::string intrinsics;
  std::string pose;
  int nc = 16;
  int nr = 4;
  std::optional<std::uint64_t> offset_seed;
  double eps = 1e-3;
  std::string grad = "none";
  std::string grad_out;
};

void run_wcl(const WclArgs& args) {
  const auto poses = wcl::io::read_poses(args.pose);
  if (poses.size() != 1) {
    throw wcl::InputDomainError(args.pose + ": expected exactly one pose, got " +
                                std::to_string(poses.size()));
  }
  const wcl::FramePair pair{wcl::io::read_depth(args.depth_a, "A"),
                            wcl::io::read_depth(args.depth_b, "B"),
                            wcl::io::read_intrinsics(args.intrinsics), poses[0],
                            std::nullopt};
  wcl::WclConfig cfg;
  cfg.sinkhorn.epsilon = args.eps;
  cfg.sampler = args.offset_seed
                    ? wcl::GridSampler::seeded(args.nc, args.nr, *args.offset_seed)
                    : wcl::GridSampler{args.nc, args.nr, 0, 0, std::nullopt};
  const bool want_grad = args.grad != "none";
  cfg.grad_mode = args.grad == "fixed" ? wcl::GradMode::fixed_plan
                                       : wcl::GradMode::unrolled;
  if (!want_grad && !args.grad_out.empty()) {
    throw wcl::InputDomainError("--grad-out requires --grad fixed|unrolled");
  }
  const wcl::WclResult r = want_grad ? wcl::loss_grad(pair, cfg) : wcl::loss(pair, cfg);
  json out = {{"loss", r.loss},
              {"term_a", r.term_a},
              {"term_b", r.term_b},
              {"n_points_a", r.points_a},
              {"n_points_b", r.points_b},
              {"offset", {cfg.sampler.m_c, cfg.sampler.m_r}}};
  if (want_grad) {
    out["degraded_gradient"] = r.degraded_gradient;
    if (r.degraded_gradient) {
      std::cerr << "warning: fixed-plan gradient taken from a plan with "
                   "marginal violation "
                << std::max(r.violation_a, r.violation_b) << "\n";
    }
    if (!args.grad_out.empty()) wcl::io::write_gradients(args.grad_out, *r.grads);
  }
  emit(out);
}

// ---------------------------------------------------------------------------
// eval-depth

struct EvalDepthArgs {
  std::string gt_dir;
  std::string pred_dir;
  double max_depth = 80.0;
  double min_depth = 1e-3;
  bool no_median_scaling = false;
};

std::set<std::string> depth_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw wcl::InputDomainError(dir.string() + " is not a directory");
  }
  std::set<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    const bool pfm = name.size() > 4 && name.ends_with(".pfm");
    if (pfm && !name.ends_with(".mask.pfm")) out.insert(name);
  }
  return out;
}

json report_json(const wcl::MetricReport& r) {
  return {{"abs_rel", r.abs_rel}, {"sq_rel", r.sq_rel},
          {"rmse", r.rmse},       {"rmse_log", r.rmse_log},
          {"a1", r.a1},           {"a2", r.a2},
          {"a3", r.a3},           {"n_pixels", r.n_pixels}};
}

std::string report_csv(const wcl::MetricReport& r) {
  std::ostringstream s;
  s.precision(17);
  s << r.abs_rel << "," << r.sq_rel << "," << r.rmse << "," << r.rmse_log << ","
    << r.a1 << "," << r.a2 << "," << r.a3;
  return s.str();
}

void run_eval_depth(const EvalDepthArgs& args) {
  const auto gt = depth_files(args.gt_dir);
  const auto pred = depth_files(args.pred_dir);
  std::vector<std::string> unmatched;
  for (const auto& n : gt) {
    if (!pred.count(n)) unmatched.push_back(args.gt_dir + "/" + n);
  }
  for (const auto& n : pred) {
    if (!gt.count(n)) unmatched.push_back(args.pred_dir + "/" + n);
  }
  if (!unmatched.empty()) {
    std::string msg = "unmatched depth files:";
    for (const auto& n : unmatched) msg += " " + n;
    throw wcl::InputDomainError(msg);
  }
  if (gt.empty()) throw wcl::InputDomainError("no depth files to evaluate");

  wcl::DepthEvalConfig cfg;
  cfg.max_depth = args.max_depth;
  cfg.min_depth = args.min_depth;
  cfg.median_scaling = !args.no_median_scaling;
  std::vector<wcl::MetricReport> reports;
  json files = json::array();
  for (const auto& n : gt) {
    const wcl::DepthMap g = wcl::io::read_depth(fs::path(args.gt_dir) / n);
    const wcl::DepthMap p = wcl::io::read_depth(fs::path(args.pred_dir) / n);
    wcl::MetricReport r;
    try {
      r = wcl::depth_metrics(g, p, cfg);
    } catch (const wcl::InputDomainError& e) {
      throw wcl::InputDomainError(n + ": " + e.what());
    }
    reports.push_back(r);
    json j = report_json(r);
    j["file"] = n;
    files.push_back(j);
  }
  const wcl::MetricReport agg = wcl::average(reports);
  emit({{"files", files},
        {"aggregate", report_json(agg)},
        {"csv", "abs_rel,sq_rel,rmse,rmse_log,a1,a2,a3\n" + report_csv(agg)}});
}

// ---------------------------------------------------------------------------
// eval-pose

struct EvalPoseArgs {
  std::string gt;
  std::string pred;
  int snippet = 5;
};

void run_eval_pose(const EvalPoseArgs& args) {
  if (args.snippet < 1) throw wcl::InputDomainError("--snippet must be >= 1");
  const wcl::Trajectory gt(wcl::io::read_poses(args.gt));
  const wcl::Trajectory pred(wcl::io::read_poses(args.pred));
  const wcl::AteReport r =
      wcl::ate(gt, pred, static_cast<std::size_t>(args.snippet));
  emit({{"ate_mean", r.mean}, {"ate_std", r.std}, {"n_snippets", r.n_snippets}});
}

// ---------------------------------------------------------------------------
// demo

struct DemoArgs {
  std::string scene = "flat_plane";
  std::uint64_t seed = 0;
  double perturb_tz = 0.0;
  int steps = 500;
  std::string emit_files;
  std::string trace_out;
};

constexpr int kDemoResolution = 16;

void run_demo(const DemoArgs& args) {
  const wcl::SceneKind kind = wcl::parse_scene_kind(args.scene);
  const wcl::SyntheticScene scene =
      wcl::generate(kind, args.seed, kDemoResolution, kDemoResolution);
  wcl::Perturbation perturbation;
  perturbation.pose[5] = args.perturb_tz;
  wcl::OptimizeConfig cfg;
  cfg.steps = args.steps;

  if (!args.emit_files.empty()) {
    const fs::path dir(args.emit_files);
    fs::create_directories(dir);
    const wcl::FramePair start = wcl::perturbed_pair(scene, perturbation);
    wcl::io::write_depth(dir / "depth_a.pfm", scene.depth_a);
    wcl::io::write_depth(dir / "depth_b.pfm", scene.depth_b);
    wcl::io::write_intrinsics(dir / "intrinsics.txt", scene.intrinsics);
    wcl::io::write_poses(dir / "pose_ab.txt", {start.t_ab});
    wcl::io::write_poses(dir / "pose_ab_true.txt", {scene.t_ab()});
  }

  wcl::RecoveryReport r;
  try {
    r = wcl::recover(scene, perturbation, cfg);
  } catch (const wcl::RecoveryDiverged& e) {
    if (!args.trace_out.empty()) wcl::io::write_trace(args.trace_out, e.trace());
    throw;
  }
  if (!args.emit_files.empty()) {
    wcl::io::write_trace(fs::path(args.emit_files) / "trace.csv", r.trace);
  }
  if (!args.trace_out.empty()) wcl::io::write_trace(args.trace_out, r.trace);

  bool monotone = true;
  for (std::size_t k = 1; k < r.trace.size(); ++k) {
    monotone = monotone && r.trace[k].loss <= r.trace[k - 1].loss;
  }
  const double tz_error =
      std::abs(r.t_ab.translation().z() - scene.t_ab().translation().z());
  emit({{"scene", args.scene},
        {"seed", args.seed},
        {"steps_run", r.trace.back().step},
        {"initial_loss", r.trace.front().loss},
        {"final_loss", r.trace.back().loss},
        {"pose_error_m", r.pose_error_m},
        {"pose_error_rad", r.pose_error_rad},
        {"tz_error", tz_error},
        {"depth_rmse", r.depth_rmse},
        {"trace_non_increasing", monotone}});
}

// ---------------------------------------------------------------------------
// grad-check

struct GradCheckArgs {
  std::uint64_t seed = 0;
  int size = 16;
  double eps = 1e-3;
  double fd_step = 1e-5;
  double perturb = 0.02;
  std::string grad = "unrolled";
};

void run_grad_check(const GradCheckArgs& args) {
  wcl::GradCheckConfig cfg;
  cfg.seed = args.seed;
  cfg.size = args.size;
  cfg.epsilon = args.eps;
  cfg.fd_step = args.fd_step;
  cfg.perturb = args.perturb;
  cfg.grad_mode =
      args.grad == "fixed" ? wcl::GradMode::fixed_plan : wcl::GradMode::unrolled;
  const wcl::GradCheckReport r = wcl::grad_check(cfg);
  emit({{"max_rel_err", r.max_rel_err},
        {"worst_coordinate", r.worst_coordinate},
        {"coordinates", r.coordinates},
        {"marginal_violation", r.marginal_violation}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein consistency loss toolkit"};
  app.require_subcommand(1);

  SinkhornArgs sk;
  auto* c_sk = app.add_subcommand("sinkhorn", "Regularised OT between two clouds");
  c_sk->add_option("a", sk.a, "first cloud (.xyz)")->required();
  c_sk->add_option("b", sk.b, "second cloud (.xyz)")->required();
  c_sk->add_option("--eps", sk.eps, "regularisation strength")->capture_default_str();
  c_sk->add_option("--iters", sk.iters, "iteration cap")->capture_default_str();
  c_sk->add_option("--tol", sk.tol, "marginal tolerance")->capture_default_str();
  c_sk->add_option("--mode", sk.mode, "solver mode")
      ->check(CLI::IsMember({"naive", "log_domain"}))
      ->capture_default_str();
  c_sk->add_option("--plan-out", sk.plan_out, "write the plan as CSV");

  WclArgs wa;
  auto* c_wcl = app.add_subcommand("wcl", "Consistency loss of a depth pair");
  c_wcl->add_option("depth_a", wa.depth_a, "frame A depth (.pfm)")->required();
  c_wcl->add_option("depth_b", wa.depth_b, "frame B depth (.pfm)")->required();
  c_wcl->add_option("intrinsics", wa.intrinsics, "intrinsics file")->required();
  c_wcl->add_option("pose_ab", wa.pose, "T_ab, one KITTI pose line")->required();
  c_wcl->add_option("--nc", wa.nc, "column interval")->capture_default_str();
  c_wcl->add_option("--nr", wa.nr, "row interval")->capture_default_str();
  c_wcl->add_option("--offset-seed", wa.offset_seed, "draw grid offsets from seed");
  c_wcl->add_option("--eps", wa.eps, "regularisation strength")->capture_default_str();
  c_wcl->add_option("--grad", wa.grad, "gradient mode")
      ->check(CLI::IsMember({"none", "fixed", "unrolled"}))
      ->capture_default_str();
  c_wcl->add_option("--grad-out", wa.grad_out, "write gradients as CSV");

  EvalDepthArgs ed;
  auto* c_ed = app.add_subcommand("eval-depth", "Depth metrics over two directories");
  c_ed->add_option("gt_dir", ed.gt_dir, "ground-truth directory")->required();
  c_ed->add_option("pred_dir", ed.pred_dir, "prediction directory")->required();
  c_ed->add_option("--max-depth", ed.max_depth, "depth cap")->capture_default_str();
  c_ed->add_option("--min-depth", ed.min_depth, "depth floor")->capture_default_str();
  c_ed->add_flag("--no-median-scaling", ed.no_median_scaling,
                 "disable median scaling");

  EvalPoseArgs ep;
  auto* c_ep = app.add_subcommand("eval-pose", "Snippet ATE of two trajectories");
  c_ep->add_option("gt", ep.gt, "ground-truth poses (KITTI)")->required();
  c_ep->add_option("pred", ep.pred, "predicted poses (KITTI)")->required();
  c_ep->add_option("--snippet", ep.snippet, "snippet length")->capture_default_str();

  DemoArgs dm;
  auto* c_dm = app.add_subcommand("demo", "Recover a perturbed pose on a synthetic scene");
  c_dm->add_option("--scene", dm.scene, "scene kind")
      ->check(CLI::IsMember({"flat_plane", "tilted_plane", "two_boxes", "random_smooth"}))
      ->capture_default_str();
  c_dm->add_option("--seed", dm.seed, "scene seed")->capture_default_str();
  c_dm->add_option("--perturb-tz", dm.perturb_tz, "initial t_z error (m)")
      ->capture_default_str();
  c_dm->add_option("--steps", dm.steps, "descent steps")->capture_default_str();
  c_dm->add_option("--emit-files", dm.emit_files, "write the scene to this directory");
  c_dm->add_option("--trace-out", dm.trace_out, "write the loss trace as CSV");

  GradCheckArgs gc;
  auto* c_gc = app.add_subcommand("grad-check", "Compare gradients with finite differences");
  c_gc->add_option("--seed", gc.seed, "instance seed")->capture_default_str();
  c_gc->add_option("--size", gc.size, "points per cloud (<= 64)")->capture_default_str();
  c_gc->add_option("--eps", gc.eps, "regularisation strength")->capture_default_str();
  c_gc->add_option("--fd-step", gc.fd_step, "central difference step")
      ->capture_default_str();
  c_gc->add_option("--perturb", gc.perturb, "instance perturbation scale")
      ->capture_default_str();
  c_gc->add_option("--grad", gc.grad, "gradient mode")
      ->check(CLI::IsMember({"fixed", "unrolled"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*c_sk) run_sinkhorn(sk);
    if (*c_wcl) run_wcl(wa);
    if (*c_ed) run_eval_depth(ed);
    if (*c_ep) run_eval_pose(ep);
    if (*c_dm) run_demo(dm);
    if (*c_gc) run_grad_check(gc);
  } catch (const wcl::InputDomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const wcl::NumericalDegeneracyError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const wcl::OptimizationFailure& e) {
    std::cerr << "optimisation failed: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const wcl::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
