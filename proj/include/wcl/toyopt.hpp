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

// Synthetic two-frame scenes and a small gradient-descent driver that
// recovers perturbed poses/depths by minimising the consistency loss.
//
// Scene convention: `t_true` is the pose of camera B expressed in frame A,
// i.e. it maps B coordinates to A coordinates. The transform the loss takes
// as T_ab is therefore t_true^-1 (see SyntheticScene::t_ab).
//
// Frame B is rendered exactly from the frame-A surface. Planar scenes are
// ray-cast and accept any motion that keeps the plane in front of camera B.
// The other kinds are defined per pixel, so they are re-rendered by forward
// mapping, which is only exact when the motion carries the pixel grid onto
// itself (identity, or a half turn about the optical axis with the principal
// point at the raster centre). Other motions are rejected.
//
// Depth values are rounded to float so that scenes survive a round trip
// through 32-bit depth files unchanged.

#ifndef WCL_TOYOPT_HPP_
#define WCL_TOYOPT_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wcl/consistency_loss.hpp"
#include "wcl/errors.hpp"
#include "wcl/geometry.hpp"

namespace wcl {

enum class SceneKind { flat_plane, tilted_plane, two_boxes, random_smooth };

inline const char* to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::flat_plane: return "flat_plane";
    case SceneKind::tilted_plane: return "tilted_plane";
    case SceneKind::two_boxes: return "two_boxes";
    case SceneKind::random_smooth: return "random_smooth";
  }
  return "unknown";
}

inline SceneKind parse_scene_kind(const std::string& name) {
  for (SceneKind k : {SceneKind::flat_plane, SceneKind::tilted_plane,
                      SceneKind::two_boxes, SceneKind::random_smooth}) {
    if (name == to_string(k)) return k;
  }
  throw InputDomainError("unknown scene kind '" + name + "'");
}

struct SyntheticScene {
  DepthMap depth_a;
  DepthMap depth_b;
  Intrinsics intrinsics;
  SE3Transform t_true;  // camera B in frame A
  SceneKind kind = SceneKind::flat_plane;
  std::uint64_t seed = 0;

  SE3Transform t_ab() const { return invert(t_true); }

  FramePair pair() const {
    return {depth_a, depth_b, intrinsics, t_ab(), std::nullopt};
  }
};

inline constexpr int kMinSceneResolution = 8;
// Larger rasters at the fixed focal length see surfaces at grazing angles,
// where neighbouring points crowd inside the entropic blur radius and the
// pair stops being consistent at the default epsilon.
inline constexpr int kMaxSceneResolution = 32;
inline constexpr double kPlaneDepth = 2.0;
// Fixed focal length in pixels: neighbouring pixels at the plane depth are
// 1/6 apart whatever the resolution, well above the entropic blur radius at
// the default epsilon.
inline constexpr double kSceneFocal = 12.0;

// Half turn about the optical axis.
inline SE3Transform half_turn() {
  return SE3Transform::rotation({0.0, 0.0, std::numbers::pi});
}

inline SE3Transform default_motion(SceneKind kind) {
  return kind == SceneKind::flat_plane ? SE3Transform::identity()
                                       : half_turn();
}

namespace detail {

inline double to_float_precision(double v) {
  return static_cast<double>(static_cast<float>(v));
}

// Plane n . p = d in frame A.
struct Plane {
  Eigen::Vector3d normal;
  double offset;
};

inline std::vector<double> cast_plane(const Plane& plane, const Intrinsics& k,
                                      const SE3Transform& cam_in_a) {
  // In camera coordinates the plane is (R^T n) . p = d - n . t.
  const Eigen::Vector3d n_cam = cam_in_a.rotation().transpose() * plane.normal;
  const double d_cam = plane.offset - plane.normal.dot(cam_in_a.translation());
  std::vector<double> depth(static_cast<std::size_t>(k.width) * k.height);
  for (int row = 0; row < k.height; ++row) {
    for (int col = 0; col < k.width; ++col) {
      const double denom = n_cam.dot(k.ray(col, row));
      const double z = d_cam / denom;
      if (!(std::isfinite(z) && z > 0.0)) {
        throw InputDomainError(
            "generate: plane is not in front of the camera at pixel " +
            to_string(Pixel{col, row}));
      }
      depth[static_cast<std::size_t>(row) * k.width + col] =
          to_float_precision(z);
    }
  }
  return depth;
}

inline std::vector<double> forward_render(const std::vector<double>& depth_a,
                                          const Intrinsics& k,
                                          const SE3Transform& t_ab,
                                          SceneKind kind) {
  const std::size_t count = depth_a.size();
  std::vector<double> depth_b(count, 0.0);
  std::vector<bool> hit(count, false);
  constexpr double kGridTolerance = 1e-6;
  const auto fail = [&]() {
    return InputDomainError(
        std::string("generate: scene kind ") + to_string(kind) +
        " cannot be re-rendered without occlusion or resampling under the "
        "requested motion");
  };
  for (int row = 0; row < k.height; ++row) {
    for (int col = 0; col < k.width; ++col) {
      const double d = depth_a[static_cast<std::size_t>(row) * k.width + col];
      const Eigen::Vector3d p = t_ab * (d * k.ray(col, row));
      if (!(p.z() > 0.0)) throw fail();
      const Eigen::Vector2d uv = k.project(p);
      const double uc = std::round(uv.x());
      const double vr = std::round(uv.y());
      if (std::abs(uv.x() - uc) > kGridTolerance ||
          std::abs(uv.y() - vr) > kGridTolerance || uc < 0 || vr < 0 ||
          uc >= k.width || vr >= k.height) {
        throw fail();
      }
      const auto idx = static_cast<std::size_t>(vr) * k.width +
                       static_cast<std::size_t>(uc);
      if (hit[idx]) throw fail();
      hit[idx] = true;
      depth_b[idx] = to_float_precision(p.z());
    }
  }
  return depth_b;
}

}  // namespace detail

// `motion` is t_true; when absent the per-kind default (identity for the flat
// plane, a half turn about the optical axis otherwise) is used.
inline SyntheticScene generate(SceneKind kind, std::uint64_t seed, int width,
                               int height,
                               std::optional<SE3Transform> motion = {}) {
  if (width < kMinSceneResolution || height < kMinSceneResolution) {
    throw InputDomainError("generate: resolution must be at least 8x8");
  }
  if (width > kMaxSceneResolution || height > kMaxSceneResolution) {
    throw InputDomainError("generate: resolution must be at most 32x32");
  }
  SyntheticScene scene;
  scene.kind = kind;
  scene.seed = seed;
  scene.t_true = motion ? *motion : default_motion(kind);
  scene.intrinsics = {kSceneFocal, kSceneFocal, (width - 1) / 2.0, (height - 1) / 2.0,
                      width, height};
  const Intrinsics& k = scene.intrinsics;
  const SE3Transform t_ab = scene.t_ab();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<std::size_t>(width) * height;
  std::vector<double> depth_a(n);
  std::vector<double> depth_b;

  switch (kind) {
    case SceneKind::flat_plane:
    case SceneKind::tilted_plane: {
      detail::Plane plane{{0.0, 0.0, 1.0}, kPlaneDepth};
      if (kind == SceneKind::tilted_plane) {
        plane.normal = Eigen::Vector3d(0.4 * unit(rng) - 0.2,
                                       0.4 * unit(rng) - 0.2, 1.0)
                           .normalized();
        plane.offset = plane.normal.z() * kPlaneDepth;
      }
      depth_a = detail::cast_plane(plane, k, SE3Transform::identity());
      depth_b = detail::cast_plane(plane, k, scene.t_true);
      break;
    }
    case SceneKind::two_boxes: {
      const double background = 3.0;
      std::fill(depth_a.begin(), depth_a.end(), background);
      const double fronts[2] = {2.0, 2.5};
      for (double front : fronts) {
        const int w = std::max(2, static_cast<int>(width * (0.2 + 0.2 * unit(rng))));
        const int h = std::max(2, static_cast<int>(height * (0.2 + 0.2 * unit(rng))));
        const int c0 = static_cast<int>(unit(rng) * (width - w));
        const int r0 = static_cast<int>(unit(rng) * (height - h));
        for (int row = r0; row < r0 + h; ++row) {
          for (int col = c0; col < c0 + w; ++col) {
            double& z = depth_a[static_cast<std::size_t>(row) * width + col];
            z = std::min(z, front);
          }
        }
      }
      depth_b = detail::forward_render(depth_a, k, t_ab, kind);
      break;
    }
    case SceneKind::random_smooth: {
      constexpr int kWaves = 4;
      double amp[kWaves], fc[kWaves], fr[kWaves], ph[kWaves];
      for (int w = 0; w < kWaves; ++w) {
        amp[w] = 0.05 + 0.05 * unit(rng);
        fc[w] = 2.0 * std::numbers::pi * (0.5 + 1.5 * unit(rng)) / width;
        fr[w] = 2.0 * std::numbers::pi * (0.5 + 1.5 * unit(rng)) / height;
        ph[w] = 2.0 * std::numbers::pi * unit(rng);
      }
      for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
          double z = kPlaneDepth;
          for (int w = 0; w < kWaves; ++w) {
            z += amp[w] * std::sin(fc[w] * col + fr[w] * row + ph[w]);
          }
          depth_a[static_cast<std::size_t>(row) * width + col] =
              detail::to_float_precision(z);
        }
      }
      depth_b = detail::forward_render(depth_a, k, t_ab, kind);
      break;
    }
  }
  scene.depth_a = DepthMap(width, height, std::move(depth_a), "A");
  scene.depth_b = DepthMap(width, height, std::move(depth_b), "B");
  return scene;
}

// ---------------------------------------------------------------------------
// Recovery

enum class OptimizeTarget { pose_only, depth_only, joint };

inline OptimizeTarget parse_optimize_target(const std::string& name) {
  if (name == "pose_only") return OptimizeTarget::pose_only;
  if (name == "depth_only") return OptimizeTarget::depth_only;
  if (name == "joint") return OptimizeTarget::joint;
  throw InputDomainError("unknown optimisation target '" + name + "'");
}

// Initial error injected into the scene. The pose perturbation is applied to
// T_ab as exp(pose) * T_ab; depth noise is multiplicative, uniform in
// [-depth_noise, depth_noise], and applied to frame A only. Frame B is the
// reference that fixes the solution.
struct Perturbation {
  Vector6d pose = Vector6d::Zero();
  double depth_noise = 0.0;
  std::uint64_t seed = 0;

  // Basin limits for first-order descent.
  static constexpr double kMaxTranslation = 0.3;
  static constexpr double kMaxRotationDeg = 5.0;
  static constexpr double kMaxDepthNoise = 0.05;
};

inline WclConfig default_toy_wcl_config() {
  WclConfig cfg;
  cfg.sampler.n_c = 1;
  cfg.sampler.n_r = 1;
  return cfg;
}

struct OptimizeConfig {
  int steps = 500;
  double step_size = 0.1;
  OptimizeTarget optimize = OptimizeTarget::pose_only;
  WclConfig wcl = default_toy_wcl_config();
  int log_every = 1;
  bool backtracking = true;
  int max_backtracks = 40;
  // Stop once this many consecutive accepted steps each lower the loss by
  // less than min_decrease.
  double min_decrease = 1e-14;
  int stall_steps = 10;

  void validate() const {
    if (steps < 1) throw InputDomainError("optimize: steps must be >= 1");
    if (!(step_size > 0.0)) {
      throw InputDomainError("optimize: step_size must be positive");
    }
    if (log_every < 1) throw InputDomainError("optimize: log_every must be >= 1");
    if (!(min_decrease >= 0.0) || stall_steps < 1) {
      throw InputDomainError("optimize: invalid stall criterion");
    }
    wcl.validate();
  }
};

struct TraceEntry {
  int step = 0;
  double loss = 0.0;
  double pose_error_m = 0.0;
  double pose_error_rad = 0.0;
  double depth_rmse = 0.0;
};

struct RecoveryReport {
  std::vector<TraceEntry> trace;
  SE3Transform t_ab;
  std::vector<double> depth_a;
  double pose_error_m = 0.0;
  double pose_error_rad = 0.0;
  double depth_rmse = 0.0;
  double initial_depth_rmse = 0.0;
  int accepted_steps = 0;
};

class RecoveryDiverged : public OptimizationFailure {
 public:
  RecoveryDiverged(const std::string& what, std::vector<TraceEntry> trace)
      : OptimizationFailure(what), trace_(std::move(trace)) {}
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  std::vector<TraceEntry> trace_;
};

// Applies `p` to the scene's frame-A depths and T_ab.
inline FramePair perturbed_pair(const SyntheticScene& scene,
                                const Perturbation& p) {
  FramePair pair = scene.pair();
  pair.t_ab = pair.t_ab.retract_left(p.pose);
  if (p.depth_noise > 0.0) {
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> noise(-p.depth_noise, p.depth_noise);
    std::vector<double> values = scene.depth_a.values();
    for (double& v : values) v *= 1.0 + noise(rng);
    pair.depth_a = DepthMap(scene.depth_a.width(), scene.depth_a.height(),
                            std::move(values), scene.depth_a.mask(), "A");
  }
  return pair;
}

namespace detail {

inline double depth_rmse(const std::vector<double>& a, const DepthMap& truth) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!truth.mask()[k]) continue;
    const double d = a[k] - truth.values()[k];
    acc += d * d;
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

}  // namespace detail

// Plain gradient descent on the consistency loss. With backtracking enabled a
// step that raises the loss is retried at half the step size, so the trace is
// non-increasing. Depth gradients are scaled by the number of sampled points
// so a single step size serves both pose and depth blocks.
inline RecoveryReport recover(const SyntheticScene& scene,
                              const Perturbation& perturbation,
                              const OptimizeConfig& cfg) {
  cfg.validate();
  const SE3Transform truth = scene.t_ab();
  FramePair pair = perturbed_pair(scene, perturbation);
  const bool move_pose = cfg.optimize != OptimizeTarget::depth_only;
  const bool move_depth = cfg.optimize != OptimizeTarget::pose_only;

  RecoveryReport report;
  report.initial_depth_rmse =
      detail::depth_rmse(pair.depth_a.values(), scene.depth_a);

  const auto entry = [&](int step, double value) {
    const auto [rot, trans] = pair.t_ab.distance_to(truth);
    return TraceEntry{step, value, trans, rot,
                      detail::depth_rmse(pair.depth_a.values(), scene.depth_a)};
  };

  WclResult current = loss_grad(pair, cfg.wcl);
  if (!std::isfinite(current.loss)) {
    throw RecoveryDiverged("recover: initial loss is not finite", {});
  }
  report.trace.push_back(entry(0, current.loss));

  double step = cfg.step_size;
  int consecutive_increases = 0;
  int stalled = 0;
  for (int it = 1; it <= cfg.steps; ++it) {
    const GradientBundle& g = *current.grads;
    bool accepted = false;
    for (int attempt = 0; attempt <= cfg.max_backtracks; ++attempt) {
      FramePair trial = pair;
      if (move_pose) trial.t_ab = pair.t_ab.retract_left(-step * g.pose_ab);
      bool feasible = true;
      if (move_depth) {
        std::vector<double> values = pair.depth_a.values();
        const double scale = static_cast<double>(g.pixels_a.size());
        for (std::size_t k = 0; k < g.pixels_a.size(); ++k) {
          const Pixel& p = g.pixels_a[k];
          double& v = values[pair.depth_a.index(p.col, p.row)];
          v -= step * scale * g.depth_a[static_cast<Eigen::Index>(k)];
          feasible = feasible && std::isfinite(v) && v > 0.0;
        }
        if (feasible) {
          trial.depth_a = DepthMap(pair.depth_a.width(), pair.depth_a.height(),
                                   std::move(values), pair.depth_a.mask(), "A");
        }
      }
      if (!feasible) {
        step *= 0.5;
        continue;
      }
      WclResult next = loss_grad(trial, cfg.wcl);
      if (!std::isfinite(next.loss)) {
        throw RecoveryDiverged("recover: loss became non-finite", report.trace);
      }
      if (cfg.backtracking && next.loss > current.loss) {
        step *= 0.5;
        continue;
      }
      consecutive_increases =
          next.loss > current.loss ? consecutive_increases + 1 : 0;
      stalled = current.loss - next.loss < cfg.min_decrease ? stalled + 1 : 0;
      pair = std::move(trial);
      current = std::move(next);
      accepted = true;
      break;
    }
    if (consecutive_increases >= 10) {
      throw RecoveryDiverged(
          "recover: loss increased for 10 consecutive steps", report.trace);
    }
    if (accepted) ++report.accepted_steps;
    // Without an admissible step (even at 2^-max_backtracks of the step
    // size) or after a stall the iterate is final.
    const bool done = !accepted || stalled >= cfg.stall_steps;
    if (it % cfg.log_every == 0 || it == cfg.steps || done) {
      report.trace.push_back(entry(it, current.loss));
    }
    if (done) break;
  }

  const auto [rot, trans] = pair.t_ab.distance_to(truth);
  report.t_ab = pair.t_ab;
  report.depth_a = pair.depth_a.values();
  report.pose_error_m = trans;
  report.pose_error_rad = rot;
  report.depth_rmse = detail::depth_rmse(report.depth_a, scene.depth_a);
  return report;
}

}  // namespace wcl

#endif  // WCL_TOYOPT_HPP_
