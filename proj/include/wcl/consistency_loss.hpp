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

// Wasserstein consistency loss between two depth frames.
//
// Each frame is sampled on a pixel grid and back-projected into its own
// camera coordinates (Q_AA, Q_BB). The clouds are then carried into the other
// frame (Q_BA = T_ab Q_AA, Q_AB = T_ba Q_BB) and the loss is
//
//   L = W2(Q_AA, Q_AB) + W2(Q_BB, Q_BA),
//
// with W2 the sharp value of the log-domain Sinkhorn solver. The weight
// lambda_w is carried in the config for the caller; it is never applied here.
//
// Gradients. Depth gradients are reported per sampled pixel. Pose gradients
// use a left perturbation T <- exp(xi) T with xi = [omega; nu] (rotation
// first, then translation), i.e. a 6-vector in the tangent space at the
// identity of the target frame. When the pair carries only T_ab, T_ba is its
// inverse and the pose gradient of T_ab includes the path through the
// inversion.

#ifndef WCL_CONSISTENCY_LOSS_HPP_
#define WCL_CONSISTENCY_LOSS_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wcl/errors.hpp"
#include "wcl/geometry.hpp"
#include "wcl/sinkhorn.hpp"

namespace wcl {

enum class GradMode { unrolled, fixed_plan };

inline const char* to_string(GradMode mode) {
  return mode == GradMode::unrolled ? "unrolled" : "fixed_plan";
}

struct WclConfig {
  double lambda_w = 0.5;
  SinkhornConfig sinkhorn;
  GridSampler sampler;
  GradMode grad_mode = GradMode::unrolled;

  void validate() const {
    if (!(lambda_w >= 0.0)) throw InputDomainError("wcl: lambda_w must be >= 0");
    sinkhorn.validate();
    sampler.validate();
  }
};

struct FramePair {
  static constexpr double kPoseConsistency = 1e-6;

  DepthMap depth_a;
  DepthMap depth_b;
  Intrinsics intrinsics;
  SE3Transform t_ab;
  std::optional<SE3Transform> t_ba;  // derived as t_ab^-1 when absent

  SE3Transform resolved_t_ba() const { return t_ba ? *t_ba : invert(t_ab); }

  void validate() const {
    intrinsics.validate();
    for (const DepthMap* d : {&depth_a, &depth_b}) {
      if (d->width() != intrinsics.width || d->height() != intrinsics.height) {
        throw InputDomainError(
            "frame pair: depth raster " + std::to_string(d->width()) + "x" +
            std::to_string(d->height()) + " does not match intrinsics " +
            std::to_string(intrinsics.width) + "x" +
            std::to_string(intrinsics.height));
      }
    }
    if (t_ba) {
      const SE3Transform round_trip = t_ab * *t_ba;
      const double dev = std::max(
          (round_trip.rotation() - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff(),
          round_trip.translation().cwiseAbs().maxCoeff());
      if (dev > kPoseConsistency) {
        throw InputDomainError(
            "frame pair: T_ab * T_ba deviates from identity by " +
            std::to_string(dev));
      }
    }
  }

  // The same pair seen from frame B.
  FramePair swapped() const {
    return {depth_b, depth_a, intrinsics, resolved_t_ba(), t_ab};
  }
};

struct FrameClouds {
  std::vector<Pixel> pixels_a;
  std::vector<Pixel> pixels_b;
  PointCloud q_aa;  // frame A samples, frame A coordinates
  PointCloud q_ab;  // frame B samples, frame A coordinates
  PointCloud q_bb;  // frame B samples, frame B coordinates
  PointCloud q_ba;  // frame A samples, frame B coordinates
};

struct GradientBundle {
  std::vector<Pixel> pixels_a;
  std::vector<Pixel> pixels_b;
  Eigen::VectorXd depth_a;  // dL/d depth at pixels_a[k]
  Eigen::VectorXd depth_b;
  Vector6d pose_ab = Vector6d::Zero();  // [omega; nu], left perturbation
  std::optional<Vector6d> pose_ba;      // only when T_ba is independent
};

struct WclResult {
  double loss = 0.0;
  double term_a = 0.0;
  double term_b = 0.0;
  std::size_t points_a = 0;
  std::size_t points_b = 0;
  int iterations_a = 0;
  int iterations_b = 0;
  double violation_a = 0.0;
  double violation_b = 0.0;
  std::optional<GradientBundle> grads;
  // Set when fixed-plan gradients were taken from a plan whose marginals are
  // off by more than kDegradedViolation.
  bool degraded_gradient = false;

  static constexpr double kDegradedViolation = 1e-3;
};

inline FrameClouds build_clouds(const FramePair& pair,
                                const GridSampler& sampler) {
  FrameClouds out;
  out.pixels_a = sample_valid(pair.depth_a, sampler);
  out.pixels_b = sample_valid(pair.depth_b, sampler);
  if (out.pixels_a.empty() || out.pixels_b.empty()) {
    throw InputDomainError(
        std::string("build_clouds: every sampled pixel is invalid in frame ") +
        (out.pixels_a.empty() ? "A" : "B"));
  }
  const DepthMap a = pair.depth_a.with_frame("A");
  const DepthMap b = pair.depth_b.with_frame("B");
  out.q_aa = back_project(a, pair.intrinsics, out.pixels_a);
  out.q_bb = back_project(b, pair.intrinsics, out.pixels_b);
  out.q_ab = transform(out.q_bb, pair.resolved_t_ba(), "A");
  out.q_ba = transform(out.q_aa, pair.t_ab, "B");
  return out;
}

namespace detail {

struct TermEvaluation {
  SinkhornResult solution;
  Eigen::MatrixXd cost_weights;  // dW/dC
};

inline TermEvaluation evaluate_term(const PointCloud& x, const PointCloud& y,
                                    const WclConfig& cfg, bool want_grad) {
  const CostMatrix c = cost_matrix(x, y);
  TermEvaluation out;
  if (!want_grad) {
    out.solution = solve_log(c, cfg.sinkhorn);
    return out;
  }
  if (cfg.grad_mode == GradMode::fixed_plan) {
    out.solution = solve_log(c, cfg.sinkhorn);
    out.cost_weights = out.solution.plan.matrix();
    return out;
  }
  SinkhornTape tape;
  out.solution = solve_log(c, cfg.sinkhorn, &tape);
  out.cost_weights = distance_gradient(c, tape);
  return out;
}

inline WclResult evaluate(const FramePair& pair, const WclConfig& cfg,
                          bool want_grad) {
  const FrameClouds clouds = build_clouds(pair, cfg.sampler);
  const TermEvaluation ta =
      evaluate_term(clouds.q_aa, clouds.q_ab, cfg, want_grad);
  const TermEvaluation tb =
      evaluate_term(clouds.q_bb, clouds.q_ba, cfg, want_grad);

  WclResult r;
  r.term_a = ta.solution.distance;
  r.term_b = tb.solution.distance;
  r.loss = r.term_a + r.term_b;
  r.points_a = clouds.pixels_a.size();
  r.points_b = clouds.pixels_b.size();
  r.iterations_a = ta.solution.iterations;
  r.iterations_b = tb.solution.iterations;
  r.violation_a = ta.solution.marginal_violation;
  r.violation_b = tb.solution.marginal_violation;
  if (!want_grad) return r;

  r.degraded_gradient =
      cfg.grad_mode == GradMode::fixed_plan &&
      std::max(r.violation_a, r.violation_b) > WclResult::kDegradedViolation;

  const CloudGradient ga =
      cost_pullback(clouds.q_aa, clouds.q_ab, ta.cost_weights);
  const CloudGradient gb =
      cost_pullback(clouds.q_bb, clouds.q_ba, tb.cost_weights);

  const SE3Transform& t_ab = pair.t_ab;
  const SE3Transform t_ba = pair.resolved_t_ba();

  // Adjoints of the camera-frame clouds.
  const Eigen::Matrix3Xd bar_aa =
      ga.dx + t_ab.rotation().transpose() * gb.dy;  // via Q_BA = T_ab Q_AA
  const Eigen::Matrix3Xd bar_bb =
      gb.dx + t_ba.rotation().transpose() * ga.dy;  // via Q_AB = T_ba Q_BB

  GradientBundle g;
  g.pixels_a = clouds.pixels_a;
  g.pixels_b = clouds.pixels_b;
  g.depth_a.resize(static_cast<Eigen::Index>(clouds.pixels_a.size()));
  for (std::size_t k = 0; k < clouds.pixels_a.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    const Pixel& p = clouds.pixels_a[k];
    g.depth_a[idx] = pair.intrinsics.ray(p.col, p.row).dot(bar_aa.col(idx));
  }
  g.depth_b.resize(static_cast<Eigen::Index>(clouds.pixels_b.size()));
  for (std::size_t k = 0; k < clouds.pixels_b.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    const Pixel& p = clouds.pixels_b[k];
    g.depth_b[idx] = pair.intrinsics.ray(p.col, p.row).dot(bar_bb.col(idx));
  }

  // Q_BA = exp(xi) T_ab Q_AA: d/d omega = sum q x g, d/d nu = sum g.
  Vector6d d_ab = Vector6d::Zero();
  for (Eigen::Index k = 0; k < clouds.q_ba.points.cols(); ++k) {
    d_ab.head<3>() += clouds.q_ba.points.col(k).cross(gb.dy.col(k));
    d_ab.tail<3>() += gb.dy.col(k);
  }

  if (pair.t_ba) {
    Vector6d d_ba = Vector6d::Zero();
    for (Eigen::Index k = 0; k < clouds.q_ab.points.cols(); ++k) {
      d_ba.head<3>() += clouds.q_ab.points.col(k).cross(ga.dy.col(k));
      d_ba.tail<3>() += ga.dy.col(k);
    }
    g.pose_ba = d_ba;
  } else {
    // Q_AB = (exp(xi) T_ab)^-1 Q_BB = T_ab^-1 exp(-xi) Q_BB.
    const Eigen::Matrix3Xd rotated = t_ab.rotation() * ga.dy;
    for (Eigen::Index k = 0; k < clouds.q_bb.points.cols(); ++k) {
      d_ab.head<3>() += rotated.col(k).cross(clouds.q_bb.points.col(k));
      d_ab.tail<3>() -= rotated.col(k);
    }
  }
  g.pose_ab = d_ab;
  r.grads = std::move(g);
  return r;
}

}  // namespace detail

inline WclResult loss(const FramePair& pair, const WclConfig& cfg) {
  cfg.validate();
  pair.validate();
  return detail::evaluate(pair, cfg, false);
}

inline WclResult loss_grad(const FramePair& pair, const WclConfig& cfg) {
  cfg.validate();
  pair.validate();
  return detail::evaluate(pair, cfg, true);
}

}  // namespace wcl

#endif  // WCL_CONSISTENCY_LOSS_HPP_
