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

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "wcl/toyopt.hpp"

namespace {

using wcl::OptimizeConfig;
using wcl::OptimizeTarget;
using wcl::Perturbation;
using wcl::SceneKind;
using wcl::SE3Transform;

constexpr SceneKind kAllKinds[] = {SceneKind::flat_plane, SceneKind::tilted_plane,
                                   SceneKind::two_boxes, SceneKind::random_smooth};

void expect_non_increasing(const std::vector<wcl::TraceEntry>& trace) {
  for (std::size_t k = 1; k < trace.size(); ++k) {
    EXPECT_LE(trace[k].loss, trace[k - 1].loss) << "step " << trace[k].step;
  }
}

TEST(Generate, FlatPlaneIdentityMotion) {
  const auto s = wcl::generate(SceneKind::flat_plane, 0, 8, 8);
  EXPECT_EQ(s.depth_a.values(), s.depth_b.values());
  for (double v : s.depth_a.values()) EXPECT_EQ(v, wcl::kPlaneDepth);
}

TEST(Generate, FlatPlaneTranslatedTowardsThePlane) {
  const auto s = wcl::generate(SceneKind::flat_plane, 0, 8, 8,
                               SE3Transform::translation({0.0, 0.0, 0.5}));
  for (double v : s.depth_b.values()) EXPECT_EQ(v, 1.5);
  EXPECT_EQ(s.depth_b.valid_count(), 64u);
}

TEST(Generate, Deterministic) {
  for (SceneKind kind : kAllKinds) {
    const auto a = wcl::generate(kind, 42, 16, 12);
    const auto b = wcl::generate(kind, 42, 16, 12);
    EXPECT_EQ(a.depth_a.values(), b.depth_a.values());
    EXPECT_EQ(a.depth_b.values(), b.depth_b.values());
    EXPECT_EQ(a.depth_b.mask(), b.depth_b.mask());
  }
  EXPECT_NE(wcl::generate(SceneKind::random_smooth, 1, 16, 16).depth_a.values(),
            wcl::generate(SceneKind::random_smooth, 2, 16, 16).depth_a.values());
}

TEST(Generate, IntrinsicsAndKinds) {
  const auto s = wcl::generate(SceneKind::two_boxes, 3, 20, 10);
  EXPECT_EQ(s.intrinsics.width, 20);
  EXPECT_EQ(s.intrinsics.height, 10);
  EXPECT_EQ(s.intrinsics.fx, wcl::kSceneFocal);
  EXPECT_EQ(s.intrinsics.cx, 9.5);
  EXPECT_EQ(s.intrinsics.cy, 4.5);
  for (SceneKind kind : kAllKinds) {
    EXPECT_EQ(wcl::parse_scene_kind(wcl::to_string(kind)), kind);
  }
  EXPECT_THROW(wcl::parse_scene_kind("sphere"), wcl::InputDomainError);
}

TEST(Generate, Errors) {
  EXPECT_THROW(wcl::generate(SceneKind::flat_plane, 0, 7, 8), wcl::InputDomainError);
  EXPECT_THROW(wcl::generate(SceneKind::flat_plane, 0, 8, 4), wcl::InputDomainError);
  EXPECT_THROW(wcl::generate(SceneKind::flat_plane, 0, 33, 8), wcl::InputDomainError);
  EXPECT_NO_THROW(wcl::generate(SceneKind::flat_plane, 0, 32, 32));
  // A sideways shift would expose surfaces that frame A never saw.
  EXPECT_THROW(wcl::generate(SceneKind::two_boxes, 0, 16, 16,
                             SE3Transform::translation({0.1, 0.0, 0.0})),
               wcl::InputDomainError);
}

TEST(Generate, ConsistentAtTruth) {
  for (SceneKind kind : kAllKinds) {
    for (std::uint64_t seed : {0u, 1u, 7u}) {
      for (auto [w, h] : {std::pair{8, 8}, std::pair{16, 16}, std::pair{24, 10}, std::pair{32, 32}}) {
        const auto s = wcl::generate(kind, seed, w, h);
        const auto r = wcl::loss(s.pair(), wcl::default_toy_wcl_config());
        EXPECT_LE(r.loss, 1e-6) << wcl::to_string(kind) << " seed " << seed << " " << w << "x" << h;
      }
    }
  }
}

TEST(Generate, ConsistentAtTruthWithTheDefaultSampler) {
  // With identity motion both frames sample the same surface points.
  const auto s = wcl::generate(SceneKind::flat_plane, 5, 32, 16);
  EXPECT_LE(wcl::loss(s.pair(), wcl::WclConfig{}).loss, 1e-6);
}

TEST(Recover, ZeroPerturbationStaysPut) {
  const auto s = wcl::generate(SceneKind::tilted_plane, 3, 16, 16);
  OptimizeConfig cfg;
  cfg.optimize = OptimizeTarget::joint;
  cfg.steps = 20;
  const auto r = wcl::recover(s, {}, cfg);
  // Scene depths are stored at float precision, so the truth is consistent
  // only to about 1e-7 and descent may settle that far from it.
  for (const auto& e : r.trace) EXPECT_LE(e.loss, 1e-6);
  EXPECT_LE(r.pose_error_m, 1e-6);
  EXPECT_LE(r.pose_error_rad, 1e-6);
  EXPECT_LE(r.depth_rmse, 1e-6);
  EXPECT_EQ(r.initial_depth_rmse, 0.0);
}

TEST(Recover, FlatPlaneTranslation) {
  const auto s = wcl::generate(SceneKind::flat_plane, 0, 16, 16);
  Perturbation p;
  p.pose[5] = 0.3;
  const auto r = wcl::recover(s, p, OptimizeConfig{});
  EXPECT_NEAR(r.trace.front().pose_error_m, 0.3, 1e-12);
  EXPECT_LE(std::abs(r.t_ab.translation().z() - s.t_ab().translation().z()), 1e-3);
  EXPECT_LE(r.trace.back().step, 500);
  expect_non_increasing(r.trace);
}

TEST(Recover, SixDofPoseOnEveryKind) {
  for (SceneKind kind : kAllKinds) {
    const auto s = wcl::generate(kind, 11, 16, 16);
    Perturbation p;
    p.pose << 0.02, -0.03, 0.04, 0.05, -0.05, 0.1;
    OptimizeConfig cfg;
    cfg.steps = 200;
    const auto r = wcl::recover(s, p, cfg);
    expect_non_increasing(r.trace);
    EXPECT_LT(r.trace.back().loss, 1e-2 * r.trace.front().loss) << wcl::to_string(kind);
    EXPECT_LT(r.pose_error_m, 0.1 * r.trace.front().pose_error_m) << wcl::to_string(kind);
  }
}

TEST(Recover, DepthNoiseWithPoseAtTruth) {
  const auto s = wcl::generate(SceneKind::flat_plane, 0, 16, 16);
  Perturbation p;
  p.depth_noise = 0.05;
  p.seed = 9;
  OptimizeConfig cfg;
  cfg.optimize = OptimizeTarget::depth_only;
  const auto r = wcl::recover(s, p, cfg);
  EXPECT_GT(r.initial_depth_rmse, 0.01);
  EXPECT_LE(r.depth_rmse, 0.1 * r.initial_depth_rmse);
  EXPECT_EQ(r.pose_error_m, 0.0);
  expect_non_increasing(r.trace);
}

TEST(Recover, MoreSinkhornIterationsDoNotHurt) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = wcl::generate(SceneKind::tilted_plane, seed, 8, 8);
    Perturbation p;
    p.pose << 0.01, 0.02, -0.01, 0.1, 0.05, 0.2;
    OptimizeConfig cfg;
    cfg.steps = 200;
    cfg.wcl.sinkhorn.max_iters = 50;
    const double e50 = wcl::recover(s, p, cfg).pose_error_m;
    cfg.wcl.sinkhorn.max_iters = 100;
    const double e100 = wcl::recover(s, p, cfg).pose_error_m;
    EXPECT_LE(e100, e50 + 1e-9) << "seed " << seed;
  }
}

TEST(Recover, TraceLoggingInterval) {
  const auto s = wcl::generate(SceneKind::flat_plane, 0, 8, 8);
  Perturbation p;
  p.pose[5] = 0.1;
  OptimizeConfig cfg;
  cfg.steps = 30;
  cfg.log_every = 10;
  cfg.stall_steps = 1000;
  const auto r = wcl::recover(s, p, cfg);
  for (const auto& e : r.trace) {
    EXPECT_TRUE(e.step % 10 == 0 || e.step == r.trace.back().step) << e.step;
  }
  EXPECT_EQ(r.trace.front().step, 0);
}

TEST(Recover, DivergenceWithoutBacktrackingIsReported) {
  const auto s = wcl::generate(SceneKind::flat_plane, 0, 8, 8);
  Perturbation p;
  p.pose[5] = 0.2;
  OptimizeConfig cfg;
  cfg.backtracking = false;
  cfg.step_size = 1.0;
  try {
    wcl::recover(s, p, cfg);
    FAIL() << "expected divergence";
  } catch (const wcl::RecoveryDiverged& e) {
    EXPECT_GE(e.trace().size(), 10u);
    EXPECT_GT(e.trace().back().loss, e.trace().front().loss);
  }
}

TEST(Recover, ConfigValidation) {
  const auto s = wcl::generate(SceneKind::flat_plane, 0, 8, 8);
  OptimizeConfig cfg;
  cfg.steps = 0;
  EXPECT_THROW(wcl::recover(s, {}, cfg), wcl::InputDomainError);
  cfg = {};
  cfg.step_size = 0.0;
  EXPECT_THROW(wcl::recover(s, {}, cfg), wcl::InputDomainError);
  EXPECT_EQ(wcl::parse_optimize_target("joint"), OptimizeTarget::joint);
  EXPECT_THROW(wcl::parse_optimize_target("all"), wcl::InputDomainError);
}

}  // namespace
