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

// Central finite-difference check of loss_grad on a random frame pair.
//
// The instance is the smallest near-square raster holding `size` pixels, with
// the first `size` pixels (row-major) valid in both frames, seen with a fixed
// focal length, so neighbouring
// points sit about 0.25 m apart at the 2 m working depth. Frame A depths
// carry +-10% jitter; frame B repeats them with multiplicative noise, and
// T_ab is a random motion near the identity. `perturb` scales both the noise
// and the motion: the default gives well-separated couplings that converge
// within max_iters sweeps, values around 0.3 give soft couplings that are far
// from converged.
//
// The Sinkhorn tolerance is forced to 0 so every evaluation runs exactly
// max_iters sweeps; an early stop would make the loss piecewise in the inputs.
//
// Relative error per coordinate is |g - fd| / max(|g|, |fd|, abs_floor).

#ifndef WCL_GRAD_CHECK_HPP_
#define WCL_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wcl/consistency_loss.hpp"
#include "wcl/errors.hpp"
#include "wcl/geometry.hpp"

namespace wcl {

struct GradCheckConfig {
  std::uint64_t seed = 0;
  int size = 16;
  double epsilon = 1e-3;
  int max_iters = 100;
  double fd_step = 1e-5;
  double perturb = 0.02;
  double abs_floor = 1e-6;
  GradMode grad_mode = GradMode::unrolled;

  static constexpr int kMaxSize = 64;

  void validate() const {
    if (size < 1 || size > kMaxSize) {
      throw InputDomainError("grad_check: size must be in [1, 64]");
    }
    if (!(epsilon > 0.0)) throw InputDomainError("grad_check: eps must be > 0");
    if (max_iters < 1) throw InputDomainError("grad_check: iters must be >= 1");
    if (!(fd_step > 0.0)) {
      throw InputDomainError("grad_check: fd step must be > 0");
    }
    if (!(perturb >= 0.0 && perturb < 1.0)) {
      throw InputDomainError("grad_check: perturb must be in [0, 1)");
    }
  }
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_coordinate;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int coordinates = 0;
  int points_a = 0;
  int points_b = 0;
  double marginal_violation = 0.0;
};

inline FramePair grad_check_instance(const GradCheckConfig& cfg) {
  cfg.validate();
  int w = static_cast<int>(std::sqrt(static_cast<double>(cfg.size)));
  if (w * w < cfg.size) ++w;
  const int h = (cfg.size + w - 1) / w;
  const auto cells = static_cast<std::size_t>(w) * h;
  std::vector<std::uint8_t> mask(cells, 0);
  std::fill(mask.begin(), mask.begin() + cfg.size, 1);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  constexpr double kFocal = 8.0;
  const Intrinsics k{kFocal, kFocal, (w - 1) / 2.0, (h - 1) / 2.0, w, h};

  std::vector<double> a(cells);
  std::vector<double> b(cells);
  for (double& v : a) v = 2.0 * (1.0 + 0.1 * unit(rng));
  for (std::size_t i = 0; i < a.size(); ++i) {
    b[i] = a[i] * (1.0 + cfg.perturb * unit(rng));
  }
  Vector6d xi;
  for (int i = 0; i < 6; ++i) xi[i] = cfg.perturb * unit(rng);
  return {DepthMap(w, h, std::move(a), mask, "A"),
          DepthMap(w, h, std::move(b), mask, "B"), k, SE3Transform::exp(xi),
          std::nullopt};
}

inline WclConfig grad_check_wcl_config(const GradCheckConfig& cfg) {
  WclConfig wcl;
  wcl.sampler.n_c = 1;
  wcl.sampler.n_r = 1;
  wcl.sinkhorn.epsilon = cfg.epsilon;
  wcl.sinkhorn.max_iters = cfg.max_iters;
  wcl.sinkhorn.tol = 0.0;
  wcl.grad_mode = cfg.grad_mode;
  return wcl;
}

inline GradCheckReport grad_check(const GradCheckConfig& cfg) {
  const FramePair pair = grad_check_instance(cfg);
  const WclConfig wcl = grad_check_wcl_config(cfg);
  const WclResult base = loss_grad(pair, wcl);
  const GradientBundle& g = *base.grads;

  GradCheckReport report;
  report.points_a = static_cast<int>(base.points_a);
  report.points_b = static_cast<int>(base.points_b);
  report.marginal_violation = std::max(base.violation_a, base.violation_b);
  const double h = cfg.fd_step;

  const auto compare = [&](const std::string& name, double analytic,
                           double plus, double minus) {
    const double numeric = (plus - minus) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), cfg.abs_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.coordinates;
    if (rel > report.max_rel_err || report.worst_coordinate.empty()) {
      report.max_rel_err = rel;
      report.worst_coordinate = name;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  };

  const auto depth_loss = [&](bool frame_a, const Pixel& p, double delta) {
    FramePair moved = pair;
    DepthMap& d = frame_a ? moved.depth_a : moved.depth_b;
    std::vector<double> values = d.values();
    values[d.index(p.col, p.row)] += delta;
    d = DepthMap(d.width(), d.height(), std::move(values), d.mask(),
                 frame_a ? "A" : "B");
    return detail::evaluate(moved, wcl, false).loss;
  };
  for (std::size_t k = 0; k < g.pixels_a.size(); ++k) {
    compare("depth_a" + to_string(g.pixels_a[k]),
            g.depth_a[static_cast<Eigen::Index>(k)],
            depth_loss(true, g.pixels_a[k], h),
            depth_loss(true, g.pixels_a[k], -h));
  }
  for (std::size_t k = 0; k < g.pixels_b.size(); ++k) {
    compare("depth_b" + to_string(g.pixels_b[k]),
            g.depth_b[static_cast<Eigen::Index>(k)],
            depth_loss(false, g.pixels_b[k], h),
            depth_loss(false, g.pixels_b[k], -h));
  }
  for (int i = 0; i < 6; ++i) {
    Vector6d step = Vector6d::Zero();
    step[i] = h;
    FramePair plus = pair;
    FramePair minus = pair;
    plus.t_ab = pair.t_ab.retract_left(step);
    minus.t_ab = pair.t_ab.retract_left(-step);
    compare("pose_ab[" + std::to_string(i) + "]", g.pose_ab[i],
            detail::evaluate(plus, wcl, false).loss,
            detail::evaluate(minus, wcl, false).loss);
  }
  return report;
}

}  // namespace wcl

#endif  // WCL_GRAD_CHECK_HPP_
