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

// Monocular depth metrics and snippet-based absolute trajectory error.

#ifndef WCL_EVALMETRICS_HPP_
#define WCL_EVALMETRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wcl/errors.hpp"
#include "wcl/geometry.hpp"

namespace wcl {

struct DepthEvalConfig {
  double min_depth = 1e-3;
  double max_depth = 80.0;
  bool median_scaling = true;

  void validate() const {
    if (!(min_depth > 0.0 && min_depth < max_depth)) {
      throw InputDomainError("depth eval: need 0 < min_depth < max_depth");
    }
  }
};

struct MetricReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  std::size_t n_pixels = 0;
};

// Median of a non-empty sample; the mean of the two central values for even
// sizes.
inline double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Pixels are evaluated where gt is valid and min_depth <= gt <= max_depth.
// The prediction must be valid and positive at each of those pixels.
inline MetricReport depth_metrics(const DepthMap& gt, const DepthMap& pred,
                                  const DepthEvalConfig& cfg) {
  cfg.validate();
  if (gt.width() != pred.width() || gt.height() != pred.height()) {
    throw InputDomainError("depth eval: raster shapes differ");
  }
  std::vector<double> g;
  std::vector<double> p;
  for (int row = 0; row < gt.height(); ++row) {
    for (int col = 0; col < gt.width(); ++col) {
      const Pixel px{col, row};
      if (!gt.valid(px)) continue;
      const double d = gt.at(px);
      if (d < cfg.min_depth || d > cfg.max_depth) continue;
      if (!pred.valid(px)) {
        throw InputDomainError("depth eval: prediction missing at pixel " +
                               to_string(px));
      }
      g.push_back(d);
      p.push_back(pred.at(px));
    }
  }
  if (g.empty()) {
    throw InputDomainError("depth eval: no valid pixels within depth range");
  }
  if (cfg.median_scaling) {
    const double ratio = median(g) / median(p);
    for (double& v : p) v *= ratio;
  }

  MetricReport r;
  r.n_pixels = g.size();
  const double n = static_cast<double>(g.size());
  const double t1 = 1.25;
  const double t2 = t1 * t1;
  const double t3 = t2 * t1;
  double sq = 0.0;
  double sq_log = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double diff = g[k] - p[k];
    r.abs_rel += std::abs(diff) / g[k];
    r.sq_rel += diff * diff / g[k];
    sq += diff * diff;
    const double dl = std::log(g[k]) - std::log(p[k]);
    sq_log += dl * dl;
    const double delta = std::max(g[k] / p[k], p[k] / g[k]);
    r.a1 += delta < t1 ? 1.0 : 0.0;
    r.a2 += delta < t2 ? 1.0 : 0.0;
    r.a3 += delta < t3 ? 1.0 : 0.0;
  }
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(sq / n);
  r.rmse_log = std::sqrt(sq_log / n);
  r.a1 /= n;
  r.a2 /= n;
  r.a3 /= n;
  return r;
}

// Mean of the fields of several reports; n_pixels is summed.
inline MetricReport average(const std::vector<MetricReport>& reports) {
  MetricReport out;
  if (reports.empty()) return out;
  for (const MetricReport& r : reports) {
    out.abs_rel += r.abs_rel;
    out.sq_rel += r.sq_rel;
    out.rmse += r.rmse;
    out.rmse_log += r.rmse_log;
    out.a1 += r.a1;
    out.a2 += r.a2;
    out.a3 += r.a3;
    out.n_pixels += r.n_pixels;
  }
  const double n = static_cast<double>(reports.size());
  out.abs_rel /= n;
  out.sq_rel /= n;
  out.rmse /= n;
  out.rmse_log /= n;
  out.a1 /= n;
  out.a2 /= n;
  out.a3 /= n;
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories

// World-from-camera poses, one per frame.
struct Trajectory {
  std::vector<SE3Transform> poses;

  Trajectory() = default;
  explicit Trajectory(std::vector<SE3Transform> p) : poses(std::move(p)) {
    if (poses.empty()) throw InputDomainError("trajectory: no poses");
  }
  std::size_t size() const { return poses.size(); }
};

struct AteReport {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_snippets = 0;
  std::vector<double> per_snippet;
};

// ATE of one snippet starting at `first`: both sub-trajectories are anchored
// at their first frame, the prediction is scaled by the least-squares factor,
// and the RMS translation error over the snippet's frames is returned.
inline double snippet_ate(const Trajectory& gt, const Trajectory& pred,
                          std::size_t first, std::size_t length) {
  const SE3Transform gt0 = invert(gt.poses[first]);
  const SE3Transform pred0 = invert(pred.poses[first]);
  std::vector<Eigen::Vector3d> tg(length);
  std::vector<Eigen::Vector3d> tp(length);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < length; ++k) {
    tg[k] = (gt0 * gt.poses[first + k]).translation();
    tp[k] = (pred0 * pred.poses[first + k]).translation();
    num += tg[k].dot(tp[k]);
    den += tp[k].dot(tp[k]);
  }
  const double s = den == 0.0 ? 1.0 : num / den;
  double acc = 0.0;
  for (std::size_t k = 0; k < length; ++k) {
    acc += (s * tp[k] - tg[k]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(length));
}

inline AteReport ate(const Trajectory& gt, const Trajectory& pred,
                     std::size_t snippet = 5) {
  if (snippet < 1) throw InputDomainError("ate: snippet must be >= 1");
  if (gt.size() != pred.size()) {
    throw InputDomainError("ate: trajectory lengths differ (" +
                           std::to_string(gt.size()) + " vs " +
                           std::to_string(pred.size()) + ")");
  }
  if (gt.size() < snippet) {
    throw InputDomainError("ate: trajectories shorter than the snippet length");
  }
  AteReport r;
  r.n_snippets = gt.size() - snippet + 1;
  r.per_snippet.reserve(r.n_snippets);
  for (std::size_t i = 0; i < r.n_snippets; ++i) {
    r.per_snippet.push_back(snippet_ate(gt, pred, i, snippet));
  }
  const double n = static_cast<double>(r.n_snippets);
  for (double v : r.per_snippet) r.mean += v;
  r.mean /= n;
  double var = 0.0;
  for (double v : r.per_snippet) var += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(var / n);
  return r;
}

}  // namespace wcl

#endif  // WCL_EVALMETRICS_HPP_
