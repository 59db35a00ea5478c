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

// Pinhole camera model, depth rasters, rigid transforms and the sparse grid
// sampler used to turn depth images into point clouds.
//
// Pixel convention: a pixel is addressed as (col, row). The column pairs with
// fx/cx, the row with fy/cy, and samples sit at integer coordinates (no
// half-pixel shift). A pixel with depth d back-projects to
//
//   d * K^-1 * [col, row, 1]^T.

#ifndef WCL_GEOMETRY_HPP_
#define WCL_GEOMETRY_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "wcl/errors.hpp"

namespace wcl {

using Vector6d = Eigen::Matrix<double, 6, 1>;

struct Pixel {
  int col = 0;
  int row = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

inline std::string to_string(const Pixel& p) {
  return "(" + std::to_string(p.col) + ", " + std::to_string(p.row) + ")";
}

// ---------------------------------------------------------------------------
// Intrinsics

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(std::isfinite(fx) && fx > 0.0) || !(std::isfinite(fy) && fy > 0.0)) {
      throw InputDomainError("intrinsics: focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
      throw InputDomainError("intrinsics: raster dimensions must be positive");
    }
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw InputDomainError(
          "intrinsics: principal point must lie inside the raster");
    }
  }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  // K^-1 [col, row, 1]^T, i.e. the viewing ray scaled to unit z.
  Eigen::Vector3d ray(double col, double row) const {
    return {(col - cx) / fx, (row - cy) / fy, 1.0};
  }

  // Perspective projection K p / p.z, returned as (col, row).
  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
};

// ---------------------------------------------------------------------------
// DepthMap

// Row-major raster of metric depths with a per-pixel validity mask. Values at
// valid pixels are finite and strictly positive; values at invalid pixels
// carry no meaning.
class DepthMap {
 public:
  DepthMap() = default;

  DepthMap(int width, int height, std::vector<double> values,
           std::vector<std::uint8_t> valid, std::string frame = "A")
      : width_(width),
        height_(height),
        values_(std::move(values)),
        valid_(std::move(valid)),
        frame_(std::move(frame)) {
    if (width_ <= 0 || height_ <= 0) {
      throw InputDomainError("depth map: raster dimensions must be positive");
    }
    const auto n = static_cast<std::size_t>(width_) * height_;
    if (values_.size() != n) {
      throw InputDomainError("depth map: expected " + std::to_string(n) +
                             " values, got " + std::to_string(values_.size()));
    }
    if (valid_.empty()) valid_.assign(n, 1);
    if (valid_.size() != n) {
      throw InputDomainError("depth map: mask size does not match raster");
    }
    for (int row = 0; row < height_; ++row) {
      for (int col = 0; col < width_; ++col) {
        const std::size_t k = index(col, row);
        if (valid_[k] && !(std::isfinite(values_[k]) && values_[k] > 0.0)) {
          throw InputDomainError("depth map: invalid depth at pixel " +
                                 to_string({col, row}));
        }
      }
    }
  }

  // Every pixel valid.
  DepthMap(int width, int height, std::vector<double> values,
           std::string frame = "A")
      : DepthMap(width, height, std::move(values), {}, std::move(frame)) {}

  // Builds a map from raw sensor-style values: non-finite or non-positive
  // entries become invalid pixels.
  static DepthMap from_raw(int width, int height, std::vector<double> values,
                           std::string frame = "A") {
    std::vector<std::uint8_t> valid(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
      valid[k] = std::isfinite(values[k]) && values[k] > 0.0;
    }
    return DepthMap(width, height, std::move(values), std::move(valid),
                    std::move(frame));
  }

  static DepthMap constant(int width, int height, double depth,
                           std::string frame = "A") {
    return DepthMap(width, height,
                    std::vector<double>(static_cast<std::size_t>(width) * height,
                                        depth),
                    std::move(frame));
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::string& frame() const { return frame_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint8_t>& mask() const { return valid_; }

  bool in_bounds(const Pixel& p) const {
    return p.col >= 0 && p.col < width_ && p.row >= 0 && p.row < height_;
  }
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  double at(const Pixel& p) const { return values_[index(p.col, p.row)]; }
  bool valid(const Pixel& p) const { return valid_[index(p.col, p.row)] != 0; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_) n += v != 0;
    return n;
  }

  DepthMap with_frame(std::string frame) const {
    DepthMap copy = *this;
    copy.frame_ = std::move(frame);
    return copy;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
  std::string frame_ = "A";
};

// ---------------------------------------------------------------------------
// SE3Transform

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) return Eigen::Matrix3d::Identity() + skew(omega);
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

// Rigid motion p -> R p + t.
class SE3Transform {
 public:
  static constexpr double kTolerance = 1e-9;

  SE3Transform() = default;

  SE3Transform(const Eigen::Matrix3d& rotation,
               const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation_.allFinite() || !translation_.allFinite()) {
      throw InputDomainError("SE3: non-finite entries");
    }
    const Eigen::Matrix3d gram = rotation_.transpose() * rotation_;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() >
        kTolerance) {
      throw InputDomainError("SE3: rotation is not orthonormal");
    }
    if (std::abs(rotation_.determinant() - 1.0) > kTolerance) {
      throw InputDomainError("SE3: rotation determinant is not +1");
    }
  }

  static SE3Transform identity() { return {}; }

  static SE3Transform translation(const Eigen::Vector3d& t) {
    return {Eigen::Matrix3d::Identity(), t};
  }

  static SE3Transform rotation(const Eigen::Vector3d& axis_angle) {
    return {so3_exp(axis_angle), Eigen::Vector3d::Zero()};
  }

  // Projects a nearly orthonormal matrix onto SO(3). Used for poses read
  // from text files that carry only a few significant digits.
  static SE3Transform from_approximate(const Eigen::Matrix3d& rotation,
                                       const Eigen::Vector3d& translation,
                                       double max_deviation = 1e-3);

  // Group exponential of xi = [omega; nu] (rotation first).
  static SE3Transform exp(const Vector6d& xi) {
    const Eigen::Vector3d omega = xi.head<3>();
    const Eigen::Vector3d nu = xi.tail<3>();
    const double theta = omega.norm();
    const Eigen::Matrix3d w = skew(omega);
    Eigen::Matrix3d v;
    if (theta < 1e-8) {
      v = Eigen::Matrix3d::Identity() + 0.5 * w + w * w / 6.0;
    } else {
      const double t2 = theta * theta;
      v = Eigen::Matrix3d::Identity() + (1.0 - std::cos(theta)) / t2 * w +
          (theta - std::sin(theta)) / (t2 * theta) * w * w;
    }
    return {so3_exp(omega), v * nu};
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

  // (this * other)(p) = this(other(p)).
  SE3Transform operator*(const SE3Transform& other) const {
    SE3Transform out;
    out.rotation_ = rotation_ * other.rotation_;
    out.translation_ = rotation_ * other.translation_ + translation_;
    return out;
  }

  SE3Transform inverse() const {
    SE3Transform out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(out.rotation_ * translation_);
    return out;
  }

  // exp(xi) * this, with the rotation re-normalised to stay on SO(3) after
  // many accumulated updates.
  SE3Transform retract_left(const Vector6d& xi) const {
    SE3Transform out = exp(xi) * (*this);
    Eigen::Quaterniond q(out.rotation_);
    q.normalize();
    out.rotation_ = q.toRotationMatrix();
    return out;
  }

  // Geodesic rotation angle and translation distance to another pose.
  std::pair<double, double> distance_to(const SE3Transform& other) const {
    const SE3Transform delta = inverse() * other;
    const double c =
        std::clamp((delta.rotation_.trace() - 1.0) / 2.0, -1.0, 1.0);
    return {std::acos(c), (translation_ - other.translation_).norm()};
  }

  Eigen::Matrix<double, 3, 4> matrix3x4() const {
    Eigen::Matrix<double, 3, 4> m;
    m.leftCols<3>() = rotation_;
    m.col(3) = translation_;
    return m;
  }

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

inline SE3Transform SE3Transform::from_approximate(
    const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
    double max_deviation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InputDomainError("SE3: non-finite entries");
  }
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() >
          max_deviation ||
      std::abs(rotation.determinant() - 1.0) > max_deviation) {
    throw InputDomainError("SE3: matrix is too far from a rotation");
  }
  Eigen::Quaterniond q(rotation);
  q.normalize();
  return {q.toRotationMatrix(), translation};
}

inline SE3Transform compose(const SE3Transform& a, const SE3Transform& b) {
  return a * b;
}

inline SE3Transform invert(const SE3Transform& t) { return t.inverse(); }

// ---------------------------------------------------------------------------
// PointCloud

// Points are stored as the columns of a 3xN matrix; column k stays attached
// to sample k for the lifetime of the cloud.
struct PointCloud {
  Eigen::Matrix3Xd points;
  std::string frame;

  PointCloud() = default;
  PointCloud(Eigen::Matrix3Xd pts, std::string frame_id)
      : points(std::move(pts)), frame(std::move(frame_id)) {
    if (!points.allFinite()) {
      throw InputDomainError("point cloud: non-finite coordinates");
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  bool empty() const { return points.cols() == 0; }
  Eigen::Vector3d operator[](std::size_t k) const {
    return points.col(static_cast<Eigen::Index>(k));
  }
};

// ---------------------------------------------------------------------------
// Sampling

// Regular grid of pixels (m_c + a * n_c, m_r + b * n_r). Offsets live in the
// half-open ranges [0, n_c) and [0, n_r) so that distinct offsets select
// disjoint residue classes.
struct GridSampler {
  int n_c = 16;
  int n_r = 4;
  int m_c = 0;
  int m_r = 0;
  std::optional<std::uint64_t> seed;

  void validate() const {
    if (n_c < 1 || n_r < 1) {
      throw InputDomainError("grid sampler: intervals must be >= 1");
    }
    if (m_c < 0 || m_c >= n_c || m_r < 0 || m_r >= n_r) {
      throw InputDomainError(
          "grid sampler: offsets must satisfy 0 <= m_c < n_c, 0 <= m_r < n_r");
    }
  }

  // Offsets drawn from a 64-bit Mersenne twister; the modulo reduction is
  // written out so the draw is identical across standard libraries.
  static GridSampler seeded(int n_c, int n_r, std::uint64_t seed) {
    if (n_c < 1 || n_r < 1) {
      throw InputDomainError("grid sampler: intervals must be >= 1");
    }
    std::mt19937_64 rng(seed);
    GridSampler s;
    s.n_c = n_c;
    s.n_r = n_r;
    s.m_c = static_cast<int>(rng() % static_cast<std::uint64_t>(n_c));
    s.m_r = static_cast<int>(rng() % static_cast<std::uint64_t>(n_r));
    s.seed = seed;
    return s;
  }

  // Expected number of grid pixels in a width x height raster.
  std::size_t count(int width, int height) const {
    const auto cols = width > m_c ? (width - m_c + n_c - 1) / n_c : 0;
    const auto rows = height > m_r ? (height - m_r + n_r - 1) / n_r : 0;
    return static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows);
  }
};

// Row-major list of grid pixels.
inline std::vector<Pixel> grid_sample(const GridSampler& sampler, int width,
                                      int height) {
  sampler.validate();
  if (width <= 0 || height <= 0) {
    throw InputDomainError("grid_sample: degenerate raster " +
                           std::to_string(width) + "x" +
                           std::to_string(height));
  }
  if (width < sampler.n_c || height < sampler.n_r) {
    throw InputDomainError("grid_sample: raster smaller than grid interval");
  }
  std::vector<Pixel> pixels;
  pixels.reserve(sampler.count(width, height));
  for (int row = sampler.m_r; row < height; row += sampler.n_r) {
    for (int col = sampler.m_c; col < width; col += sampler.n_c) {
      pixels.push_back({col, row});
    }
  }
  return pixels;
}

// Grid pixels of `depth` restricted to its validity mask.
inline std::vector<Pixel> sample_valid(const DepthMap& depth,
                                       const GridSampler& sampler) {
  auto pixels = grid_sample(sampler, depth.width(), depth.height());
  std::erase_if(pixels, [&](const Pixel& p) { return !depth.valid(p); });
  return pixels;
}

inline PointCloud back_project(const DepthMap& depth, const Intrinsics& k,
                               std::span<const Pixel> pixels) {
  Eigen::Matrix3Xd pts(3, static_cast<Eigen::Index>(pixels.size()));
  for (std::size_t idx = 0; idx < pixels.size(); ++idx) {
    const Pixel& p = pixels[idx];
    if (!depth.in_bounds(p)) {
      throw InputDomainError("back_project: pixel " + to_string(p) +
                             " outside " + std::to_string(depth.width()) + "x" +
                             std::to_string(depth.height()) + " raster");
    }
    if (!depth.valid(p)) {
      throw InputDomainError("back_project: no valid depth at pixel " +
                             to_string(p));
    }
    pts.col(static_cast<Eigen::Index>(idx)) = depth.at(p) * k.ray(p.col, p.row);
  }
  return {std::move(pts), depth.frame()};
}

inline PointCloud transform(const PointCloud& cloud, const SE3Transform& t,
                            std::string target_frame) {
  if (cloud.empty()) throw InputDomainError("transform: empty point cloud");
  PointCloud out;
  out.points = (t.rotation() * cloud.points).colwise() + t.translation();
  out.frame = std::move(target_frame);
  return out;
}

}  // namespace wcl

#endif  // WCL_GEOMETRY_HPP_
