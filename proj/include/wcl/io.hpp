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

// File formats.
//
//   depth      PFM, "Pf" (one channel), little-endian float32 (scale -1.0),
//              scanlines stored bottom to top as the format prescribes.
//              An optional sibling "<stem>.mask.pfm" marks valid pixels
//              (0 invalid, 1 valid); without it every pixel must be valid.
//   intrinsics "key = value" lines with fx, fy, cx, cy, width, height.
//              Blank lines and lines starting with '#' are ignored.
//   cloud      one "x y z" triple per line.
//   poses      KITTI odometry: 12 floats per line, row-major [R|t].
//   plan       CSV, header "# m n", then m rows of n values.
//   gradients  CSV "kind,index,value"; depth entries index frame-A samples
//              first, then frame-B samples; pose entries 0-5 are T_ab
//              ([omega; nu]) and 6-11 are T_ba when it is independent.
//   trace      CSV "step,loss,pose_error_m,pose_error_rad,depth_rmse".
//
// Parse failures raise InputDomainError with the file name and line number.

#ifndef WCL_IO_HPP_
#define WCL_IO_HPP_

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wcl/consistency_loss.hpp"
#include "wcl/errors.hpp"
#include "wcl/geometry.hpp"
#include "wcl/sinkhorn.hpp"
#include "wcl/toyopt.hpp"

namespace wcl::io {

namespace fs = std::filesystem;

namespace detail {

inline std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

inline double parse_double(const std::string& token, const fs::path& path,
                           std::size_t line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw InputDomainError(where(path, line) + ": cannot parse '" + token +
                           "' as a finite number");
  }
  return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool skippable(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t[0] == '#';
}

inline std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw InputDomainError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw InputDomainError("cannot write " + path.string());
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct PfmImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // row-major, top row first
};

inline PfmImage read_pfm(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  std::string magic;
  PfmImage img;
  double scale = 0.0;
  if (!(in >> magic) || magic != "Pf") {
    throw InputDomainError(path.string() +
                           ": not a single-channel PFM file (expected 'Pf')");
  }
  if (!(in >> img.width >> img.height >> scale) || img.width <= 0 ||
      img.height <= 0 || scale == 0.0) {
    throw InputDomainError(path.string() + ": malformed PFM header");
  }
  in.get();  // single whitespace byte before the raster
  const bool little = scale < 0.0;
  const auto n = static_cast<std::size_t>(img.width) * img.height;
  std::vector<std::uint32_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(std::uint32_t)) {
    throw InputDomainError(path.string() + ": truncated PFM raster");
  }
  const bool host_little = std::endian::native == std::endian::little;
  img.data.resize(n);
  for (int r = 0; r < img.height; ++r) {
    // File rows run bottom to top.
    const auto src = static_cast<std::size_t>(img.height - 1 - r) * img.width;
    const auto dst = static_cast<std::size_t>(r) * img.width;
    for (int c = 0; c < img.width; ++c) {
      std::uint32_t bits = raw[src + static_cast<std::size_t>(c)];
      if (little != host_little) bits = __builtin_bswap32(bits);
      float f;
      std::memcpy(&f, &bits, sizeof f);
      img.data[dst + static_cast<std::size_t>(c)] = f;
    }
  }
  return img;
}

inline void write_pfm(const fs::path& path, int width, int height,
                      const std::vector<float>& data) {
  std::ofstream out = open_out(path, true);
  out << "Pf\n" << width << " " << height << "\n-1.0\n";
  const bool host_little = std::endian::native == std::endian::little;
  for (int r = height - 1; r >= 0; --r) {
    for (int c = 0; c < width; ++c) {
      std::uint32_t bits;
      const float f = data[static_cast<std::size_t>(r) * width + c];
      std::memcpy(&bits, &f, sizeof bits);
      if (!host_little) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw InputDomainError("failed writing " + path.string());
}

}  // namespace detail

// "<dir>/<stem>.pfm" -> "<dir>/<stem>.mask.pfm".
inline fs::path mask_path(const fs::path& depth_path) {
  fs::path p = depth_path;
  p.replace_extension();
  p += ".mask.pfm";
  return p;
}

inline DepthMap read_depth(const fs::path& path, std::string frame = "A") {
  const detail::PfmImage img = detail::read_pfm(path);
  std::vector<double> values(img.data.begin(), img.data.end());
  std::vector<std::uint8_t> valid;
  const fs::path mp = mask_path(path);
  if (fs::exists(mp)) {
    const detail::PfmImage mask = detail::read_pfm(mp);
    if (mask.width != img.width || mask.height != img.height) {
      throw InputDomainError(mp.string() + ": mask shape differs from " +
                             path.string());
    }
    valid.resize(mask.data.size());
    for (std::size_t k = 0; k < mask.data.size(); ++k) {
      valid[k] = mask.data[k] != 0.0f;
    }
  }
  try {
    return DepthMap(img.width, img.height, std::move(values), std::move(valid),
                    std::move(frame));
  } catch (const InputDomainError& e) {
    throw InputDomainError(path.string() + ": " + e.what());
  }
}

// Values are stored as float32; a mask file is written only when some pixel
// is invalid (and removed otherwise so a stale mask is never picked up).
inline void write_depth(const fs::path& path, const DepthMap& depth) {
  std::vector<float> data(depth.values().size());
  bool any_invalid = false;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const bool ok = depth.mask()[k] != 0;
    any_invalid = any_invalid || !ok;
    data[k] = ok ? static_cast<float>(depth.values()[k]) : 0.0f;
  }
  detail::write_pfm(path, depth.width(), depth.height(), data);
  const fs::path mp = mask_path(path);
  if (any_invalid) {
    std::vector<float> mask(data.size());
    for (std::size_t k = 0; k < mask.size(); ++k) {
      mask[k] = depth.mask()[k] != 0 ? 1.0f : 0.0f;
    }
    detail::write_pfm(mp, depth.width(), depth.height(), mask);
  } else {
    std::error_code ec;
    fs::remove(mp, ec);
  }
}

inline Intrinsics read_intrinsics(const fs::path& path) {
  std::ifstream in = detail::open_in(path);
  std::map<std::string, double> kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::skippable(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputDomainError(detail::where(path, n) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (key != "fx" && key != "fy" && key != "cx" && key != "cy" &&
        key != "width" && key != "height") {
      throw InputDomainError(detail::where(path, n) + ": unknown key '" + key +
                             "'");
    }
    if (kv.count(key)) {
      throw InputDomainError(detail::where(path, n) + ": duplicate key '" +
                             key + "'");
    }
    kv[key] = detail::parse_double(detail::trim(line.substr(eq + 1)), path, n);
  }
  for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) {
    if (!kv.count(key)) {
      throw InputDomainError(path.string() + ": missing key '" + key + "'");
    }
  }
  for (const char* key : {"width", "height"}) {
    if (kv[key] != std::floor(kv[key]) || kv[key] < 1 || kv[key] > 1e8) {
      throw InputDomainError(path.string() + ": " + key +
                             " must be a positive integer");
    }
  }
  Intrinsics k{kv["fx"], kv["fy"], kv["cx"], kv["cy"],
               static_cast<int>(kv["width"]), static_cast<int>(kv["height"])};
  try {
    k.validate();
  } catch (const InputDomainError& e) {
    throw InputDomainError(path.string() + ": " + e.what());
  }
  return k;
}

inline void write_intrinsics(const fs::path& path, const Intrinsics& k) {
  std::ofstream out = detail::open_out(path);
  out << "fx = " << detail::fmt(k.fx) << "\nfy = " << detail::fmt(k.fy)
      << "\ncx = " << detail::fmt(k.cx) << "\ncy = " << detail::fmt(k.cy)
      << "\nwidth = " << k.width << "\nheight = " << k.height << "\n";
}

inline PointCloud read_cloud(const fs::path& path, std::string frame = "A") {
  std::ifstream in = detail::open_in(path);
  std::vector<Eigen::Vector3d> pts;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::skippable(line)) continue;
    const auto tok = detail::split_ws(line);
    if (tok.size() != 3) {
      throw InputDomainError(detail::where(path, n) + ": expected 3 values, got " +
                             std::to_string(tok.size()));
    }
    pts.emplace_back(detail::parse_double(tok[0], path, n),
                     detail::parse_double(tok[1], path, n),
                     detail::parse_double(tok[2], path, n));
  }
  if (pts.empty()) throw InputDomainError(path.string() + ": no points");
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t k = 0; k < pts.size(); ++k) {
    m.col(static_cast<Eigen::Index>(k)) = pts[k];
  }
  return PointCloud(std::move(m), std::move(frame));
}

inline void write_cloud(const fs::path& path, const PointCloud& cloud) {
  std::ofstream out = detail::open_out(path);
  for (Eigen::Index k = 0; k < cloud.points.cols(); ++k) {
    out << detail::fmt(cloud.points(0, k)) << " "
        << detail::fmt(cloud.points(1, k)) << " "
        << detail::fmt(cloud.points(2, k)) << "\n";
  }
}

// Rotations that are orthonormal to 1e-9 are taken as-is; slightly rounded
// ones (up to 1e-3) are projected back onto SO(3).
inline std::vector<SE3Transform> read_poses(const fs::path& path) {
  std::ifstream in = detail::open_in(path);
  std::vector<SE3Transform> poses;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::skippable(line)) continue;
    const auto tok = detail::split_ws(line);
    if (tok.size() != 12) {
      throw InputDomainError(detail::where(path, n) +
                             ": expected 12 values, got " +
                             std::to_string(tok.size()));
    }
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        r(i, j) = detail::parse_double(tok[static_cast<std::size_t>(4 * i + j)],
                                       path, n);
      }
      t[i] = detail::parse_double(tok[static_cast<std::size_t>(4 * i + 3)], path,
                                  n);
    }
    try {
      poses.emplace_back(r, t);
    } catch (const InputDomainError&) {
      try {
        poses.push_back(SE3Transform::from_approximate(r, t));
      } catch (const InputDomainError& e) {
        throw InputDomainError(detail::where(path, n) + ": " + e.what());
      }
    }
  }
  if (poses.empty()) throw InputDomainError(path.string() + ": no poses");
  return poses;
}

inline void write_poses(const fs::path& path,
                        const std::vector<SE3Transform>& poses) {
  std::ofstream out = detail::open_out(path);
  for (const SE3Transform& p : poses) {
    const auto m = p.matrix3x4();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) {
        out << detail::fmt(m(i, j)) << (i == 2 && j == 3 ? "\n" : " ");
      }
    }
  }
}

inline void write_plan(const fs::path& path, const Eigen::MatrixXd& plan) {
  std::ofstream out = detail::open_out(path);
  out << "# " << plan.rows() << " " << plan.cols() << "\n";
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      out << detail::fmt(plan(i, j)) << (j + 1 == plan.cols() ? "\n" : ",");
    }
  }
}

inline Eigen::MatrixXd read_plan(const fs::path& path) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw InputDomainError(path.string() + ": empty");
  const auto head = detail::split_ws(line);
  if (head.size() != 3 || head[0] != "#") {
    throw InputDomainError(detail::where(path, 1) + ": expected '# m n'");
  }
  const auto m = static_cast<Eigen::Index>(detail::parse_double(head[1], path, 1));
  const auto n = static_cast<Eigen::Index>(detail::parse_double(head[2], path, 1));
  if (m < 1 || n < 1) throw InputDomainError(detail::where(path, 1) + ": bad size");
  Eigen::MatrixXd out(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto ln = static_cast<std::size_t>(i) + 2;
    if (!std::getline(in, line)) {
      throw InputDomainError(detail::where(path, ln) + ": missing row");
    }
    std::istringstream row(line);
    std::string cell;
    Eigen::Index j = 0;
    while (std::getline(row, cell, ',')) {
      if (j >= n) throw InputDomainError(detail::where(path, ln) + ": too many columns");
      out(i, j++) = detail::parse_double(detail::trim(cell), path, ln);
    }
    if (j != n) throw InputDomainError(detail::where(path, ln) + ": too few columns");
  }
  return out;
}

inline void write_gradients(const fs::path& path, const GradientBundle& g) {
  std::ofstream out = detail::open_out(path);
  out << "kind,index,value\n";
  Eigen::Index idx = 0;
  for (Eigen::Index k = 0; k < g.depth_a.size(); ++k) {
    out << "depth," << idx++ << "," << detail::fmt(g.depth_a[k]) << "\n";
  }
  for (Eigen::Index k = 0; k < g.depth_b.size(); ++k) {
    out << "depth," << idx++ << "," << detail::fmt(g.depth_b[k]) << "\n";
  }
  for (int i = 0; i < 6; ++i) {
    out << "pose," << i << "," << detail::fmt(g.pose_ab[i]) << "\n";
  }
  if (g.pose_ba) {
    for (int i = 0; i < 6; ++i) {
      out << "pose," << 6 + i << "," << detail::fmt((*g.pose_ba)[i]) << "\n";
    }
  }
}

inline void write_trace(std::ostream& out, const std::vector<TraceEntry>& trace) {
  out << "step,loss,pose_error_m,pose_error_rad,depth_rmse\n";
  for (const TraceEntry& e : trace) {
    out << e.step << "," << detail::fmt(e.loss) << ","
        << detail::fmt(e.pose_error_m) << "," << detail::fmt(e.pose_error_rad)
        << "," << detail::fmt(e.depth_rmse) << "\n";
  }
}

inline void write_trace(const fs::path& path,
                        const std::vector<TraceEntry>& trace) {
  std::ofstream out = detail::open_out(path);
  write_trace(out, trace);
}

}  // namespace wcl::io

#endif  // WCL_IO_HPP_
