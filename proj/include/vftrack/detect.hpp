#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vftrack/image.hpp"
#include "vftrack/types.hpp"

namespace vftrack {

/// Fixed parameters of the built-in corner detector.
struct DetectorOptions {
  double quality_level = 0.01;  ///< responses below quality_level * max are ignored
  int nms_radius = 5;           ///< Chebyshev suppression radius, px
  int border_margin = 6;        ///< keypoints closer than this to a border are dropped
  int patch_size = 8;           ///< descriptor is patch_size^2 bilinear samples
};

namespace detail {

/// Shi-Tomasi minimum-eigenvalue response over a 5x5 window of 3x3 Sobel
/// gradients. Pixels where the window does not fit get response 0.
inline std::vector<double> corner_response(const Frame& frame) {
  const int w = frame.width, h = frame.height;
  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  std::vector<double> gxx(static_cast<std::size_t>(w) * h, 0.0), gyy(gxx.size(), 0.0),
      gxy(gxx.size(), 0.0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double a = frame.at(x - 1, y - 1), b = frame.at(x, y - 1), c = frame.at(x + 1, y - 1);
      const double d = frame.at(x - 1, y), f = frame.at(x + 1, y);
      const double g = frame.at(x - 1, y + 1), hh = frame.at(x, y + 1), i = frame.at(x + 1, y + 1);
      const double gx = ((c + 2.0 * f + i) - (a + 2.0 * d + g)) / 8.0;
      const double gy = ((g + 2.0 * hh + i) - (a + 2.0 * b + c)) / 8.0;
      gxx[idx(x, y)] = gx * gx;
      gyy[idx(x, y)] = gy * gy;
      gxy[idx(x, y)] = gx * gy;
    }
  }
  // Separable 5-tap box sums; horizontal pass then vertical.
  auto box = [&](std::vector<double>& src) {
    std::vector<double> tmp(src.size(), 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 2; x < w - 2; ++x) {
        double s = 0.0;
        for (int k = -2; k <= 2; ++k) s += src[idx(x + k, y)];
        tmp[idx(x, y)] = s;
      }
    }
    std::fill(src.begin(), src.end(), 0.0);
    for (int y = 2; y < h - 2; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int k = -2; k <= 2; ++k) s += tmp[idx(x, y + k)];
        src[idx(x, y)] = s;
      }
    }
  };
  box(gxx);
  box(gyy);
  box(gxy);
  std::vector<double> resp(gxx.size(), 0.0);
  for (int y = 3; y < h - 3; ++y) {
    for (int x = 3; x < w - 3; ++x) {
      const double a = gxx[idx(x, y)], c = gyy[idx(x, y)], b = gxy[idx(x, y)];
      const double half_diff = 0.5 * (a - c);
      const double r = 0.5 * (a + c) - std::sqrt(half_diff * half_diff + b * b);
      resp[idx(x, y)] = r > 0.0 ? r : 0.0;
    }
  }
  return resp;
}

/// Quadratic (second-order Taylor) fit of the 3x3 neighbourhood; returns the
/// peak offset clamped to [-0.5, 0.5] per axis.
inline std::pair<double, double> subpixel_offset(const std::vector<double>& r, int w, int x,
                                                 int y) {
  auto at = [&](int dx, int dy) { return r[static_cast<std::size_t>(y + dy) * w + (x + dx)]; };
  const double c = at(0, 0);
  const double dx = 0.5 * (at(1, 0) - at(-1, 0));
  const double dy = 0.5 * (at(0, 1) - at(0, -1));
  const double dxx = at(1, 0) - 2.0 * c + at(-1, 0);
  const double dyy = at(0, 1) - 2.0 * c + at(0, -1);
  const double dxy = 0.25 * (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1));
  const double det = dxx * dyy - dxy * dxy;
  double ox = 0.0, oy = 0.0;
  if (det > 0.0 && dxx < 0.0) {
    ox = -(dyy * dx - dxy * dy) / det;
    oy = -(dxx * dy - dxy * dx) / det;
  }
  if (!(std::abs(ox) <= 1.0 && std::abs(oy) <= 1.0)) {
    // Saddle or degenerate fit: fall back to independent 1-D parabolas.
    ox = dxx < 0.0 ? -dx / dxx : 0.0;
    oy = dyy < 0.0 ? -dy / dyy : 0.0;
  }
  return {std::clamp(ox, -0.5, 0.5), std::clamp(oy, -0.5, 0.5)};
}

inline double bilinear(const Frame& f, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const double v00 = f.at(x0, y0), v10 = f.at(x0 + 1, y0);
  const double v01 = f.at(x0, y0 + 1), v11 = f.at(x0 + 1, y0 + 1);
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

}  // namespace detail

/// Zero-mean, unit-norm bilinear patch centred on (x, y). Returns an empty
/// vector when the patch leaves the frame or is constant.
inline std::vector<double> patch_descriptor(const Frame& frame, double x, double y,
                                            int patch_size = 8) {
  const double half = 0.5 * (patch_size - 1);
  if (x - half < 0.0 || y - half < 0.0 || x + half + 1.0 > frame.width - 1 ||
      y + half + 1.0 > frame.height - 1) {
    return {};
  }
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(patch_size) * patch_size);
  double mean = 0.0;
  for (int j = 0; j < patch_size; ++j) {
    for (int i = 0; i < patch_size; ++i) {
      v.push_back(detail::bilinear(frame, x - half + i, y - half + j));
      mean += v.back();
    }
  }
  mean /= static_cast<double>(v.size());
  double sq = 0.0;
  for (double& s : v) {
    s -= mean;
    sq += s * s;
  }
  if (!(sq > 1e-12)) return {};
  const double inv = 1.0 / std::sqrt(sq);
  for (double& s : v) s *= inv;
  return v;
}

/// Built-in corner detector: Shi-Tomasi response, 3x3 local maxima,
/// sub-pixel refinement, greedy non-max suppression in descending response
/// order (ties by (y, x) scan order), capped at config.max_keypoints.
inline FeatureList detect_native(const Frame& frame, const TrackerConfig& config,
                                 const DetectorOptions& opt = {}) {
  frame.validate();
  const int w = frame.width, h = frame.height;
  const auto resp = detail::corner_response(frame);
  const double max_r = *std::max_element(resp.begin(), resp.end());
  if (!(max_r > 0.0)) return {};
  const double floor = opt.quality_level * max_r;

  struct Candidate {
    double response;
    int x, y;
  };
  std::vector<Candidate> cands;
  const int lo = std::max(opt.border_margin, 3);
  for (int y = std::max(opt.border_margin, 3); y <= h - 1 - lo; ++y) {
    for (int x = lo; x <= w - 1 - lo; ++x) {
      const double r = resp[static_cast<std::size_t>(y) * w + x];
      if (!(r > floor)) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double n = resp[static_cast<std::size_t>(y + dy) * w + (x + dx)];
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (earlier ? n >= r : n > r) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) cands.push_back({r, x, y});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.response > b.response; });

  // Bucket grid for the Chebyshev suppression test.
  const double radius = opt.nms_radius;
  const int cell = opt.nms_radius + 1;
  const int gw = w / cell + 1, gh = h / cell + 1;
  std::vector<std::vector<std::pair<double, double>>> grid(static_cast<std::size_t>(gw) * gh);

  FeatureList out;
  for (const auto& c : cands) {
    if (out.size() >= config.max_keypoints) break;
    const auto [ox, oy] = detail::subpixel_offset(resp, w, c.x, c.y);
    const double kx = c.x + ox, ky = c.y + oy;
    const int gx = static_cast<int>(kx) / cell, gy = static_cast<int>(ky) / cell;
    bool suppressed = false;
    for (int yy = std::max(gy - 1, 0); yy <= std::min(gy + 1, gh - 1) && !suppressed; ++yy) {
      for (int xx = std::max(gx - 1, 0); xx <= std::min(gx + 1, gw - 1); ++xx) {
        for (const auto& [px, py] : grid[static_cast<std::size_t>(yy) * gw + xx]) {
          if (std::max(std::abs(px - kx), std::abs(py - ky)) <= radius) {
            suppressed = true;
            break;
          }
        }
        if (suppressed) break;
      }
    }
    if (suppressed) continue;
    auto desc = patch_descriptor(frame, kx, ky, opt.patch_size);
    if (desc.empty()) continue;
    grid[static_cast<std::size_t>(gy) * gw + gx].emplace_back(kx, ky);
    Keypoint kp{frame.index, kx, ky, c.response, static_cast<std::int64_t>(out.size())};
    out.push_back({kp, Descriptor(std::move(desc))});
  }
  return out;
}

/// Features imported from a JSON-lines keypoint file, grouped by frame.
/// Records without a "frame" field belong to `default_frame`.
inline std::map<std::int64_t, FeatureList> import_keypoint_stream(std::istream& is,
                                                                  const std::string& path,
                                                                  std::int64_t default_frame = 0) {
  std::map<std::int64_t, FeatureList> frames;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": invalid JSON: " + e.what());
    }
    try {
      std::int64_t frame = default_frame;
      if (rec.contains("frame")) frame = rec.at("frame").get<std::int64_t>();
      if (frame < 0) throw InputError(where + ": negative frame index");
      const double x = rec.at("x").get<double>();
      const double y = rec.at("y").get<double>();
      const double score = rec.contains("score") ? rec.at("score").get<double>() : 0.0;
      auto values = rec.at("descriptor").get<std::vector<double>>();
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(score)) {
        throw InputError(where + ": non-finite value");
      }
      for (double v : values) {
        if (!std::isfinite(v)) throw InputError(where + ": non-finite descriptor value");
      }
      if (dim == 0) {
        dim = values.size();
      } else if (values.size() != dim) {
        throw InputError(where + ": descriptor length " + std::to_string(values.size()) +
                         " differs from first record's " + std::to_string(dim));
      }
      auto& list = frames[frame];
      Keypoint kp{frame, x, y, score, static_cast<std::int64_t>(list.size())};
      Descriptor d;
      try {
        d = Descriptor(std::move(values));
      } catch (const InputError& e) {
        throw InputError(where + ": " + e.what());
      }
      list.push_back({kp, std::move(d)});
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": bad keypoint record: " + e.what());
    }
  }
  return frames;
}

inline std::map<std::int64_t, FeatureList> import_keypoint_stream(const std::string& path,
                                                                  std::int64_t default_frame = 0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  return import_keypoint_stream(is, path, default_frame);
}

/// Keypoints of one frame; local_index follows file order.
inline FeatureList import_keypoints(const std::string& path, std::int64_t frame_index) {
  auto all = import_keypoint_stream(path, frame_index);
  auto it = all.find(frame_index);
  return it == all.end() ? FeatureList{} : std::move(it->second);
}

}  // namespace vftrack
