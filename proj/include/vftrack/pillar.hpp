#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "vftrack/csv.hpp"
#include "vftrack/kinematics.hpp"
#include "vftrack/types.hpp"

namespace vftrack {

/// A reconstructed point in pillar coordinates: x relative to the frame's
/// horizontal centre, y_pillar growth-positive, 0 at the base.
struct PillarPoint {
  double x_pillar = 0.0;
  double y_pillar = 0.0;
  std::int64_t birth_frame = 0;
};

struct PillarShape {
  std::vector<PillarPoint> points;
  double cumulative_drift = 0.0;
  double cumulative_height = 0.0;
};

struct PillarOptions {
  double frame_center_x = 0.0;
  bool trimmed_mean = false;
  double trim_fraction = 0.05;  ///< dropped from each tail when trimmed_mean is set
};

namespace detail {

inline double mean_of(std::vector<double> v, const PillarOptions& opt) {
  if (v.empty()) return 0.0;
  std::size_t lo = 0, hi = v.size();
  if (opt.trimmed_mean) {
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(opt.trim_fraction * static_cast<double>(v.size()));
    if (2 * k < v.size()) {
      lo = k;
      hi = v.size() - k;
    }
  }
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += v[i];
  return s / static_cast<double>(hi - lo);
}

}  // namespace detail

/// Mean (dx, dy_growth) of one frame's displacements; (0, 0) when empty.
inline std::pair<double, double> mean_displacement(const std::vector<DisplacementVector>& disp,
                                                   const PillarOptions& opt = {}) {
  std::vector<double> dx, dy;
  dx.reserve(disp.size());
  dy.reserve(disp.size());
  for (const auto& d : disp) {
    dx.push_back(d.dx);
    dy.push_back(d.dy_growth);
  }
  return {detail::mean_of(std::move(dx), opt), detail::mean_of(std::move(dy), opt)};
}

/// Translates the existing shape rigidly by the frame's mean displacement,
/// then adds the new tracks' first points at the base.
inline PillarShape reconstruct_step(PillarShape shape,
                                    const std::vector<DisplacementVector>& frame_displacements,
                                    const std::vector<TrackPoint>& new_track_points,
                                    std::int64_t frame, const PillarOptions& opt = {}) {
  const auto [mx, my] = mean_displacement(frame_displacements, opt);
  for (auto& p : shape.points) {
    p.x_pillar += mx;
    p.y_pillar += my;
  }
  shape.cumulative_drift += mx;
  shape.cumulative_height += my;
  for (const auto& tp : new_track_points) {
    shape.points.push_back({tp.x - opt.frame_center_x, 0.0, frame});
  }
  return shape;
}

struct PillarSeriesEntry {
  std::int64_t frame_index = 0;
  double height_px = 0.0;
  double drift_px = 0.0;
  std::optional<double> height_um;
  std::optional<double> drift_um;
};

struct PillarReconstruction {
  PillarShape shape;
  std::vector<PillarSeriesEntry> series;
};

/// Folds reconstruct_step over every frame the tracks cover.
inline PillarReconstruction reconstruct_sequence(const std::vector<Track>& tracks,
                                                 const std::vector<DisplacementVector>& disp,
                                                 std::optional<double> pixel_scale = std::nullopt,
                                                 const PillarOptions& opt = {}) {
  PillarReconstruction out;
  if (tracks.empty()) return out;
  std::int64_t first = tracks.front().first_frame(), last = tracks.front().last_frame();
  std::map<std::int64_t, std::vector<TrackPoint>> births;
  for (const auto& t : tracks) {
    first = std::min(first, t.first_frame());
    last = std::max(last, t.last_frame());
    births[t.first_frame()].push_back(t.points().front());
  }
  std::map<std::int64_t, std::vector<DisplacementVector>> by_frame;
  for (const auto& d : disp) by_frame[d.frame_index].push_back(d);

  static const std::vector<DisplacementVector> no_disp;
  static const std::vector<TrackPoint> no_points;
  for (std::int64_t f = first; f <= last; ++f) {
    auto di = by_frame.find(f);
    auto bi = births.find(f);
    out.shape = reconstruct_step(std::move(out.shape), di == by_frame.end() ? no_disp : di->second,
                                 bi == births.end() ? no_points : bi->second, f, opt);
    PillarSeriesEntry e{f, out.shape.cumulative_height, out.shape.cumulative_drift, {}, {}};
    if (pixel_scale) {
      e.height_um = e.height_px * *pixel_scale;
      e.drift_um = e.drift_px * *pixel_scale;
    }
    out.series.push_back(e);
  }
  return out;
}

inline void write_pillar_shape_csv(std::ostream& os, const PillarShape& shape) {
  os << "x_pillar,y_pillar,birth_frame\n";
  for (const auto& p : shape.points) {
    os << format_number(p.x_pillar) << ',' << format_number(p.y_pillar) << ',' << p.birth_frame
       << '\n';
  }
}

inline void write_pillar_series_csv(std::ostream& os, const std::vector<PillarSeriesEntry>& s) {
  os << "frame,height_px,drift_px,height_um,drift_um\n";
  for (const auto& e : s) {
    os << e.frame_index << ',' << format_number(e.height_px) << ',' << format_number(e.drift_px)
       << ',' << format_optional(e.height_um) << ',' << format_optional(e.drift_um) << '\n';
  }
}

}  // namespace vftrack
