#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vftrack/csv.hpp"
#include "vftrack/types.hpp"

namespace vftrack {

/// One tracked step, decomposed. dy_growth is growth-positive (image y up).
struct DisplacementVector {
  TrackId track_id = 0;
  std::int64_t frame_index = 0;  ///< frame at the end of the step
  double x_start = 0.0;          ///< image position at frame_index - 1
  double y_start = 0.0;
  double dx = 0.0;
  double dy_growth = 0.0;
  double l = 0.0;
  double theta_deg = 0.0;  ///< atan2(dx, dy_growth) in (-180, 180]
};

/// Decomposes the step (x1, y1) -> (x2, y2) given in image coordinates.
inline DisplacementVector decompose(double x1, double y1, double x2, double y2,
                                    std::int64_t end_frame = 0, TrackId track = 0) {
  DisplacementVector v;
  v.track_id = track;
  v.frame_index = end_frame;
  v.x_start = x1;
  v.y_start = y1;
  v.dx = x2 - x1;
  v.dy_growth = -(y2 - y1);
  v.l = std::hypot(v.dx, v.dy_growth);
  double theta = std::atan2(v.dx, v.dy_growth) * (180.0 / std::numbers::pi);
  if (theta <= -180.0) theta = 180.0;
  v.theta_deg = theta;
  return v;
}

/// Per-step displacements of every track with at least `min_track_len` points.
inline std::vector<DisplacementVector> displacements_from_tracks(const std::vector<Track>& tracks,
                                                                 std::size_t min_track_len = 2) {
  std::vector<DisplacementVector> out;
  for (const auto& t : tracks) {
    if (t.length() < min_track_len) continue;
    const auto& p = t.points();
    for (std::size_t i = 1; i < p.size(); ++i) {
      out.push_back(decompose(p[i - 1].x, p[i - 1].y, p[i].x, p[i].y, p[i].frame_index, t.id()));
    }
  }
  return out;
}

struct Region {
  std::string name;
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  /// Half-open containment so that tiling regions partition the plane.
  bool contains(double x, double y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }

  void validate() const {
    if (!(x_min < x_max) || !(y_min < y_max)) {
      throw InputError("region '" + name + "' is degenerate");
    }
  }
};

struct GrowthEntry {
  std::int64_t frame_index = 0;
  std::size_t count = 0;
  std::optional<double> mean_dy_px;       ///< missing when count == 0
  std::optional<double> rate_um_per_s;    ///< needs pixel_scale
};

struct GrowthSeries {
  std::vector<GrowthEntry> entries;

  /// Sum of per-frame mean growth over frames that have samples.
  double integral() const {
    double s = 0.0;
    for (const auto& e : entries) {
      if (e.mean_dy_px) s += *e.mean_dy_px;
    }
    return s;
  }
};

struct OrientationEntry {
  std::int64_t frame_index = 0;
  std::size_t count = 0;
  std::optional<double> mean_theta_deg;
  std::optional<double> std_theta_deg;  ///< population std
};

using OrientationSeries = std::vector<OrientationEntry>;

/// Inclusive frame span covered by a series.
struct FrameSpan {
  std::int64_t first = 0;
  std::int64_t last = -1;
};

inline FrameSpan span_of(const std::vector<DisplacementVector>& d) {
  if (d.empty()) return {};
  FrameSpan s{d.front().frame_index, d.front().frame_index};
  for (const auto& v : d) {
    s.first = std::min(s.first, v.frame_index);
    s.last = std::max(s.last, v.frame_index);
  }
  return s;
}

namespace detail {

template <typename Pred>
GrowthSeries growth_series_filtered(const std::vector<DisplacementVector>& disp,
                                    const SequenceCalibration& cal, FrameSpan span, Pred keep) {
  const auto n = span.last >= span.first ? static_cast<std::size_t>(span.last - span.first + 1) : 0;
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& v : disp) {
    if (v.frame_index < span.first || v.frame_index > span.last || !keep(v)) continue;
    const auto k = static_cast<std::size_t>(v.frame_index - span.first);
    sum[k] += v.dy_growth;
    ++count[k];
  }
  GrowthSeries gs;
  gs.entries.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    GrowthEntry e;
    e.frame_index = span.first + static_cast<std::int64_t>(k);
    e.count = count[k];
    if (count[k] > 0) {
      e.mean_dy_px = sum[k] / static_cast<double>(count[k]);
      if (cal.pixel_scale) e.rate_um_per_s = *e.mean_dy_px * *cal.pixel_scale / cal.frame_interval;
    }
    gs.entries.push_back(e);
  }
  return gs;
}

}  // namespace detail

/// Per-frame mean growth over all displacements ending at each frame of
/// `span` (defaults to the frames the displacements cover).
inline GrowthSeries growth_series(const std::vector<DisplacementVector>& disp,
                                  const SequenceCalibration& cal,
                                  std::optional<FrameSpan> span = std::nullopt) {
  cal.validate();
  return detail::growth_series_filtered(disp, cal, span.value_or(span_of(disp)),
                                        [](const DisplacementVector&) { return true; });
}

/// Growth series per region; a displacement counts toward every region that
/// contains its start point.
inline std::vector<GrowthSeries> regional_growth_series(
    const std::vector<DisplacementVector>& disp, const std::vector<Region>& regions,
    const SequenceCalibration& cal, std::optional<FrameSpan> span = std::nullopt) {
  cal.validate();
  if (regions.empty()) throw InputError("no regions given");
  const FrameSpan s = span.value_or(span_of(disp));
  std::vector<GrowthSeries> out;
  out.reserve(regions.size());
  for (const auto& r : regions) {
    r.validate();
    out.push_back(detail::growth_series_filtered(
        disp, cal, s, [&r](const DisplacementVector& v) { return r.contains(v.x_start, v.y_start); }));
  }
  return out;
}

/// Arithmetic mean and population std of theta per frame.
template <typename Pred>
OrientationSeries orientation_series(const std::vector<DisplacementVector>& disp, FrameSpan span,
                                     Pred keep) {
  const auto n = span.last >= span.first ? static_cast<std::size_t>(span.last - span.first + 1) : 0;
  std::vector<std::vector<double>> buckets(n);
  for (const auto& v : disp) {
    if (v.frame_index < span.first || v.frame_index > span.last || !keep(v)) continue;
    buckets[static_cast<std::size_t>(v.frame_index - span.first)].push_back(v.theta_deg);
  }
  OrientationSeries out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    OrientationEntry e;
    e.frame_index = span.first + static_cast<std::int64_t>(k);
    const auto& b = buckets[k];
    e.count = b.size();
    if (!b.empty()) {
      double mean = 0.0;
      for (double t : b) mean += t;
      mean /= static_cast<double>(b.size());
      double var = 0.0;
      for (double t : b) var += (t - mean) * (t - mean);
      var /= static_cast<double>(b.size());
      e.mean_theta_deg = mean;
      e.std_theta_deg = std::sqrt(var);
    }
    out.push_back(e);
  }
  return out;
}

inline OrientationSeries orientation_series(const std::vector<DisplacementVector>& disp,
                                            std::optional<FrameSpan> span = std::nullopt) {
  return orientation_series(disp, span.value_or(span_of(disp)),
                            [](const DisplacementVector&) { return true; });
}

/// Parses a JSON array of {name, x_min, y_min, x_max, y_max}.
inline std::vector<Region> parse_regions(const std::string& text, const std::string& path) {
  std::vector<Region> out;
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw InputError(path + ": regions file must hold a JSON array");
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto& r = j[i];
      Region reg{r.at("name").get<std::string>(), r.at("x_min").get<double>(),
                 r.at("y_min").get<double>(), r.at("x_max").get<double>(),
                 r.at("y_max").get<double>()};
      try {
        reg.validate();
      } catch (const InputError& e) {
        throw InputError(path + ": region " + std::to_string(i) + ": " + e.what());
      }
      out.push_back(std::move(reg));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": malformed regions JSON: " + e.what());
  }
  return out;
}

inline std::vector<Region> load_regions(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_regions(text, path);
}

/// Writes `frame,region,mean_dy_px,rate_um_per_s,mean_theta_deg,std_theta_deg,count`.
/// The global series is labelled "all"; missing values are empty fields.
inline void write_kinematics_csv(std::ostream& os, const std::vector<DisplacementVector>& disp,
                                 const std::vector<Region>& regions,
                                 const SequenceCalibration& cal, FrameSpan span) {
  os << "frame,region,mean_dy_px,rate_um_per_s,mean_theta_deg,std_theta_deg,count\n";
  auto emit = [&](const std::string& name, const GrowthSeries& g, const OrientationSeries& o) {
    for (std::size_t k = 0; k < g.entries.size(); ++k) {
      const auto& ge = g.entries[k];
      const auto& oe = o[k];
      os << ge.frame_index << ',' << name << ',' << format_optional(ge.mean_dy_px) << ','
         << format_optional(ge.rate_um_per_s) << ',' << format_optional(oe.mean_theta_deg) << ','
         << format_optional(oe.std_theta_deg) << ',' << ge.count << '\n';
    }
  };
  emit("all", growth_series(disp, cal, span),
       orientation_series(disp, span, [](const DisplacementVector&) { return true; }));
  if (regions.empty()) return;
  const auto regional = regional_growth_series(disp, regions, cal, span);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto& reg = regions[r];
    emit(reg.name, regional[r], orientation_series(disp, span, [&reg](const DisplacementVector& v) {
           return reg.contains(v.x_start, v.y_start);
         }));
  }
}

}  // namespace vftrack
