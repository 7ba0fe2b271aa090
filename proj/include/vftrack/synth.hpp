#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "vftrack/csv.hpp"
#include "vftrack/image.hpp"
#include "vftrack/match.hpp"
#include "vftrack/types.hpp"

namespace vftrack {

struct SynthConfig {
  std::int64_t n_frames = 100;
  std::size_t n_particles = 200;
  double growth_px_per_frame = 3.0;
  double drift_px_per_frame = 0.5;
  double oscillation_std_start_deg = 0.0;
  double oscillation_std_end_deg = 50.0;
  double position_noise_px = 0.5;
  double spawn_rate = 10.0;  ///< mean new particles per frame (Poisson)
  double survival_prob = 0.95;
  std::uint64_t seed = 42;

  int width = 512;
  int height = 512;
  int margin = 10;                  ///< particles closer than this to a border retire
  double min_separation_px = 12.0;  ///< the younger of two closer particles retires
  std::size_t descriptor_dim = 64;
  double blob_sigma_min = 0.9;      ///< per-particle major-axis sigma range, px
  double blob_sigma_max = 1.6;
  double blob_aspect_min = 0.55;    ///< minor / major sigma ratio lower bound
  /// Round observed positions to the pixel grid, so a particle's rendered
  /// stamp is identical in every frame and ground truth holds the drawn
  /// centres.
  bool snap_to_pixels = false;

  void validate() const {
    if (n_frames < 1) throw InputError("n_frames must be >= 1");
    if (!(survival_prob >= 0.0 && survival_prob <= 1.0)) {
      throw InputError("survival_prob must lie in [0, 1]");
    }
    if (!(spawn_rate >= 0.0)) throw InputError("spawn_rate must be >= 0");
    if (!(position_noise_px >= 0.0)) throw InputError("position_noise_px must be >= 0");
    if (!(oscillation_std_start_deg >= 0.0) || !(oscillation_std_end_deg >= 0.0)) {
      throw InputError("oscillation std must be >= 0");
    }
    if (width < 16 || height < 16) throw InputError("frame must be at least 16x16");
    if (2 * margin + 1 >= std::min(width, height)) throw InputError("margin too large for frame");
    if (descriptor_dim == 0) throw InputError("descriptor_dim must be positive");
    if (!(blob_sigma_min > 0.0 && blob_sigma_min <= blob_sigma_max)) {
      throw InputError("invalid blob sigma range");
    }
    if (!(blob_aspect_min > 0.0 && blob_aspect_min <= 1.0)) {
      throw InputError("blob_aspect_min must lie in (0, 1]");
    }
  }
};

/// Angle std (degrees) applied to steps ending at `frame`: linear from the
/// start value at frame 1 to the end value at the last frame.
inline double oscillation_std_at(const SynthConfig& c, std::int64_t frame) {
  if (c.n_frames <= 2) return c.oscillation_std_start_deg;
  const double u = static_cast<double>(frame - 1) / static_cast<double>(c.n_frames - 2);
  return c.oscillation_std_start_deg +
         (c.oscillation_std_end_deg - c.oscillation_std_start_deg) * std::clamp(u, 0.0, 1.0);
}

struct BlobShape {
  double sigma_major = 1.0;
  double sigma_minor = 1.0;
  double angle = 0.0;  ///< radians
};

struct SynthParticle {
  TrackId id = 0;
  BlobShape shape;
  std::vector<double> descriptor;
};

/// Observed state of one particle in one frame.
struct SynthObservation {
  TrackId particle = 0;
  double x = 0.0;
  double y = 0.0;
};

struct SynthResult {
  SynthConfig config;
  std::vector<SynthParticle> particles;                   ///< index == id
  std::vector<std::vector<SynthObservation>> frames;      ///< per frame, ordered by id
  std::vector<Track> ground_truth;                        ///< index == id

  /// Keypoint stream of frame t; local_index is the observation order.
  FeatureList features(std::int64_t t) const {
    FeatureList out;
    const auto& obs = frames[static_cast<std::size_t>(t)];
    out.reserve(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      Keypoint kp{t, obs[i].x, obs[i].y, 1.0, static_cast<std::int64_t>(i)};
      out.push_back({kp, Descriptor(particles[obs[i].particle].descriptor)});
    }
    return out;
  }

  /// True correspondences for the transition t-1 -> t.
  std::vector<MatchRecord> true_matches(std::int64_t t) const {
    std::vector<MatchRecord> out;
    const auto& prev = frames[static_cast<std::size_t>(t - 1)];
    const auto& curr = frames[static_cast<std::size_t>(t)];
    std::map<TrackId, std::size_t> prev_index;
    for (std::size_t i = 0; i < prev.size(); ++i) prev_index[prev[i].particle] = i;
    for (std::size_t j = 0; j < curr.size(); ++j) {
      auto it = prev_index.find(curr[j].particle);
      if (it == prev_index.end()) continue;
      out.push_back({static_cast<std::int64_t>(it->second), static_cast<std::int64_t>(j), 1.0, 0});
    }
    return out;
  }

  std::int64_t n_frames() const { return static_cast<std::int64_t>(frames.size()); }
};

/// Generates a deterministic synthetic growth sequence for the given seed.
inline SynthResult generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthResult res;
  res.config = config;
  res.frames.resize(static_cast<std::size_t>(config.n_frames));

  struct Live {
    TrackId id;
    double lx, ly;  // latent position
    double ox, oy;  // observed position
  };
  std::vector<Live> live;
  std::vector<std::vector<TrackPoint>> gt_points;

  const double lo_x = config.margin, hi_x = config.width - 1 - config.margin;
  const double lo_y = config.margin, hi_y = config.height - 1 - config.margin;
  const auto inside = [&](double x, double y) {
    return x >= lo_x && x <= hi_x && y >= lo_y && y <= hi_y;
  };
  const auto observe = [&](double v) { return config.snap_to_pixels ? std::round(v) : v; };
  const double min_sep2 = config.min_separation_px * config.min_separation_px;
  const auto clear_of = [&](double x, double y) {
    for (const auto& p : live) {
      const double dx = p.ox - x, dy = p.oy - y;
      if (dx * dx + dy * dy < min_sep2) return false;
    }
    return true;
  };

  auto spawn = [&](std::int64_t frame) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double lx = lo_x + unit(rng) * (hi_x - lo_x);
      const double ly = lo_y + unit(rng) * (hi_y - lo_y);
      const double ox = observe(lx + config.position_noise_px * normal(rng));
      const double oy = observe(ly + config.position_noise_px * normal(rng));
      if (!inside(ox, oy) || !clear_of(ox, oy)) continue;
      SynthParticle p;
      p.id = static_cast<TrackId>(res.particles.size());
      p.shape.sigma_major =
          config.blob_sigma_min + unit(rng) * (config.blob_sigma_max - config.blob_sigma_min);
      p.shape.sigma_minor =
          p.shape.sigma_major * (config.blob_aspect_min + unit(rng) * (1.0 - config.blob_aspect_min));
      p.shape.angle = unit(rng) * std::numbers::pi;
      p.descriptor.resize(config.descriptor_dim);
      for (auto& v : p.descriptor) v = normal(rng);
      live.push_back({p.id, lx, ly, ox, oy});
      gt_points.push_back({{frame, ox, oy}});
      res.particles.push_back(std::move(p));
      return;
    }
  };

  for (std::size_t i = 0; i < config.n_particles; ++i) spawn(0);

  const double step_len = std::hypot(config.growth_px_per_frame, config.drift_px_per_frame);
  const double base_angle = std::atan2(config.drift_px_per_frame, config.growth_px_per_frame);
  for (std::int64_t t = 1; t < config.n_frames; ++t) {
    const double sigma = oscillation_std_at(config, t) * std::numbers::pi / 180.0;
    std::vector<Live> moved;
    moved.reserve(live.size());
    for (auto p : live) {
      const bool survives = unit(rng) < config.survival_prob;
      const double theta = base_angle + sigma * normal(rng);
      const double nx = config.position_noise_px * normal(rng);
      const double ny = config.position_noise_px * normal(rng);
      if (!survives) continue;
      p.lx += step_len * std::sin(theta);
      p.ly -= step_len * std::cos(theta);
      p.ox = observe(p.lx + nx);
      p.oy = observe(p.ly + ny);
      if (!inside(p.ox, p.oy)) continue;
      moved.push_back(p);
    }
    // Older particles keep their place when two come too close.
    live.clear();
    for (const auto& p : moved) {
      if (clear_of(p.ox, p.oy)) live.push_back(p);
    }
    for (const auto& p : live) gt_points[p.id].push_back({t, p.ox, p.oy});
    std::poisson_distribution<int> births(config.spawn_rate);
    const int n_new = config.spawn_rate > 0.0 ? births(rng) : 0;
    for (int k = 0; k < n_new; ++k) spawn(t);
    std::sort(live.begin(), live.end(), [](const Live& a, const Live& b) { return a.id < b.id; });
    auto& obs = res.frames[static_cast<std::size_t>(t)];
    for (const auto& p : live) obs.push_back({p.id, p.ox, p.oy});
  }
  // Frame 0 observations are the initial spawns.
  for (const auto& pts : gt_points) {
    if (pts.front().frame_index == 0) {
      res.frames[0].push_back({static_cast<TrackId>(&pts - gt_points.data()), pts.front().x,
                               pts.front().y});
    }
  }
  res.ground_truth.reserve(gt_points.size());
  for (std::size_t i = 0; i < gt_points.size(); ++i) {
    res.ground_truth.emplace_back(static_cast<TrackId>(i), std::move(gt_points[i]));
  }
  return res;
}

/// Draws every particle observed in frame t as a 5x5 Gaussian blob of peak
/// 255 on black, max-composited.
inline Frame render_frame(const SynthResult& res, std::int64_t t) {
  const auto& c = res.config;
  Frame f(t, c.width, c.height, 0);
  for (const auto& o : res.frames[static_cast<std::size_t>(t)]) {
    const auto& s = res.particles[o.particle].shape;
    const double ca = std::cos(s.angle), sa = std::sin(s.angle);
    const double ia = 1.0 / (s.sigma_major * s.sigma_major);
    const double ib = 1.0 / (s.sigma_minor * s.sigma_minor);
    const int cx = static_cast<int>(std::lround(o.x)), cy = static_cast<int>(std::lround(o.y));
    for (int y = cy - 2; y <= cy + 2; ++y) {
      for (int x = cx - 2; x <= cx + 2; ++x) {
        if (x < 0 || y < 0 || x >= c.width || y >= c.height) continue;
        const double dx = x - o.x, dy = y - o.y;
        const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
        const double val = 255.0 * std::exp(-0.5 * (u * u * ia + v * v * ib));
        auto& px = f.at(x, y);
        px = std::max<std::uint8_t>(px, static_cast<std::uint8_t>(std::lround(val)));
      }
    }
  }
  return f;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    if (k == "n_frames") c.n_frames = v.get<std::int64_t>();
    else if (k == "n_particles") c.n_particles = v.get<std::size_t>();
    else if (k == "growth_px_per_frame") c.growth_px_per_frame = v.get<double>();
    else if (k == "drift_px_per_frame") c.drift_px_per_frame = v.get<double>();
    else if (k == "oscillation_std_start_deg") c.oscillation_std_start_deg = v.get<double>();
    else if (k == "oscillation_std_end_deg") c.oscillation_std_end_deg = v.get<double>();
    else if (k == "position_noise_px") c.position_noise_px = v.get<double>();
    else if (k == "spawn_rate") c.spawn_rate = v.get<double>();
    else if (k == "survival_prob") c.survival_prob = v.get<double>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "width") c.width = v.get<int>();
    else if (k == "height") c.height = v.get<int>();
    else if (k == "margin") c.margin = v.get<int>();
    else if (k == "min_separation_px") c.min_separation_px = v.get<double>();
    else if (k == "descriptor_dim") c.descriptor_dim = v.get<std::size_t>();
    else if (k == "blob_sigma_min") c.blob_sigma_min = v.get<double>();
    else if (k == "blob_sigma_max") c.blob_sigma_max = v.get<double>();
    else if (k == "blob_aspect_min") c.blob_aspect_min = v.get<double>();
    else if (k == "snap_to_pixels") c.snap_to_pixels = v.get<bool>();
    else throw InputError("unknown synth config key '" + k + "'");
  }
  c.validate();
  return c;
}

/// Writes gt.csv, keypoints.jsonl, matches.jsonl and, when `render` is set,
/// frame_%05d.pgm into `dir`.
inline void write_synth_outputs(const SynthResult& res, const std::filesystem::path& dir,
                                bool render) {
  std::filesystem::create_directories(dir);
  write_tracks_csv((dir / "gt.csv").string(), res.ground_truth);
  {
    std::ofstream os(dir / "keypoints.jsonl", std::ios::binary);
    if (!os) throw InputError("cannot write " + (dir / "keypoints.jsonl").string());
    for (std::int64_t t = 0; t < res.n_frames(); ++t) {
      for (const auto& f : res.features(t)) {
        nlohmann::ordered_json j;
        j["frame"] = t;
        j["x"] = f.keypoint.x;
        j["y"] = f.keypoint.y;
        j["score"] = f.keypoint.response;
        j["descriptor"] = f.descriptor.values();
        os << j.dump() << '\n';
      }
    }
  }
  {
    std::ofstream os(dir / "matches.jsonl", std::ios::binary);
    if (!os) throw InputError("cannot write " + (dir / "matches.jsonl").string());
    for (std::int64_t t = 1; t < res.n_frames(); ++t) {
      for (const auto& m : res.true_matches(t)) {
        nlohmann::ordered_json j;
        j["frame"] = t;
        j["prev_index"] = m.prev_index;
        j["curr_index"] = m.curr_index;
        j["score"] = m.score;
        os << j.dump() << '\n';
      }
    }
  }
  if (render) {
    for (std::int64_t t = 0; t < res.n_frames(); ++t) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05lld.pgm", static_cast<long long>(t));
      write_pgm((dir / name).string(), render_frame(res, t));
    }
  }
}

}  // namespace vftrack
