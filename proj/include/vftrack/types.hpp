#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vftrack {

/// Malformed or out-of-contract user input (bad files, flags, values).
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant; indicates a pipeline bug rather than bad input.
class ConsistencyError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

using TrackId = std::uint32_t;

/// Identity of a keypoint: exact, independent of its floating-point position.
struct KeypointKey {
  std::int64_t frame_index = 0;
  std::int64_t local_index = 0;

  friend auto operator<=>(const KeypointKey&, const KeypointKey&) = default;
};

/// A detected image feature. Image convention: origin top-left, y down.
struct Keypoint {
  std::int64_t frame_index = 0;
  double x = 0.0;
  double y = 0.0;
  double response = 0.0;
  std::int64_t local_index = 0;

  KeypointKey key() const { return {frame_index, local_index}; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

/// Unit-norm descriptor vector. Construction normalizes; zero or non-finite
/// input is rejected.
class Descriptor {
public:
  Descriptor() = default;

  explicit Descriptor(std::vector<double> values) : values_(std::move(values)) {
    double sq = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v)) throw InputError("descriptor contains a non-finite value");
      sq += v * v;
    }
    if (values_.empty()) throw InputError("descriptor is empty");
    if (!(sq > 0.0)) throw InputError("descriptor has zero norm");
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : values_) v *= inv;
  }

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

private:
  std::vector<double> values_;
};

struct Feature {
  Keypoint keypoint;
  Descriptor descriptor;
};

using FeatureList = std::vector<Feature>;

/// Correspondence between a keypoint at frame t-1 and one at frame t.
struct MatchPair {
  Keypoint prev;
  Keypoint curr;
  double score = 0.0;
};

struct TrackPoint {
  std::int64_t frame_index = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

enum class TrackState { active, terminated };

/// Per-frame trajectory. Frame indices are strictly consecutive.
class Track {
public:
  Track(TrackId id, const Keypoint& kp)
      : id_(id), points_{{kp.frame_index, kp.x, kp.y}} {}

  Track(TrackId id, std::vector<TrackPoint> points, TrackState state = TrackState::terminated)
      : id_(id), points_(std::move(points)), state_(state) {
    if (points_.empty()) throw InputError("track " + std::to_string(id) + " has no points");
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (points_[i].frame_index != points_[i - 1].frame_index + 1) {
        throw InputError("track " + std::to_string(id) + " has a frame gap at frame " +
                         std::to_string(points_[i].frame_index));
      }
    }
  }

  TrackId id() const { return id_; }
  TrackState state() const { return state_; }
  bool active() const { return state_ == TrackState::active; }
  const std::vector<TrackPoint>& points() const { return points_; }
  std::size_t length() const { return points_.size(); }
  const TrackPoint& head() const { return points_.back(); }
  std::int64_t first_frame() const { return points_.front().frame_index; }
  std::int64_t last_frame() const { return points_.back().frame_index; }

  /// Point at an absolute frame index, if the track covers it.
  const TrackPoint* at_frame(std::int64_t frame) const {
    if (frame < first_frame() || frame > last_frame()) return nullptr;
    return &points_[static_cast<std::size_t>(frame - first_frame())];
  }

  void append(const Keypoint& kp) {
    if (state_ != TrackState::active) {
      throw ConsistencyError("append to terminated track " + std::to_string(id_));
    }
    if (kp.frame_index != head().frame_index + 1) {
      throw ConsistencyError("append to track " + std::to_string(id_) + " skips from frame " +
                             std::to_string(head().frame_index) + " to " +
                             std::to_string(kp.frame_index));
    }
    points_.push_back({kp.frame_index, kp.x, kp.y});
  }

  void terminate() { state_ = TrackState::terminated; }

  friend bool operator==(const Track&, const Track&) = default;

private:
  TrackId id_ = 0;
  std::vector<TrackPoint> points_;
  TrackState state_ = TrackState::active;
};

struct TrackerConfig {
  double dist_th = 40.0;            ///< prune threshold, pixels
  std::size_t max_keypoints = 2048; ///< per-frame detector cap
  double ratio_threshold = 0.8;     ///< nearest / second-nearest

  void validate() const {
    if (!(dist_th > 0.0) || !std::isfinite(dist_th)) throw InputError("dist_th must be > 0");
    if (max_keypoints == 0) throw InputError("max_keypoints must be positive");
    if (!(ratio_threshold > 0.0 && ratio_threshold <= 1.0)) {
      throw InputError("ratio_threshold must lie in (0, 1]");
    }
  }
};

/// Time and length calibration. pixel_scale has no default: physical units
/// are only reported when the user supplies it.
struct SequenceCalibration {
  double frame_interval = 2.0;             ///< seconds per frame
  std::optional<double> pixel_scale;       ///< micrometers per pixel

  void validate() const {
    if (!(frame_interval > 0.0)) throw InputError("frame interval must be > 0");
    if (pixel_scale && !(*pixel_scale > 0.0)) throw InputError("pixel scale must be > 0");
  }
};

/// Issues track ids once each. The tracker draws ids from here so that
/// one run yields the contiguous range [0, next).
class TrackIdRegistry {
public:
  Track new_track(TrackId id, const Keypoint& kp) {
    if (id < issued_.size() && issued_[id]) {
      throw InputError("track id " + std::to_string(id) + " already issued");
    }
    if (id >= issued_.size()) issued_.resize(static_cast<std::size_t>(id) + 1, false);
    issued_[id] = true;
    return Track(id, kp);
  }

private:
  std::vector<bool> issued_;
};

}  // namespace vftrack
