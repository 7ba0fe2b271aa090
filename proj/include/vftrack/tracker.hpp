#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "vftrack/kinematics.hpp"
#include "vftrack/types.hpp"

namespace vftrack {

/// Mutable state of one tracking run. tracks[id] holds the track with that id.
struct TrackerState {
  std::vector<Track> tracks;
  std::map<KeypointKey, TrackId> head_map;
  TrackId next_id = 0;
  std::vector<Keypoint> prev_keypoints;

  std::size_t active_count() const { return head_map.size(); }
};

/// Drops pairs whose endpoints are more than dist_th apart; order preserved.
inline std::vector<MatchPair> prune(const std::vector<MatchPair>& matches, double dist_th) {
  if (!(dist_th > 0.0)) throw InputError("dist_th must be > 0");
  std::vector<MatchPair> kept;
  kept.reserve(matches.size());
  for (const auto& m : matches) {
    const double dx = m.curr.x - m.prev.x, dy = m.curr.y - m.prev.y;
    if (std::sqrt(dx * dx + dy * dy) > dist_th) continue;
    kept.push_back(m);
  }
  return kept;
}

inline void spawn_track(TrackerState& state, const Keypoint& kp) {
  const TrackId id = state.next_id++;
  state.tracks.emplace_back(id, kp);
  state.head_map.emplace(kp.key(), id);
}

/// Seeds one track per keypoint of the first frame.
inline void start(TrackerState& state, const std::vector<Keypoint>& first) {
  for (const auto& kp : first) spawn_track(state, kp);
  state.prev_keypoints = first;
}

/// Appends each match's current keypoint to the track headed by its previous
/// keypoint and returns the step kinematics.
inline std::vector<DisplacementVector> extend(TrackerState& state,
                                              const std::vector<MatchPair>& matches) {
  std::vector<DisplacementVector> steps;
  steps.reserve(matches.size());
  for (const auto& m : matches) {
    auto it = state.head_map.find(m.prev.key());
    if (it == state.head_map.end()) {
      throw ConsistencyError("match from keypoint (frame " + std::to_string(m.prev.frame_index) +
                             ", index " + std::to_string(m.prev.local_index) +
                             ") that heads no active track");
    }
    if (m.curr.frame_index != m.prev.frame_index + 1) {
      throw ConsistencyError("match spans frames " + std::to_string(m.prev.frame_index) + " -> " +
                             std::to_string(m.curr.frame_index));
    }
    const TrackId id = it->second;
    Track& track = state.tracks[id];
    track.append(m.curr);
    state.head_map.erase(it);
    if (!state.head_map.emplace(m.curr.key(), id).second) {
      throw ConsistencyError("keypoint (frame " + std::to_string(m.curr.frame_index) + ", index " +
                             std::to_string(m.curr.local_index) + ") matched twice");
    }
    steps.push_back(decompose(m.prev.x, m.prev.y, m.curr.x, m.curr.y, m.curr.frame_index, id));
  }
  return steps;
}

/// Terminates every active track that was not extended this frame and spawns
/// a new track for each unmatched current keypoint.
inline void terminate_and_spawn(TrackerState& state, const std::vector<MatchPair>& matches,
                                const std::vector<Keypoint>& curr_keypoints) {
  std::set<KeypointKey> matched_curr;
  for (const auto& m : matches) matched_curr.insert(m.curr.key());
  for (auto it = state.head_map.begin(); it != state.head_map.end();) {
    if (matched_curr.count(it->first) == 0) {
      state.tracks[it->second].terminate();
      it = state.head_map.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& kp : curr_keypoints) {
    if (matched_curr.count(kp.key()) == 0) spawn_track(state, kp);
  }
  state.prev_keypoints = curr_keypoints;
}

/// Prune, extend, terminate/spawn for one frame t >= 1.
inline std::vector<DisplacementVector> advance(TrackerState& state,
                                               const std::vector<MatchPair>& raw_matches,
                                               const std::vector<Keypoint>& curr_keypoints,
                                               double dist_th) {
  const auto kept = prune(raw_matches, dist_th);
  auto steps = extend(state, kept);
  terminate_and_spawn(state, kept, curr_keypoints);
  return steps;
}

struct TrackingResult {
  std::vector<Track> tracks;
  std::vector<DisplacementVector> kinematics;
  std::vector<double> frame_seconds;  ///< wall time per frame
};

struct SequenceOptions {
  /// 1 runs strictly sequentially; more lets detection and matching of later
  /// frames run ahead of the state update through a bounded queue.
  unsigned jobs = 1;
};

/// A frame-source failure, tagged with the frame that failed.
class FrameError : public InputError {
public:
  FrameError(std::int64_t frame, const std::string& what)
      : InputError("frame " + std::to_string(frame) + ": " + what), frame_(frame) {}
  std::int64_t frame() const { return frame_; }

private:
  std::int64_t frame_;
};

inline std::vector<Keypoint> keypoints_of(const FeatureList& fl) {
  std::vector<Keypoint> out;
  out.reserve(fl.size());
  for (const auto& f : fl) out.push_back(f.keypoint);
  return out;
}

namespace detail {

struct PreparedFrame {
  std::int64_t index = 0;
  std::vector<Keypoint> keypoints;
  std::vector<MatchPair> matches;
};

template <typename Detect>
FeatureList run_detect(Detect& detect, std::int64_t i) {
  try {
    return detect(i);
  } catch (const FrameError&) {
    throw;
  } catch (const InputError& e) {
    throw FrameError(i, e.what());
  }
}

template <typename Match>
std::vector<MatchPair> run_match(Match& match, const FeatureList& prev, const FeatureList& curr,
                                 std::int64_t i) {
  try {
    return match(prev, curr, i);
  } catch (const FrameError&) {
    throw;
  } catch (const InputError& e) {
    throw FrameError(i, e.what());
  }
}

/// Single-producer single-consumer queue with a capacity bound.
template <typename T>
class BoundedQueue {
public:
  explicit BoundedQueue(std::size_t cap) : cap_(cap) {}

  bool push(T v) {
    std::unique_lock lk(m_);
    not_full_.wait(lk, [&] { return q_.size() < cap_ || closed_; });
    if (closed_) return false;
    q_.push_back(std::move(v));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lk(m_);
    not_empty_.wait(lk, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lk(m_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

private:
  std::size_t cap_;
  std::deque<T> q_;
  bool closed_ = false;
  std::mutex m_;
  std::condition_variable not_full_, not_empty_;
};

}  // namespace detail

/// Runs Detect -> Match -> Prune -> Extend -> Terminate over frames
/// [0, n_frames). `detect(i)` returns the features of frame i;
/// `match(prev, curr, i)` returns raw matches for the transition i-1 -> i.
/// Both must be safe to call concurrently when options.jobs > 1.
template <typename Detect, typename Match>
TrackingResult track_sequence(std::int64_t n_frames, Detect&& detect, Match&& match,
                              const TrackerConfig& config, const SequenceOptions& options = {}) {
  config.validate();
  if (n_frames < 1) throw InputError("at least one frame is required");
  using clock = std::chrono::steady_clock;
  TrackerState state;
  TrackingResult result;
  result.frame_seconds.reserve(static_cast<std::size_t>(n_frames));
  auto last = clock::now();

  auto consume = [&](detail::PreparedFrame&& pf) {
    if (pf.index == 0) {
      start(state, pf.keypoints);
    } else {
      auto steps = advance(state, pf.matches, pf.keypoints, config.dist_th);
      result.kinematics.insert(result.kinematics.end(), steps.begin(), steps.end());
    }
    const auto now = clock::now();
    result.frame_seconds.push_back(std::chrono::duration<double>(now - last).count());
    last = now;
  };

  if (options.jobs <= 1) {
    FeatureList prev;
    for (std::int64_t i = 0; i < n_frames; ++i) {
      FeatureList cur = detail::run_detect(detect, i);
      detail::PreparedFrame pf{i, keypoints_of(cur), {}};
      if (i > 0) pf.matches = detail::run_match(match, prev, cur, i);
      consume(std::move(pf));
      prev = std::move(cur);
    }
  } else {
    detail::BoundedQueue<detail::PreparedFrame> queue(options.jobs);
    std::exception_ptr producer_error;
    std::thread producer([&] {
      try {
        std::deque<std::future<FeatureList>> ahead;
        std::int64_t launched = 0;
        FeatureList prev;
        for (std::int64_t i = 0; i < n_frames; ++i) {
          while (ahead.size() < options.jobs && launched < n_frames) {
            const std::int64_t k = launched++;
            ahead.push_back(std::async(std::launch::async,
                                       [&detect, k] { return detail::run_detect(detect, k); }));
          }
          FeatureList cur = ahead.front().get();
          ahead.pop_front();
          detail::PreparedFrame pf{i, keypoints_of(cur), {}};
          if (i > 0) pf.matches = detail::run_match(match, prev, cur, i);
          if (!queue.push(std::move(pf))) break;
          prev = std::move(cur);
        }
      } catch (...) {
        producer_error = std::current_exception();
      }
      queue.close();
    });
    try {
      while (auto pf = queue.pop()) consume(std::move(*pf));
    } catch (...) {
      queue.close();
      producer.join();
      throw;
    }
    producer.join();
    if (producer_error) std::rethrow_exception(producer_error);
  }

  result.tracks = std::move(state.tracks);
  return result;
}

}  // namespace vftrack
