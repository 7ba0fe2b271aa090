#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "vftrack/types.hpp"

namespace vftrack {

namespace detail {

struct NearestTwo {
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  std::size_t index = 0;

  void offer(double d, std::size_t i) {
    if (d < best) {
      second = best;
      best = d;
      index = i;
    } else if (d < second) {
      second = d;
    }
  }

  /// Lowe ratio test on squared distances. A lone candidate always passes.
  bool passes(double ratio) const {
    if (std::isinf(second)) return std::isfinite(best);
    return std::sqrt(best) < ratio * std::sqrt(second);
  }
};

inline double squared_distance(const Descriptor& a, const Descriptor& b) {
  const auto& va = a.values();
  const auto& vb = b.values();
  double s = 0.0;
  for (std::size_t k = 0; k < va.size(); ++k) {
    const double d = va[k] - vb[k];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Mutual nearest neighbours under Euclidean descriptor distance, with the
/// ratio test applied on both sides. The result is a partial bijection,
/// ordered by prev local index.
inline std::vector<MatchPair> match_native(const FeatureList& prev, const FeatureList& curr,
                                           const TrackerConfig& config) {
  if (prev.empty() || curr.empty()) return {};
  const std::size_t dim = prev.front().descriptor.size();
  for (const auto& f : prev) {
    if (f.descriptor.size() != dim) throw InputError("descriptor dimension mismatch in prev frame");
  }
  for (const auto& f : curr) {
    if (f.descriptor.size() != dim) {
      throw InputError("descriptor dimension mismatch: " + std::to_string(f.descriptor.size()) +
                       " vs " + std::to_string(dim));
    }
  }
  std::vector<detail::NearestTwo> fwd(prev.size()), bwd(curr.size());
  for (std::size_t i = 0; i < prev.size(); ++i) {
    for (std::size_t j = 0; j < curr.size(); ++j) {
      const double d = detail::squared_distance(prev[i].descriptor, curr[j].descriptor);
      fwd[i].offer(d, j);
      bwd[j].offer(d, i);
    }
  }
  std::vector<MatchPair> out;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    const auto& f = fwd[i];
    const std::size_t j = f.index;
    if (bwd[j].index != i) continue;
    if (!f.passes(config.ratio_threshold) || !bwd[j].passes(config.ratio_threshold)) continue;
    const double score = std::clamp(1.0 - std::sqrt(f.best) / 2.0, 0.0, 1.0);
    out.push_back({prev[i].keypoint, curr[j].keypoint, score});
  }
  return out;
}

/// One record of an imported match file, kept with its source line.
struct MatchRecord {
  std::int64_t prev_index = 0;
  std::int64_t curr_index = 0;
  double score = 0.0;
  std::size_t line = 0;
};

/// Imported matches keyed by the current frame t (pairs t-1 -> t).
struct MatchFile {
  std::string path;
  std::map<std::int64_t, std::vector<MatchRecord>> transitions;
};

/// Parses the match JSON-lines format and enforces one-to-one pairing within
/// each transition.
inline MatchFile import_matches(std::istream& is, const std::string& path) {
  MatchFile mf{path, {}};
  std::map<std::int64_t, std::pair<std::set<std::int64_t>, std::set<std::int64_t>>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    MatchRecord r;
    std::int64_t frame = 0;
    try {
      auto j = nlohmann::json::parse(line);
      frame = j.at("frame").get<std::int64_t>();
      r.prev_index = j.at("prev_index").get<std::int64_t>();
      r.curr_index = j.at("curr_index").get<std::int64_t>();
      r.score = j.contains("score") ? j.at("score").get<double>() : 1.0;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": bad match record: " + e.what());
    }
    r.line = lineno;
    if (frame < 1) throw InputError(where + ": match frame must be >= 1");
    if (r.prev_index < 0 || r.curr_index < 0) throw InputError(where + ": negative keypoint index");
    if (!std::isfinite(r.score)) throw InputError(where + ": non-finite score");
    auto& [prev_seen, curr_seen] = seen[frame];
    if (!prev_seen.insert(r.prev_index).second) {
      throw InputError(where + ": duplicate prev_index " + std::to_string(r.prev_index) +
                       " in frame " + std::to_string(frame));
    }
    if (!curr_seen.insert(r.curr_index).second) {
      throw InputError(where + ": duplicate curr_index " + std::to_string(r.curr_index) +
                       " in frame " + std::to_string(frame));
    }
    mf.transitions[frame].push_back(r);
  }
  return mf;
}

inline MatchFile import_matches(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  return import_matches(is, path);
}

/// Binds imported records for transition (t-1 -> t) to the keypoint sets of
/// those frames.
inline std::vector<MatchPair> resolve_matches(const MatchFile& mf, std::int64_t frame,
                                              const FeatureList& prev, const FeatureList& curr) {
  std::vector<MatchPair> out;
  auto it = mf.transitions.find(frame);
  if (it == mf.transitions.end()) return out;
  out.reserve(it->second.size());
  for (const auto& r : it->second) {
    const std::string where = mf.path + ":" + std::to_string(r.line);
    if (r.prev_index >= static_cast<std::int64_t>(prev.size())) {
      throw InputError(where + ": prev_index " + std::to_string(r.prev_index) +
                       " out of range (frame " + std::to_string(frame - 1) + " has " +
                       std::to_string(prev.size()) + " keypoints)");
    }
    if (r.curr_index >= static_cast<std::int64_t>(curr.size())) {
      throw InputError(where + ": curr_index " + std::to_string(r.curr_index) +
                       " out of range (frame " + std::to_string(frame) + " has " +
                       std::to_string(curr.size()) + " keypoints)");
    }
    out.push_back({prev[static_cast<std::size_t>(r.prev_index)].keypoint,
                   curr[static_cast<std::size_t>(r.curr_index)].keypoint,
                   std::clamp(r.score, 0.0, 1.0)});
  }
  return out;
}

}  // namespace vftrack
