#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "vftrack/assignment.hpp"
#include "vftrack/types.hpp"

namespace vftrack {

enum class PairingMode { optimal, greedy };

inline std::string to_string(PairingMode m) { return m == PairingMode::optimal ? "optimal" : "greedy"; }

struct EvalConfig {
  double gate = 5.0;  ///< epsilon, px
  PairingMode pairing_mode = PairingMode::optimal;
  std::size_t min_track_len = 2;
  /// Components with more candidate cells than this are paired greedily.
  std::size_t greedy_fallback_cells = 5000ull * 5000ull;

  void validate() const {
    if (!(gate > 0.0) || !std::isfinite(gate)) throw InputError("gate must be > 0");
  }
};

/// Sum over the union of both frame ranges of min(distance, gate) where both
/// tracks have a point and gate where only one does.
inline double gated_track_distance(const Track& gt, const Track& est, double gate) {
  const std::int64_t lo = std::max(gt.first_frame(), est.first_frame());
  const std::int64_t hi = std::min(gt.last_frame(), est.last_frame());
  const std::int64_t overlap = hi >= lo ? hi - lo + 1 : 0;
  const auto only = static_cast<double>(static_cast<std::int64_t>(gt.length()) +
                                        static_cast<std::int64_t>(est.length()) - 2 * overlap);
  double d = gate * only;
  for (std::int64_t f = lo; f <= hi; ++f) {
    const auto* a = gt.at_frame(f);
    const auto* b = est.at_frame(f);
    d += std::min(std::hypot(a->x - b->x, a->y - b->y), gate);
  }
  return d;
}

/// Distance of a track to the empty track.
inline double unpaired_distance(const Track& t, double gate) {
  return gate * static_cast<double>(t.length());
}

/// Candidate test: at least one shared frame and mean gated distance over
/// the shared frames below the gate.
inline bool is_candidate(const Track& gt, const Track& est, double gate) {
  const std::int64_t lo = std::max(gt.first_frame(), est.first_frame());
  const std::int64_t hi = std::min(gt.last_frame(), est.last_frame());
  if (hi < lo) return false;
  double s = 0.0;
  for (std::int64_t f = lo; f <= hi; ++f) {
    const auto* a = gt.at_frame(f);
    const auto* b = est.at_frame(f);
    s += std::min(std::hypot(a->x - b->x, a->y - b->y), gate);
  }
  return s / static_cast<double>(hi - lo + 1) < gate;
}

struct TrackPair {
  std::size_t gt = 0;
  std::size_t est = 0;
  double distance = 0.0;
};

struct Pairing {
  std::vector<TrackPair> pairs;  ///< sorted by gt index
  /// d(X, Y): paired distances plus the gate per point of unpaired GT tracks.
  double total_distance = 0.0;
  bool greedy_fallback = false;
};

namespace detail {

struct Candidate {
  std::size_t gt, est;
  double distance;
};

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

inline void pair_greedy(std::vector<Candidate> cands, std::vector<char>& gt_used,
                        std::vector<char>& est_used, std::vector<TrackPair>& out) {
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.gt, a.est) < std::tie(b.distance, b.gt, b.est);
  });
  for (const auto& c : cands) {
    if (gt_used[c.gt] || est_used[c.est]) continue;
    gt_used[c.gt] = est_used[c.est] = 1;
    out.push_back({c.gt, c.est, c.distance});
  }
}

}  // namespace detail

/// One-to-one pairing of GT and estimated tracks. Optimal mode minimizes
/// d(X, Y) exactly, solving each connected component of the candidate graph
/// as a rectangular assignment with one "unpaired" column per GT row.
inline Pairing pair_tracks(const std::vector<Track>& gt, const std::vector<Track>& est,
                           const EvalConfig& config) {
  config.validate();
  const double gate = config.gate;
  std::vector<detail::Candidate> cands;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t e = 0; e < est.size(); ++e) {
      if (!is_candidate(gt[g], est[e], gate)) continue;
      cands.push_back({g, e, gated_track_distance(gt[g], est[e], gate)});
    }
  }

  Pairing result;
  std::vector<char> gt_used(gt.size(), 0), est_used(est.size(), 0);
  if (config.pairing_mode == PairingMode::greedy) {
    detail::pair_greedy(cands, gt_used, est_used, result.pairs);
  } else {
    // Components over nodes [0, gt) U [gt, gt + est).
    std::vector<std::size_t> parent(gt.size() + est.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    for (const auto& c : cands) {
      const auto a = detail::find_root(parent, c.gt);
      const auto b = detail::find_root(parent, gt.size() + c.est);
      if (a != b) parent[a] = b;
    }
    std::vector<std::vector<std::size_t>> comp_cands(parent.size());
    for (std::size_t k = 0; k < cands.size(); ++k) {
      comp_cands[detail::find_root(parent, cands[k].gt)].push_back(k);
    }
    for (const auto& members : comp_cands) {
      if (members.empty()) continue;
      std::vector<std::size_t> rows, cols;
      for (auto k : members) {
        rows.push_back(cands[k].gt);
        cols.push_back(cands[k].est);
      }
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
      std::sort(cols.begin(), cols.end());
      cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
      if (rows.size() * cols.size() > config.greedy_fallback_cells) {
        std::vector<detail::Candidate> sub;
        for (auto k : members) sub.push_back(cands[k]);
        detail::pair_greedy(std::move(sub), gt_used, est_used, result.pairs);
        result.greedy_fallback = true;
        continue;
      }
      const std::size_t nr = rows.size(), nc = cols.size() + rows.size();
      double forbidden = 1.0;
      for (auto g : rows) forbidden += unpaired_distance(gt[g], gate);
      for (auto k : members) forbidden += cands[k].distance;
      std::vector<double> cost(nr * nc, forbidden);
      for (std::size_t r = 0; r < nr; ++r) {
        cost[r * nc + cols.size() + r] = unpaired_distance(gt[rows[r]], gate);
      }
      for (auto k : members) {
        const auto r = static_cast<std::size_t>(
            std::lower_bound(rows.begin(), rows.end(), cands[k].gt) - rows.begin());
        const auto c = static_cast<std::size_t>(
            std::lower_bound(cols.begin(), cols.end(), cands[k].est) - cols.begin());
        cost[r * nc + c] = cands[k].distance;
      }
      const auto assign = solve_assignment(cost, nr, nc);
      for (std::size_t r = 0; r < nr; ++r) {
        if (assign[r] < cols.size()) {
          const auto g = rows[r], e = cols[assign[r]];
          gt_used[g] = est_used[e] = 1;
          result.pairs.push_back({g, e, cost[r * nc + assign[r]]});
        }
      }
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const TrackPair& a, const TrackPair& b) { return a.gt < b.gt; });
  // Accumulate in GT order so equal pairings give bit-identical totals.
  std::size_t p = 0;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (p < result.pairs.size() && result.pairs[p].gt == g) {
      result.total_distance += result.pairs[p++].distance;
    } else {
      result.total_distance += unpaired_distance(gt[g], gate);
    }
  }
  return result;
}

/// d(X, empty): the gate times the total number of GT points.
inline double empty_distance(const std::vector<Track>& gt, double gate) {
  double d = 0.0;
  for (const auto& t : gt) d += unpaired_distance(t, gate);
  return d;
}

/// alpha = 1 - d(X, Y) / d(X, empty), clamped to [0, 1]. Spurious estimated
/// tracks do not enter d(X, Y).
inline double alpha_from_pairing(const Pairing& pairing, const std::vector<Track>& gt, double gate) {
  if (gt.empty()) throw InputError("alpha is undefined for an empty ground-truth set");
  const double norm = empty_distance(gt, gate);
  return std::clamp(1.0 - pairing.total_distance / norm, 0.0, 1.0);
}

inline double alpha_score(const std::vector<Track>& gt, const std::vector<Track>& est,
                          const EvalConfig& config) {
  if (gt.empty()) throw InputError("alpha is undefined for an empty ground-truth set");
  return alpha_from_pairing(pair_tracks(gt, est, config), gt, config.gate);
}

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  ///< false when there are no estimated tracks
  bool recall_defined = true;     ///< false when there are no GT tracks
};

inline PrfResult prf_from_counts(std::size_t paired, std::size_t n_gt, std::size_t n_est) {
  PrfResult r;
  if (n_est == 0) {
    r.precision_defined = false;
  } else {
    r.precision = static_cast<double>(paired) / static_cast<double>(n_est);
  }
  if (n_gt == 0) {
    r.recall_defined = false;
  } else {
    r.recall = static_cast<double>(paired) / static_cast<double>(n_gt);
  }
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

inline PrfResult prf_report(const Pairing& pairing, const std::vector<Track>& gt,
                            const std::vector<Track>& est) {
  return prf_from_counts(pairing.pairs.size(), gt.size(), est.size());
}

struct LengthStats {
  std::optional<double> mean;
  std::optional<double> std;  ///< population std
  std::size_t count = 0;
};

/// Mean and population std of lengths of tracks with >= min_track_len points.
inline LengthStats length_stats(const std::vector<Track>& tracks, std::size_t min_track_len) {
  LengthStats s;
  double sum = 0.0;
  for (const auto& t : tracks) {
    if (t.length() < min_track_len) continue;
    sum += static_cast<double>(t.length());
    ++s.count;
  }
  if (s.count == 0) return s;
  const double mean = sum / static_cast<double>(s.count);
  double var = 0.0;
  for (const auto& t : tracks) {
    if (t.length() < min_track_len) continue;
    const double d = static_cast<double>(t.length()) - mean;
    var += d * d;
  }
  s.mean = mean;
  s.std = std::sqrt(var / static_cast<double>(s.count));
  return s;
}

struct EvalReport {
  double alpha = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t paired = 0;
  std::size_t missed = 0;    ///< GT tracks left unpaired
  std::size_t spurious = 0;  ///< estimated tracks left unpaired
  std::size_t n_gt = 0;
  std::size_t n_est = 0;
  std::optional<double> mean_track_length;
  std::optional<double> std_track_length;
  bool precision_defined = true;
  bool greedy_fallback = false;
  EvalConfig config;
};

inline std::vector<Track> filter_by_length(const std::vector<Track>& tracks, std::size_t min_len) {
  std::vector<Track> out;
  for (const auto& t : tracks) {
    if (t.length() >= min_len) out.push_back(t);
  }
  return out;
}

/// Full scoring of estimated tracks against ground truth. Tracks shorter
/// than config.min_track_len are excluded on both sides.
inline EvalReport evaluate(const std::vector<Track>& gt_all, const std::vector<Track>& est_all,
                           const EvalConfig& config) {
  config.validate();
  const auto gt = filter_by_length(gt_all, config.min_track_len);
  const auto est = filter_by_length(est_all, config.min_track_len);
  if (gt.empty()) throw InputError("ground truth has no tracks of the minimum length");
  const auto pairing = pair_tracks(gt, est, config);
  const auto prf = prf_report(pairing, gt, est);
  const auto ls = length_stats(est, config.min_track_len);
  EvalReport r;
  r.alpha = alpha_from_pairing(pairing, gt, config.gate);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f1 = prf.f1;
  r.paired = pairing.pairs.size();
  r.n_gt = gt.size();
  r.n_est = est.size();
  r.missed = gt.size() - r.paired;
  r.spurious = est.size() - r.paired;
  r.mean_track_length = ls.mean;
  r.std_track_length = ls.std;
  r.precision_defined = prf.precision_defined;
  r.greedy_fallback = pairing.greedy_fallback;
  r.config = config;
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["alpha"] = r.alpha;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["paired"] = r.paired;
  j["missed"] = r.missed;
  j["spurious"] = r.spurious;
  j["gt_tracks"] = r.n_gt;
  j["est_tracks"] = r.n_est;
  j["mean_track_length"] = r.mean_track_length ? nlohmann::ordered_json(*r.mean_track_length)
                                               : nlohmann::ordered_json(nullptr);
  j["std_track_length"] = r.std_track_length ? nlohmann::ordered_json(*r.std_track_length)
                                             : nlohmann::ordered_json(nullptr);
  j["precision_defined"] = r.precision_defined;
  j["length_stats_defined"] = r.mean_track_length.has_value();
  j["greedy_fallback"] = r.greedy_fallback;
  j["config"] = {{"gate", r.config.gate},
                 {"pairing", to_string(r.config.pairing_mode)},
                 {"min_track_len", r.config.min_track_len}};
  return j;
}

}  // namespace vftrack
