// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "vftrack/vftrack.hpp"

using namespace vftrack;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("[%s] %d %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TrackingResult track_rendered(const SynthResult& r, const TrackerConfig& cfg) {
  return track_sequence(
      r.n_frames(), [&](std::int64_t t) { return detect_native(render_frame(r, t), cfg); },
      [&](const FeatureList& a, const FeatureList& b, std::int64_t) { return match_native(a, b, cfg); },
      cfg);
}

TrackingResult track_imported(const SynthResult& r) {
  return track_sequence(
      r.n_frames(), [&](std::int64_t t) { return r.features(t); },
      [&](const FeatureList& prev, const FeatureList& curr, std::int64_t t) {
        MatchFile mf{"synthetic", {{t, r.true_matches(t)}}};
        return resolve_matches(mf, t, prev, curr);
      },
      TrackerConfig{});
}

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  double alpha = 0, f1 = 0;
  const int seeds = 5;
  for (int s = 1; s <= seeds; ++s) {
    SynthConfig c;
    c.seed = std::uint64_t(s);
    c.snap_to_pixels = true;
    const auto r = generate(c);
    const auto res = track_rendered(r, TrackerConfig{});
    const auto rep = evaluate(r.ground_truth, res.tracks, EvalConfig{});
    alpha += rep.alpha;
    f1 += rep.f1;
  }
  alpha /= seeds;
  f1 /= seeds;
  const double secs = seconds_since(t0);
  report(1, alpha >= 0.95 && f1 >= 0.95 && secs < 60.0,
         fmt("synthetic full pipeline, 5 seeds: mean alpha=%.4f F1=%.4f (need >= 0.95), %.1f s (need < 60)",
             alpha, f1, secs));
}

void criterion_2() {
  SynthConfig c;
  c.n_frames = 15;
  c.n_particles = 1500;
  c.min_separation_px = 8.0;
  c.snap_to_pixels = true;
  c.seed = 77;
  const auto r = generate(c);
  std::vector<Frame> frames;
  for (std::int64_t t = 0; t < r.n_frames(); ++t) frames.push_back(render_frame(r, t));
  const TrackerConfig cfg;
  std::size_t max_kp = 0;
  const auto res = track_sequence(
      r.n_frames(),
      [&](std::int64_t t) {
        auto f = detect_native(frames[std::size_t(t)], cfg);
        max_kp = std::max(max_kp, f.size());
        return f;
      },
      [&](const FeatureList& a, const FeatureList& b, std::int64_t) { return match_native(a, b, cfg); },
      cfg);
  auto s = res.frame_seconds;
  std::sort(s.begin(), s.end());
  const double med = s[s.size() / 2];
  report(2, med <= 2.0 && max_kp <= 2048,
         fmt("512x512 native detect+match+track: median %.3f s/frame (need <= 2.0, target 0.5), up to %.0f keypoints",
             med, double(max_kp)));
}

struct Scripted {
  std::vector<FeatureList> frames;
  std::vector<std::vector<MatchPair>> matches;
};

Scripted random_instance(std::mt19937_64& rng) {
  Scripted s;
  const int n_frames = 1 + int(rng() % 5);
  std::uniform_real_distribution<double> pos(0.0, 60.0);
  for (int f = 0; f < n_frames; ++f) {
    FeatureList fl;
    const int n = int(rng() % 11);
    for (int i = 0; i < n; ++i) {
      fl.push_back({Keypoint{f, pos(rng), pos(rng), 1.0, i}, Descriptor({1.0, double(i)})});
    }
    s.frames.push_back(fl);
  }
  s.matches.resize(std::size_t(n_frames));
  for (int f = 1; f < n_frames; ++f) {
    const auto& a = s.frames[std::size_t(f - 1)];
    const auto& b = s.frames[std::size_t(f)];
    std::vector<std::size_t> pa(a.size()), pb(b.size());
    std::iota(pa.begin(), pa.end(), 0);
    std::iota(pb.begin(), pb.end(), 0);
    std::shuffle(pa.begin(), pa.end(), rng);
    std::shuffle(pb.begin(), pb.end(), rng);
    const std::size_t k = std::min(pa.size(), pb.size());
    const std::size_t take = k == 0 ? 0 : rng() % (k + 1);
    for (std::size_t i = 0; i < take; ++i) {
      s.matches[std::size_t(f)].push_back({a[pa[i]].keypoint, b[pb[i]].keypoint, 1.0});
    }
  }
  return s;
}

// Step-by-step transcription: tracks keyed by id, kpTrkId keyed by keypoint.
struct Literal {
  std::map<int, std::vector<Keypoint>> tracks;
  std::map<std::pair<std::int64_t, std::int64_t>, int> kpTrkId;
};

Literal literal_tracker(const Scripted& s, double dist_th) {
  Literal L;
  int trkID = 0;
  std::vector<Keypoint> prvKpts;
  for (const auto& f : s.frames[0]) {
    L.tracks[trkID] = {f.keypoint};
    L.kpTrkId[{f.keypoint.frame_index, f.keypoint.local_index}] = trkID;
    trkID += 1;
    prvKpts.push_back(f.keypoint);
  }
  for (std::size_t i = 1; i < s.frames.size(); ++i) {
    std::vector<Keypoint> kpts;
    for (const auto& f : s.frames[i]) kpts.push_back(f.keypoint);
    std::vector<MatchPair> mtch;
    for (const auto& m : s.matches[i]) {
      const double dx = m.prev.x - m.curr.x, dy = m.prev.y - m.curr.y;
      if (!(std::sqrt(dx * dx + dy * dy) > dist_th)) mtch.push_back(m);
    }
    std::set<std::pair<std::int64_t, std::int64_t>> mprev, mcurr;
    for (const auto& m : mtch) {
      const int id = L.kpTrkId.at({m.prev.frame_index, m.prev.local_index});
      L.tracks[id].push_back(m.curr);
      L.kpTrkId[{m.curr.frame_index, m.curr.local_index}] = id;
      mprev.insert({m.prev.frame_index, m.prev.local_index});
      mcurr.insert({m.curr.frame_index, m.curr.local_index});
    }
    for (const auto& p : prvKpts) {
      if (!mprev.count({p.frame_index, p.local_index})) L.kpTrkId.erase({p.frame_index, p.local_index});
    }
    for (const auto& k : kpts) {
      if (mcurr.count({k.frame_index, k.local_index})) continue;
      L.tracks[trkID] = {k};
      L.kpTrkId[{k.frame_index, k.local_index}] = trkID;
      trkID += 1;
    }
    prvKpts = kpts;
  }
  return L;
}

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  int mismatches = 0;
  TrackerConfig cfg;
  cfg.dist_th = 30.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const auto s = random_instance(rng);
    const auto res = track_sequence(
        std::int64_t(s.frames.size()), [&](std::int64_t i) { return s.frames[std::size_t(i)]; },
        [&](const FeatureList&, const FeatureList&, std::int64_t i) { return s.matches[std::size_t(i)]; },
        cfg);
    const auto L = literal_tracker(s, cfg.dist_th);
    bool same = res.tracks.size() == L.tracks.size();
    for (const auto& t : res.tracks) {
      if (!same) break;
      auto it = L.tracks.find(int(t.id()));
      if (it == L.tracks.end() || it->second.size() != t.length()) {
        same = false;
        break;
      }
      for (std::size_t k = 0; k < t.length(); ++k) {
        const auto& a = t.points()[k];
        const auto& b = it->second[k];
        if (a.frame_index != b.frame_index || a.x != b.x || a.y != b.y) same = false;
      }
      const auto& last = it->second.back();
      const bool lit_active = L.kpTrkId.count({last.frame_index, last.local_index}) > 0;
      if (lit_active != t.active()) same = false;
    }
    mismatches += !same;
  }
  const double secs = seconds_since(t0);
  report(3, mismatches == 0 && secs < 10.0,
         fmt("tracker vs literal transcription, 1000 instances: %.0f mismatches (need 0), %.2f s (need < 10)",
             mismatches, secs));
}

Track line(TrackId id, std::int64_t first, std::size_t n, double x, double y, double vx, double vy) {
  std::vector<TrackPoint> pts;
  for (std::size_t k = 0; k < n; ++k) pts.push_back({first + std::int64_t(k), x + vx * k, y + vy * k});
  return Track(id, pts);
}

std::vector<Track> random_gt(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> pos(0, 500), vel(-2, 2);
  std::vector<Track> out;
  for (TrackId id = 0; id < n; ++id) {
    out.push_back(line(id, std::int64_t(rng() % 20), 2 + rng() % 20, pos(rng), pos(rng), vel(rng), vel(rng)));
  }
  return out;
}

void criterion_4() {
  bool ident = true;
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto gt = random_gt(rng, 1 + rng() % 30);
    ident = ident && alpha_score(gt, gt, EvalConfig{}) == 1.0 && alpha_score(gt, {}, EvalConfig{}) == 0.0;
  }
  std::vector<double> means;
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    double sum = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 r(seed);
      const auto gt = random_gt(r, 40);
      std::normal_distribution<double> n(0, sigma);
      std::vector<Track> est;
      for (const auto& t : gt) {
        auto pts = t.points();
        for (auto& p : pts) {
          p.x += n(r);
          p.y += n(r);
        }
        est.emplace_back(t.id(), pts);
      }
      sum += alpha_score(gt, est, EvalConfig{});
    }
    means.push_back(sum / 20);
  }
  const bool monotone = std::is_sorted(means.rbegin(), means.rend());
  bool prf = true;
  for (std::size_t g = 0; g <= 40; ++g)
    for (std::size_t e = 0; e <= 40; ++e)
      for (std::size_t p = 0; p <= std::min(g, e); ++p) {
        const auto r = prf_from_counts(p, g, e);
        const double P = e ? double(p) / double(e) : 0.0;
        const double R = g ? double(p) / double(g) : 0.0;
        const double F = P + R > 0 ? 2 * P * R / (P + R) : 0.0;
        prf = prf && r.precision == P && r.recall == R && r.f1 == F;
      }
  report(4, ident && monotone && prf,
         std::string("alpha(X,X)=1 and alpha(X,0)=0 ") + (ident ? "exact" : "VIOLATED") +
             fmt("; mean alpha at sigma 0.5/1/2/4 = %.4f/%.4f/%.4f/%.4f", means[0], means[1], means[2],
                 means[3]) +
             (monotone ? " non-increasing" : " NOT monotone") + "; P/R/F1 " + (prf ? "exact" : "MISMATCH"));
}

void criterion_5() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100, 100);
  double worst = 0;
  for (int i = 0; i < 100000; ++i) {
    const double dx = u(rng), dy = u(rng);
    const auto v = decompose(0, 0, dx, -dy);
    const double th = v.theta_deg * std::numbers::pi / 180.0;
    const double norm = std::hypot(dx, dy);
    worst = std::max(worst, std::hypot(v.l * std::sin(th) - dx, v.l * std::cos(th) - dy) / norm);
  }
  const double theta = decompose(0, 0, 3, -4).theta_deg;
  report(5, worst <= 1e-9 && std::abs(theta - 36.8699) <= 1e-4,
         fmt("polar round trip, 1e5 vectors: max rel error %.2e (need <= 1e-9); 3-4-5 theta %.6f deg", worst,
             theta));
}

void criterion_6() {
  // Constant growth: one track stepping 3 px up for 100 frames.
  std::vector<TrackPoint> pts;
  for (int t = 0; t <= 100; ++t) pts.push_back({t, 256.0, 400.0 - 3.0 * t});
  std::vector<Track> tracks{Track(0, pts)};
  const double height = reconstruct_sequence(tracks, displacements_from_tracks(tracks)).shape.cumulative_height;

  const int n = 100;
  std::vector<TrackPoint> dp{{0, 0.0, 0.0}};
  for (int t = 1; t <= n; ++t) dp.push_back({t, dp.back().x + 0.1 * t, 0.0});
  tracks = {Track(0, dp)};
  const double drift = reconstruct_sequence(tracks, displacements_from_tracks(tracks)).shape.cumulative_drift;
  const double drift_want = 0.1 * n * (n + 1) / 2.0;

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-5, 5), pos(-200, 200);
  PillarShape s;
  double worst = 0;
  for (int t = 1; t <= 100; ++t) {
    std::vector<DisplacementVector> d;
    for (int i = 0; i < 9; ++i) d.push_back(decompose(0, 0, u(rng), u(rng), t));
    const auto before = s.points;
    std::vector<TrackPoint> born;
    for (int i = 0; i < 4; ++i) born.push_back({t, pos(rng), 0.0});
    s = reconstruct_step(std::move(s), d, born, t);
    for (std::size_t i = 0; i < before.size(); ++i)
      for (std::size_t j = i + 1; j < before.size(); ++j) {
        const double a = std::hypot(before[i].x_pillar - before[j].x_pillar, before[i].y_pillar - before[j].y_pillar);
        const double b = std::hypot(s.points[i].x_pillar - s.points[j].x_pillar,
                                    s.points[i].y_pillar - s.points[j].y_pillar);
        worst = std::max(worst, std::abs(a - b));
      }
  }
  report(6, std::abs(height - 300.0) <= 1e-6 && std::abs(drift - drift_want) <= 1e-6 && worst <= 1e-9,
         fmt("pillar closed forms: height %.9f (want 300), drift %.9f (want %.1f), max pairwise change %.2e",
             height, drift, drift_want, worst));
}

void criterion_7() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthConfig c;
    c.seed = seed;
    c.n_frames = 60;
    const auto r = generate(c);
    const auto res = track_imported(r);
    const auto disp = displacements_from_tracks(res.tracks);
    const double h = reconstruct_sequence(res.tracks, disp).shape.cumulative_height;
    const double g = growth_series(disp, SequenceCalibration{}).integral();
    worst = std::max(worst, std::abs(h - g));
  }
  report(7, worst <= 1e-9,
         fmt("pillar height vs growth integral, 10 synthetic runs: max |diff| %.2e (need <= 1e-9)", worst));
}

void criterion_8() {
  SynthConfig c;
  c.n_particles = 3000;
  c.width = c.height = 2048;
  c.position_noise_px = 0.0;
  c.survival_prob = 1.0;
  c.spawn_rate = 30.0;
  c.seed = 42;
  const auto r = generate(c);
  const auto res = track_imported(r);
  const auto o = orientation_series(displacements_from_tracks(res.tracks));
  double worst = 0;
  std::size_t min_count = SIZE_MAX, frames = 0;
  for (const auto& e : o) {
    if (e.frame_index < 3 * c.n_frames / 4) continue;
    const double want = oscillation_std_at(c, e.frame_index);
    worst = std::max(worst, std::abs(*e.std_theta_deg - want) / want);
    min_count = std::min(min_count, e.count);
    ++frames;
  }
  report(8, worst <= 0.10 && frames > 0,
         fmt("orientation std vs 0-50 deg ramp, final quartile (%.0f frames, >= %.0f steps each): max rel error %.2f%% (need <= 10%%)",
             double(frames), double(min_count), 100 * worst));
}

double brute_force_cost(const std::vector<Track>& gt, const std::vector<Track>& est, double eps) {
  auto dist = [&](const Track& a, const Track& b) {
    std::map<std::int64_t, std::pair<const TrackPoint*, const TrackPoint*>> u;
    for (const auto& p : a.points()) u[p.frame_index].first = &p;
    for (const auto& p : b.points()) u[p.frame_index].second = &p;
    double d = 0;
    for (const auto& [f, pr] : u) {
      d += pr.first && pr.second
               ? std::min(std::hypot(pr.first->x - pr.second->x, pr.first->y - pr.second->y), eps)
               : eps;
    }
    return d;
  };
  auto candidate = [&](const Track& a, const Track& b) {
    double s = 0;
    int n = 0;
    for (const auto& p : a.points()) {
      if (const auto* q = b.at_frame(p.frame_index)) {
        s += std::min(std::hypot(p.x - q->x, p.y - q->y), eps);
        ++n;
      }
    }
    return n > 0 && s / n < eps;
  };
  double best = INFINITY;
  std::vector<char> used(est.size(), 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t g, double acc) {
    if (g == gt.size()) {
      best = std::min(best, acc);
      return;
    }
    rec(g + 1, acc + eps * double(gt[g].length()));
    for (std::size_t e = 0; e < est.size(); ++e) {
      if (used[e] || !candidate(gt[g], est[e])) continue;
      used[e] = 1;
      rec(g + 1, acc + dist(gt[g], est[e]));
      used[e] = 0;
    }
  };
  rec(0, 0.0);
  return best;
}

void criterion_9() {
  std::mt19937_64 rng(9);
  int wrong = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 4, m = 3 + rng() % 4;
    std::vector<Track> gt, est;
    for (TrackId i = 0; i < n; ++i) {
      gt.push_back(line(i, std::int64_t(rng() % 3), 2 + rng() % 4, 0.25 * double(rng() % 8), 0, 0, 0));
    }
    for (TrackId j = 0; j < m; ++j) {
      auto pts = gt[rng() % n].points();
      const double off = 0.25 * double(rng() % 24);
      for (auto& p : pts) p.x += off;
      est.emplace_back(j, pts);
    }
    const double opt = pair_tracks(gt, est, EvalConfig{}).total_distance;
    wrong += opt != brute_force_cost(gt, est, 5.0);
  }
  report(9, wrong == 0,
         fmt("optimal pairing vs brute force, 200 instances 3x3..6x6: %.0f differ (need 0)", wrong));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> all{criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                               criterion_6, criterion_7, criterion_8, criterion_9};
  for (std::size_t i = 0; i < all.size(); ++i) {
    try {
      all[i]();
    } catch (const std::exception& e) {
      report(int(i + 1), false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, all.size());
  return failures == 0 ? 0 : 1;
}
