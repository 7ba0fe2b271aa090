#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vftrack/csv.hpp"
#include "vftrack/detect.hpp"
#include "vftrack/eval.hpp"
#include "vftrack/image.hpp"
#include "vftrack/kinematics.hpp"
#include "vftrack/match.hpp"
#include "vftrack/pillar.hpp"
#include "vftrack/synth.hpp"
#include "vftrack/tracker.hpp"
#include "vftrack/types.hpp"

namespace vftrack::cli {

namespace fs = std::filesystem;

enum class LogLevel { error = 0, info = 1, debug = 2 };

inline LogLevel log_level_from_env() {
  const char* v = std::getenv("VFTRACK_LOG");
  if (!v) return LogLevel::info;
  const std::string s(v);
  if (s == "error") return LogLevel::error;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::info;
}

class Logger {
public:
  Logger(std::ostream& os, LogLevel level) : os_(os), level_(level) {}
  void info(const std::string& m) const { emit(LogLevel::info, "info", m); }
  void debug(const std::string& m) const { emit(LogLevel::debug, "debug", m); }
  void error(const std::string& m) const { emit(LogLevel::error, "error", m); }

private:
  void emit(LogLevel l, const char* tag, const std::string& m) const {
    if (static_cast<int>(l) <= static_cast<int>(level_)) os_ << "vftrack [" << tag << "] " << m << '\n';
  }
  std::ostream& os_;
  LogLevel level_;
};

struct TrackOptions {
  std::string frames_dir;
  std::string manifest;
  std::string detector = "native";
  std::string keypoints;
  std::string matcher = "native";
  std::string matches;
  std::int64_t n_frames = 0;
  double dist_th = 40.0;
  std::size_t max_keypoints = 2048;
  double ratio = 0.8;
  unsigned jobs = std::clamp(std::thread::hardware_concurrency(), 1u, 4u);
  bool timing = false;
};

struct KinOptions {
  double interval = 2.0;
  std::optional<double> scale;
  std::string regions;
  std::size_t min_track_len = 2;
};

struct PillarCliOptions {
  std::optional<double> scale;
  std::optional<int> frame_width;
  bool trimmed_mean = false;
  std::size_t min_track_len = 2;
};

struct EvalCliOptions {
  double gate = 5.0;
  std::string pairing = "optimal";
  std::size_t min_track_len = 2;
};

inline bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm" || ext == ".png";
}

/// Frame paths in lexicographic filename order, or manifest order.
inline std::vector<std::string> list_frames(const TrackOptions& o) {
  std::vector<std::string> out;
  if (!o.manifest.empty()) {
    std::ifstream is(o.manifest);
    if (!is) throw InputError("cannot open " + o.manifest);
    const fs::path base = fs::path(o.manifest).parent_path();
    std::string line;
    while (std::getline(is, line)) {
      auto t = std::string(trim(line));
      if (t.empty() || t.front() == '#') continue;
      fs::path p(t);
      out.push_back((p.is_absolute() ? p : base / p).string());
    }
    return out;
  }
  if (o.frames_dir.empty()) return out;
  std::error_code ec;
  if (!fs::is_directory(o.frames_dir, ec)) throw InputError("not a directory: " + o.frames_dir);
  for (const auto& e : fs::directory_iterator(o.frames_dir)) {
    if (e.is_regular_file() && has_image_extension(e.path())) out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
    return fs::path(a).filename().string() < fs::path(b).filename().string();
  });
  return out;
}

struct TrackRun {
  TrackingResult result;
  std::optional<int> frame_width;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline TrackRun run_tracking(const TrackOptions& o, const Logger& log, std::ostream& err) {
  TrackerConfig tc;
  tc.dist_th = o.dist_th;
  tc.max_keypoints = o.max_keypoints;
  tc.ratio_threshold = o.ratio;
  tc.validate();
  if (o.detector != "native" && o.detector != "import") {
    throw InputError("--detector must be native or import");
  }
  if (o.matcher != "native" && o.matcher != "import") {
    throw InputError("--matcher must be native or import");
  }

  const auto frame_paths = list_frames(o);
  std::map<std::int64_t, FeatureList> imported;
  std::int64_t n_frames = static_cast<std::int64_t>(frame_paths.size());
  TrackRun run;

  if (o.detector == "import") {
    if (o.keypoints.empty()) throw InputError("--detector import requires --keypoints");
    std::error_code ec;
    if (fs::is_directory(o.keypoints, ec)) {
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(o.keypoints)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path().string());
      }
      std::sort(files.begin(), files.end());
      for (std::size_t i = 0; i < files.size(); ++i) {
        const auto idx = static_cast<std::int64_t>(i);
        imported[idx] = import_keypoints(files[i], idx);
      }
      if (n_frames == 0) n_frames = static_cast<std::int64_t>(files.size());
    } else {
      imported = import_keypoint_stream(o.keypoints);
      if (n_frames == 0 && !imported.empty()) n_frames = imported.rbegin()->first + 1;
    }
  } else if (frame_paths.empty()) {
    throw InputError("--detector native requires --frames or --manifest with at least one image");
  }
  if (o.n_frames > 0) n_frames = o.n_frames;
  if (n_frames < 1) throw InputError("no frames to track");

  std::optional<MatchFile> match_file;
  if (o.matcher == "import") {
    if (o.matches.empty()) throw InputError("--matcher import requires --matches");
    match_file = import_matches(o.matches);
  }

  if (!frame_paths.empty()) {
    const auto probe = load_frame(frame_paths.front());
    run.frame_width = probe.width;
  }

  auto detect = [&](std::int64_t i) -> FeatureList {
    if (o.detector == "import") {
      auto it = imported.find(i);
      return it == imported.end() ? FeatureList{} : it->second;
    }
    if (i >= static_cast<std::int64_t>(frame_paths.size())) {
      throw InputError("no image for frame " + std::to_string(i));
    }
    auto frame = load_frame(frame_paths[static_cast<std::size_t>(i)], i);
    return detect_native(frame, tc);
  };
  auto match = [&](const FeatureList& prev, const FeatureList& curr, std::int64_t i) {
    if (match_file) return resolve_matches(*match_file, i, prev, curr);
    return match_native(prev, curr, tc);
  };

  log.info("tracking " + std::to_string(n_frames) + " frames (detector " + o.detector +
           ", matcher " + o.matcher + ", jobs " + std::to_string(o.jobs) + ")");
  run.result = track_sequence(n_frames, detect, match, tc, SequenceOptions{o.jobs});
  if (o.timing) {
    for (std::size_t i = 0; i < run.result.frame_seconds.size(); ++i) {
      err << "timing frame " << i << ' ' << format_number(run.result.frame_seconds[i] * 1e3)
          << " ms\n";
    }
    err << "timing median " << format_number(median(run.result.frame_seconds) * 1e3) << " ms\n";
  }
  log.info("produced " + std::to_string(run.result.tracks.size()) + " tracks");
  return run;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path + " for writing");
  return os;
}

inline FrameSpan span_of_tracks(const std::vector<Track>& tracks) {
  if (tracks.empty()) return {};
  FrameSpan s{tracks.front().first_frame(), tracks.front().last_frame()};
  for (const auto& t : tracks) {
    s.first = std::min(s.first, t.first_frame());
    s.last = std::max(s.last, t.last_frame());
  }
  return s;
}

inline void write_kinematics(const std::vector<Track>& tracks, const KinOptions& o,
                             const std::string& out_path) {
  SequenceCalibration cal{o.interval, o.scale};
  cal.validate();
  std::vector<Region> regions;
  if (!o.regions.empty()) regions = load_regions(o.regions);
  const auto disp = displacements_from_tracks(tracks, o.min_track_len);
  auto os = open_out(out_path);
  write_kinematics_csv(os, disp, regions, cal, span_of_tracks(tracks));
}

inline void write_pillar(const std::vector<Track>& all_tracks, const PillarCliOptions& o,
                         const std::string& shape_path, const std::string& series_path) {
  if (o.scale && !(*o.scale > 0.0)) throw InputError("--scale must be > 0");
  const auto tracks = filter_by_length(all_tracks, o.min_track_len);
  PillarOptions po;
  po.trimmed_mean = o.trimmed_mean;
  if (o.frame_width) {
    po.frame_center_x = 0.5 * (*o.frame_width - 1);
  } else if (!tracks.empty()) {
    double lo = tracks.front().points().front().x, hi = lo;
    for (const auto& t : tracks) {
      for (const auto& p : t.points()) {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
      }
    }
    po.frame_center_x = 0.5 * (lo + hi);
  }
  const auto disp = displacements_from_tracks(tracks, o.min_track_len);
  const auto rec = reconstruct_sequence(tracks, disp, o.scale, po);
  {
    auto os = open_out(shape_path);
    write_pillar_shape_csv(os, rec.shape);
  }
  if (!series_path.empty()) {
    auto os = open_out(series_path);
    write_pillar_series_csv(os, rec.series);
  }
}

inline EvalReport run_eval(const std::vector<Track>& gt, const std::vector<Track>& est,
                           const EvalCliOptions& o) {
  EvalConfig ec;
  ec.gate = o.gate;
  ec.min_track_len = o.min_track_len;
  if (o.pairing == "optimal") {
    ec.pairing_mode = PairingMode::optimal;
  } else if (o.pairing == "greedy") {
    ec.pairing_mode = PairingMode::greedy;
  } else {
    throw InputError("--pairing must be optimal or greedy");
  }
  return evaluate(gt, est, ec);
}

inline void write_report(const EvalReport& r, const std::string& path) {
  auto os = open_out(path);
  os << to_json(r).dump(2) << '\n';
}

/// Inserts `--key value` for every key of a JSON config file whose flag is
/// not already on the command line. Flags therefore override the file.
inline std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  if (args.size() < 2 || args[1] == "synth") return args;
  std::string path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw InputError(path + ": config must be a JSON object");
  auto present = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> extra;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    if (it.key() == "config" || present(flag)) continue;
    const auto& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) extra.push_back(flag);
    } else if (v.is_string()) {
      extra.push_back(flag);
      extra.push_back(v.get<std::string>());
    } else if (v.is_number()) {
      extra.push_back(flag);
      extra.push_back(v.dump());
    } else {
      throw InputError(path + ": unsupported value for '" + it.key() + "'");
    }
  }
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

inline void add_track_flags(CLI::App* sub, TrackOptions& o) {
  sub->add_option("--frames", o.frames_dir, "Directory of 8-bit PGM/PNG frames");
  sub->add_option("--manifest", o.manifest, "File listing frame paths in order");
  sub->add_option("--detector", o.detector, "native | import")->check(CLI::IsMember({"native", "import"}));
  sub->add_option("--keypoints", o.keypoints, "Keypoint JSON-lines file or directory");
  sub->add_option("--matcher", o.matcher, "native | import")->check(CLI::IsMember({"native", "import"}));
  sub->add_option("--matches", o.matches, "Match JSON-lines file");
  sub->add_option("--n-frames", o.n_frames, "Frame count when importing keypoints");
  sub->add_option("--dist-th", o.dist_th, "Prune threshold in pixels");
  sub->add_option("--max-keypoints", o.max_keypoints, "Per-frame keypoint cap");
  sub->add_option("--ratio", o.ratio, "Ratio-test threshold");
  sub->add_option("--jobs", o.jobs, "Pipelining depth")->check(CLI::Range(1u, 64u));
  sub->add_flag("--timing", o.timing, "Log per-frame wall time");
}

/// Entry point. Exit codes: 0 success, 1 input error, 2 internal error.
inline int run(const std::vector<std::string>& raw_args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  const Logger log(err, log_level_from_env());
  std::vector<std::string> args;
  try {
    args = apply_config_file(raw_args);
  } catch (const InputError& e) {
    err << "vftrack: " << e.what() << '\n';
    return 1;
  }

  CLI::App app{"vftrack: particle feature tracking and growth kinematics"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  TrackOptions topt;
  KinOptions kopt;
  PillarCliOptions popt;
  EvalCliOptions eopt;
  std::string config_path, out_path, tracks_path, series_path, gt_path, est_path, out_dir = ".";
  bool render = false;

  auto* track = app.add_subcommand("track", "Detect, match and link features into tracks");
  add_track_flags(track, topt);
  track->add_option("--out", out_path, "Output tracks CSV")->required();
  track->add_option("--config", config_path, "JSON file of flag defaults");

  auto* kin = app.add_subcommand("kin", "Growth and orientation series from tracks");
  kin->add_option("--tracks", tracks_path, "Tracks CSV")->required();
  kin->add_option("--interval", kopt.interval, "Seconds per frame");
  kin->add_option("--scale", kopt.scale, "Micrometers per pixel");
  kin->add_option("--regions", kopt.regions, "Regions JSON");
  kin->add_option("--min-track-len", kopt.min_track_len, "Shortest track used");
  kin->add_option("--out", out_path, "Output CSV")->required();
  kin->add_option("--config", config_path, "JSON file of flag defaults");

  auto* pillar = app.add_subcommand("pillar", "Rigid-body pillar reconstruction");
  pillar->add_option("--tracks", tracks_path, "Tracks CSV")->required();
  pillar->add_option("--scale", popt.scale, "Micrometers per pixel");
  pillar->add_option("--frame-width", popt.frame_width, "Image width in pixels");
  pillar->add_flag("--trimmed-mean", popt.trimmed_mean, "Drop 5% tails from each frame's mean");
  pillar->add_option("--min-track-len", popt.min_track_len, "Shortest track used");
  pillar->add_option("--out", out_path, "Shape CSV")->required();
  pillar->add_option("--series", series_path, "Height/drift series CSV");
  pillar->add_option("--config", config_path, "JSON file of flag defaults");

  auto* eval = app.add_subcommand("eval", "Score tracks against ground truth");
  eval->add_option("--gt", gt_path, "Ground-truth tracks CSV")->required();
  eval->add_option("--est", est_path, "Estimated tracks CSV")->required();
  eval->add_option("--gate", eopt.gate, "Gate epsilon in pixels");
  eval->add_option("--pairing", eopt.pairing, "optimal | greedy")
      ->check(CLI::IsMember({"optimal", "greedy"}));
  eval->add_option("--min-track-len", eopt.min_track_len, "Shortest track scored");
  eval->add_option("--out", out_path, "Report JSON")->required();
  eval->add_option("--config", config_path, "JSON file of flag defaults");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic growth sequence");
  synth->add_option("--config", config_path, "Synth config JSON");
  synth->add_option("--out-dir", out_dir, "Output directory")->required();
  synth->add_flag("--render", render, "Also write rendered PGM frames");

  auto* pipeline = app.add_subcommand("pipeline", "track, kin, pillar and (with --gt) eval");
  add_track_flags(pipeline, topt);
  pipeline->add_option("--out-dir", out_dir, "Output directory");
  pipeline->add_option("--interval", kopt.interval, "Seconds per frame");
  pipeline->add_option("--scale", kopt.scale, "Micrometers per pixel");
  pipeline->add_option("--regions", kopt.regions, "Regions JSON");
  pipeline->add_option("--min-track-len", kopt.min_track_len, "Shortest track used");
  pipeline->add_option("--frame-width", popt.frame_width, "Image width in pixels");
  pipeline->add_flag("--trimmed-mean", popt.trimmed_mean, "Drop 5% tails from each frame's mean");
  pipeline->add_option("--gt", gt_path, "Ground-truth tracks CSV");
  pipeline->add_option("--gate", eopt.gate, "Gate epsilon in pixels");
  pipeline->add_option("--pairing", eopt.pairing, "optimal | greedy")
      ->check(CLI::IsMember({"optimal", "greedy"}));
  pipeline->add_option("--config", config_path, "JSON file of flag defaults");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (track->parsed()) {
      auto run = run_tracking(topt, log, err);
      write_tracks_csv(out_path, run.result.tracks);
    } else if (kin->parsed()) {
      write_kinematics(read_tracks_csv(tracks_path), kopt, out_path);
    } else if (pillar->parsed()) {
      write_pillar(read_tracks_csv(tracks_path), popt, out_path, series_path);
    } else if (eval->parsed()) {
      const auto gt = read_tracks_csv(gt_path);
      const auto est = read_tracks_csv(est_path);
      const auto report = run_eval(gt, est, eopt);
      write_report(report, out_path);
      log.info("alpha " + format_number(report.alpha) + " F1 " + format_number(report.f1));
    } else if (synth->parsed()) {
      nlohmann::json j = nlohmann::json::object();
      if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw InputError("cannot open " + config_path);
        try {
          j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::exception& e) {
          throw InputError(config_path + ": malformed JSON: " + e.what());
        }
        if (!j.is_object()) throw InputError(config_path + ": config must be a JSON object");
      }
      if (render && !j.contains("snap_to_pixels")) j["snap_to_pixels"] = true;
      SynthConfig sc;
      try {
        sc = synth_config_from_json(j);
      } catch (const nlohmann::json::exception& e) {
        throw InputError(config_path + ": " + e.what());
      }
      const auto res = generate(sc);
      write_synth_outputs(res, out_dir, render);
      log.info("wrote " + std::to_string(res.ground_truth.size()) + " ground-truth tracks to " +
               out_dir);
    } else if (pipeline->parsed()) {
      fs::create_directories(out_dir);
      const fs::path dir(out_dir);
      auto run = run_tracking(topt, log, err);
      const auto& tracks = run.result.tracks;
      write_tracks_csv((dir / "tracks.csv").string(), tracks);
      write_kinematics(tracks, kopt, (dir / "kin.csv").string());
      popt.scale = kopt.scale;
      popt.min_track_len = kopt.min_track_len;
      if (!popt.frame_width) popt.frame_width = run.frame_width;
      write_pillar(tracks, popt, (dir / "pillar.csv").string(),
                   (dir / "pillar_series.csv").string());
      if (!gt_path.empty()) {
        eopt.min_track_len = kopt.min_track_len;
        const auto report = run_eval(read_tracks_csv(gt_path), tracks, eopt);
        write_report(report, (dir / "report.json").string());
        log.info("alpha " + format_number(report.alpha) + " F1 " + format_number(report.f1));
      }
    }
  } catch (const InputError& e) {
    err << "vftrack: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "vftrack: " << e.what() << '\n';
    return 1;
  } catch (const ConsistencyError& e) {
    err << "vftrack: internal consistency error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "vftrack: internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace vftrack::cli
