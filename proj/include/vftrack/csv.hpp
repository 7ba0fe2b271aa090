#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "vftrack/types.hpp"

namespace vftrack {

/// Locale-independent shortest round-trip formatting.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(std::int64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::string location(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

/// Writes tracks as `track_id,frame,x,y`, one row per point, ordered by id
/// then frame.
inline void write_tracks_csv(std::ostream& os, const std::vector<Track>& tracks) {
  os << "track_id,frame,x,y\n";
  for (const auto& t : tracks) {
    for (const auto& p : t.points()) {
      os << t.id() << ',' << p.frame_index << ',' << format_number(p.x) << ','
         << format_number(p.y) << '\n';
    }
  }
}

inline void write_tracks_csv(const std::string& path, const std::vector<Track>& tracks) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path + " for writing");
  write_tracks_csv(os, tracks);
  if (!os) throw InputError("failed writing " + path);
}

/// Reads the track interchange CSV. Rows may come in any order; each track
/// must cover a gap-free frame range. Tracks are returned sorted by id.
inline std::vector<Track> read_tracks_csv(std::istream& is, const std::string& path) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw InputError(path + ": empty file, expected header");
  ++lineno;
  if (trim(line) != "track_id,frame,x,y") {
    throw InputError(location(path, lineno) + ": expected header 'track_id,frame,x,y'");
  }
  std::map<TrackId, std::map<std::int64_t, TrackPoint>> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 4) throw InputError(location(path, lineno) + ": expected 4 fields");
    std::uint64_t id = 0;
    std::int64_t frame = 0;
    double x = 0, y = 0;
    if (!parse_number(f[0], id) || id > UINT32_MAX || !parse_number(f[1], frame) || frame < 0 ||
        !parse_number(f[2], x) || !parse_number(f[3], y) || !std::isfinite(x) ||
        !std::isfinite(y)) {
      throw InputError(location(path, lineno) + ": malformed row");
    }
    auto& pts = rows[static_cast<TrackId>(id)];
    if (!pts.emplace(frame, TrackPoint{frame, x, y}).second) {
      throw InputError(location(path, lineno) + ": duplicate frame " + std::to_string(frame) +
                       " for track " + std::to_string(id));
    }
  }
  std::vector<Track> tracks;
  tracks.reserve(rows.size());
  for (auto& [id, pts] : rows) {
    std::vector<TrackPoint> v;
    v.reserve(pts.size());
    for (auto& [f, p] : pts) v.push_back(p);
    try {
      tracks.emplace_back(id, std::move(v));
    } catch (const InputError& e) {
      throw InputError(path + ": " + e.what());
    }
  }
  return tracks;
}

inline std::vector<Track> read_tracks_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  return read_tracks_csv(is, path);
}

}  // namespace vftrack
