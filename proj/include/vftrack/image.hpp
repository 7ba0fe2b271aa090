#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "vftrack/types.hpp"

namespace vftrack {

/// 8-bit grayscale frame, row-major.
struct Frame {
  std::int64_t index = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> intensities;

  Frame() = default;
  Frame(std::int64_t idx, int w, int h, std::uint8_t fill = 0)
      : index(idx), width(w), height(h),
        intensities(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::uint8_t at(int x, int y) const {
    return intensities[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                       static_cast<std::size_t>(x)];
  }
  std::uint8_t& at(int x, int y) {
    return intensities[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                       static_cast<std::size_t>(x)];
  }

  void validate() const {
    if (width < 16 || height < 16) {
      throw InputError("frame " + std::to_string(index) + " is " + std::to_string(width) + "x" +
                       std::to_string(height) + ", minimum is 16x16");
    }
    if (intensities.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw InputError("frame " + std::to_string(index) + " buffer size does not match dimensions");
    }
  }
};

/// Rounded half-up luma with integer weights (0.299, 0.587, 0.114).
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

namespace detail {

class PgmHeaderReader {
public:
  PgmHeaderReader(const std::vector<std::uint8_t>& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long read_int(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) fail(std::string("truncated header, expected ") + what);
    if (!std::isdigit(bytes_[pos_])) fail(std::string("expected ") + what);
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) fail(std::string(what) + " out of range");
      ++pos_;
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw InputError(path_ + ": " + why + " at byte offset " + std::to_string(pos_));
  }

  std::size_t& pos() { return pos_; }

private:
  const std::vector<std::uint8_t>& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

inline Frame decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  PgmHeaderReader rd(bytes, path);
  if (bytes.size() < 2) rd.fail("truncated header, expected magic 'P5'");
  if (bytes[0] != 'P' || bytes[1] != '5') rd.fail("not a binary PGM (magic 'P5')");
  rd.pos() = 2;
  const long w = rd.read_int("width");
  const long h = rd.read_int("height");
  const long maxval = rd.read_int("maxval");
  if (w <= 0 || h <= 0) rd.fail("zero image dimension");
  if (maxval <= 0) rd.fail("maxval must be positive");
  if (maxval > 255) rd.fail("16-bit PGM is not supported");
  if (rd.pos() >= bytes.size() || !std::isspace(bytes[rd.pos()])) {
    rd.fail("truncated header, expected whitespace after maxval");
  }
  ++rd.pos();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - rd.pos() < n) {
    throw InputError(path + ": truncated pixel data, expected " + std::to_string(n) +
                     " bytes at byte offset " + std::to_string(rd.pos()));
  }
  Frame f(0, static_cast<int>(w), static_cast<int>(h));
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(rd.pos()), n, f.intensities.begin());
  if (maxval != 255) {
    for (auto& v : f.intensities) {
      v = static_cast<std::uint8_t>((std::min<long>(v, maxval) * 255 + maxval / 2) / maxval);
    }
  }
  return f;
}

inline Frame decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    std::string msg = img.message;
    png_image_free(&img);
    throw InputError(path + ": malformed PNG: " + msg);
  }
  if (img.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&img);
    throw InputError(path + ": 16-bit PNG is not supported");
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGBA : PNG_FORMAT_GA;
  const std::size_t channels = color ? 4 : 2;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raw.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw InputError(path + ": malformed PNG: " + msg);
  }
  Frame f(0, static_cast<int>(img.width), static_cast<int>(img.height));
  for (std::size_t i = 0; i < f.intensities.size(); ++i) {
    const std::uint8_t* px = raw.data() + i * channels;
    f.intensities[i] = color ? luma(px[0], px[1], px[2]) : px[0];
  }
  return f;
}

}  // namespace detail

/// Loads an 8-bit grayscale PGM (P5) or PNG. Color PNGs are converted by luma.
inline Frame load_frame(const std::string& path, std::int64_t index = 0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  static constexpr std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  Frame f;
  if (bytes.size() >= 8 && std::equal(png_sig, png_sig + 8, bytes.begin())) {
    f = detail::decode_png(bytes, path);
  } else if (bytes.size() >= 1 && bytes[0] == 'P') {
    f = detail::decode_pgm(bytes, path);
  } else {
    throw InputError(path + ": unrecognized image format (expected PGM P5 or PNG)");
  }
  f.index = index;
  return f;
}

inline void write_pgm(const std::string& path, const Frame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path + " for writing");
  os << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(frame.intensities.data()),
           static_cast<std::streamsize>(frame.intensities.size()));
  if (!os) throw InputError("failed writing " + path);
}

}  // namespace vftrack
