// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "omnifuse/visual/visual.hpp"

namespace omnifuse::visual {

namespace fs = std::filesystem;

namespace {

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> rgb;  // row-major, 3 channels
};

std::string next_ppm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
    } else {
      tok.push_back(c);
    }
  }
  return tok;
}

Image read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VisualError("cannot open frame " + path.string());
  const std::string magic = next_ppm_token(in);
  if (magic != "P6" && magic != "P3") throw VisualError(path.string() + ": not a P3/P6 PPM");
  Image img;
  unsigned long maxval = 0;
  try {
    img.width = std::stoul(next_ppm_token(in));
    img.height = std::stoul(next_ppm_token(in));
    maxval = std::stoul(next_ppm_token(in));
  } catch (const std::exception&) {
    throw VisualError(path.string() + ": malformed PPM header");
  }
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw VisualError(path.string() + ": unsupported PPM dimensions");
  }
  const std::size_t n = img.width * img.height * 3;
  img.rgb.resize(n);
  const double denom = static_cast<double>(maxval);
  if (magic == "P3") {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tok = next_ppm_token(in);
      if (tok.empty()) throw VisualError(path.string() + ": truncated PPM");
      img.rgb[i] = std::min(1.0, std::stod(tok) / denom);
    }
  } else {
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
      throw VisualError(path.string() + ": truncated PPM");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = bytes_per == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
      img.rgb[i] = std::min(1.0, v / denom);
    }
  }
  return img;
}

Image read_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw VisualError(path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw VisualError(path.string() + ": " + png.message);
  }
  Image img;
  img.width = png.width;
  img.height = png.height;
  img.rgb.resize(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) img.rgb[i] = buffer[i] / 255.0;
  return img;
}

}  // namespace

VideoClip read_frames_dir(const fs::path& dir, double fps) {
  if (!fs::is_directory(dir)) throw VisualError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".ppm" || ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw VisualError(dir.string() + " contains no .ppm/.png frames");

  VideoClip clip;
  for (std::size_t t = 0; t < files.size(); ++t) {
    const std::string ext = files[t].extension().string();
    Image img = (ext == ".png" || ext == ".PNG") ? read_png(files[t]) : read_ppm(files[t]);
    if (t == 0) {
      clip = VideoClip::blank(files.size(), img.height, img.width, 3);
    } else if (img.width != clip.width || img.height != clip.height) {
      throw VisualError(files[t].string() + ": frame size differs from the first frame");
    }
    std::copy(img.rgb.begin(), img.rgb.end(),
              clip.pixels.begin() + static_cast<std::ptrdiff_t>(t * img.rgb.size()));
  }
  clip.fps = fps;
  return clip;
}

VideoClip read_raw_clip(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VisualError("cannot open clip " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  VideoClip clip;
  hs >> magic >> clip.frames >> clip.height >> clip.width >> clip.channels >> clip.fps;
  if (magic != "omnifuse-clip" || !hs) throw VisualError(path.string() + ": bad clip header");
  clip.pixels.resize(clip.frames * clip.height * clip.width * clip.channels);
  in.read(reinterpret_cast<char*>(clip.pixels.data()),
          static_cast<std::streamsize>(clip.pixels.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != clip.pixels.size() * sizeof(double)) {
    throw VisualError(path.string() + ": truncated clip data");
  }
  clip.source_width = clip.width;
  clip.source_height = clip.height;
  clip.validate();
  return clip;
}

void write_raw_clip(const fs::path& path, const VideoClip& clip) {
  clip.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VisualError("cannot write clip " + path.string());
  out << "omnifuse-clip " << clip.frames << ' ' << clip.height << ' ' << clip.width << ' '
      << clip.channels << ' ' << clip.fps << '\n';
  out.write(reinterpret_cast<const char*>(clip.pixels.data()),
            static_cast<std::streamsize>(clip.pixels.size() * sizeof(double)));
}

void write_ppm(const fs::path& path, const VideoClip& clip, std::size_t frame) {
  if (frame >= clip.frames || clip.channels != 3) throw VisualError("write_ppm: bad frame");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VisualError("cannot write " + path.string());
  out << "P6\n" << clip.width << ' ' << clip.height << "\n255\n";
  for (std::size_t y = 0; y < clip.height; ++y) {
    for (std::size_t x = 0; x < clip.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(clip.at(frame, y, x, c), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
}

VideoClip load_clip(const fs::path& path, double fps) {
  if (fs::is_directory(path)) return read_frames_dir(path, fps);
  return read_raw_clip(path);
}

}  // namespace omnifuse::visual
