/*
 * Copyright 2026 The geofeat Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "geofeat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "geofeat/error.hpp"

namespace geofeat {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw_data("truncated file: " + path);
  }
  return v;
}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_pfm(const std::string& path, const FloatImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw_usage("PFM supports 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write " + path);
  out << (image.channels == 3 ? "PF" : "Pf") << "\n"
      << image.width << " " << image.height << "\n-1.0\n";
  const size_t row = static_cast<size_t>(image.width) * image.channels;
  for (int y = image.height - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(image.data.data() + y * row),
              static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw_io("write failed: " + path);
}

FloatImage read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  if (!(in >> magic >> w >> h >> scale)) throw_data("bad PFM header: " + path);
  in.get();  // single whitespace before the payload
  int channels;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw_data("not a PFM file: " + path);
  }
  if (w <= 0 || h <= 0) throw_data("bad PFM dimensions: " + path);
  if (scale >= 0.0) throw_data("big-endian PFM is not supported: " + path);
  FloatImage image(w, h, channels);
  const size_t row = static_cast<size_t>(w) * channels;
  for (int y = h - 1; y >= 0; --y) {
    if (!in.read(reinterpret_cast<char*>(image.data.data() + y * row),
                 static_cast<std::streamsize>(row * sizeof(float)))) {
      throw_data("truncated PFM: " + path);
    }
  }
  return image;
}

void write_flo(const std::string& path, const FloatImage& flow) {
  if (flow.channels != 2) throw_usage("flow fields have 2 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write " + path);
  put<float>(out, kFloMagic);
  put<std::int32_t>(out, flow.width);
  put<std::int32_t>(out, flow.height);
  out.write(reinterpret_cast<const char*>(flow.data.data()),
            static_cast<std::streamsize>(flow.data.size() * sizeof(float)));
  if (!out) throw_io("write failed: " + path);
}

FloatImage read_flo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path);
  if (get<float>(in, path) != kFloMagic) throw_data("bad .flo magic: " + path);
  const auto w = get<std::int32_t>(in, path);
  const auto h = get<std::int32_t>(in, path);
  if (w <= 0 || h <= 0 || w > 100000 || h > 100000) {
    throw_data("bad .flo dimensions: " + path);
  }
  FloatImage flow(w, h, 2);
  if (!in.read(reinterpret_cast<char*>(flow.data.data()),
               static_cast<std::streamsize>(flow.data.size() * sizeof(float)))) {
    throw_data("truncated .flo: " + path);
  }
  return flow;
}

void write_png(const std::string& path, const ByteImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw_usage("PNG writer supports gray or RGB");
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw_io("cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw_io("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw_io("PNG encode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t row = static_cast<size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.data.data() + y * row));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ByteImage read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw_io("cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw_io("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw_data("PNG decode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  ByteImage image(w, h, channels);
  const size_t row = static_cast<size_t>(w) * channels;
  for (int y = 0; y < h; ++y) png_read_row(png, image.data.data() + y * row, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

ByteImage to_bytes(const FloatImage& image) {
  ByteImage out(image.width, image.height, image.channels);
  for (size_t i = 0; i < image.data.size(); ++i) {
    const float v = std::clamp(image.data[i], 0.0f, 1.0f);
    out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

FloatImage to_floats(const ByteImage& image) {
  FloatImage out(image.width, image.height, image.channels);
  for (size_t i = 0; i < image.data.size(); ++i) {
    out.data[i] = static_cast<float>(image.data[i]) / 255.0f;
  }
  return out;
}

}  // namespace geofeat
