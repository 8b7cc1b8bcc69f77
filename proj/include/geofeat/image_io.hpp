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

#ifndef GEOFEAT_IMAGE_IO_HPP_
#define GEOFEAT_IMAGE_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace geofeat {

// Interleaved row-major raster, row 0 at the top.
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  T& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  const T& at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  bool inside(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  bool same_size(const Raster& o) const {
    return width == o.width && height == o.height;
  }
};

using FloatImage = Raster<float>;
using ByteImage = Raster<std::uint8_t>;

// Portable float map: 1 channel ("Pf") or 3 channels ("PF"), little-endian
// (scale -1.0), rows stored bottom-to-top as the format prescribes.
void write_pfm(const std::string& path, const FloatImage& image);
FloatImage read_pfm(const std::string& path);

// Middlebury optical flow: float 202021.25, int32 width, int32 height, then
// row-major float32 (dx, dy) pairs. Unknown flow is stored as 1e10.
inline constexpr float kFloMagic = 202021.25f;
inline constexpr float kUnknownFlow = 1e10f;
void write_flo(const std::string& path, const FloatImage& flow);
FloatImage read_flo(const std::string& path);

// 8-bit PNG, gray (1 channel) or RGB (3 channels).
void write_png(const std::string& path, const ByteImage& image);
ByteImage read_png(const std::string& path);

// [0,1] floats <-> bytes, rounding to nearest.
ByteImage to_bytes(const FloatImage& image);
FloatImage to_floats(const ByteImage& image);

}  // namespace geofeat

#endif  // GEOFEAT_IMAGE_IO_HPP_
