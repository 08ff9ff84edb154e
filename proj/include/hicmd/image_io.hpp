#pragma once
// 8-bit image files (binary PPM/PGM) and conversion to the [-1, 1] float range.

#include <cstdint>
#include <string>
#include <vector>

#include "hicmd/tensor.hpp"

namespace hicmd::image {

struct Rgb8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // row-major, 3 bytes per pixel
};

// Reads P6 (RGB) or P5 (gray, replicated to 3 channels), maxval 255.
Rgb8 read_pnm(const std::string& path);
void write_ppm(const std::string& path, const Rgb8& img);

// (H, W, 3) in [-1, 1] <-> bytes. Values are clamped before quantization.
Tensor<float> to_float(const Rgb8& img);
Rgb8 to_bytes(const Tensor<float>& hwc);

// Bilinear resampling with pixel-center alignment on an (H, W, 3) tensor.
Tensor<float> resize_bilinear(const Tensor<float>& hwc, int height, int width);

// Reads a file and returns an (height, width, 3) tensor in [-1, 1].
Tensor<float> load_image(const std::string& path, int height, int width);

}  // namespace hicmd::image
