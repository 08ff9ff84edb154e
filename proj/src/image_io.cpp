#include "hicmd/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace hicmd::image {
namespace {

// Next header token, skipping whitespace and `#` comments.
std::string token(std::istream& is) {
  std::string t;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!t.empty()) break;
      continue;
    }
    t.push_back(static_cast<char>(c));
  }
  return t;
}

int header_int(std::istream& is, const std::string& path) {
  const std::string t = token(is);
  try {
    std::size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used != t.size() || v <= 0) throw Error("");
    return v;
  } catch (const std::exception&) {
    throw Error(path + ": malformed image header");
  }
}

}  // namespace

Rgb8 read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read image " + path);
  const std::string magic = token(is);
  if (magic != "P6" && magic != "P5") throw Error(path + ": unsupported image format (expected binary PPM/PGM)");
  Rgb8 img;
  img.width = header_int(is, path);
  img.height = header_int(is, path);
  if (header_int(is, path) != 255) throw Error(path + ": only 8-bit images are supported");
  if (img.width > 1 << 14 || img.height > 1 << 14) throw Error(path + ": image too large");
  const std::size_t pixels = static_cast<std::size_t>(img.width) * img.height;
  img.data.resize(pixels * 3);
  if (magic == "P6") {
    is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  } else {
    std::vector<std::uint8_t> gray(pixels);
    is.read(reinterpret_cast<char*>(gray.data()), static_cast<std::streamsize>(pixels));
    for (std::size_t i = 0; i < pixels; ++i) img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = gray[i];
  }
  if (!is) throw Error(path + ": truncated image data");
  return img;
}

void write_ppm(const std::string& path, const Rgb8& img) {
  if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * 3) throw Error("write_ppm: size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write image " + path);
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!os) throw Error("write failed: " + path);
}

Tensor<float> to_float(const Rgb8& img) {
  Tensor<float> t({img.height, img.width, 3});
  for (std::size_t i = 0; i < img.data.size(); ++i) t[i] = static_cast<float>(img.data[i]) / 127.5f - 1.0f;
  return t;
}

Rgb8 to_bytes(const Tensor<float>& hwc) {
  if (hwc.rank() != 3 || hwc.dim(2) != 3) throw Error("to_bytes: expected (H, W, 3), got " + shape_str(hwc.shape()));
  Rgb8 img{hwc.dim(0), hwc.dim(1), std::vector<std::uint8_t>(hwc.size())};
  for (std::size_t i = 0; i < hwc.size(); ++i) {
    const float v = std::clamp(hwc[i], -1.0f, 1.0f);
    img.data[i] = static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
  }
  return img;
}

Tensor<float> resize_bilinear(const Tensor<float>& src, int height, int width) {
  if (src.rank() != 3 || src.dim(2) != 3) throw Error("resize_bilinear: expected (H, W, 3)");
  if (height <= 0 || width <= 0) throw Error("resize_bilinear: target size must be positive");
  const int sh = src.dim(0), sw = src.dim(1);
  if (sh == height && sw == width) return src;
  Tensor<float> out({height, width, 3});
  const double fy = static_cast<double>(sh) / height, fx = static_cast<double>(sw) / width;
  for (int y = 0; y < height; ++y) {
    const double syf = std::clamp((y + 0.5) * fy - 0.5, 0.0, sh - 1.0);
    const int y0 = static_cast<int>(syf), y1 = std::min(y0 + 1, sh - 1);
    const double wy = syf - y0;
    for (int x = 0; x < width; ++x) {
      const double sxf = std::clamp((x + 0.5) * fx - 0.5, 0.0, sw - 1.0);
      const int x0 = static_cast<int>(sxf), x1 = std::min(x0 + 1, sw - 1);
      const double wx = sxf - x0;
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int yy, int xx) { return static_cast<double>(src[(static_cast<std::size_t>(yy) * sw + xx) * 3 + c]); };
        const double v = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) + wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
        out[(static_cast<std::size_t>(y) * width + x) * 3 + c] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor<float> load_image(const std::string& path, int height, int width) {
  return resize_bilinear(to_float(read_pnm(path)), height, width);
}

}  // namespace hicmd::image
