#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hicmd/image_io.hpp"

using namespace hicmd;
namespace fs = std::filesystem;

TEST_CASE("ppm round-trip and float conversion") {
  const auto path = (fs::temp_directory_path() / "hicmd_img.ppm").string();
  image::Rgb8 img;
  img.height = 2;
  img.width = 3;
  for (int i = 0; i < 18; ++i) img.data.push_back(static_cast<std::uint8_t>(i * 14));
  image::write_ppm(path, img);
  auto back = image::read_pnm(path);
  CHECK(back.height == 2);
  CHECK(back.width == 3);
  CHECK(back.data == img.data);
  auto f = image::to_float(back);
  CHECK(f.shape() == Shape{2, 3, 3});
  CHECK(f[0] == -1.0f);
  CHECK(image::to_bytes(f).data == img.data);
  fs::remove(path);
}

TEST_CASE("gray pgm replicates channels") {
  const auto path = (fs::temp_directory_path() / "hicmd_img.pgm").string();
  {
    std::ofstream os(path, std::ios::binary);
    os << "P5\n# c\n2 1\n255\n";
    os.put(static_cast<char>(0));
    os.put(static_cast<char>(255));
  }
  auto img = image::read_pnm(path);
  CHECK(img.data == std::vector<std::uint8_t>{0, 0, 0, 255, 255, 255});
  fs::remove(path);
}

TEST_CASE("malformed files are rejected") {
  const auto path = (fs::temp_directory_path() / "hicmd_bad.ppm").string();
  {
    std::ofstream os(path, std::ios::binary);
    os << "P6\n2 2\n65535\n";
  }
  CHECK_THROWS_AS(image::read_pnm(path), Error);
  {
    std::ofstream os(path, std::ios::binary);
    os << "P6\n2 2\n255\n123";
  }
  CHECK_THROWS_AS(image::read_pnm(path), Error);
  CHECK_THROWS_AS(image::read_pnm(path + ".missing"), Error);
  fs::remove(path);
}

TEST_CASE("bytes clamp and round") {
  Tensor<float> t({1, 1, 3}, std::vector<float>{-3.0f, 0.0f, 2.0f});
  auto b = image::to_bytes(t);
  CHECK(b.data == std::vector<std::uint8_t>{0, 128, 255});
}

TEST_CASE("bilinear resize keeps constants and identity sizes") {
  Tensor<float> c({4, 2, 3}, 0.25f);
  auto r = image::resize_bilinear(c, 8, 4);
  CHECK(r.shape() == Shape{8, 4, 3});
  for (float v : r.values()) CHECK(v == doctest::Approx(0.25f));
  Tensor<float> ramp({1, 4, 3});
  for (int x = 0; x < 4; ++x)
    for (int ch = 0; ch < 3; ++ch) ramp[x * 3 + ch] = static_cast<float>(x);
  CHECK(image::resize_bilinear(ramp, 1, 4) == ramp);
  auto half = image::resize_bilinear(ramp, 1, 2);
  CHECK(half[0] == doctest::Approx(0.5f));
  CHECK(half[3] == doctest::Approx(2.5f));
}
