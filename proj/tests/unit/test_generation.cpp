#include <random>

#include "doctest.h"
#include "hicmd/generation.hpp"
#include "hicmd/probe.hpp"

using namespace hicmd;

namespace {

CodeBundle bundle(float base, int dc, int dp) {
  CodeBundle b;
  b.prototype = Tensor<float>({1, 1, 2}, base);
  b.style = {base, base};
  b.illumination.assign(dc, base + 1);
  b.pose.assign(dp, base + 2);
  return b;
}

train::TrainState small_state() {
  RunConfig c;
  c.height = 16;
  c.width = 8;
  c.proto_channels = 4;
  c.base_channels = 4;
  c.mlp_dim = 8;
  c.identities = 4;
  return train::TrainState::create(c);
}

ImageTensor random_image(std::mt19937_64& rng, int modality, int id) {
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor<float> t({16, 8, 3});
  for (auto& v : t.values()) v = u(rng);
  return ImageTensor(t, modality, id);
}

}  // namespace

TEST_CASE("excluded-code interpolation") {
  CodeBundle a = bundle(0, 1, 1), b = bundle(0, 1, 1);
  a.illumination = {0};
  a.pose = {0};
  b.illumination = {2};
  b.pose = {4};
  CHECK(gen::interpolate_excluded(a, b, 0.5) == std::vector<float>{1, 2});
  CHECK(gen::interpolate_excluded(a, b, 0.0) == a.id_excluded());
  CHECK(gen::interpolate_excluded(a, b, 1.0) == b.id_excluded());
  CHECK_THROWS_AS(gen::interpolate_excluded(a, b, 1.5), Error);
  CHECK_THROWS_AS(gen::interpolate_excluded(a, bundle(0, 2, 1), 0.5), Error);
}

TEST_CASE("swap modes select the documented codes") {
  const CodeBundle in = bundle(1, 2, 2), ref = bundle(5, 2, 2);
  auto ex = gen::swap_codes(in, ref, gen::SwapMode::kExcluded);
  CHECK(ex.style == in.style);
  CHECK(ex.prototype == in.prototype);
  CHECK(ex.id_excluded() == ref.id_excluded());
  auto di = gen::swap_codes(in, ref, gen::SwapMode::kDiscriminative);
  CHECK(di.style == ref.style);
  CHECK(di.prototype == ref.prototype);
  CHECK(di.id_excluded() == in.id_excluded());
  auto il = gen::swap_codes(in, ref, gen::SwapMode::kIllumination);
  CHECK(il.illumination == ref.illumination);
  CHECK(il.pose == in.pose);
  CHECK(il.style == in.style);
  // Swapping twice restores both bundles.
  CodeBundle a = in, b = ref;
  swap_id_excluded(a, b);
  swap_id_excluded(a, b);
  CHECK(a == in);
  CHECK(b == ref);
  CHECK(gen::parse_swap_mode("swap-illum") == gen::SwapMode::kIllumination);
  CHECK_THROWS_AS(gen::parse_swap_mode("swap"), Error);
}

TEST_CASE("grid and strip geometry, endpoints and determinism") {
  auto s = small_state();
  std::mt19937_64 rng(3);
  std::vector<ImageTensor> in = {random_image(rng, kVisible, 1), random_image(rng, kInfrared, 2)};
  std::vector<ImageTensor> ref = {random_image(rng, kInfrared, 3), random_image(rng, kVisible, 4),
                                  random_image(rng, kInfrared, 1)};
  auto grid = gen::generate_grid(s, in, ref, gen::SwapMode::kExcluded);
  REQUIRE(grid.cells.size() == 2);
  CHECK(grid.cells[0].size() == 3);
  CHECK(grid.cells[1][0].identity() == 2);
  CHECK(grid.cells[1][0].modality() == kInfrared);
  auto img = gen::compose_grid(grid);
  CHECK(img.height == 3 * 16);
  CHECK(img.width == 4 * 8);
  CHECK(gen::compose_grid(gen::generate_grid(s, in, ref, gen::SwapMode::kExcluded)).data == img.data);

  // Encode/decode round trip of the codes themselves.
  auto codes = gen::encode_images(s, in);
  CHECK(codes[0].prototype.shape() == Shape{4, 2, 4});
  auto same = gen::decode_bundles(s, codes, {kVisible, kInfrared}, {1, 2});
  for (const auto& im : same)
    for (float v : im.pixels().values()) {
      CHECK(v >= -1.0f);
      CHECK(v <= 1.0f);
    }

  auto strip = gen::interpolate_strip(s, in[0], ref[0], 5);
  REQUIRE(strip.size() == 5);
  auto start = gen::decode_bundles(s, {codes[0]}, {kVisible}, {1});
  CHECK(strip[0].pixels() == start[0].pixels());
  auto swapped = gen::generate_grid(s, {in[0]}, {ref[0]}, gen::SwapMode::kExcluded);
  CHECK(strip[4].pixels() == swapped.cells[0][0].pixels());
  CHECK(gen::compose_strip(strip).width == 5 * 8);
  CHECK_THROWS_AS(gen::interpolate_strip(s, in[0], ref[0], 1), Error);
}

TEST_CASE("stripe probe separates rendered patterns") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> off(-4, 4), ang(0, 0.35);
  std::vector<ImageTensor> train, test;
  std::vector<int> ltrain, ltest;
  for (int rep = 0; rep < 12; ++rep) {
    for (int tmpl = 0; tmpl < data::kTemplates; ++tmpl) {
      for (int st = 0; st < data::kStripePatterns; ++st) {
        auto alb = data::render_albedo(tmpl, st, off(rng), ang(rng), 64, 32);
        for (int pal : {data::kVisiblePalette, data::kInfraredPalette}) {
          auto rgb = data::apply_palette(alb, pal);
          for (auto& v : rgb.values()) v = v * 2 - 1;
          (rep < 8 ? train : test).emplace_back(rgb, pal == 0 ? kVisible : kInfrared, 1);
          (rep < 8 ? ltrain : ltest).push_back(st);
        }
      }
    }
  }
  probe::StripeProbe p;
  p.fit(train, ltrain);
  CHECK(p.accuracy(test, ltest) >= 0.95);
}

TEST_CASE("palette probe and centroid on rendered images") {
  std::vector<ImageTensor> train;
  std::vector<int> pal;
  for (int tmpl = 0; tmpl < data::kTemplates; ++tmpl) {
    for (int st = 0; st < data::kStripePatterns; ++st) {
      auto alb = data::render_albedo(tmpl, st, 0.0, 0.1, 64, 32);
      for (int p : {data::kVisiblePalette, data::kInfraredPalette}) {
        auto rgb = data::apply_palette(alb, p);
        for (auto& v : rgb.values()) v = v * 2 - 1;
        train.emplace_back(rgb, p == 0 ? kVisible : kInfrared, 1);
        pal.push_back(p);
      }
    }
  }
  probe::PaletteProbe p;
  p.fit(train, pal);
  int hit = 0;
  for (std::size_t i = 0; i < train.size(); ++i) hit += p.predict(probe::blur(train[i])) == pal[i];
  CHECK(hit == static_cast<int>(train.size()));

  auto left = data::apply_palette(data::render_albedo(0, 0, -4.0, 0.0, 64, 32), data::kVisiblePalette);
  auto right = data::apply_palette(data::render_albedo(0, 0, 4.0, 0.0, 64, 32), data::kVisiblePalette);
  CHECK(probe::horizontal_centroid(ImageTensor(left, kVisible, 1)) <
        probe::horizontal_centroid(ImageTensor(right, kVisible, 1)));
}

TEST_CASE("blur keeps constant images and the mean of a bump") {
  Tensor<float> t({5, 5, 3});
  t.values().assign(t.size(), 0.25f);
  auto b = probe::blur(ImageTensor(t, kVisible, 1));
  for (float v : b.pixels().values()) CHECK(v == doctest::Approx(0.25));
  t.values().assign(t.size(), 0.0f);
  for (int c = 0; c < 3; ++c) t[(2 * 5 + 2) * 3 + c] = 1.0f;
  b = probe::blur(ImageTensor(t, kVisible, 1));
  double s = 0;
  for (float v : b.pixels().values()) s += v;
  CHECK(s == doctest::Approx(3.0));
  CHECK(b.pixels()[(2 * 5 + 2) * 3] == doctest::Approx(0.25));
}
