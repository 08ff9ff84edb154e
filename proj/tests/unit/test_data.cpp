#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "hicmd/data.hpp"
#include "hicmd/image_io.hpp"

using namespace hicmd;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("identity factors are unique and held-out pose counts follow the 70/30 split") {
  std::set<std::array<int, 2>> seen;
  for (int id = 1; id <= 20; ++id) {
    auto f = data::identity_factors(id);
    CHECK(f[0] >= 0);
    CHECK(f[0] < data::kTemplates);
    CHECK(f[1] >= 0);
    CHECK(f[1] < data::kStripePatterns);
    seen.insert(f);
  }
  CHECK(seen.size() == 20);
  CHECK_THROWS_AS(data::identity_factors(21), Error);
  CHECK(data::test_pose_count(10) == 3);
  CHECK(data::test_pose_count(2) == 1);
  CHECK_THROWS_AS(data::test_pose_count(1), Error);
  CHECK(data::test_pose_count(4) == 1);
}

TEST_CASE("palettes invert back to the albedo") {
  auto a = data::render_albedo(2, 3, 1.5, 0.2, 64, 32);
  CHECK(a.shape() == Shape{64, 32});
  for (float v : a.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  for (int pal : {data::kVisiblePalette, data::kInfraredPalette}) {
    auto rgb = data::apply_palette(a, pal);
    CHECK(rgb.shape() == Shape{64, 32, 3});
    auto back = data::invert_palette(rgb, pal);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(back[i] == doctest::Approx(a[i]).epsilon(1e-4));
  }
  // Infrared is gray: equal channel ratios to the tint.
  auto ir = data::apply_palette(a, data::kInfraredPalette);
  CHECK(ir[1] == doctest::Approx(ir[0] * 0.9f).epsilon(1e-5));
}

TEST_CASE("synthetic dataset layout, factors, and loading") {
  const fs::path root = fresh_dir("hicmd_test_data");
  data::SyntheticSpec spec;
  spec.identities = 4;
  spec.poses = 4;
  spec.height = 16;
  spec.width = 8;
  auto syn = data::make_synthetic(spec, 5, root.string());
  CHECK(syn.factors.size() == 4 * 2 * 4);
  CHECK(fs::exists(root / "train" / "0001" / "visible" / "pose00.ppm"));
  CHECK(fs::exists(root / "query" / "0001" / "infrared"));
  CHECK(fs::exists(root / "gallery" / "0001" / "visible"));
  CHECK_FALSE(fs::exists(root / "query" / "0001" / "visible"));

  auto back = data::read_factors_csv((root / "factors.csv").string());
  REQUIRE(back.size() == syn.factors.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].image_id == syn.factors[i].image_id);
    CHECK(back[i].stripes == syn.factors[i].stripes);
    CHECK(back[i].offset == syn.factors[i].offset);
  }
  // Both modalities of one pose share their pose factors.
  for (const auto& f : syn.factors) {
    if (f.modality != kVisible) continue;
    std::string twin = f.image_id;
    twin.replace(twin.find("visible"), 7, "infrared");
    twin.replace(0, twin.find('/'), f.image_id.substr(0, f.image_id.find('/')) == "gallery" ? "query" : "train");
    for (const auto& g : syn.factors) {
      if (g.image_id == twin) {
        CHECK(g.offset == f.offset);
        CHECK(g.angle == f.angle);
      }
    }
  }

  auto ds = data::load_dataset(root.string(), 16, 8);
  CHECK(ds.index.identities == 4);
  CHECK(ds.train_identities() == std::vector<int>{1, 2, 3, 4});
  CHECK(ds.index.select(data::Split::kTrain).size() == 4 * 2 * 3);
  CHECK(ds.index.select(data::Split::kQuery).size() == 4);
  CHECK(ds.index.select(data::Split::kGallery, kVisible).size() == 4);
  for (int i : ds.index.select(data::Split::kQuery)) CHECK(ds.images[i].modality() == kInfrared);

  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    auto b = data::sample_pair_batch(ds, rng, 3);
    CHECK(b.size() == 3);
    CHECK(std::set<int>(b.identities().begin(), b.identities().end()).size() == 3);
    for (std::size_t k = 0; k < b.size(); ++k) {
      CHECK(b.visible()[k].modality() == kVisible);
      CHECK(b.infrared()[k].modality() == kInfrared);
      CHECK(b.visible()[k].identity() == b.infrared()[k].identity());
    }
  }
  CHECK_THROWS_AS(data::sample_pair_batch(ds, rng, 5), Error);

  // Same seed, same bytes.
  const fs::path again = fresh_dir("hicmd_test_data2");
  data::make_synthetic(spec, 5, again.string());
  auto p1 = image::read_pnm((root / "train" / "0003" / "infrared" / "pose01.ppm").string());
  auto p2 = image::read_pnm((again / "train" / "0003" / "infrared" / "pose01.ppm").string());
  CHECK(p1.data == p2.data);
  fs::remove_all(root);
  fs::remove_all(again);
}

TEST_CASE("index rejects a train identity missing a modality") {
  const fs::path root = fresh_dir("hicmd_test_bad");
  fs::create_directories(root / "train" / "0001" / "visible");
  image::Rgb8 img;
  img.height = 2;
  img.width = 2;
  img.data.assign(12, 100);
  image::write_ppm((root / "train" / "0001" / "visible" / "a.ppm").string(), img);
  CHECK_THROWS_AS(data::index_folder(root.string()), Error);
  fs::remove_all(root);
}
