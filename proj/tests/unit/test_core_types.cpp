#include <sstream>

#include "doctest.h"
#include "hicmd/core_types.hpp"

using namespace hicmd;

namespace {

ImageTensor image(int h, int w, float v, int modality, int id) {
  Tensor<float> t({h, w, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = v + 0.001f * static_cast<float>(i % 50);
  return ImageTensor(t, modality, id);
}

}  // namespace

TEST_CASE("image tensor validation and channel-major copies") {
  auto x = image(4, 2, -0.5f, kInfrared, 3);
  CHECK(x.height() == 4);
  CHECK(x.width() == 2);
  auto chw = x.chw();
  CHECK(chw[0] == x.pixels()[0]);
  CHECK(chw[8] == x.pixels()[1]);
  CHECK(ImageTensor::from_chw(chw.data(), 4, 2, kInfrared, 3) == x);
  CHECK_THROWS_AS(ImageTensor(Tensor<float>({4, 2, 3}, 1.5f), kVisible, 1), Error);
  CHECK_THROWS_AS(ImageTensor(Tensor<float>({4, 2, 3}, 0.f), 3, 1), Error);
  CHECK_THROWS_AS(ImageTensor(Tensor<float>({4, 2}, 0.f), kVisible, 1), Error);
}

TEST_CASE("code bundles expose the excluded and attribute parts") {
  CodeBundle a{Tensor<float>({2, 1, 1}, 1.f), {1, 2}, {3}, {4, 5}};
  CHECK(a.id_excluded() == std::vector<float>{3, 4, 5});
  CHECK(a.attribute() == std::vector<float>{1, 2, 3, 4, 5});
  CodeBundle b{Tensor<float>({2, 1, 1}, 2.f), {6, 7}, {8}, {9, 10}};
  swap_id_excluded(a, b);
  CHECK(a.style == std::vector<float>{1, 2});
  CHECK(a.illumination == std::vector<float>{8});
  CHECK(b.pose == std::vector<float>{4, 5});
}

TEST_CASE("pair batches require matching distinct identities") {
  std::vector<ImageTensor> v = {image(2, 2, 0, kVisible, 1), image(2, 2, 0, kVisible, 2)};
  std::vector<ImageTensor> i = {image(2, 2, 0, kInfrared, 1), image(2, 2, 0, kInfrared, 2)};
  PairBatch b(v, i);
  CHECK(b.identities() == std::vector<int>{1, 2});
  std::swap(i[0], i[1]);
  CHECK_THROWS_AS(PairBatch(v, i), Error);
  CHECK_THROWS_AS(PairBatch(v, v), Error);
  std::vector<ImageTensor> dup = {image(2, 2, 0, kVisible, 1), image(2, 2, 0, kVisible, 1)};
  std::vector<ImageTensor> dup_ir = {image(2, 2, 0, kInfrared, 1), image(2, 2, 0, kInfrared, 1)};
  CHECK_THROWS_AS(PairBatch(dup, dup_ir), Error);
}

TEST_CASE("config text round-trips and rejects bad input") {
  RunConfig c;
  c.style_dim = 6;
  c.lr_hfl = 0.0123456789;
  c.adversarial = AdversarialForm::kMinimax;
  c.sampling = SamplingMode::kOriginal;
  c.feature = FeatureMode::kPrototypeOnly;
  c.data = "some/dir";
  c.seed = 123456789012345ULL;
  std::istringstream is(config_to_string(c));
  CHECK(parse_config(is) == c);

  std::istringstream unknown("no_such_key = 1\n");
  CHECK_THROWS_AS(parse_config(unknown), Error);
  std::istringstream comment("# note\nstyle_dim = 5 # trailing\n");
  CHECK(parse_config(comment).style_dim == 5);
  std::istringstream bad("style_dim = 0\n");
  CHECK_THROWS_AS(parse_config(bad), Error);
  std::istringstream odd("height = 63\n");
  CHECK_THROWS_AS(parse_config(odd), Error);
}

TEST_CASE("published hyperparameter defaults") {
  RunConfig c;
  CHECK(c.lambda_cross == 50);
  CHECK(c.lambda_same == 50);
  CHECK(c.lambda_cycle == 50);
  CHECK(c.lambda_code == 10);
  CHECK(c.lambda_kl == 1);
  CHECK(c.lambda_adv == 20);
  CHECK(c.lambda_ce == 1);
  CHECK(c.lambda_trip == 1);
  CHECK(c.lr_hfl == 1e-3);
  CHECK(c.momentum == 0.9);
  CHECK(c.lr_gen == 1e-4);
  CHECK(c.batch_pairs == 4);
}

TEST_CASE("binary serialization round-trips") {
  std::stringstream ss;
  auto x = image(3, 2, 0.25f, kVisible, 7);
  CodeBundle b{Tensor<float>({2, 2, 1}, 0.5f), {1}, {2, 3}, {4}};
  PairBatch pb({image(2, 2, 0, kVisible, 4)}, {image(2, 2, 0.1f, kInfrared, 4)});
  RunConfig c;
  c.iterations = 77;
  serialize(ss, x);
  serialize(ss, b);
  serialize(ss, pb);
  serialize(ss, c);
  CHECK(deserialize_image(ss) == x);
  CHECK(deserialize_bundle(ss) == b);
  CHECK(deserialize_batch(ss) == pb);
  CHECK(deserialize_config(ss) == c);
  std::stringstream empty;
  CHECK_THROWS_AS(deserialize_image(empty), Error);
}
