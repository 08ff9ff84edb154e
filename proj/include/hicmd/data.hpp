#pragma once
// Dataset layout, the procedural two-modality dataset, and the pair sampler.
//
// Layout: <root>/<split>/<identity>/<visible|infrared>/<image>.ppm with split
// one of train, query, gallery. Identity folders are labelled 1..N in sorted
// order of the train split; identities only present in query/gallery follow.

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hicmd/core_types.hpp"

namespace hicmd::data {

enum class Split { kTrain, kQuery, kGallery };
const char* split_name(Split s);
const char* modality_name(int modality);  // "visible" / "infrared"
int parse_modality(const std::string& name);

struct Record {
  std::string path;      // relative to the dataset root
  std::string identity_name;
  int identity = 0;      // 1-based label
  int modality = kVisible;
  Split split = Split::kTrain;
};

struct DatasetIndex {
  std::string root;
  std::vector<Record> records;
  int identities = 0;  // N: number of train identities
  int total_identities = 0;

  std::vector<int> select(Split split) const;
  std::vector<int> select(Split split, int modality) const;
};

DatasetIndex index_folder(const std::string& root);

// Ground-truth generative factors.
inline constexpr int kTemplates = 5;
inline constexpr int kStripePatterns = 4;
inline constexpr int kVisiblePalette = 0;
inline constexpr int kInfraredPalette = 1;

struct SyntheticSpec {
  int identities = 20;
  int poses = 10;
  int height = 64;
  int width = 32;
  double noise = 0.0;  // std of additive pixel noise in [0, 1] units
};

struct Factors {
  std::string image_id;  // relative path
  int identity = 0;
  int modality = kVisible;
  int template_id = 0;
  int stripes = 0;
  double offset = 0;  // horizontal shift in pixels of a 32-wide frame
  double angle = 0;   // limb spread in radians
  int palette = kVisiblePalette;
};

// identity (1-based) -> (template, stripes); unique for identity <= 20.
std::array<int, 2> identity_factors(int identity);
// Poses held out of training for query/gallery.
int test_pose_count(int poses);

// Grayscale albedo in [0, 1], shape (H, W).
Tensor<float> render_albedo(int template_id, int stripes, double offset, double angle, int height, int width);
// Albedo -> (H, W, 3) in [0, 1] and back (channel-averaged inverse).
Tensor<float> apply_palette(const Tensor<float>& albedo, int palette);
Tensor<float> invert_palette(const Tensor<float>& rgb01, int palette);

struct Synthetic {
  DatasetIndex index;
  std::vector<Factors> factors;
};

// Renders and writes the dataset plus <root>/factors.csv.
Synthetic make_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const std::string& root);
void write_factors_csv(const std::string& path, const std::vector<Factors>& factors);
std::vector<Factors> read_factors_csv(const std::string& path);

// Index plus decoded images at the configured resolution.
struct Dataset {
  DatasetIndex index;
  std::vector<ImageTensor> images;  // aligned with index.records
  // Train split: record ids per identity (1-based label -> ids), per modality.
  std::map<int, std::array<std::vector<int>, 2>> train_by_identity;

  std::vector<int> train_identities() const;
};

Dataset load_dataset(const std::string& root, int height, int width);

// `pairs` distinct train identities, each with one visible and one infrared
// image drawn uniformly.
PairBatch sample_pair_batch(const Dataset& ds, std::mt19937_64& rng, int pairs = 4);

}  // namespace hicmd::data
