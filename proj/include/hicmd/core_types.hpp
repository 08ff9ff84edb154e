#pragma once
// Shared data model: images, hierarchical codes, pair batches and the run
// configuration.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hicmd/tensor.hpp"

namespace hicmd {

inline constexpr int kVisible = 1;
inline constexpr int kInfrared = 2;

// H x W x 3 image with pixels in [-1, 1].
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(Tensor<float> pixels, int modality, int identity);

  const Tensor<float>& pixels() const { return pixels_; }
  int height() const { return pixels_.dim(0); }
  int width() const { return pixels_.dim(1); }
  int modality() const { return modality_; }
  int identity() const { return identity_; }

  // Channel-major copy (3, H, W) for the networks.
  std::vector<float> chw() const;
  static ImageTensor from_chw(const float* chw, int height, int width, int modality, int identity);

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  Tensor<float> pixels_;
  int modality_ = kVisible;
  int identity_ = 1;
};

// Hierarchical latent set of one image. The prototype is stored (h, w, c_p).
struct CodeBundle {
  Tensor<float> prototype;
  std::vector<float> style;
  std::vector<float> illumination;
  std::vector<float> pose;

  // [illumination; pose]
  std::vector<float> id_excluded() const;
  // [style; illumination; pose]
  std::vector<float> attribute() const;

  friend bool operator==(const CodeBundle&, const CodeBundle&) = default;
};

// Exchanges the ID-excluded codes of two bundles.
void swap_id_excluded(CodeBundle& a, CodeBundle& b);

// One visible and one infrared image per identity, all identities distinct.
class PairBatch {
 public:
  PairBatch() = default;
  PairBatch(std::vector<ImageTensor> visible, std::vector<ImageTensor> infrared);

  const std::vector<ImageTensor>& visible() const { return visible_; }
  const std::vector<ImageTensor>& infrared() const { return infrared_; }
  const std::vector<int>& identities() const { return identities_; }
  std::size_t size() const { return identities_.size(); }

  friend bool operator==(const PairBatch&, const PairBatch&) = default;

 private:
  std::vector<ImageTensor> visible_;
  std::vector<ImageTensor> infrared_;
  std::vector<int> identities_;
};

enum class AdversarialForm { kNonSaturating, kMinimax };
enum class SamplingMode { kAlternate, kOriginal };
// Which ID-discriminative codes feed the retrieval feature.
enum class FeatureMode { kBoth, kStyleOnly, kPrototypeOnly };

struct RunConfig {
  // Image and code geometry.
  int height = 64;
  int width = 32;
  int style_dim = 8;
  int illum_dim = 4;
  int pose_dim = 4;
  int proto_channels = 64;

  // Network widths (not given by the method description; desk-scale values).
  int base_channels = 8;
  int downsamples = 2;
  int res_blocks = 2;
  int mlp_dim = 32;
  int dis_channels = 8;
  int embed_channels = 32;
  int embed_dim = 32;
  int feature_dim = 32;
  // Identity count of the classifier head; 0 means "take it from the data".
  int identities = 0;

  // Loss weights.
  double lambda_cross = 50;
  double lambda_same = 50;
  double lambda_cycle = 50;
  double lambda_code = 10;
  double lambda_kl = 1;
  double lambda_adv = 20;
  double lambda_ce = 1;
  double lambda_trip = 1;
  double margin = 0.3;

  // Optimizers: adaptive moments for the generation network, momentum SGD for
  // the feature learning module.
  double lr_gen = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lr_hfl = 1e-3;
  double momentum = 0.9;
  double grad_clip = 10;  // global-norm clip per optimizer; 0 disables
  double alpha_init = 0.5;

  int iterations = 2000;
  int batch_pairs = 4;
  int checkpoint_every = 500;
  std::uint64_t seed = 0;
  std::string data;

  AdversarialForm adversarial = AdversarialForm::kNonSaturating;
  SamplingMode sampling = SamplingMode::kAlternate;
  FeatureMode feature = FeatureMode::kBoth;

  int attribute_dim() const { return style_dim + illum_dim + pose_dim; }
  int excluded_dim() const { return illum_dim + pose_dim; }
  int proto_height() const { return height >> downsamples; }
  int proto_width() const { return width >> downsamples; }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Returns cfg unchanged when every constraint holds; otherwise throws an Error
// naming the first violated field.
const RunConfig& validate_config(const RunConfig& cfg);

// Flat `key = value` text with `#` comments. Unknown keys are errors.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);
// Writes every key in a fixed order; parse_config(write_config(c)) == c.
void write_config(std::ostream& os, const RunConfig& cfg);
std::string config_to_string(const RunConfig& cfg);
// Documented keys in output order.
const std::vector<std::string>& config_keys();

// Binary round-trip serialization of the value types.
void serialize(std::ostream& os, const ImageTensor& x);
ImageTensor deserialize_image(std::istream& is);
void serialize(std::ostream& os, const CodeBundle& b);
CodeBundle deserialize_bundle(std::istream& is);
void serialize(std::ostream& os, const PairBatch& b);
PairBatch deserialize_batch(std::istream& is);
void serialize(std::ostream& os, const RunConfig& cfg);
RunConfig deserialize_config(std::istream& is);

}  // namespace hicmd
