#pragma once
// Feature learning on top of the generation network: the prototype embedding
// H, the alpha-weighted combination with the style code, the feature/classifier
// head, alternate sampling over original and translated images, and the
// discriminative losses.

#include <random>
#include <string>
#include <vector>

#include "hicmd/networks.hpp"

namespace hicmd::hfl {

// Image sources of one identity inside a generation record.
enum Source : int {
  kOriginal1 = 0,   // x_1
  kTranslated12 = 1,  // x_{1->2}, codes re-encoded by modality 2
  kOriginal2 = 2,   // x_2
  kTranslated21 = 3,  // x_{2->1}, codes re-encoded by modality 1
};
inline constexpr int kSourceCount = 4;

struct SourcePair {
  int prototype;
  int style;
  friend bool operator==(const SourcePair&, const SourcePair&) = default;
};

// Even iterations: (j, j) for every source. Odd iterations t: (j, (j + s) % 4)
// with s = (t / 2) % 3 + 1, so three consecutive odd iterations cover every
// ordered cross pair. kOriginal: (x_1, x_1) and (x_2, x_2) only.
std::vector<SourcePair> alternate_sample(long iteration, SamplingMode mode);

struct FeatureVector {
  std::vector<float> values;
  int identity = 0;
  int modality = kVisible;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Binary container of (identity, modality, f) triples.
void write_features(const std::string& path, const std::vector<FeatureVector>& features);
std::vector<FeatureVector> read_features(const std::string& path);

// hfl.embed.*, hfl.fc, hfl.cls, hfl.alpha. cfg.identities sizes the classifier.
template <class T>
void init_hfl_params(ParamStore<T>& hfl, const RunConfig& cfg, std::mt19937_64& rng);

// Clamps hfl.alpha into [0, 1]; returns the clamped value.
template <class T>
double clamp_alpha(ParamStore<T>& hfl);

// [alpha * pd ; (1 - alpha) * style]
template <class T>
Var<T> combine(Var<T> pd, Var<T> style, Var<T> alpha);

template <class T>
struct HeadOut {
  Var<T> feature;  // (N, d_f)
  Var<T> logits;   // (N, identities)
};

template <class T>
struct SampledFeatures {
  HeadOut<T> head;
  std::vector<int> labels;  // identity label of every row, 1-based
  std::vector<SourcePair> pairs;
};

template <class T>
class Hfl {
 public:
  Hfl(const RunConfig& cfg, ParamStore<T>& params);

  // (N, c_p, h, w) -> (N, d_pd)
  Var<T> embed_prototype(Graph<T>& g, Var<T> prototype, bool trainable = true) const;
  // Learnable alpha for FeatureMode::kBoth; the constant 0 (style only) or 1
  // (prototype only) otherwise.
  Var<T> alpha(Graph<T>& g, bool trainable = true) const;
  HeadOut<T> head(Graph<T>& g, Var<T> combined, bool trainable = true) const;
  // Full path from codes to the head outputs.
  HeadOut<T> forward(Graph<T>& g, Var<T> prototype, Var<T> style, bool trainable = true) const;

  // Features of the pairs chosen by alternate_sample. identities[k] labels
  // row k of the record.
  SampledFeatures<T> sample_features(Graph<T>& g, const nn::GenerationVars<T>& rec, const std::vector<int>& identities,
                                     long iteration, bool trainable = true) const;

 private:
  Var<T> p(Graph<T>& g, const std::string& name, bool trainable) const;

  RunConfig cfg_;
  ParamStore<T>* params_;
};

// Mean softmax cross-entropy; labels are identities in 1..N.
template <class T>
Var<T> ce_loss(Var<T> logits, const std::vector<int>& labels);
// Batch-hard triplet loss over the feature set, ties to the lowest index.
template <class T>
Var<T> triplet_loss(Var<T> features, const std::vector<int>& labels, double margin);

}  // namespace hicmd::hfl
