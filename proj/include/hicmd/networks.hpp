#pragma once
// Generation network: per-modality prototype and attribute encoders, a shared
// decoder with attribute-driven normalization modulation, and per-modality
// discriminators. Every builder records onto a Graph so the same code serves
// training (float) and gradient verification (double).

#include <array>
#include <random>

#include "hicmd/autograd.hpp"
#include "hicmd/core_types.hpp"

namespace hicmd::nn {

// Attribute code of a batch, split by the fixed index partition
// [0, d_s) | [d_s, d_s + d_c) | [d_s + d_c, d_s + d_c + d_p).
template <class T>
struct AttributeVars {
  Var<T> raw;           // (N, d_s + d_c + d_p)
  Var<T> style;         // (N, d_s)
  Var<T> illumination;  // (N, d_c)
  Var<T> pose;          // (N, d_p)
  Var<T> excluded;      // (N, d_c + d_p)
};

template <class T>
struct CodeVars {
  Var<T> prototype;  // (N, c_p, h, w)
  AttributeVars<T> attribute;
};

// Graph ids of the code tensors a decode consumed.
struct DecodeSources {
  int prototype = -1;
  int style = -1;
  int illumination = -1;
  int pose = -1;
};

// Everything one forward pass produces for a batch of (x_1, x_2) pairs.
// Index 0 refers to modality 1 (visible), index 1 to modality 2 (infrared).
template <class T>
struct GenerationVars {
  std::array<Var<T>, 2> real;
  std::array<CodeVars<T>, 2> codes;
  // same[i]  = G(p_i, s_i, c_i, pose_i)
  std::array<Var<T>, 2> same;
  // cross[0] = x_{2->1} = G(p_2, s_2, c_1, pose_1); cross[1] = x_{1->2}
  std::array<Var<T>, 2> cross;
  // illum[0] = G(p_2, s_2, c_1, pose_2); illum[1] = G(p_1, s_1, c_2, pose_1)
  std::array<Var<T>, 2> illum;
  // reencoded[i] = encoders of modality i applied to cross[i]
  std::array<CodeVars<T>, 2> reencoded;
  // cycle[0] = G(p^_1, s^_1, ex^_1) with p^_1, s^_1 from reencoded[1] and
  // ex^_1 from reencoded[0]; cycle[1] mirrors it.
  std::array<Var<T>, 2> cycle;

  std::array<DecodeSources, 2> same_sources, cross_sources, illum_sources, cycle_sources;
};

template <class T>
class IdPig {
 public:
  // gen holds encoders and decoder (and the feature module, unused here);
  // dis holds both discriminators.
  IdPig(const RunConfig& cfg, ParamStore<T>& gen, ParamStore<T>& dis);

  const RunConfig& config() const { return cfg_; }

  // x: (N, 3, H, W). Modality selects the encoder pair.
  Var<T> encode_prototype(Graph<T>& g, Var<T> x, int modality, bool trainable = true) const;
  AttributeVars<T> encode_attribute(Graph<T>& g, Var<T> x, int modality, bool trainable = true) const;
  CodeVars<T> encode(Graph<T>& g, Var<T> x, int modality, bool trainable = true) const;
  // Returns (N, 3, H, W) in [-1, 1].
  Var<T> decode(Graph<T>& g, Var<T> prototype, Var<T> style, Var<T> illumination, Var<T> pose,
                bool trainable = true) const;
  // Realness score in (0, 1), shape (N, 1).
  Var<T> discriminate(Graph<T>& g, Var<T> x, int modality, bool trainable = true) const;

  GenerationVars<T> forward_generation(Graph<T>& g, Var<T> x1, Var<T> x2, bool trainable = true) const;

 private:
  Var<T> p(Graph<T>& g, const std::string& name, bool trainable) const;
  Var<T> conv(Graph<T>& g, const std::string& name, Var<T> x, int stride, int pad, bool trainable) const;
  Var<T> dense(Graph<T>& g, const std::string& name, Var<T> x, bool trainable) const;

  RunConfig cfg_;
  ParamStore<T>* gen_;
  ParamStore<T>* dis_;
};

// Creates every encoder/decoder parameter (prefixes enc_p1, enc_p2, enc_a1,
// enc_a2, dec) with He-normal weights and zero biases.
template <class T>
void init_generation_params(ParamStore<T>& gen, const RunConfig& cfg, std::mt19937_64& rng);
// dis1.*, dis2.*; the final scoring layer starts at zero so untrained scores
// are exactly 0.5.
template <class T>
void init_discriminator_params(ParamStore<T>& dis, const RunConfig& cfg, std::mt19937_64& rng);

// Number of modulation scalars the decoder consumes per sample.
int modulation_width(const RunConfig& cfg);

}  // namespace hicmd::nn

namespace hicmd::nn {

// Stacks images into an (N, 3, H, W) batch.
template <class T>
Tensor<T> stack_images(const std::vector<ImageTensor>& images);

}  // namespace hicmd::nn
