#include "hicmd/hfl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "hicmd/io/binary.hpp"
#include "hicmd/ops.hpp"

namespace hicmd::hfl {
namespace {

constexpr char kFeatureMagic[] = "HICMDFT1";

template <class T>
Tensor<T> normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
const nn::CodeVars<T>& source_codes(const nn::GenerationVars<T>& r, int source) {
  switch (source) {
    case kOriginal1: return r.codes[0];
    case kTranslated12: return r.reencoded[1];
    case kOriginal2: return r.codes[1];
    case kTranslated21: return r.reencoded[0];
  }
  throw Error("unknown image source " + std::to_string(source));
}

}  // namespace

std::vector<SourcePair> alternate_sample(long iteration, SamplingMode mode) {
  if (iteration < 0) throw Error("alternate_sample: negative iteration");
  if (mode == SamplingMode::kOriginal) return {{kOriginal1, kOriginal1}, {kOriginal2, kOriginal2}};
  std::vector<SourcePair> out;
  const int shift = iteration % 2 == 0 ? 0 : static_cast<int>((iteration / 2) % 3) + 1;
  for (int j = 0; j < kSourceCount; ++j) out.push_back({j, (j + shift) % kSourceCount});
  return out;
}

void write_features(const std::string& path, const std::vector<FeatureVector>& features) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  io::BinaryWriter w(os);
  w.str(kFeatureMagic);
  w.u64(features.size());
  const std::size_t dim = features.empty() ? 0 : features.front().values.size();
  w.u64(dim);
  for (const auto& f : features) {
    if (f.values.size() != dim) throw Error("write_features: features differ in length");
    w.i32(f.identity);
    w.i32(f.modality);
    for (float v : f.values) w.pod(v);
  }
  if (!os) throw Error("write failed: " + path);
}

std::vector<FeatureVector> read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path);
  io::BinaryReader r(is);
  if (r.str() != kFeatureMagic) throw Error(path + " is not a feature dump");
  const auto count = r.u64();
  const auto dim = r.u64();
  if (count > (1u << 26) || dim > (1u << 16)) throw Error(path + ": implausible feature dump header");
  std::vector<FeatureVector> out(count);
  for (auto& f : out) {
    f.identity = r.i32();
    f.modality = r.i32();
    f.values.resize(dim);
    for (auto& v : f.values) v = r.pod<float>();
  }
  return out;
}

template <class T>
void init_hfl_params(ParamStore<T>& s, const RunConfig& c, std::mt19937_64& rng) {
  validate_config(c);
  if (c.identities <= 0) throw Error("init_hfl_params: identities must be set (got " + std::to_string(c.identities) + ")");
  const int e = c.embed_channels;
  s.add("hfl.embed.conv0.w", normal<T>({e, c.proto_channels, 3, 3}, std::sqrt(2.0 / (c.proto_channels * 9)), rng));
  s.add("hfl.embed.conv0.b", Tensor<T>({e}));
  s.add("hfl.embed.conv1.w", normal<T>({e, e, 4, 4}, std::sqrt(2.0 / (e * 16)), rng));
  s.add("hfl.embed.conv1.b", Tensor<T>({e}));
  const int fin = e * (c.proto_height() / 2) * (c.proto_width() / 2);
  s.add("hfl.embed.fc.w", normal<T>({c.embed_dim, fin}, std::sqrt(1.0 / fin), rng));
  s.add("hfl.embed.fc.b", Tensor<T>({c.embed_dim}));
  const int in = c.embed_dim + c.style_dim;
  s.add("hfl.fc.w", normal<T>({c.feature_dim, in}, std::sqrt(1.0 / in), rng));
  s.add("hfl.fc.b", Tensor<T>({c.feature_dim}));
  s.add("hfl.cls.w", normal<T>({c.identities, c.feature_dim}, std::sqrt(1.0 / c.feature_dim), rng));
  s.add("hfl.cls.b", Tensor<T>({c.identities}));
  s.add("hfl.alpha", Tensor<T>::scalar(static_cast<T>(c.alpha_init)));
}

template <class T>
double clamp_alpha(ParamStore<T>& s) {
  auto& a = s.at("hfl.alpha").value[0];
  a = std::clamp(a, T(0), T(1));
  return static_cast<double>(a);
}

template <class T>
Var<T> combine(Var<T> pd, Var<T> style, Var<T> alpha) {
  const T a = alpha.value().item();
  if (!(a >= T(0) && a <= T(1))) throw Error("combine: alpha " + std::to_string(static_cast<double>(a)) + " outside [0, 1]");
  return ops::weighted_concat(pd, style, alpha);
}

template <class T>
Hfl<T>::Hfl(const RunConfig& cfg, ParamStore<T>& params) : cfg_(cfg), params_(&params) {
  validate_config(cfg_);
}

template <class T>
Var<T> Hfl<T>::p(Graph<T>& g, const std::string& name, bool trainable) const {
  return g.param(params_->at(name), trainable);
}

template <class T>
Var<T> Hfl<T>::embed_prototype(Graph<T>& g, Var<T> x, bool trainable) const {
  const Shape want{x.shape()[0], cfg_.proto_channels, cfg_.proto_height(), cfg_.proto_width()};
  if (x.shape() != want) throw Error("embed_prototype: got " + shape_str(x.shape()) + ", expected " + shape_str(want));
  Var<T> h = ops::relu(ops::conv2d(x, p(g, "hfl.embed.conv0.w", trainable), p(g, "hfl.embed.conv0.b", trainable), 1, 1));
  h = ops::relu(ops::conv2d(h, p(g, "hfl.embed.conv1.w", trainable), p(g, "hfl.embed.conv1.b", trainable), 2, 1));
  // Spatial layout is kept: pooled activations barely differ between people.
  return ops::linear(ops::flatten(h), p(g, "hfl.embed.fc.w", trainable), p(g, "hfl.embed.fc.b", trainable));
}

template <class T>
Var<T> Hfl<T>::alpha(Graph<T>& g, bool trainable) const {
  switch (cfg_.feature) {
    case FeatureMode::kStyleOnly: return g.constant(Tensor<T>::scalar(T(0)));
    case FeatureMode::kPrototypeOnly: return g.constant(Tensor<T>::scalar(T(1)));
    case FeatureMode::kBoth: break;
  }
  return p(g, "hfl.alpha", trainable);
}

template <class T>
HeadOut<T> Hfl<T>::head(Graph<T>& g, Var<T> combined, bool trainable) const {
  const int in = cfg_.embed_dim + cfg_.style_dim;
  if (combined.shape().size() != 2 || combined.shape()[1] != in) {
    throw Error("head: expected (N, " + std::to_string(in) + "), got " + shape_str(combined.shape()));
  }
  HeadOut<T> out;
  out.feature = ops::linear(combined, p(g, "hfl.fc.w", trainable), p(g, "hfl.fc.b", trainable));
  out.logits = ops::linear(out.feature, p(g, "hfl.cls.w", trainable), p(g, "hfl.cls.b", trainable));
  return out;
}

template <class T>
HeadOut<T> Hfl<T>::forward(Graph<T>& g, Var<T> prototype, Var<T> style, bool trainable) const {
  return head(g, combine(embed_prototype(g, prototype, trainable), style, alpha(g, trainable)), trainable);
}

template <class T>
SampledFeatures<T> Hfl<T>::sample_features(Graph<T>& g, const nn::GenerationVars<T>& rec,
                                           const std::vector<int>& identities, long iteration, bool trainable) const {
  const int n = rec.real[0].shape()[0];
  if (static_cast<int>(identities.size()) != n) throw Error("sample_features: one identity per record row required");
  SampledFeatures<T> out;
  out.pairs = alternate_sample(iteration, cfg_.sampling);

  // Embed each needed prototype source once.
  std::vector<int> needed;
  for (const auto& pr : out.pairs) needed.push_back(pr.prototype);
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  std::vector<Var<T>> protos;
  for (int s : needed) protos.push_back(source_codes(rec, s).prototype);
  Var<T> embedded = embed_prototype(g, ops::concat_rows(protos), trainable);

  std::vector<int> pd_rows;
  std::vector<Var<T>> styles;
  for (const auto& pr : out.pairs) {
    const int slot = static_cast<int>(std::find(needed.begin(), needed.end(), pr.prototype) - needed.begin());
    for (int k = 0; k < n; ++k) {
      pd_rows.push_back(slot * n + k);
      out.labels.push_back(identities[k]);
    }
    styles.push_back(source_codes(rec, pr.style).attribute.style);
  }
  Var<T> pd = ops::gather_rows(embedded, pd_rows);
  out.head = head(g, combine(pd, ops::concat_rows(styles), alpha(g, trainable)), trainable);
  return out;
}

template <class T>
Var<T> ce_loss(Var<T> logits, const std::vector<int>& labels) {
  const int classes = logits.shape().at(1);
  std::vector<int> zero_based(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > classes) {
      throw Error("ce_loss: label " + std::to_string(labels[i]) + " outside 1.." + std::to_string(classes));
    }
    zero_based[i] = labels[i] - 1;
  }
  return ops::cross_entropy(logits, zero_based);
}

template <class T>
Var<T> triplet_loss(Var<T> features, const std::vector<int>& labels, double margin) {
  if (!(margin > 0)) throw Error("triplet_loss: margin must be > 0");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw Error("triplet_loss: batch contains a single identity, no negative exists");
  }
  return ops::triplet_batch_hard(features, labels, static_cast<T>(margin));
}

#define HICMD_INSTANTIATE_HFL(T)                                                          \
  template void init_hfl_params(ParamStore<T>&, const RunConfig&, std::mt19937_64&);       \
  template double clamp_alpha(ParamStore<T>&);                                             \
  template Var<T> combine(Var<T>, Var<T>, Var<T>);                                         \
  template class Hfl<T>;                                                                   \
  template Var<T> ce_loss(Var<T>, const std::vector<int>&);                                \
  template Var<T> triplet_loss(Var<T>, const std::vector<int>&, double);

HICMD_INSTANTIATE_HFL(float)
HICMD_INSTANTIATE_HFL(double)

}  // namespace hicmd::hfl
