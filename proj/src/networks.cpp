#include "hicmd/networks.hpp"

#include <cmath>
#include <numeric>

#include "hicmd/ops.hpp"

namespace hicmd::nn {
namespace {

constexpr double kNormEps = 1e-5;
constexpr double kDisSlope = 0.2;

template <class T>
Tensor<T> normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
void add_conv(ParamStore<T>& s, const std::string& name, int cin, int cout, int k, std::mt19937_64& rng) {
  s.add(name + ".w", normal<T>({cout, cin, k, k}, std::sqrt(2.0 / (cin * k * k)), rng));
  s.add(name + ".b", Tensor<T>({cout}));
}

template <class T>
void add_dense(ParamStore<T>& s, const std::string& name, int in, int out, double stddev, std::mt19937_64& rng) {
  s.add(name + ".w", stddev > 0 ? normal<T>({out, in}, stddev, rng) : Tensor<T>({out, in}));
  s.add(name + ".b", Tensor<T>({out}));
}

// Channel count after the i-th downsampling of the prototype encoder.
int proto_channels_after(const RunConfig& c, int i) {
  return i == c.downsamples - 1 ? c.proto_channels : c.base_channels << (i + 1);
}

// Output channels of the i-th upsampling stage of the decoder.
int decoder_channels(const RunConfig& c, int i) { return c.base_channels << (c.downsamples - 1 - i); }

std::string mod(const char* prefix, int modality) { return prefix + std::to_string(modality); }

void check_modality(int modality) {
  if (modality != kVisible && modality != kInfrared) throw Error("modality must be 1 or 2, got " + std::to_string(modality));
}

template <class T>
std::vector<int> row_range(int begin, int count) {
  std::vector<int> rows(count);
  std::iota(rows.begin(), rows.end(), begin);
  return rows;
}

}  // namespace

int modulation_width(const RunConfig& c) {
  int w = c.res_blocks * 2 * 2 * c.proto_channels;
  for (int i = 0; i < c.downsamples; ++i) w += 2 * decoder_channels(c, i);
  return w;
}

template <class T>
void init_generation_params(ParamStore<T>& gen, const RunConfig& c, std::mt19937_64& rng) {
  validate_config(c);
  for (int m : {kVisible, kInfrared}) {
    const std::string ep = mod("enc_p", m);
    add_conv(gen, ep + ".conv0", 3, c.base_channels, 3, rng);
    int ch = c.base_channels;
    for (int i = 0; i < c.downsamples; ++i) {
      const int out = proto_channels_after(c, i);
      add_conv(gen, ep + ".down" + std::to_string(i), ch, out, 4, rng);
      ch = out;
    }
    for (int r = 0; r < c.res_blocks; ++r) {
      add_conv(gen, ep + ".res" + std::to_string(r) + ".conv0", ch, ch, 3, rng);
      add_conv(gen, ep + ".res" + std::to_string(r) + ".conv1", ch, ch, 3, rng);
    }

    const std::string ea = mod("enc_a", m);
    add_conv(gen, ea + ".conv0", 3, c.base_channels, 3, rng);
    ch = c.base_channels;
    for (int i = 0; i < c.downsamples; ++i) {
      add_conv(gen, ea + ".down" + std::to_string(i), ch, ch * 2, 4, rng);
      ch *= 2;
    }
    add_dense(gen, ea + ".fc", ch, c.attribute_dim(), std::sqrt(1.0 / ch), rng);
  }

  add_dense(gen, "dec.mlp0", c.attribute_dim(), c.mlp_dim, std::sqrt(2.0 / c.attribute_dim()), rng);
  add_dense(gen, "dec.mlp1", c.mlp_dim, c.mlp_dim, std::sqrt(2.0 / c.mlp_dim), rng);
  // Small last layer: modulation starts close to the identity transform.
  add_dense(gen, "dec.mlp2", c.mlp_dim, modulation_width(c), 0.1 / std::sqrt(c.mlp_dim), rng);
  for (int r = 0; r < c.res_blocks; ++r) {
    add_conv(gen, "dec.res" + std::to_string(r) + ".conv0", c.proto_channels, c.proto_channels, 3, rng);
    add_conv(gen, "dec.res" + std::to_string(r) + ".conv1", c.proto_channels, c.proto_channels, 3, rng);
  }
  int ch = c.proto_channels;
  for (int i = 0; i < c.downsamples; ++i) {
    add_conv(gen, "dec.up" + std::to_string(i), ch, decoder_channels(c, i), 3, rng);
    ch = decoder_channels(c, i);
  }
  add_conv(gen, "dec.out", ch, 3, 3, rng);
}

template <class T>
void init_discriminator_params(ParamStore<T>& dis, const RunConfig& c, std::mt19937_64& rng) {
  validate_config(c);
  for (int m : {kVisible, kInfrared}) {
    const std::string d = mod("dis", m);
    add_conv(dis, d + ".conv0", 3, c.dis_channels, 4, rng);
    add_conv(dis, d + ".conv1", c.dis_channels, c.dis_channels * 2, 4, rng);
    add_conv(dis, d + ".conv2", c.dis_channels * 2, c.dis_channels * 4, 4, rng);
    add_dense(dis, d + ".fc", c.dis_channels * 4, 1, 0.0, rng);
  }
}

template <class T>
IdPig<T>::IdPig(const RunConfig& cfg, ParamStore<T>& gen, ParamStore<T>& dis) : cfg_(cfg), gen_(&gen), dis_(&dis) {
  validate_config(cfg_);
}

template <class T>
Var<T> IdPig<T>::p(Graph<T>& g, const std::string& name, bool trainable) const {
  ParamStore<T>& store = name.rfind("dis", 0) == 0 ? *dis_ : *gen_;
  return g.param(store.at(name), trainable);
}

template <class T>
Var<T> IdPig<T>::conv(Graph<T>& g, const std::string& name, Var<T> x, int stride, int pad, bool trainable) const {
  return ops::conv2d(x, p(g, name + ".w", trainable), p(g, name + ".b", trainable), stride, pad);
}

template <class T>
Var<T> IdPig<T>::dense(Graph<T>& g, const std::string& name, Var<T> x, bool trainable) const {
  return ops::linear(x, p(g, name + ".w", trainable), p(g, name + ".b", trainable));
}

template <class T>
Var<T> IdPig<T>::encode_prototype(Graph<T>& g, Var<T> x, int modality, bool trainable) const {
  check_modality(modality);
  if (x.shape() != Shape{x.shape()[0], 3, cfg_.height, cfg_.width}) {
    throw Error("encode_prototype: expected (N, 3, " + std::to_string(cfg_.height) + ", " + std::to_string(cfg_.width) +
                "), got " + shape_str(x.shape()));
  }
  const std::string ep = mod("enc_p", modality);
  const T eps = static_cast<T>(kNormEps);
  Var<T> h = ops::relu(ops::instance_norm(conv(g, ep + ".conv0", x, 1, 1, trainable), eps));
  for (int i = 0; i < cfg_.downsamples; ++i) {
    h = ops::relu(ops::instance_norm(conv(g, ep + ".down" + std::to_string(i), h, 2, 1, trainable), eps));
  }
  for (int r = 0; r < cfg_.res_blocks; ++r) {
    const std::string rb = ep + ".res" + std::to_string(r);
    Var<T> y = ops::relu(ops::instance_norm(conv(g, rb + ".conv0", h, 1, 1, trainable), eps));
    y = ops::instance_norm(conv(g, rb + ".conv1", y, 1, 1, trainable), eps);
    h = ops::add(h, y);
  }
  return h;
}

template <class T>
AttributeVars<T> IdPig<T>::encode_attribute(Graph<T>& g, Var<T> x, int modality, bool trainable) const {
  check_modality(modality);
  if (x.shape() != Shape{x.shape()[0], 3, cfg_.height, cfg_.width}) {
    throw Error("encode_attribute: unexpected input shape " + shape_str(x.shape()));
  }
  const std::string ea = mod("enc_a", modality);
  Var<T> h = ops::relu(conv(g, ea + ".conv0", x, 1, 1, trainable));
  for (int i = 0; i < cfg_.downsamples; ++i) h = ops::relu(conv(g, ea + ".down" + std::to_string(i), h, 2, 1, trainable));
  AttributeVars<T> a;
  a.raw = dense(g, ea + ".fc", ops::global_avg_pool(h), trainable);
  const int s = cfg_.style_dim, c = cfg_.illum_dim, q = cfg_.pose_dim;
  a.style = ops::slice_cols(a.raw, 0, s);
  a.illumination = ops::slice_cols(a.raw, s, s + c);
  a.pose = ops::slice_cols(a.raw, s + c, s + c + q);
  a.excluded = ops::slice_cols(a.raw, s, s + c + q);
  return a;
}

template <class T>
CodeVars<T> IdPig<T>::encode(Graph<T>& g, Var<T> x, int modality, bool trainable) const {
  return {encode_prototype(g, x, modality, trainable), encode_attribute(g, x, modality, trainable)};
}

template <class T>
Var<T> IdPig<T>::decode(Graph<T>& g, Var<T> prototype, Var<T> style, Var<T> illumination, Var<T> pose,
                        bool trainable) const {
  const int n = prototype.shape()[0];
  const Shape want_p{n, cfg_.proto_channels, cfg_.proto_height(), cfg_.proto_width()};
  if (prototype.shape() != want_p) {
    throw Error("decode: prototype " + shape_str(prototype.shape()) + ", expected " + shape_str(want_p));
  }
  if (style.shape() != Shape{n, cfg_.style_dim} || illumination.shape() != Shape{n, cfg_.illum_dim} ||
      pose.shape() != Shape{n, cfg_.pose_dim}) {
    throw Error("decode: attribute code dimensions do not match the configuration");
  }
  const T eps = static_cast<T>(kNormEps);
  Var<T> a = ops::concat_cols<T>({style, illumination, pose});
  a = ops::relu(dense(g, "dec.mlp0", a, trainable));
  a = ops::relu(dense(g, "dec.mlp1", a, trainable));
  Var<T> m = dense(g, "dec.mlp2", a, trainable);

  int off = 0;
  auto modulated = [&](Var<T> x) {
    const int ch = x.shape()[1];
    Var<T> gamma = ops::slice_cols(m, off, off + ch);
    Var<T> beta = ops::slice_cols(m, off + ch, off + 2 * ch);
    off += 2 * ch;
    return ops::modulate(ops::instance_norm(x, eps), gamma, beta);
  };

  Var<T> h = prototype;
  for (int r = 0; r < cfg_.res_blocks; ++r) {
    const std::string rb = "dec.res" + std::to_string(r);
    Var<T> y = ops::relu(modulated(conv(g, rb + ".conv0", h, 1, 1, trainable)));
    y = modulated(conv(g, rb + ".conv1", y, 1, 1, trainable));
    h = ops::add(h, y);
  }
  for (int i = 0; i < cfg_.downsamples; ++i) {
    h = ops::upsample2x(h);
    h = ops::relu(modulated(conv(g, "dec.up" + std::to_string(i), h, 1, 1, trainable)));
  }
  return ops::tanh(conv(g, "dec.out", h, 1, 1, trainable));
}

template <class T>
Var<T> IdPig<T>::discriminate(Graph<T>& g, Var<T> x, int modality, bool trainable) const {
  check_modality(modality);
  if (x.shape() != Shape{x.shape()[0], 3, cfg_.height, cfg_.width}) {
    throw Error("discriminate: unexpected input shape " + shape_str(x.shape()));
  }
  const std::string d = mod("dis", modality);
  const T slope = static_cast<T>(kDisSlope);
  Var<T> h = ops::leaky_relu(conv(g, d + ".conv0", x, 2, 1, trainable), slope);
  h = ops::leaky_relu(conv(g, d + ".conv1", h, 2, 1, trainable), slope);
  h = ops::leaky_relu(conv(g, d + ".conv2", h, 2, 1, trainable), slope);
  return ops::sigmoid(dense(g, d + ".fc", ops::global_avg_pool(h), trainable));
}

template <class T>
GenerationVars<T> IdPig<T>::forward_generation(Graph<T>& g, Var<T> x1, Var<T> x2, bool trainable) const {
  if (x1.shape() != x2.shape()) throw Error("forward_generation: visible and infrared batches differ in shape");
  const int n = x1.shape()[0];
  GenerationVars<T> r;
  r.real = {x1, x2};
  r.codes[0] = encode(g, x1, kVisible, trainable);
  r.codes[1] = encode(g, x2, kInfrared, trainable);
  const auto& c1 = r.codes[0];
  const auto& c2 = r.codes[1];

  struct Plan {
    Var<T> p, s, c, q;
  };
  auto sources = [](const Plan& pl) { return DecodeSources{pl.p.id, pl.s.id, pl.c.id, pl.q.id}; };
  // One batched decoder pass for the six images built from source codes.
  const std::array<Plan, 6> plans = {{
      {c1.prototype, c1.attribute.style, c1.attribute.illumination, c1.attribute.pose},  // same[0]
      {c2.prototype, c2.attribute.style, c2.attribute.illumination, c2.attribute.pose},  // same[1]
      {c2.prototype, c2.attribute.style, c1.attribute.illumination, c1.attribute.pose},  // cross[0] = x_{2->1}
      {c1.prototype, c1.attribute.style, c2.attribute.illumination, c2.attribute.pose},  // cross[1] = x_{1->2}
      {c2.prototype, c2.attribute.style, c1.attribute.illumination, c2.attribute.pose},  // illum[0]
      {c1.prototype, c1.attribute.style, c2.attribute.illumination, c1.attribute.pose},  // illum[1]
  }};
  std::vector<Var<T>> ps, ss, cs, qs;
  for (const auto& pl : plans) {
    ps.push_back(pl.p);
    ss.push_back(pl.s);
    cs.push_back(pl.c);
    qs.push_back(pl.q);
  }
  Var<T> out = decode(g, ops::concat_rows(ps), ops::concat_rows(ss), ops::concat_rows(cs), ops::concat_rows(qs), trainable);
  auto part = [&](Var<T> all, int k) { return ops::gather_rows(all, row_range<T>(k * n, n)); };
  r.same = {part(out, 0), part(out, 1)};
  r.cross = {part(out, 2), part(out, 3)};
  r.illum = {part(out, 4), part(out, 5)};
  r.same_sources = {sources(plans[0]), sources(plans[1])};
  r.cross_sources = {sources(plans[2]), sources(plans[3])};
  r.illum_sources = {sources(plans[4]), sources(plans[5])};

  r.reencoded[0] = encode(g, r.cross[0], kVisible, trainable);
  r.reencoded[1] = encode(g, r.cross[1], kInfrared, trainable);
  const auto& re1 = r.reencoded[0];  // E_1(x_{2->1}): p^_2, s^_2, ex^_1
  const auto& re2 = r.reencoded[1];  // E_2(x_{1->2}): p^_1, s^_1, ex^_2
  const std::array<Plan, 2> cycles = {{
      {re2.prototype, re2.attribute.style, re1.attribute.illumination, re1.attribute.pose},
      {re1.prototype, re1.attribute.style, re2.attribute.illumination, re2.attribute.pose},
  }};
  Var<T> cyc = decode(g, ops::concat_rows<T>({cycles[0].p, cycles[1].p}), ops::concat_rows<T>({cycles[0].s, cycles[1].s}),
                      ops::concat_rows<T>({cycles[0].c, cycles[1].c}), ops::concat_rows<T>({cycles[0].q, cycles[1].q}),
                      trainable);
  r.cycle = {part(cyc, 0), part(cyc, 1)};
  r.cycle_sources = {sources(cycles[0]), sources(cycles[1])};
  return r;
}

template <class T>
Tensor<T> stack_images(const std::vector<ImageTensor>& images) {
  if (images.empty()) throw Error("stack_images: empty batch");
  const int h = images.front().height(), w = images.front().width();
  const std::size_t per = static_cast<std::size_t>(3) * h * w;
  Tensor<T> out({static_cast<int>(images.size()), 3, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height() != h || images[i].width() != w) throw Error("stack_images: images differ in size");
    const std::vector<float> chw = images[i].chw();
    std::copy(chw.begin(), chw.end(), out.data() + i * per);
  }
  return out;
}

template class IdPig<float>;
template class IdPig<double>;
template void init_generation_params(ParamStore<float>&, const RunConfig&, std::mt19937_64&);
template void init_generation_params(ParamStore<double>&, const RunConfig&, std::mt19937_64&);
template void init_discriminator_params(ParamStore<float>&, const RunConfig&, std::mt19937_64&);
template void init_discriminator_params(ParamStore<double>&, const RunConfig&, std::mt19937_64&);
template Tensor<float> stack_images(const std::vector<ImageTensor>&);
template Tensor<double> stack_images(const std::vector<ImageTensor>&);

}  // namespace hicmd::nn
