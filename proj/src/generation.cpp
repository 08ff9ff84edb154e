#include "hicmd/generation.hpp"

#include <algorithm>

#include "hicmd/ops.hpp"

namespace hicmd::gen {
namespace {

constexpr std::size_t kChunk = 32;

std::vector<float> row_of(const Tensor<float>& t, std::size_t r) {
  const std::size_t d = t.row_size();
  return std::vector<float>(t.data() + r * d, t.data() + (r + 1) * d);
}

void paste(image::Rgb8& dst, const ImageTensor& img, int top, int left) {
  const image::Rgb8 src = image::to_bytes(img.pixels());
  for (int y = 0; y < src.height; ++y) {
    std::copy_n(src.data.data() + static_cast<std::size_t>(y) * src.width * 3, src.width * 3,
                dst.data.data() + (static_cast<std::size_t>(top + y) * dst.width + left) * 3);
  }
}

}  // namespace

std::vector<CodeBundle> encode_images(train::TrainState& s, const std::vector<ImageTensor>& images) {
  const nn::IdPig<float> net(s.cfg, s.gen, s.dis);
  std::vector<CodeBundle> out(images.size());
  for (int modality : {kVisible, kInfrared}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (images[i].modality() == modality) idx.push_back(i);
    }
    for (std::size_t c0 = 0; c0 < idx.size(); c0 += kChunk) {
      const std::size_t c1 = std::min(idx.size(), c0 + kChunk);
      std::vector<ImageTensor> chunk;
      for (std::size_t k = c0; k < c1; ++k) chunk.push_back(images[idx[k]]);
      Graph<float> g;
      const auto codes = net.encode(g, g.constant(nn::stack_images<float>(chunk)), modality, false);
      const auto& p = codes.prototype.value();
      const int ch = p.dim(1), h = p.dim(2), w = p.dim(3);
      for (std::size_t k = c0; k < c1; ++k) {
        CodeBundle& b = out[idx[k]];
        const std::size_t r = k - c0;
        b.prototype = Tensor<float>({h, w, ch});
        const float* src = p.data() + r * p.row_size();
        for (int c = 0; c < ch; ++c)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) b.prototype[(static_cast<std::size_t>(y) * w + x) * ch + c] = src[(c * h + y) * w + x];
        b.style = row_of(codes.attribute.style.value(), r);
        b.illumination = row_of(codes.attribute.illumination.value(), r);
        b.pose = row_of(codes.attribute.pose.value(), r);
      }
    }
  }
  return out;
}

std::vector<ImageTensor> decode_bundles(train::TrainState& s, const std::vector<CodeBundle>& bundles,
                                        const std::vector<int>& modalities, const std::vector<int>& identities) {
  if (modalities.size() != bundles.size() || identities.size() != bundles.size()) {
    throw Error("decode_bundles: one modality and identity label per bundle required");
  }
  const RunConfig& cfg = s.cfg;
  const nn::IdPig<float> net(cfg, s.gen, s.dis);
  const int ch = cfg.proto_channels, h = cfg.proto_height(), w = cfg.proto_width();
  std::vector<ImageTensor> out;
  out.reserve(bundles.size());
  for (std::size_t c0 = 0; c0 < bundles.size(); c0 += kChunk) {
    const int n = static_cast<int>(std::min(bundles.size(), c0 + kChunk) - c0);
    Tensor<float> p({n, ch, h, w});
    Tensor<float> st({n, cfg.style_dim}), il({n, cfg.illum_dim}), po({n, cfg.pose_dim});
    for (int r = 0; r < n; ++r) {
      const CodeBundle& b = bundles[c0 + r];
      if (b.prototype.shape() != Shape{h, w, ch} || static_cast<int>(b.style.size()) != cfg.style_dim ||
          static_cast<int>(b.illumination.size()) != cfg.illum_dim || static_cast<int>(b.pose.size()) != cfg.pose_dim) {
        throw Error("decode_bundles: bundle dimensions do not match the configuration");
      }
      float* dst = p.data() + static_cast<std::size_t>(r) * p.row_size();
      for (int c = 0; c < ch; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) dst[(c * h + y) * w + x] = b.prototype[(static_cast<std::size_t>(y) * w + x) * ch + c];
      std::copy(b.style.begin(), b.style.end(), st.data() + r * cfg.style_dim);
      std::copy(b.illumination.begin(), b.illumination.end(), il.data() + r * cfg.illum_dim);
      std::copy(b.pose.begin(), b.pose.end(), po.data() + r * cfg.pose_dim);
    }
    Graph<float> g;
    const auto& y = net.decode(g, g.constant(p), g.constant(st), g.constant(il), g.constant(po), false).value();
    for (int r = 0; r < n; ++r) {
      out.push_back(ImageTensor::from_chw(y.data() + static_cast<std::size_t>(r) * y.row_size(), cfg.height,
                                          cfg.width, modalities[c0 + r], identities[c0 + r]));
    }
  }
  return out;
}

std::vector<float> interpolate_excluded(const CodeBundle& a, const CodeBundle& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error("interpolate_excluded: t must lie in [0, 1]");
  const auto ea = a.id_excluded(), eb = b.id_excluded();
  if (ea.size() != eb.size() || a.illumination.size() != b.illumination.size()) {
    throw Error("interpolate_excluded: bundles have different code dimensions");
  }
  std::vector<float> out(ea.size());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    out[i] = t == 0.0 ? ea[i] : t == 1.0 ? eb[i] : static_cast<float>((1.0 - t) * ea[i] + t * eb[i]);
  }
  return out;
}

SwapMode parse_swap_mode(const std::string& name) {
  if (name == "swap-excluded") return SwapMode::kExcluded;
  if (name == "swap-discriminative") return SwapMode::kDiscriminative;
  if (name == "swap-illum") return SwapMode::kIllumination;
  throw Error("unknown generation mode '" + name + "' (swap-excluded, swap-discriminative, swap-illum)");
}

const char* swap_mode_name(SwapMode mode) {
  switch (mode) {
    case SwapMode::kExcluded: return "swap-excluded";
    case SwapMode::kDiscriminative: return "swap-discriminative";
    case SwapMode::kIllumination: return "swap-illum";
  }
  return "?";
}

CodeBundle swap_codes(const CodeBundle& input, const CodeBundle& reference, SwapMode mode) {
  CodeBundle out = input;
  switch (mode) {
    case SwapMode::kExcluded:
      out.illumination = reference.illumination;
      out.pose = reference.pose;
      break;
    case SwapMode::kDiscriminative:
      out.prototype = reference.prototype;
      out.style = reference.style;
      break;
    case SwapMode::kIllumination:
      out.illumination = reference.illumination;
      break;
  }
  return out;
}

Grid generate_grid(train::TrainState& s, const std::vector<ImageTensor>& inputs,
                   const std::vector<ImageTensor>& references, SwapMode mode) {
  if (inputs.empty() || references.empty()) throw Error("generate_grid: need at least one input and one reference");
  const auto in_codes = encode_images(s, inputs);
  const auto ref_codes = encode_images(s, references);
  std::vector<CodeBundle> bundles;
  std::vector<int> modalities, identities;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < references.size(); ++j) {
      bundles.push_back(swap_codes(in_codes[i], ref_codes[j], mode));
      // The ID-excluded side decides how the cell looks; the other side who.
      const bool input_id = mode != SwapMode::kDiscriminative;
      identities.push_back(input_id ? inputs[i].identity() : references[j].identity());
      modalities.push_back(mode == SwapMode::kDiscriminative ? inputs[i].modality() : references[j].modality());
    }
  }
  const auto decoded = decode_bundles(s, bundles, modalities, identities);
  Grid grid{inputs, references, {}};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    grid.cells.emplace_back(decoded.begin() + i * references.size(), decoded.begin() + (i + 1) * references.size());
  }
  return grid;
}

image::Rgb8 compose_grid(const Grid& grid) {
  const int h = grid.inputs.front().height(), w = grid.inputs.front().width();
  image::Rgb8 out;
  out.height = h * static_cast<int>(grid.inputs.size() + 1);
  out.width = w * static_cast<int>(grid.references.size() + 1);
  out.data.assign(static_cast<std::size_t>(out.height) * out.width * 3, 0);
  for (std::size_t j = 0; j < grid.references.size(); ++j) paste(out, grid.references[j], 0, w * static_cast<int>(j + 1));
  for (std::size_t i = 0; i < grid.inputs.size(); ++i) {
    paste(out, grid.inputs[i], h * static_cast<int>(i + 1), 0);
    for (std::size_t j = 0; j < grid.cells[i].size(); ++j) {
      paste(out, grid.cells[i][j], h * static_cast<int>(i + 1), w * static_cast<int>(j + 1));
    }
  }
  return out;
}

std::vector<ImageTensor> interpolate_strip(train::TrainState& s, const ImageTensor& a, const ImageTensor& b, int steps) {
  if (steps < 2) throw Error("interpolate: steps must be at least 2");
  const auto codes = encode_images(s, {a, b});
  std::vector<CodeBundle> bundles;
  for (int k = 0; k < steps; ++k) {
    const double t = k == steps - 1 ? 1.0 : static_cast<double>(k) / (steps - 1);
    const auto ex = interpolate_excluded(codes[0], codes[1], t);
    CodeBundle c = codes[0];
    const std::size_t dc = c.illumination.size();
    c.illumination.assign(ex.begin(), ex.begin() + static_cast<std::ptrdiff_t>(dc));
    c.pose.assign(ex.begin() + static_cast<std::ptrdiff_t>(dc), ex.end());
    bundles.push_back(std::move(c));
  }
  return decode_bundles(s, bundles, std::vector<int>(steps, b.modality()), std::vector<int>(steps, a.identity()));
}

image::Rgb8 compose_strip(const std::vector<ImageTensor>& images) {
  if (images.empty()) throw Error("compose_strip: no images");
  const int h = images.front().height(), w = images.front().width();
  image::Rgb8 out;
  out.height = h;
  out.width = w * static_cast<int>(images.size());
  out.data.assign(static_cast<std::size_t>(out.height) * out.width * 3, 0);
  for (std::size_t k = 0; k < images.size(); ++k) paste(out, images[k], 0, w * static_cast<int>(k));
  return out;
}

}  // namespace hicmd::gen
