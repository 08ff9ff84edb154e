#include "hicmd/core_types.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "hicmd/io/binary.hpp"

namespace hicmd {

ImageTensor::ImageTensor(Tensor<float> pixels, int modality, int identity)
    : pixels_(std::move(pixels)), modality_(modality), identity_(identity) {
  if (pixels_.rank() != 3 || pixels_.dim(2) != 3) {
    throw Error("image must have shape (H, W, 3), got " + shape_str(pixels_.shape()));
  }
  if (modality_ != kVisible && modality_ != kInfrared) {
    throw Error("modality must be 1 (visible) or 2 (infrared), got " + std::to_string(modality_));
  }
  if (identity_ < 1) throw Error("identity labels start at 1, got " + std::to_string(identity_));
  for (float v : pixels_.values()) {
    if (!(v >= -1.0f && v <= 1.0f)) throw Error("pixel value outside [-1, 1]");
  }
}

std::vector<float> ImageTensor::chw() const {
  const int h = height(), w = width();
  std::vector<float> out(pixels_.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out[(c * h + y) * w + x] = pixels_[(y * w + x) * 3 + c];
  return out;
}

ImageTensor ImageTensor::from_chw(const float* chw, int height, int width, int modality, int identity) {
  Tensor<float> px({height, width, 3});
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) px[(y * width + x) * 3 + c] = std::clamp(chw[(c * height + y) * width + x], -1.0f, 1.0f);
  return ImageTensor(std::move(px), modality, identity);
}

std::vector<float> CodeBundle::id_excluded() const {
  std::vector<float> out(illumination);
  out.insert(out.end(), pose.begin(), pose.end());
  return out;
}

std::vector<float> CodeBundle::attribute() const {
  std::vector<float> out(style);
  out.insert(out.end(), illumination.begin(), illumination.end());
  out.insert(out.end(), pose.begin(), pose.end());
  return out;
}

void swap_id_excluded(CodeBundle& a, CodeBundle& b) {
  if (a.illumination.size() != b.illumination.size() || a.pose.size() != b.pose.size()) {
    throw Error("cannot swap ID-excluded codes of different dimensions");
  }
  std::swap(a.illumination, b.illumination);
  std::swap(a.pose, b.pose);
}

PairBatch::PairBatch(std::vector<ImageTensor> visible, std::vector<ImageTensor> infrared)
    : visible_(std::move(visible)), infrared_(std::move(infrared)) {
  if (visible_.size() != infrared_.size()) throw Error("pair batch needs one infrared image per visible image");
  if (visible_.empty()) throw Error("pair batch is empty");
  std::set<int> seen;
  for (std::size_t k = 0; k < visible_.size(); ++k) {
    const auto& v = visible_[k];
    const auto& r = infrared_[k];
    if (v.modality() != kVisible || r.modality() != kInfrared) throw Error("pair batch modality order is (visible, infrared)");
    if (v.identity() != r.identity()) {
      throw Error("pair " + std::to_string(k) + " mixes identities " + std::to_string(v.identity()) + " and " +
                  std::to_string(r.identity()));
    }
    if (v.pixels().shape() != visible_[0].pixels().shape() || r.pixels().shape() != visible_[0].pixels().shape()) {
      throw Error("pair batch images must share one resolution");
    }
    if (!seen.insert(v.identity()).second) throw Error("duplicate identity " + std::to_string(v.identity()) + " in pair batch");
    identities_.push_back(v.identity());
  }
}

namespace {

[[noreturn]] void reject(const std::string& field, const std::string& constraint) {
  throw Error("invalid config: " + field + " " + constraint);
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class V>
V parse_number(const std::string& key, const std::string& text) {
  V v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw Error("config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class V>
Field numeric(std::string key, V RunConfig::*member) {
  return Field{key,
               [member](const RunConfig& c) {
                 if constexpr (std::is_floating_point_v<V>) {
                   return fmt_double(c.*member);
                 } else {
                   return std::to_string(c.*member);
                 }
               },
               [key, member](RunConfig& c, const std::string& v) { c.*member = parse_number<V>(key, v); }};
}

template <class E>
Field enumerated(std::string key, E RunConfig::*member, std::vector<std::pair<E, std::string>> names) {
  return Field{key,
               [member, names](const RunConfig& c) {
                 for (const auto& [e, n] : names)
                   if (e == c.*member) return n;
                 return std::string("?");
               },
               [key, member, names](RunConfig& c, const std::string& v) {
                 for (const auto& [e, n] : names) {
                   if (n == v) {
                     c.*member = e;
                     return;
                   }
                 }
                 std::string allowed;
                 for (const auto& [e, n] : names) allowed += (allowed.empty() ? "" : "|") + n;
                 throw Error("config key '" + key + "': '" + v + "' is not one of " + allowed);
               }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      numeric("height", &RunConfig::height),
      numeric("width", &RunConfig::width),
      numeric("style_dim", &RunConfig::style_dim),
      numeric("illum_dim", &RunConfig::illum_dim),
      numeric("pose_dim", &RunConfig::pose_dim),
      numeric("proto_channels", &RunConfig::proto_channels),
      numeric("base_channels", &RunConfig::base_channels),
      numeric("downsamples", &RunConfig::downsamples),
      numeric("res_blocks", &RunConfig::res_blocks),
      numeric("mlp_dim", &RunConfig::mlp_dim),
      numeric("dis_channels", &RunConfig::dis_channels),
      numeric("embed_channels", &RunConfig::embed_channels),
      numeric("embed_dim", &RunConfig::embed_dim),
      numeric("feature_dim", &RunConfig::feature_dim),
      numeric("identities", &RunConfig::identities),
      numeric("lambda_cross", &RunConfig::lambda_cross),
      numeric("lambda_same", &RunConfig::lambda_same),
      numeric("lambda_cycle", &RunConfig::lambda_cycle),
      numeric("lambda_code", &RunConfig::lambda_code),
      numeric("lambda_kl", &RunConfig::lambda_kl),
      numeric("lambda_adv", &RunConfig::lambda_adv),
      numeric("lambda_ce", &RunConfig::lambda_ce),
      numeric("lambda_trip", &RunConfig::lambda_trip),
      numeric("margin", &RunConfig::margin),
      numeric("lr_gen", &RunConfig::lr_gen),
      numeric("beta1", &RunConfig::beta1),
      numeric("beta2", &RunConfig::beta2),
      numeric("lr_hfl", &RunConfig::lr_hfl),
      numeric("momentum", &RunConfig::momentum),
      numeric("grad_clip", &RunConfig::grad_clip),
      numeric("alpha_init", &RunConfig::alpha_init),
      numeric("iterations", &RunConfig::iterations),
      numeric("batch_pairs", &RunConfig::batch_pairs),
      numeric("checkpoint_every", &RunConfig::checkpoint_every),
      numeric("seed", &RunConfig::seed),
      Field{"data", [](const RunConfig& c) { return c.data; }, [](RunConfig& c, const std::string& v) { c.data = v; }},
      enumerated("adversarial", &RunConfig::adversarial,
                 {{AdversarialForm::kNonSaturating, "nonsaturating"}, {AdversarialForm::kMinimax, "minimax"}}),
      enumerated("sampling", &RunConfig::sampling,
                 {{SamplingMode::kAlternate, "alternate"}, {SamplingMode::kOriginal, "original"}}),
      enumerated("feature", &RunConfig::feature,
                 {{FeatureMode::kBoth, "ap"}, {FeatureMode::kStyleOnly, "a"}, {FeatureMode::kPrototypeOnly, "p"}}),
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const RunConfig& validate_config(const RunConfig& c) {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) reject(name, "must be > 0, got " + fmt_double(v));
  };
  auto nonneg = [](const char* name, double v) {
    if (!(v >= 0)) reject(name, "must be >= 0 (negative weight), got " + fmt_double(v));
  };
  positive("height", c.height);
  positive("width", c.width);
  positive("style_dim", c.style_dim);
  positive("illum_dim", c.illum_dim);
  positive("pose_dim", c.pose_dim);
  positive("proto_channels", c.proto_channels);
  positive("base_channels", c.base_channels);
  if (c.downsamples < 1 || c.downsamples > 5) reject("downsamples", "must be in 1..5");
  if (c.res_blocks < 0) reject("res_blocks", "must be >= 0");
  const int step = 1 << c.downsamples;
  if (c.height % step || c.width % step) {
    reject("height/width", "must be divisible by 2^downsamples = " + std::to_string(step));
  }
  if (c.proto_height() % 2 || c.proto_width() % 2) {
    reject("height/width", "must be divisible by 2^(downsamples + 1) = " + std::to_string(2 * step));
  }
  positive("mlp_dim", c.mlp_dim);
  positive("dis_channels", c.dis_channels);
  positive("embed_channels", c.embed_channels);
  positive("embed_dim", c.embed_dim);
  positive("feature_dim", c.feature_dim);
  if (c.identities < 0) reject("identities", "must be >= 0");
  nonneg("lambda_cross", c.lambda_cross);
  nonneg("lambda_same", c.lambda_same);
  nonneg("lambda_cycle", c.lambda_cycle);
  nonneg("lambda_code", c.lambda_code);
  nonneg("lambda_kl", c.lambda_kl);
  nonneg("lambda_adv", c.lambda_adv);
  nonneg("lambda_ce", c.lambda_ce);
  nonneg("lambda_trip", c.lambda_trip);
  positive("margin", c.margin);
  positive("lr_gen", c.lr_gen);
  if (!(c.beta1 >= 0 && c.beta1 < 1)) reject("beta1", "must be in [0, 1)");
  if (!(c.beta2 >= 0 && c.beta2 < 1)) reject("beta2", "must be in [0, 1)");
  positive("lr_hfl", c.lr_hfl);
  if (!(c.momentum >= 0 && c.momentum < 1)) reject("momentum", "must be in [0, 1)");
  nonneg("grad_clip", c.grad_clip);
  if (!(c.alpha_init >= 0 && c.alpha_init <= 1)) reject("alpha_init", "must be in [0, 1]");
  if (c.iterations < 0) reject("iterations", "must be >= 0");
  if (c.batch_pairs < 2) reject("batch_pairs", "must be >= 2 (triplet mining needs two identities)");
  if (c.checkpoint_every < 0) reject("checkpoint_every", "must be >= 0");
  return c;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields())
      if (f.key == key) field = &f;
    if (!field) throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    field->set(cfg, value);
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config file " + path);
  return parse_config(is);
}

void write_config(std::ostream& os, const RunConfig& cfg) {
  for (const auto& f : fields()) os << f.key << " = " << f.get(cfg) << '\n';
}

std::string config_to_string(const RunConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  return os.str();
}

void serialize(std::ostream& os, const ImageTensor& x) {
  io::BinaryWriter w(os);
  w.i32(x.modality());
  w.i32(x.identity());
  w.tensor(x.pixels());
}

ImageTensor deserialize_image(std::istream& is) {
  io::BinaryReader r(is);
  const int modality = r.i32();
  const int identity = r.i32();
  return ImageTensor(r.tensor<float>(), modality, identity);
}

void serialize(std::ostream& os, const CodeBundle& b) {
  io::BinaryWriter w(os);
  w.tensor(b.prototype);
  w.vec(b.style);
  w.vec(b.illumination);
  w.vec(b.pose);
}

CodeBundle deserialize_bundle(std::istream& is) {
  io::BinaryReader r(is);
  CodeBundle b;
  b.prototype = r.tensor<float>();
  b.style = r.vec<float>();
  b.illumination = r.vec<float>();
  b.pose = r.vec<float>();
  return b;
}

void serialize(std::ostream& os, const PairBatch& b) {
  io::BinaryWriter w(os);
  w.u64(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    serialize(os, b.visible()[k]);
    serialize(os, b.infrared()[k]);
  }
}

PairBatch deserialize_batch(std::istream& is) {
  io::BinaryReader r(is);
  const auto n = r.u64();
  if (n > (1u << 20)) throw Error("pair batch too large");
  std::vector<ImageTensor> vis, ir;
  for (std::uint64_t k = 0; k < n; ++k) {
    vis.push_back(deserialize_image(is));
    ir.push_back(deserialize_image(is));
  }
  return PairBatch(std::move(vis), std::move(ir));
}

void serialize(std::ostream& os, const RunConfig& cfg) { io::BinaryWriter(os).str(config_to_string(cfg)); }

RunConfig deserialize_config(std::istream& is) {
  std::istringstream text(io::BinaryReader(is).str());
  return parse_config(text);
}

}  // namespace hicmd
