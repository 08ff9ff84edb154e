#include "hicmd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hicmd/image_io.hpp"

namespace fs = std::filesystem;

namespace hicmd::data {
namespace {

// Body templates in a 32 x 64 canonical frame.
struct Template {
  double head_r, torso_half_w, torso_top, torso_bottom, leg_len, leg_w, arm_w;
};
constexpr Template kTemplateTable[kTemplates] = {
    {4.0, 5.0, 15, 37, 22, 2.2, 1.6},
    {5.0, 6.5, 16, 36, 21, 2.8, 2.0},
    {3.5, 4.2, 15, 39, 21, 1.8, 1.4},
    {4.5, 5.8, 17, 35, 24, 2.5, 1.8},
    {3.8, 7.0, 16, 38, 20, 3.0, 2.2},
};

constexpr double kBackground = 0.15, kSkin = 0.55, kLegs = 0.3, kTorsoLight = 0.8, kTorsoDark = 0.35;

// rgb_c = gain_c * albedo + bias_c
struct Palette {
  std::array<double, 3> gain, bias;
};

Palette palette_of(int palette) {
  const Palette vis{{0.9, 0.6, 0.35}, {0.05, 0.2, 0.1}};
  if (palette == kVisiblePalette) return vis;
  if (palette != kInfraredPalette) throw Error("unknown palette id " + std::to_string(palette));
  // Luminance of the visible rendering, then a fixed tint.
  const std::array<double, 3> lum_w{0.299, 0.587, 0.114}, tint{1.0, 0.9, 1.1};
  double lg = 0, lb = 0;
  for (int c = 0; c < 3; ++c) {
    lg += lum_w[c] * vis.gain[c];
    lb += lum_w[c] * vis.bias[c];
  }
  Palette ir;
  for (int c = 0; c < 3; ++c) {
    ir.gain[c] = tint[c] * lg;
    ir.bias[c] = tint[c] * lb;
  }
  return ir;
}

double seg_dist(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  return std::hypot(px - ax - t * vx, py - ay - t * vy);
}

double torso_albedo(int stripes, double lx, double ly) {
  switch (stripes) {
    case 0: return kTorsoLight;
    case 1: return std::fmod(ly, 6.0) < 3.0 ? kTorsoLight : kTorsoDark;  // horizontal bands
    case 2: return std::fmod(lx + 40.0, 4.0) < 2.0 ? kTorsoLight : kTorsoDark;  // vertical bands
    case 3: return (static_cast<int>(std::floor(lx / 4.0)) + static_cast<int>(std::floor(ly / 4.0))) % 2 == 0
                       ? kTorsoLight
                       : kTorsoDark;  // checker
  }
  throw Error("unknown stripe pattern " + std::to_string(stripes));
}

double albedo_at(const Template& t, int stripes, double offset, double angle, double x, double y) {
  const double cx = 16.0 + offset;
  if (std::hypot(x - cx, y - 9.0) <= t.head_r) return kSkin;
  const bool in_torso = std::abs(x - cx) <= t.torso_half_w && y >= t.torso_top && y <= t.torso_bottom;
  if (in_torso) return torso_albedo(stripes, x - cx, y - t.torso_top);
  for (int side : {-1, 1}) {
    const double hip_x = cx + side * t.torso_half_w * 0.5;
    const double leg_a = 0.08 + angle;
    if (seg_dist(x, y, hip_x, t.torso_bottom, hip_x + side * t.leg_len * std::sin(leg_a),
                 t.torso_bottom + t.leg_len * std::cos(leg_a)) <= t.leg_w) {
      return kLegs;
    }
    const double sh_x = cx + side * (t.torso_half_w + t.arm_w * 0.5);
    const double arm_a = 0.15 + 1.2 * angle;
    const double arm_len = 17.0;
    if (seg_dist(x, y, sh_x, t.torso_top + 2.0, sh_x + side * arm_len * std::sin(arm_a),
                 t.torso_top + 2.0 + arm_len * std::cos(arm_a)) <= t.arm_w) {
      return kSkin;
    }
  }
  return kBackground;
}

std::string identity_folder(int identity) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", identity);
  return buf;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kQuery: return "query";
    case Split::kGallery: return "gallery";
  }
  return "?";
}

const char* modality_name(int modality) {
  if (modality == kVisible) return "visible";
  if (modality == kInfrared) return "infrared";
  throw Error("modality must be 1 or 2, got " + std::to_string(modality));
}

int parse_modality(const std::string& name) {
  if (name == "visible") return kVisible;
  if (name == "infrared") return kInfrared;
  throw Error("unknown modality folder '" + name + "' (expected visible or infrared)");
}

std::vector<int> DatasetIndex::select(Split split) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

std::vector<int> DatasetIndex::select(Split split, int modality) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    if (records[i].split == split && records[i].modality == modality) out.push_back(i);
  }
  return out;
}

DatasetIndex index_folder(const std::string& root) {
  if (!fs::is_directory(root)) throw Error("dataset root " + root + " is not a directory");
  DatasetIndex idx;
  idx.root = root;
  std::vector<Record> found;
  for (Split split : {Split::kTrain, Split::kQuery, Split::kGallery}) {
    const fs::path dir = fs::path(root) / split_name(split);
    if (!fs::exists(dir)) continue;
    std::vector<fs::path> ids;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_directory()) ids.push_back(e.path());
    }
    std::sort(ids.begin(), ids.end());
    for (const auto& id_dir : ids) {
      std::set<int> modalities;
      std::vector<fs::path> mod_dirs;
      for (const auto& e : fs::directory_iterator(id_dir)) {
        if (e.is_directory()) mod_dirs.push_back(e.path());
      }
      std::sort(mod_dirs.begin(), mod_dirs.end());
      for (const auto& md : mod_dirs) {
        const int modality = parse_modality(md.filename().string());
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(md)) {
          if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          found.push_back({fs::relative(f, root).generic_string(), id_dir.filename().string(), 0, modality, split});
          modalities.insert(modality);
        }
      }
      if (split == Split::kTrain && modalities.size() != 2) {
        throw Error("train identity " + id_dir.filename().string() + " lacks images in both modalities");
      }
    }
  }
  std::map<std::string, int> labels;
  for (const auto& r : found) {
    if (r.split == Split::kTrain) labels.emplace(r.identity_name, 0);
  }
  int next = 0;
  for (auto& [_, label] : labels) label = ++next;
  idx.identities = next;
  std::set<std::string> extra;
  for (const auto& r : found) {
    if (!labels.count(r.identity_name)) extra.insert(r.identity_name);
  }
  for (const auto& name : extra) labels[name] = ++next;
  idx.total_identities = next;
  for (auto& r : found) r.identity = labels.at(r.identity_name);
  idx.records = std::move(found);
  if (idx.records.empty()) throw Error("dataset root " + root + " contains no images");
  return idx;
}

std::array<int, 2> identity_factors(int identity) {
  if (identity < 1 || identity > kTemplates * kStripePatterns) {
    throw Error("identity " + std::to_string(identity) + " has no unique (template, stripes) combination; at most " +
                std::to_string(kTemplates * kStripePatterns) + " identities are supported");
  }
  return {(identity - 1) % kTemplates, (identity - 1) / kTemplates};
}

int test_pose_count(int poses) {
  if (poses < 2) throw Error("need at least 2 poses per identity (train and test)");
  return std::max(1, poses - static_cast<int>(std::lround(0.7 * poses)));
}

Tensor<float> render_albedo(int template_id, int stripes, double offset, double angle, int height, int width) {
  if (template_id < 0 || template_id >= kTemplates) throw Error("unknown template " + std::to_string(template_id));
  if (height <= 0 || width <= 0) throw Error("render_albedo: size must be positive");
  const Template& t = kTemplateTable[template_id];
  Tensor<float> out({height, width});
  const double sx = 32.0 / width, sy = 64.0 / height;
  // 2 x 2 supersampling per output pixel.
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
          acc += albedo_at(t, stripes, offset, angle, (x + 0.25 + 0.5 * i) * sx, (y + 0.25 + 0.5 * j) * sy);
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(acc / 4.0);
    }
  }
  return out;
}

Tensor<float> apply_palette(const Tensor<float>& albedo, int palette) {
  if (albedo.rank() != 2) throw Error("apply_palette: expected (H, W) albedo");
  const Palette p = palette_of(palette);
  Tensor<float> out({albedo.dim(0), albedo.dim(1), 3});
  for (std::size_t i = 0; i < albedo.size(); ++i) {
    for (int c = 0; c < 3; ++c) out[3 * i + c] = static_cast<float>(p.gain[c] * albedo[i] + p.bias[c]);
  }
  return out;
}

Tensor<float> invert_palette(const Tensor<float>& rgb, int palette) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) throw Error("invert_palette: expected (H, W, 3)");
  const Palette p = palette_of(palette);
  Tensor<float> out({rgb.dim(0), rgb.dim(1)});
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0;
    for (int c = 0; c < 3; ++c) acc += (rgb[3 * i + c] - p.bias[c]) / p.gain[c];
    out[i] = static_cast<float>(acc / 3.0);
  }
  return out;
}

void write_factors_csv(const std::string& path, const std::vector<Factors>& factors) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << "image_id,identity,modality,template,stripes,offset,angle,palette\n";
  char buf[64];
  for (const auto& f : factors) {
    os << f.image_id << ',' << f.identity << ',' << f.modality << ',' << f.template_id << ',' << f.stripes << ',';
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", f.offset, f.angle);
    os << buf << ',' << f.palette << '\n';
  }
}

std::vector<Factors> read_factors_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  std::string line;
  std::getline(is, line);
  if (line != "image_id,identity,modality,template,stripes,offset,angle,palette") {
    throw Error(path + ": unexpected factor table header");
  }
  std::vector<Factors> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw Error(path + ": malformed row '" + line + "'");
    Factors f;
    f.image_id = cells[0];
    f.identity = std::stoi(cells[1]);
    f.modality = std::stoi(cells[2]);
    f.template_id = std::stoi(cells[3]);
    f.stripes = std::stoi(cells[4]);
    f.offset = std::stod(cells[5]);
    f.angle = std::stod(cells[6]);
    f.palette = std::stoi(cells[7]);
    out.push_back(f);
  }
  return out;
}

Synthetic make_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const std::string& root) {
  if (spec.identities < 1) throw Error("synthetic dataset needs at least one identity");
  identity_factors(spec.identities);  // rejects factor collisions
  const int n_test = test_pose_count(spec.poses);
  const int n_train = spec.poses - n_test;
  if (spec.height <= 0 || spec.width <= 0) throw Error("synthetic image size must be positive");
  if (spec.noise < 0) throw Error("noise level must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset_dist(-4.0, 4.0), angle_dist(0.0, 0.35);
  std::vector<std::array<double, 2>> pose(static_cast<std::size_t>(spec.identities) * spec.poses);
  for (auto& p : pose) {
    p[0] = offset_dist(rng);
    p[1] = angle_dist(rng);
  }
  std::normal_distribution<double> noise(0.0, 1.0);

  Synthetic out;
  for (int id = 1; id <= spec.identities; ++id) {
    const auto [tmpl, stripes] = identity_factors(id);
    for (int k = 0; k < spec.poses; ++k) {
      const auto& pz = pose[static_cast<std::size_t>(id - 1) * spec.poses + k];
      const Tensor<float> albedo = render_albedo(tmpl, stripes, pz[0], pz[1], spec.height, spec.width);
      for (int modality : {kVisible, kInfrared}) {
        const bool train = k < n_train;
        const Split split = train ? Split::kTrain : (modality == kInfrared ? Split::kQuery : Split::kGallery);
        const int palette = modality == kVisible ? kVisiblePalette : kInfraredPalette;
        Tensor<float> rgb = apply_palette(albedo, palette);
        for (auto& v : rgb.values()) {
          double px = v;
          if (spec.noise > 0) px += spec.noise * noise(rng);
          v = static_cast<float>(std::clamp(px, 0.0, 1.0) * 2.0 - 1.0);
        }
        char name[32];
        std::snprintf(name, sizeof name, "pose%02d.ppm", k);
        const fs::path rel = fs::path(split_name(split)) / identity_folder(id) / modality_name(modality) / name;
        fs::create_directories((fs::path(root) / rel).parent_path());
        image::write_ppm((fs::path(root) / rel).string(), image::to_bytes(rgb));
        out.factors.push_back({rel.generic_string(), id, modality, tmpl, stripes, pz[0], pz[1], palette});
      }
    }
  }
  write_factors_csv((fs::path(root) / "factors.csv").string(), out.factors);
  out.index = index_folder(root);
  return out;
}

std::vector<int> Dataset::train_identities() const {
  std::vector<int> ids;
  for (const auto& [id, _] : train_by_identity) ids.push_back(id);
  return ids;
}

Dataset load_dataset(const std::string& root, int height, int width) {
  Dataset ds;
  ds.index = index_folder(root);
  for (int i = 0; i < static_cast<int>(ds.index.records.size()); ++i) {
    const auto& r = ds.index.records[i];
    const Tensor<float> px = image::load_image((fs::path(root) / r.path).string(), height, width);
    ds.images.emplace_back(px, r.modality, r.identity);
    if (r.split == Split::kTrain) ds.train_by_identity[r.identity][r.modality - 1].push_back(i);
  }
  return ds;
}

PairBatch sample_pair_batch(const Dataset& ds, std::mt19937_64& rng, int pairs) {
  std::vector<int> ids = ds.train_identities();
  if (pairs < 2) throw Error("a pair batch needs at least 2 identities");
  if (static_cast<int>(ids.size()) < pairs) {
    throw Error("pair batch of " + std::to_string(pairs) + " identities requested but the train split has " +
                std::to_string(ids.size()));
  }
  // Partial Fisher-Yates: the first `pairs` entries are a uniform subset.
  for (int i = 0; i < pairs; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(ids.size()) - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  std::vector<ImageTensor> vis, ir;
  for (int i = 0; i < pairs; ++i) {
    const auto& per = ds.train_by_identity.at(ids[i]);
    for (int m = 0; m < 2; ++m) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(per[m].size()) - 1);
      (m == 0 ? vis : ir).push_back(ds.images[per[m][pick(rng)]]);
    }
  }
  return PairBatch(std::move(vis), std::move(ir));
}

}  // namespace hicmd::data
