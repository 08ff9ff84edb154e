#include "hicmd/probe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace hicmd::probe {
namespace {

std::vector<double> standardized_gray(const ImageTensor& image) {
  const auto& px = image.pixels();
  std::vector<double> gray(static_cast<std::size_t>(image.height()) * image.width());
  double mean = 0;
  for (std::size_t i = 0; i < gray.size(); ++i) {
    gray[i] = (px[3 * i] + px[3 * i + 1] + px[3 * i + 2]) / 3.0;
    mean += gray[i];
  }
  mean /= static_cast<double>(gray.size());
  double var = 0;
  for (double v : gray) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(gray.size())) + 1e-6;
  for (double& v : gray) v = (v - mean) / sd;
  return gray;
}

void check_labels(std::size_t images, std::size_t labels, const char* who) {
  if (images == 0 || images != labels) throw Error(std::string(who) + ": one label per image required");
}

}  // namespace

std::vector<double> texture_features(const ImageTensor& image) {
  const int h = image.height(), w = image.width();
  if (h < 16 || w < 16) throw Error("texture_features: image smaller than 16x16");
  const auto gray = standardized_gray(image);
  auto at = [&](int y, int x) { return gray[static_cast<std::size_t>(y) * w + x]; };

  // Torso window in the 32 x 64 frame, scaled to the image.
  const int y0 = h * 18 / 64, y1 = h * 34 / 64;
  const int x0 = w * 10 / 32, x1 = w * 22 / 32;
  const int n = (y1 - y0) * (x1 - x0);
  std::vector<double> f;
  for (int s = 1; s <= 3; ++s) {
    double dx = 0, dy = 0, d1 = 0, d2 = 0;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        dx += std::abs(at(y, x + s) - at(y, x));
        dy += std::abs(at(y + s, x) - at(y, x));
        d1 += std::abs(at(y + s, x + s) - at(y, x));
        d2 += std::abs(at(y + s, x - s) - at(y, x));
      }
    }
    for (double v : {dx, dy, d1, d2}) f.push_back(v / n);
  }

  std::vector<double> rows(y1 - y0, 0.0), cols(x1 - x0, 0.0);
  double sum = 0, sq = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double v = at(y, x);
      rows[y - y0] += v / (x1 - x0);
      cols[x - x0] += v / (y1 - y0);
      sum += v;
      sq += v * v;
    }
  }
  const double mean = sum / n, var = sq / n - mean * mean + 1e-9;
  double vr = 0, vc = 0;
  for (double v : rows) vr += (v - mean) * (v - mean) / rows.size();
  for (double v : cols) vc += (v - mean) * (v - mean) / cols.size();
  f.push_back(vr / var);
  f.push_back(vc / var);
  return f;
}

std::vector<double> palette_features(const ImageTensor& image) {
  const auto& px = image.pixels();
  const std::size_t n = static_cast<std::size_t>(image.height()) * image.width();
  double r = 0, g = 0, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r += px[3 * i];
    g += px[3 * i + 1];
    b += px[3 * i + 2];
  }
  r /= n;
  g /= n;
  b /= n;
  const double m = (r + g + b) / 3;
  double spread = 0;
  for (std::size_t i = 0; i < 3 * n; ++i) spread += std::abs(px[i] - m);
  spread = spread / (3.0 * n) + 1e-6;
  return {(r - g) / spread, (g - b) / spread, (r - b) / spread};
}

double horizontal_centroid(const ImageTensor& image) {
  const int h = image.height(), w = image.width();
  const auto& px = image.pixels();
  std::array<double, 3> border{};
  int nb = 0;
  for (int y = 0; y < h; ++y) {
    for (int x : {0, w - 1}) {
      for (int c = 0; c < 3; ++c) border[c] += px[(static_cast<std::size_t>(y) * w + x) * 3 + c];
      ++nb;
    }
  }
  for (double& v : border) v /= nb;
  double mass = 0, moment = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double d = 0;
      for (int c = 0; c < 3; ++c) d += std::abs(px[(static_cast<std::size_t>(y) * w + x) * 3 + c] - border[c]);
      mass += d;
      moment += d * (x + 0.5);
    }
  }
  return mass > 0 ? moment / mass / w : 0.5;
}

ImageTensor blur(const ImageTensor& image) {
  const int h = image.height(), w = image.width();
  const auto& px = image.pixels();
  Tensor<float> tmp({h, w, 3}), out({h, w, 3});
  auto idx = [&](int y, int x, int c) { return (static_cast<std::size_t>(y) * w + x) * 3 + c; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        tmp[idx(y, x, c)] = 0.25f * px[idx(y, std::max(x - 1, 0), c)] + 0.5f * px[idx(y, x, c)] +
                            0.25f * px[idx(y, std::min(x + 1, w - 1), c)];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out[idx(y, x, c)] = 0.25f * tmp[idx(std::max(y - 1, 0), x, c)] + 0.5f * tmp[idx(y, x, c)] +
                            0.25f * tmp[idx(std::min(y + 1, h - 1), x, c)];
  return ImageTensor(std::move(out), image.modality(), image.identity());
}

void NearestCentroid::fit(const std::vector<std::vector<double>>& features, const std::vector<int>& labels) {
  check_labels(features.size(), labels.size(), "NearestCentroid::fit");
  const std::size_t d = features[0].size();
  mean_.assign(d, 0);
  scale_.assign(d, 0);
  for (const auto& f : features) {
    if (f.size() != d) throw Error("NearestCentroid::fit: ragged features");
    for (std::size_t k = 0; k < d; ++k) mean_[k] += f[k] / features.size();
  }
  for (const auto& f : features)
    for (std::size_t k = 0; k < d; ++k) scale_[k] += (f[k] - mean_[k]) * (f[k] - mean_[k]) / features.size();
  for (double& s : scale_) s = std::sqrt(s) + 1e-9;

  int classes = 0;
  for (int s : labels) {
    if (s < 0) throw Error("NearestCentroid::fit: negative label");
    classes = std::max(classes, s + 1);
  }
  centroids_.assign(classes, std::vector<double>(d, 0.0));
  std::vector<int> count(classes, 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) centroids_[labels[i]][k] += (features[i][k] - mean_[k]) / scale_[k];
    ++count[labels[i]];
  }
  for (int c = 0; c < classes; ++c) {
    if (count[c] == 0) throw Error("NearestCentroid::fit: class " + std::to_string(c) + " has no examples");
    for (double& v : centroids_[c]) v /= count[c];
  }
}

int NearestCentroid::predict(const std::vector<double>& f) const {
  if (centroids_.empty()) throw Error("NearestCentroid: predict before fit");
  if (f.size() != mean_.size()) throw Error("NearestCentroid: feature size mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < static_cast<int>(centroids_.size()); ++c) {
    double d = 0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double z = (f[k] - mean_[k]) / scale_[k] - centroids_[c][k];
      d += z * z;
    }
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

void StripeProbe::fit(const std::vector<ImageTensor>& images, const std::vector<int>& stripes) {
  check_labels(images.size(), stripes.size(), "StripeProbe::fit");
  std::vector<std::vector<double>> feats;
  std::vector<int> labels;
  for (std::size_t i = 0; i < images.size(); ++i) {
    feats.push_back(texture_features(images[i]));
    labels.push_back(stripes[i]);
    ImageTensor soft = images[i];
    for (int k = 0; k < blur_levels_; ++k) {
      soft = blur(soft);
      feats.push_back(texture_features(soft));
      labels.push_back(stripes[i]);
    }
  }
  nc_.fit(feats, labels);
}

int StripeProbe::predict(const ImageTensor& image) const { return nc_.predict(texture_features(image)); }

double StripeProbe::accuracy(const std::vector<ImageTensor>& images, const std::vector<int>& stripes) const {
  check_labels(images.size(), stripes.size(), "StripeProbe::accuracy");
  int hit = 0;
  for (std::size_t i = 0; i < images.size(); ++i) hit += predict(images[i]) == stripes[i] ? 1 : 0;
  return static_cast<double>(hit) / images.size();
}

void PaletteProbe::fit(const std::vector<ImageTensor>& images, const std::vector<int>& palettes) {
  check_labels(images.size(), palettes.size(), "PaletteProbe::fit");
  std::vector<std::vector<double>> feats;
  for (const auto& im : images) feats.push_back(palette_features(im));
  nc_.fit(feats, palettes);
}

int PaletteProbe::predict(const ImageTensor& image) const { return nc_.predict(palette_features(image)); }

}  // namespace hicmd::probe
