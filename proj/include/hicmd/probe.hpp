#pragma once
// Factor classifiers for synthetic images, fit on ground-truth labels. Used
// to check that generated images keep the identity's clothing pattern while
// taking palette and pose from elsewhere.

#include <vector>

#include "hicmd/core_types.hpp"

namespace hicmd::probe {

// Palette-invariant texture statistics of the torso region of the per-image
// standardized gray image: mean absolute horizontal, vertical and diagonal
// differences at strides 1..3, then row-profile and column-profile variance
// relative to the window variance.
std::vector<double> texture_features(const ImageTensor& image);

// Mean chroma (r - g, g - b, r - b) relative to the mean intensity spread.
std::vector<double> palette_features(const ImageTensor& image);

// Intensity-weighted column centroid of the deviation from the border color,
// as a fraction of the width.
double horizontal_centroid(const ImageTensor& image);

// Separable [1 2 1] / 4 smoothing with clamped borders.
ImageTensor blur(const ImageTensor& image);

// Nearest class mean on standardized features.
class NearestCentroid {
 public:
  void fit(const std::vector<std::vector<double>>& features, const std::vector<int>& labels);
  int predict(const std::vector<double>& features) const;

 private:
  std::vector<double> mean_, scale_;
  std::vector<std::vector<double>> centroids_;
};

// Stripe pattern from texture. Each training image also contributes
// blur_levels progressively smoothed copies, so decoder output that is
// softer than the renderer is still recognized.
class StripeProbe {
 public:
  explicit StripeProbe(int blur_levels = 3) : blur_levels_(blur_levels) {}
  void fit(const std::vector<ImageTensor>& images, const std::vector<int>& stripes);
  int predict(const ImageTensor& image) const;
  double accuracy(const std::vector<ImageTensor>& images, const std::vector<int>& stripes) const;

 private:
  int blur_levels_;
  NearestCentroid nc_;
};

// Palette id (0 visible, 1 infrared) from color statistics.
class PaletteProbe {
 public:
  void fit(const std::vector<ImageTensor>& images, const std::vector<int>& palettes);
  int predict(const ImageTensor& image) const;

 private:
  NearestCentroid nc_;
};

}  // namespace hicmd::probe
