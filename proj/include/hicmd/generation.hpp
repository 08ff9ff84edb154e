#pragma once
// Inference-time code manipulation: encoding images into code bundles,
// decoding bundles, factor-swap grids and latent interpolation strips.

#include <string>
#include <vector>

#include "hicmd/image_io.hpp"
#include "hicmd/training.hpp"

namespace hicmd::gen {

// Codes of every image, each with the encoders of its own modality.
std::vector<CodeBundle> encode_images(train::TrainState& state, const std::vector<ImageTensor>& images);

// G(p, a^s, a^c, a^p) per bundle. Outputs carry the given modality/identity
// labels, one per bundle.
std::vector<ImageTensor> decode_bundles(train::TrainState& state, const std::vector<CodeBundle>& bundles,
                                        const std::vector<int>& modalities, const std::vector<int>& identities);

// (1 - t) * a^ex_a + t * a^ex_b
std::vector<float> interpolate_excluded(const CodeBundle& a, const CodeBundle& b, double t);

enum class SwapMode { kExcluded, kDiscriminative, kIllumination };
SwapMode parse_swap_mode(const std::string& name);
const char* swap_mode_name(SwapMode mode);

// Bundle of the cell at (input, reference):
//   kExcluded       (p, a^s) of the input, a^ex of the reference
//   kDiscriminative (p, a^s) of the reference, a^ex of the input
//   kIllumination   (p, a^s, a^p) of the input, a^c of the reference
CodeBundle swap_codes(const CodeBundle& input, const CodeBundle& reference, SwapMode mode);

struct Grid {
  std::vector<ImageTensor> inputs;
  std::vector<ImageTensor> references;
  std::vector<std::vector<ImageTensor>> cells;  // [input][reference]
};

Grid generate_grid(train::TrainState& state, const std::vector<ImageTensor>& inputs,
                   const std::vector<ImageTensor>& references, SwapMode mode);

// (inputs + 1) x (references + 1) tiles: references along the top strip,
// inputs down the left strip, a blank corner.
image::Rgb8 compose_grid(const Grid& grid);

// G(p_a, a^s_a, lerp(a^ex_a, a^ex_b, t)) for t = k / (steps - 1).
std::vector<ImageTensor> interpolate_strip(train::TrainState& state, const ImageTensor& a, const ImageTensor& b,
                                           int steps);
// Tiles images left to right.
image::Rgb8 compose_strip(const std::vector<ImageTensor>& images);

}  // namespace hicmd::gen
