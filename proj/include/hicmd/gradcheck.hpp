#pragma once
// Finite-difference verification of every loss on a tiny double-precision
// network.

#include <cstdint>
#include <string>
#include <vector>

#include "hicmd/core_types.hpp"

namespace hicmd::gradcheck {

struct Entry {
  std::string name;
  double max_rel_error = 0;
  int coordinates = 0;
  bool pass = false;
};

struct Options {
  double tolerance = 1e-4;
  double step = 1e-6;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  std::uint64_t seed = 0;
  // Name of a loss whose analytic gradient is deliberately perturbed.
  std::string corrupt;
};

// 8 x 8 images, code and channel dimensions of at most 4, 3 identities.
RunConfig tiny_config();

// Names in report order: the nine components, then recon_total and total.
const std::vector<std::string>& loss_names();

std::vector<Entry> run(const RunConfig& cfg, const Options& opt);

}  // namespace hicmd::gradcheck
