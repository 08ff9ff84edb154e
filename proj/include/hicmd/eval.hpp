#pragma once
// Cross-modality retrieval: Euclidean ranking, CMC / mAP, the single-shot
// all-search and RegDB-style protocols, and distance histograms.

#include <random>
#include <string>
#include <vector>

#include "hicmd/hfl.hpp"
#include "hicmd/training.hpp"

namespace hicmd::eval {

using Matrix = std::vector<std::vector<double>>;

struct RetrievalResult {
  std::vector<std::vector<int>> ranking;  // per query, gallery indices by rank
  std::vector<double> cmc;                // cmc[k-1] = rate of a match within rank k
  std::vector<double> ap;                 // per query
  double map = 0;
  int trial = 0;
};

struct Aggregate {
  std::vector<double> cmc;  // mean over trials
  double map = 0;           // mean over trials
  std::vector<RetrievalResult> trials;
};

struct DistanceHistogram {
  std::vector<double> edges;  // bins + 1 strictly increasing values
  std::vector<long> intra, inter;
  long intra_pairs = 0, inter_pairs = 0;
  double intra_mean = 0, inter_mean = 0;
};

inline constexpr int kDefaultMaxRank = 20;
inline constexpr int kDefaultTrials = 10;

Matrix pairwise_distances(const std::vector<std::vector<float>>& queries,
                          const std::vector<std::vector<float>>& gallery);

// Ascending distance, ties by gallery index. AP averages the precision at
// each relevant position.
RetrievalResult cmc_map(const Matrix& distances, const std::vector<int>& query_labels,
                        const std::vector<int>& gallery_labels, int max_rank = kDefaultMaxRank);

// Every query against a gallery holding one randomly chosen image per
// identity, repeated over trials.
Aggregate single_shot_all_search(const std::vector<hfl::FeatureVector>& queries,
                                 const std::vector<hfl::FeatureVector>& gallery, int trials, std::mt19937_64& rng,
                                 int max_rank = kDefaultMaxRank);

// Per trial a random half of the identities; all of their visible images
// query all of their infrared images.
Aggregate regdb_protocol(const std::vector<hfl::FeatureVector>& visible, const std::vector<hfl::FeatureVector>& infrared,
                         int trials, std::mt19937_64& rng, int max_rank = kDefaultMaxRank);

// Cross-modality pairs only: intra = same identity, inter = different.
DistanceHistogram distance_histogram(const std::vector<hfl::FeatureVector>& features, int bins);

// "rank,cmc" rows followed by a "mAP,<value>" footer.
void write_cmc_csv(const std::string& path, const Aggregate& result);
// "bin_lo,bin_hi,intra,inter" rows.
void write_histogram_csv(const std::string& path, const DistanceHistogram& h);

// Retrieval features of images with the modality-specific encoders and the
// feature head (inference mode).
std::vector<hfl::FeatureVector> extract_features(train::TrainState& state, const std::vector<ImageTensor>& images);

}  // namespace hicmd::eval
