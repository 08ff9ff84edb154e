#include "hicmd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "hicmd/networks.hpp"

namespace hicmd::eval {
namespace {

std::vector<std::vector<float>> values_of(const std::vector<hfl::FeatureVector>& f) {
  std::vector<std::vector<float>> out;
  out.reserve(f.size());
  for (const auto& x : f) out.push_back(x.values);
  return out;
}

std::vector<int> labels_of(const std::vector<hfl::FeatureVector>& f) {
  std::vector<int> out;
  out.reserve(f.size());
  for (const auto& x : f) out.push_back(x.identity);
  return out;
}

void accumulate(Aggregate& agg, RetrievalResult r) {
  if (agg.cmc.empty()) agg.cmc.assign(r.cmc.size(), 0.0);
  for (std::size_t k = 0; k < r.cmc.size(); ++k) agg.cmc[k] += r.cmc[k];
  agg.map += r.map;
  agg.trials.push_back(std::move(r));
}

void finish(Aggregate& agg) {
  const double n = static_cast<double>(agg.trials.size());
  for (auto& v : agg.cmc) v /= n;
  agg.map /= n;
}

}  // namespace

Matrix pairwise_distances(const std::vector<std::vector<float>>& q, const std::vector<std::vector<float>>& g) {
  Matrix d(q.size(), std::vector<double>(g.size()));
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (q[i].size() != g[j].size()) throw Error("pairwise_distances: feature lengths differ");
      double s = 0;
      for (std::size_t k = 0; k < q[i].size(); ++k) {
        const double t = static_cast<double>(q[i][k]) - g[j][k];
        s += t * t;
      }
      d[i][j] = std::sqrt(s);
    }
  }
  return d;
}

RetrievalResult cmc_map(const Matrix& d, const std::vector<int>& ql, const std::vector<int>& gl, int max_rank) {
  if (d.size() != ql.size()) throw Error("cmc_map: one label per query required");
  if (ql.empty()) throw Error("cmc_map: no queries");
  if (max_rank < 1) throw Error("cmc_map: max_rank must be >= 1");
  const std::set<int> gallery_ids(gl.begin(), gl.end());
  RetrievalResult r;
  r.cmc.assign(max_rank, 0.0);
  for (std::size_t qi = 0; qi < ql.size(); ++qi) {
    if (d[qi].size() != gl.size()) throw Error("cmc_map: one label per gallery item required");
    if (!gallery_ids.count(ql[qi])) throw Error("cmc_map: query identity " + std::to_string(ql[qi]) + " absent from gallery");
    std::vector<int> order(gl.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[qi][a] < d[qi][b]; });
    int hits = 0, first = -1;
    double precision_sum = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (gl[order[k]] != ql[qi]) continue;
      ++hits;
      if (first < 0) first = static_cast<int>(k);
      precision_sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    r.ap.push_back(precision_sum / hits);
    for (int k = first; k < max_rank; ++k) r.cmc[k] += 1.0;
    r.ranking.push_back(std::move(order));
  }
  for (auto& v : r.cmc) v /= static_cast<double>(ql.size());
  r.map = std::accumulate(r.ap.begin(), r.ap.end(), 0.0) / static_cast<double>(r.ap.size());
  return r;
}

Aggregate single_shot_all_search(const std::vector<hfl::FeatureVector>& queries,
                                 const std::vector<hfl::FeatureVector>& gallery, int trials, std::mt19937_64& rng,
                                 int max_rank) {
  if (trials < 1) throw Error("single_shot_all_search: trials must be >= 1");
  std::map<int, std::vector<int>> by_id;
  for (int i = 0; i < static_cast<int>(gallery.size()); ++i) by_id[gallery[i].identity].push_back(i);
  for (const auto& q : queries) {
    if (!by_id.count(q.identity)) {
      throw Error("single_shot_all_search: identity " + std::to_string(q.identity) + " has no gallery image");
    }
  }
  const auto qv = values_of(queries);
  const auto ql = labels_of(queries);
  Aggregate agg;
  for (int t = 0; t < trials; ++t) {
    std::vector<hfl::FeatureVector> g;
    for (const auto& [id, items] : by_id) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(items.size()) - 1);
      g.push_back(gallery[items[pick(rng)]]);
    }
    RetrievalResult r = cmc_map(pairwise_distances(qv, values_of(g)), ql, labels_of(g), max_rank);
    r.trial = t;
    accumulate(agg, std::move(r));
  }
  finish(agg);
  return agg;
}

Aggregate regdb_protocol(const std::vector<hfl::FeatureVector>& visible, const std::vector<hfl::FeatureVector>& infrared,
                         int trials, std::mt19937_64& rng, int max_rank) {
  if (trials < 1) throw Error("regdb_protocol: trials must be >= 1");
  std::set<int> vis_ids, ir_ids;
  for (const auto& f : visible) vis_ids.insert(f.identity);
  for (const auto& f : infrared) ir_ids.insert(f.identity);
  std::vector<int> ids;
  std::set_intersection(vis_ids.begin(), vis_ids.end(), ir_ids.begin(), ir_ids.end(), std::back_inserter(ids));
  if (ids.size() < 2) throw Error("regdb_protocol: need at least 2 identities present in both modalities");
  const std::size_t half = ids.size() / 2;
  Aggregate agg;
  for (int t = 0; t < trials; ++t) {
    std::vector<int> perm = ids;
    for (std::size_t i = 0; i < half; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, perm.size() - 1);
      std::swap(perm[i], perm[pick(rng)]);
    }
    const std::set<int> chosen(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<hfl::FeatureVector> q, g;
    for (const auto& f : visible) {
      if (chosen.count(f.identity)) q.push_back(f);
    }
    for (const auto& f : infrared) {
      if (chosen.count(f.identity)) g.push_back(f);
    }
    RetrievalResult r = cmc_map(pairwise_distances(values_of(q), values_of(g)), labels_of(q), labels_of(g), max_rank);
    r.trial = t;
    accumulate(agg, std::move(r));
  }
  finish(agg);
  return agg;
}

DistanceHistogram distance_histogram(const std::vector<hfl::FeatureVector>& f, int bins) {
  if (bins < 1) throw Error("distance_histogram: bins must be >= 1");
  std::vector<double> intra, inter;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i].modality != kVisible) continue;
    for (std::size_t j = 0; j < f.size(); ++j) {
      if (f[j].modality != kInfrared) continue;
      const double d = pairwise_distances({f[i].values}, {f[j].values})[0][0];
      (f[i].identity == f[j].identity ? intra : inter).push_back(d);
    }
  }
  if (intra.empty() && inter.empty()) throw Error("distance_histogram: no cross-modality pairs");
  DistanceHistogram h;
  double hi = 0;
  for (double d : intra) hi = std::max(hi, d);
  for (double d : inter) hi = std::max(hi, d);
  if (hi <= 0) hi = 1;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(hi * b / bins);
  h.intra.assign(bins, 0);
  h.inter.assign(bins, 0);
  auto bin_of = [&](double d) { return std::min(bins - 1, static_cast<int>(d / hi * bins)); };
  for (double d : intra) ++h.intra[bin_of(d)];
  for (double d : inter) ++h.inter[bin_of(d)];
  h.intra_pairs = static_cast<long>(intra.size());
  h.inter_pairs = static_cast<long>(inter.size());
  if (!intra.empty()) h.intra_mean = std::accumulate(intra.begin(), intra.end(), 0.0) / intra.size();
  if (!inter.empty()) h.inter_mean = std::accumulate(inter.begin(), inter.end(), 0.0) / inter.size();
  return h;
}

void write_cmc_csv(const std::string& path, const Aggregate& a) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  char buf[64];
  os << "rank,cmc\n";
  for (std::size_t k = 0; k < a.cmc.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.10f\n", k + 1, a.cmc[k]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "mAP,%.10f\n", a.map);
  os << buf;
}

void write_histogram_csv(const std::string& path, const DistanceHistogram& h) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  char buf[96];
  os << "bin_lo,bin_hi,intra,inter\n";
  for (std::size_t b = 0; b < h.intra.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%.8f,%.8f,%ld,%ld\n", h.edges[b], h.edges[b + 1], h.intra[b], h.inter[b]);
    os << buf;
  }
}

std::vector<hfl::FeatureVector> extract_features(train::TrainState& s, const std::vector<ImageTensor>& images) {
  const nn::IdPig<float> net(s.cfg, s.gen, s.dis);
  const hfl::Hfl<float> feat(s.cfg, s.hfl);
  std::vector<hfl::FeatureVector> out(images.size());
  constexpr std::size_t kChunk = 32;
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
      Var<float> x = g.constant(nn::stack_images<float>(chunk));
      const auto codes = net.encode(g, x, modality, false);
      const auto head = feat.forward(g, codes.prototype, codes.attribute.style, false);
      const auto& fv = head.feature.value();
      const int d = fv.dim(1);
      for (std::size_t k = c0; k < c1; ++k) {
        auto& f = out[idx[k]];
        const float* row = fv.data() + (k - c0) * d;
        f.values.assign(row, row + d);
        f.identity = images[idx[k]].identity();
        f.modality = modality;
      }
    }
  }
  return out;
}

}  // namespace hicmd::eval
