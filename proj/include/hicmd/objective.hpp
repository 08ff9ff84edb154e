#pragma once
// Assembly of the overall generator-side objective from one generation record.

#include <vector>

#include "hicmd/hfl.hpp"
#include "hicmd/losses.hpp"

namespace hicmd::loss {

template <class T>
struct Objective {
  Var<T> cross, same, cycle, code, recon, kl, adv, ce, trip, total;
};

template <class T>
Objective<T> build_objective(const RunConfig& cfg, Graph<T>& g, const nn::IdPig<T>& net, const hfl::Hfl<T>& feat,
                             const nn::GenerationVars<T>& rec, const std::vector<int>& identities, long iteration,
                             bool trainable) {
  Objective<T> o;
  o.cross = cross_recon_loss(rec);
  o.same = same_recon_loss(rec);
  o.cycle = cycle_recon_loss(rec);
  o.code = code_recon_loss(rec);
  o.recon = recon_total(o.cross, o.same, o.cycle, o.code, cfg);
  o.kl = kl_loss(rec.codes[0].attribute.excluded, rec.codes[1].attribute.excluded);
  o.adv = adv_generator_loss(g, net, rec, cfg.adversarial);
  const auto sampled = feat.sample_features(g, rec, identities, iteration, trainable);
  o.ce = hfl::ce_loss(sampled.head.logits, sampled.labels);
  o.trip = hfl::triplet_loss(sampled.head.feature, sampled.labels, cfg.margin);
  o.total = total_loss(o.recon, o.kl, o.adv, o.ce, o.trip, cfg);
  return o;
}

}  // namespace hicmd::loss
