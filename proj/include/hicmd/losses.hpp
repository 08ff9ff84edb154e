#pragma once
// Generation objectives. Every function builds onto the graph that holds the
// generation record, so the result is differentiable w.r.t. all parameters
// that produced it.

#include <iosfwd>
#include <string>
#include <vector>

#include "hicmd/networks.hpp"

namespace hicmd::loss {

inline constexpr double kClampEps = 1e-6;

struct LossReport {
  double recon_cross = 0;
  double recon_same = 0;
  double recon_cycle = 0;
  double recon_code = 0;
  double recon_total = 0;
  double kl = 0;
  double adv_gen = 0;
  double adv_dis = 0;
  double ce = 0;
  double trip = 0;
  double total = 0;

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

// Column order of losses.csv (after the leading `iteration` column).
const std::vector<std::string>& report_columns();
std::string csv_header();
// Values are printed with 17 significant digits so rows round-trip.
std::string csv_row(int iteration, const LossReport& r, double alpha);

// Weighted reconstruction block and overall objective on plain numbers.
double weighted_recon(const LossReport& r, const RunConfig& cfg);
double weighted_total(const LossReport& r, const RunConfig& cfg);

// Sum over both modalities of mean |x_i - x_{j->i}|.
template <class T>
Var<T> cross_recon_loss(const nn::GenerationVars<T>& rec);
template <class T>
Var<T> same_recon_loss(const nn::GenerationVars<T>& rec);
template <class T>
Var<T> cycle_recon_loss(const nn::GenerationVars<T>& rec);
// mean |a^s_i - a^s_i(reencoded)| + mean |a^ex_i - a^ex_i(reencoded)|, both
// modalities.
template <class T>
Var<T> code_recon_loss(const nn::GenerationVars<T>& rec);

template <class T>
Var<T> recon_total(Var<T> cross, Var<T> same, Var<T> cycle, Var<T> code, const RunConfig& cfg);

// Sum over modalities of the batch mean of 0.5 * ||a^ex||^2.
template <class T>
Var<T> kl_loss(Var<T> excluded_1, Var<T> excluded_2);

// Generator side of the adversarial game on the two fakes per modality
// (full swap and illumination-only swap). Discriminators are bound frozen.
template <class T>
Var<T> adv_generator_loss(Graph<T>& g, const nn::IdPig<T>& net, const nn::GenerationVars<T>& rec,
                          AdversarialForm form);
// Same, from raw discriminator outputs: scores[i] holds D_{i+1} on its two
// fakes.
template <class T>
Var<T> adv_generator_loss_from_scores(const std::array<std::array<Var<T>, 2>, 2>& scores, AdversarialForm form);

// -[log D_i(real) + log(1 - D_i(fake_a)) + log(1 - D_i(fake_b))] summed over
// i. Fakes are detached so no gradient reaches the generator.
template <class T>
Var<T> adv_discriminator_loss(Graph<T>& g, const nn::IdPig<T>& net, const std::array<Var<T>, 2>& real,
                              const std::array<Var<T>, 2>& fake_a, const std::array<Var<T>, 2>& fake_b,
                              bool trainable = true);
template <class T>
Var<T> adv_discriminator_loss_from_scores(const std::array<Var<T>, 2>& real_scores,
                                          const std::array<std::array<Var<T>, 2>, 2>& fake_scores);

// Overall objective from its components.
template <class T>
Var<T> total_loss(Var<T> recon, Var<T> kl, Var<T> adv_gen, Var<T> ce, Var<T> trip, const RunConfig& cfg);

}  // namespace hicmd::loss
