#include "hicmd/losses.hpp"

#include <cstdio>

#include "hicmd/ops.hpp"

namespace hicmd::loss {

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {"recon_cross", "recon_same", "recon_cycle", "recon_code",
                                                "recon_total", "kl",         "adv_gen",     "adv_dis",
                                                "ce",          "trip",       "total",       "alpha"};
  return cols;
}

std::string csv_header() {
  std::string s = "iteration";
  for (const auto& c : report_columns()) s += "," + c;
  return s;
}

std::string csv_row(int iteration, const LossReport& r, double alpha) {
  const double v[] = {r.recon_cross, r.recon_same, r.recon_cycle, r.recon_code, r.recon_total, r.kl,
                      r.adv_gen,     r.adv_dis,    r.ce,          r.trip,       r.total,       alpha};
  std::string s = std::to_string(iteration);
  char buf[64];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, ",%.17g", x);
    s += buf;
  }
  return s;
}

double weighted_recon(const LossReport& r, const RunConfig& c) {
  return c.lambda_cross * r.recon_cross + c.lambda_same * r.recon_same + c.lambda_cycle * r.recon_cycle +
         c.lambda_code * r.recon_code;
}

double weighted_total(const LossReport& r, const RunConfig& c) {
  return weighted_recon(r, c) + c.lambda_kl * r.kl + c.lambda_adv * r.adv_gen + c.lambda_ce * r.ce +
         c.lambda_trip * r.trip;
}

template <class T>
Var<T> cross_recon_loss(const nn::GenerationVars<T>& r) {
  return ops::add(ops::mean_abs_diff(r.real[0], r.cross[0]), ops::mean_abs_diff(r.real[1], r.cross[1]));
}

template <class T>
Var<T> same_recon_loss(const nn::GenerationVars<T>& r) {
  return ops::add(ops::mean_abs_diff(r.real[0], r.same[0]), ops::mean_abs_diff(r.real[1], r.same[1]));
}

template <class T>
Var<T> cycle_recon_loss(const nn::GenerationVars<T>& r) {
  if (!r.cycle[0].valid() || !r.cycle[1].valid()) throw Error("cycle_recon_loss: record has no cycle images");
  return ops::add(ops::mean_abs_diff(r.real[0], r.cycle[0]), ops::mean_abs_diff(r.real[1], r.cycle[1]));
}

template <class T>
Var<T> code_recon_loss(const nn::GenerationVars<T>& r) {
  // Style of x_i survives in the translation x_{i->j}, re-encoded by E_j; the
  // ID-excluded code of x_i is re-encoded from x_{j->i} by E_i.
  const auto& src1 = r.codes[0].attribute;
  const auto& src2 = r.codes[1].attribute;
  const auto& re1 = r.reencoded[0].attribute;  // from x_{2->1}
  const auto& re2 = r.reencoded[1].attribute;  // from x_{1->2}
  Var<T> m1 = ops::add(ops::mean_abs_diff(src1.style, re2.style), ops::mean_abs_diff(src1.excluded, re1.excluded));
  Var<T> m2 = ops::add(ops::mean_abs_diff(src2.style, re1.style), ops::mean_abs_diff(src2.excluded, re2.excluded));
  return ops::add(m1, m2);
}

template <class T>
Var<T> recon_total(Var<T> cross, Var<T> same, Var<T> cycle, Var<T> code, const RunConfig& c) {
  return ops::weighted_sum<T>({cross, same, cycle, code},
                              {static_cast<T>(c.lambda_cross), static_cast<T>(c.lambda_same),
                               static_cast<T>(c.lambda_cycle), static_cast<T>(c.lambda_code)});
}

template <class T>
Var<T> kl_loss(Var<T> excluded_1, Var<T> excluded_2) {
  return ops::add(ops::half_sq_norm_mean(excluded_1), ops::half_sq_norm_mean(excluded_2));
}

template <class T>
Var<T> adv_generator_loss_from_scores(const std::array<std::array<Var<T>, 2>, 2>& scores, AdversarialForm form) {
  const T eps = static_cast<T>(kClampEps);
  std::vector<Var<T>> terms;
  for (const auto& per_modality : scores) {
    for (const auto& s : per_modality) {
      terms.push_back(form == AdversarialForm::kMinimax ? ops::mean_log1m(s, eps) : ops::mean_log(s, eps));
    }
  }
  const T sign = form == AdversarialForm::kMinimax ? T(1) : T(-1);
  return ops::weighted_sum<T>(terms, std::vector<T>(terms.size(), sign));
}

template <class T>
Var<T> adv_generator_loss(Graph<T>& g, const nn::IdPig<T>& net, const nn::GenerationVars<T>& r, AdversarialForm form) {
  std::array<std::array<Var<T>, 2>, 2> scores;
  for (int i = 0; i < 2; ++i) {
    const int modality = i + 1;
    scores[i] = {net.discriminate(g, r.cross[i], modality, false), net.discriminate(g, r.illum[i], modality, false)};
  }
  return adv_generator_loss_from_scores(scores, form);
}

template <class T>
Var<T> adv_discriminator_loss_from_scores(const std::array<Var<T>, 2>& real_scores,
                                          const std::array<std::array<Var<T>, 2>, 2>& fake_scores) {
  const T eps = static_cast<T>(kClampEps);
  std::vector<Var<T>> terms;
  for (int i = 0; i < 2; ++i) {
    terms.push_back(ops::mean_log(real_scores[i], eps));
    for (const auto& s : fake_scores[i]) terms.push_back(ops::mean_log1m(s, eps));
  }
  return ops::weighted_sum<T>(terms, std::vector<T>(terms.size(), T(-1)));
}

template <class T>
Var<T> adv_discriminator_loss(Graph<T>& g, const nn::IdPig<T>& net, const std::array<Var<T>, 2>& real,
                              const std::array<Var<T>, 2>& fake_a, const std::array<Var<T>, 2>& fake_b,
                              bool trainable) {
  std::array<Var<T>, 2> real_scores;
  std::array<std::array<Var<T>, 2>, 2> fake_scores;
  for (int i = 0; i < 2; ++i) {
    const int modality = i + 1;
    // Real and fake images go through D_i as one batch.
    const int n = real[i].shape()[0];
    Var<T> all = ops::concat_rows<T>({ops::detach(real[i]), ops::detach(fake_a[i]), ops::detach(fake_b[i])});
    Var<T> s = net.discriminate(g, all, modality, trainable);
    std::vector<int> rows(n);
    for (int k = 0; k < 3; ++k) {
      for (int j = 0; j < n; ++j) rows[j] = k * n + j;
      Var<T> part = ops::gather_rows(s, rows);
      if (k == 0) {
        real_scores[i] = part;
      } else {
        fake_scores[i][k - 1] = part;
      }
    }
  }
  return adv_discriminator_loss_from_scores(real_scores, fake_scores);
}

template <class T>
Var<T> total_loss(Var<T> recon, Var<T> kl, Var<T> adv_gen, Var<T> ce, Var<T> trip, const RunConfig& c) {
  return ops::weighted_sum<T>({recon, kl, adv_gen, ce, trip},
                              {T(1), static_cast<T>(c.lambda_kl), static_cast<T>(c.lambda_adv),
                               static_cast<T>(c.lambda_ce), static_cast<T>(c.lambda_trip)});
}

#define HICMD_INSTANTIATE_LOSSES(T)                                                                              \
  template Var<T> cross_recon_loss(const nn::GenerationVars<T>&);                                                \
  template Var<T> same_recon_loss(const nn::GenerationVars<T>&);                                                 \
  template Var<T> cycle_recon_loss(const nn::GenerationVars<T>&);                                                \
  template Var<T> code_recon_loss(const nn::GenerationVars<T>&);                                                 \
  template Var<T> recon_total(Var<T>, Var<T>, Var<T>, Var<T>, const RunConfig&);                                 \
  template Var<T> kl_loss(Var<T>, Var<T>);                                                                       \
  template Var<T> adv_generator_loss(Graph<T>&, const nn::IdPig<T>&, const nn::GenerationVars<T>&,               \
                                     AdversarialForm);                                                           \
  template Var<T> adv_generator_loss_from_scores(const std::array<std::array<Var<T>, 2>, 2>&, AdversarialForm);  \
  template Var<T> adv_discriminator_loss(Graph<T>&, const nn::IdPig<T>&, const std::array<Var<T>, 2>&,           \
                                         const std::array<Var<T>, 2>&, const std::array<Var<T>, 2>&, bool);      \
  template Var<T> adv_discriminator_loss_from_scores(const std::array<Var<T>, 2>&,                               \
                                                     const std::array<std::array<Var<T>, 2>, 2>&);               \
  template Var<T> total_loss(Var<T>, Var<T>, Var<T>, Var<T>, Var<T>, const RunConfig&);

HICMD_INSTANTIATE_LOSSES(float)
HICMD_INSTANTIATE_LOSSES(double)

}  // namespace hicmd::loss
