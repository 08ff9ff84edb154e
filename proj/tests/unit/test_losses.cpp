#include <cmath>
#include <random>

#include "doctest.h"
#include "hicmd/hfl.hpp"
#include "hicmd/losses.hpp"
#include "hicmd/objective.hpp"

using namespace hicmd;

namespace {

Var<double> filled(Graph<double>& g, Shape s, double v) { return g.constant(Tensor<double>(std::move(s), v)); }

}  // namespace

TEST_CASE("uniform discriminator gives closed-form adversarial values") {
  Graph<double> g;
  std::array<std::array<Var<double>, 2>, 2> fakes;
  for (auto& row : fakes)
    for (auto& s : row) s = filled(g, {4, 1}, 0.5);
  std::array<Var<double>, 2> real = {filled(g, {4, 1}, 0.5), filled(g, {4, 1}, 0.5)};

  const double minimax = loss::adv_generator_loss_from_scores(fakes, AdversarialForm::kMinimax).value().item();
  CHECK(std::abs(minimax - 4 * std::log(0.5)) < 1e-9);
  CHECK(std::abs(minimax + 2.7725887222397811) < 1e-9);

  const double ns = loss::adv_generator_loss_from_scores(fakes, AdversarialForm::kNonSaturating).value().item();
  CHECK(std::abs(ns + 4 * std::log(0.5)) < 1e-9);

  const double dis = loss::adv_discriminator_loss_from_scores(real, fakes).value().item();
  CHECK(std::abs(dis - 4.1588830833596715) < 1e-9);
}

TEST_CASE("fresh discriminators score exactly one half") {
  RunConfig cfg;
  cfg.height = 16;
  cfg.width = 8;
  cfg.proto_channels = 4;
  ParamStore<double> gen, dis;
  std::mt19937_64 rng(3);
  nn::init_generation_params(gen, cfg, rng);
  nn::init_discriminator_params(dis, cfg, rng);
  nn::IdPig<double> net(cfg, gen, dis);
  Graph<double> g;
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor<double> x({2, 3, 16, 8});
  for (auto& v : x.values()) v = u(rng);
  for (int m : {kVisible, kInfrared}) {
    const auto& s = net.discriminate(g, g.constant(x), m).value();
    for (double v : s.values()) CHECK(v == 0.5);
  }
}

TEST_CASE("uniform classifier over 20 identities gives ln 20") {
  Graph<double> g;
  std::vector<int> labels = {1, 7, 20, 13};
  const double ce = hfl::ce_loss(filled(g, {4, 20}, 0.0), labels).value().item();
  CHECK(std::abs(ce - std::log(20.0)) < 1e-9);
  CHECK(std::abs(ce - 2.9957322735539909) < 1e-9);
}

TEST_CASE("cross-entropy matches a direct softmax") {
  Graph<double> g;
  Tensor<double> logits({2, 3}, std::vector<double>{1.0, 2.0, 0.5, -1.0, 0.0, 3.0});
  const double ce = hfl::ce_loss(g.constant(logits), {2, 1}).value().item();
  auto nll = [](double a, double b, double c, double pick) { return -(pick - std::log(std::exp(a) + std::exp(b) + std::exp(c))); };
  const double want = 0.5 * (nll(1.0, 2.0, 0.5, 2.0) + nll(-1.0, 0.0, 3.0, -1.0));
  CHECK(std::abs(ce - want) < 1e-12);
  CHECK_THROWS_AS(hfl::ce_loss(g.constant(logits), {0, 1}), Error);
  CHECK_THROWS_AS(hfl::ce_loss(g.constant(logits), {4, 1}), Error);
}

TEST_CASE("KL of a unit excluded code is one half") {
  Graph<double> g;
  Tensor<double> e1({1, 6}, 0.0);
  e1[0] = 1.0;
  const double kl = loss::kl_loss(g.constant(e1), g.constant(Tensor<double>({1, 6}, 0.0))).value().item();
  CHECK(std::abs(kl - 0.5) < 1e-9);
  // Sum over modalities of the batch mean.
  Tensor<double> two({2, 2}, std::vector<double>{1.0, 1.0, 0.0, 2.0});
  const double kl2 = loss::kl_loss(g.constant(two), g.constant(two)).value().item();
  CHECK(std::abs(kl2 - 2 * 0.5 * (0.5 * 2 + 0.5 * 4)) < 1e-12);
}

TEST_CASE("batch-hard triplet picks the farthest positive and nearest negative") {
  Graph<double> g;
  // 1-D features: identity 1 at 0 and 1, identity 2 at 1.5 and 4.
  Tensor<double> f({4, 1}, std::vector<double>{0.0, 1.0, 1.5, 4.0});
  const std::vector<int> labels = {1, 1, 2, 2};
  const double m = 0.3;
  const double got = hfl::triplet_loss(g.constant(f), labels, m).value().item();
  // anchor 0: pos 1, neg 1.5; anchor 1: pos 1, neg 0.5; anchor 2: pos 2.5, neg 0.5; anchor 3: pos 2.5, neg 3.
  auto h = [m](double p, double n) { return std::max(0.0, p - n + m); };
  const double want = (h(1, 1.5) + h(1, 0.5) + h(2.5, 0.5) + h(2.5, 3)) / 4;
  CHECK(std::abs(got - want) < 1e-12);
  CHECK_THROWS_AS(hfl::triplet_loss(g.constant(f), {1, 1, 1, 1}, m), Error);
}

TEST_CASE("weighted totals follow the configured weights") {
  RunConfig cfg;
  loss::LossReport r;
  r.recon_cross = 1;
  r.recon_same = 2;
  r.recon_cycle = 3;
  r.recon_code = 4;
  r.kl = 5;
  r.adv_gen = 6;
  r.ce = 7;
  r.trip = 8;
  const double recon = 50 * 1 + 50 * 2 + 50 * 3 + 10 * 4;
  CHECK(loss::weighted_recon(r, cfg) == doctest::Approx(recon));
  CHECK(loss::weighted_total(r, cfg) == doctest::Approx(recon + 5 + 20 * 6 + 7 + 8));

  Graph<double> g;
  auto s = [&](double v) { return g.constant(Tensor<double>::scalar(v)); };
  const double rt = loss::recon_total(s(1), s(2), s(3), s(4), cfg).value().item();
  CHECK(rt == doctest::Approx(recon));
  const double tot = loss::total_loss(s(rt), s(5), s(6), s(7), s(8), cfg).value().item();
  CHECK(tot == doctest::Approx(recon + 5 + 20 * 6 + 7 + 8));
}

TEST_CASE("csv formatting") {
  CHECK(loss::csv_header() ==
        "iteration,recon_cross,recon_same,recon_cycle,recon_code,recon_total,kl,adv_gen,adv_dis,ce,trip,total,alpha");
  loss::LossReport r;
  r.recon_same = 0.1;
  const std::string row = loss::csv_row(3, r, 0.5);
  CHECK(row.rfind("3,0,0.10000000000000001,", 0) == 0);
  CHECK(row.substr(row.size() - 4) == ",0.5");
}

TEST_CASE("reconstruction losses are zero when decoded images equal their targets") {
  RunConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.downsamples = 1;
  cfg.proto_channels = 2;
  Graph<double> g;
  nn::GenerationVars<double> rec;
  Tensor<double> a({2, 3, 8, 8}, 0.25), b({2, 3, 8, 8}, -0.5);
  rec.real = {g.constant(a), g.constant(b)};
  rec.same = rec.real;
  rec.cross = rec.real;
  rec.cycle = rec.real;
  CHECK(loss::same_recon_loss(rec).value().item() == 0.0);
  CHECK(loss::cross_recon_loss(rec).value().item() == 0.0);
  CHECK(loss::cycle_recon_loss(rec).value().item() == 0.0);
  // Swapped targets: |0.25 - (-0.5)| in both modalities.
  rec.cross = {rec.real[1], rec.real[0]};
  CHECK(loss::cross_recon_loss(rec).value().item() == doctest::Approx(1.5));
}
