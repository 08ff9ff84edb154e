#include "hicmd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "hicmd/objective.hpp"
#include "hicmd/ops.hpp"

namespace hicmd::gradcheck {
namespace {

struct Model {
  RunConfig cfg;
  ParamStore<double> gen, dis, hfl;
  Tensor<double> x1, x2;
  std::vector<int> identities;
};

// Value of one named loss, built on a fresh graph.
Var<double> build_loss(Model& m, Graph<double>& g, const std::string& name) {
  const nn::IdPig<double> net(m.cfg, m.gen, m.dis);
  const hfl::Hfl<double> feat(m.cfg, m.hfl);
  const auto rec = net.forward_generation(g, g.constant(m.x1), g.constant(m.x2), true);
  if (name == "adv_dis") return loss::adv_discriminator_loss(g, net, rec.real, rec.cross, rec.illum, true);
  // Odd iteration: cross-source pairs exercise the re-encoded codes.
  const auto o = loss::build_objective(m.cfg, g, net, feat, rec, m.identities, 1, true);
  if (name == "recon_cross") return o.cross;
  if (name == "recon_same") return o.same;
  if (name == "recon_cycle") return o.cycle;
  if (name == "recon_code") return o.code;
  if (name == "kl") return o.kl;
  if (name == "adv_gen") return o.adv;
  if (name == "ce") return o.ce;
  if (name == "trip") return o.trip;
  if (name == "recon_total") return o.recon;
  if (name == "total") return o.total;
  throw Error("unknown loss '" + name + "'");
}

double loss_value(Model& m, const std::string& name) {
  Graph<double> g;
  return build_loss(m, g, name).value().item();
}

}  // namespace

RunConfig tiny_config() {
  RunConfig c;
  c.height = 8;
  c.width = 8;
  c.style_dim = 4;
  c.illum_dim = 2;
  c.pose_dim = 2;
  c.proto_channels = 4;
  c.base_channels = 2;
  c.downsamples = 1;
  c.res_blocks = 1;
  c.mlp_dim = 4;
  c.dis_channels = 2;
  c.embed_channels = 4;
  c.embed_dim = 4;
  c.feature_dim = 4;
  c.identities = 3;
  c.batch_pairs = 3;
  c.grad_clip = 0;
  c.adversarial = AdversarialForm::kMinimax;
  return c;
}

const std::vector<std::string>& loss_names() {
  static const std::vector<std::string> names = {"recon_cross", "recon_same", "recon_cycle", "recon_code",
                                                 "kl",          "adv_gen",    "adv_dis",     "ce",
                                                 "trip",        "recon_total", "total"};
  return names;
}

std::vector<Entry> run(const RunConfig& cfg_in, const Options& opt) {
  RunConfig cfg = cfg_in;
  if (cfg.identities <= 0) cfg.identities = cfg.batch_pairs;
  validate_config(cfg);
  if (cfg.batch_pairs > cfg.identities) throw Error("gradcheck: batch_pairs exceeds identities");
  if (!opt.corrupt.empty() &&
      std::find(loss_names().begin(), loss_names().end(), opt.corrupt) == loss_names().end()) {
    throw Error("gradcheck: unknown loss to corrupt '" + opt.corrupt + "'");
  }

  Model m;
  m.cfg = cfg;
  std::mt19937_64 rng(opt.seed);
  nn::init_generation_params(m.gen, cfg, rng);
  nn::init_discriminator_params(m.dis, cfg, rng);
  hfl::init_hfl_params(m.hfl, cfg, rng);
  // A zero final discriminator layer would hide every gradient behind it.
  std::normal_distribution<double> small(0.0, 0.3);
  for (auto& [name, p] : m.dis) {
    if (name.find(".fc.") != std::string::npos) {
      for (auto& v : p.value.values()) v = small(rng);
    }
  }
  std::uniform_real_distribution<double> pix(-0.9, 0.9);
  m.x1 = Tensor<double>({cfg.batch_pairs, 3, cfg.height, cfg.width});
  m.x2 = Tensor<double>(m.x1.shape());
  for (auto& v : m.x1.values()) v = pix(rng);
  for (auto& v : m.x2.values()) v = pix(rng);
  for (int k = 0; k < cfg.batch_pairs; ++k) m.identities.push_back(k + 1);

  std::vector<Entry> out;
  for (const auto& name : loss_names()) {
    std::vector<ParamStore<double>*> groups;
    if (name == "adv_dis") {
      groups = {&m.dis};
    } else {
      groups = {&m.gen, &m.hfl};
    }
    for (auto* s : {&m.gen, &m.dis, &m.hfl}) s->zero_grad();
    {
      Graph<double> g;
      Var<double> l = build_loss(m, g, name);
      g.backward(l);
    }
    Entry e{name, 0.0, 0, true};
    bool corrupted = false;
    for (auto* store : groups) {
      for (auto& [pname, p] : *store) {
        // The largest-gradient coordinate and one random coordinate per tensor.
        std::size_t big = 0;
        for (std::size_t i = 1; i < p.grad.size(); ++i) {
          if (std::abs(p.grad[i]) > std::abs(p.grad[big])) big = i;
        }
        std::uniform_int_distribution<std::size_t> any(0, p.value.size() - 1);
        for (std::size_t idx : {big, any(rng)}) {
          double analytic = p.grad[idx];
          if (name == opt.corrupt && !corrupted && analytic != 0.0) {
            analytic = analytic * 1.05 + 1e-3;
            corrupted = true;
          }
          const double saved = p.value[idx];
          p.value[idx] = saved + opt.step;
          const double up = loss_value(m, name);
          p.value[idx] = saved - opt.step;
          const double down = loss_value(m, name);
          p.value[idx] = saved;
          const double numeric = (up - down) / (2 * opt.step);
          const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
          e.max_rel_error = std::max(e.max_rel_error, std::abs(analytic - numeric) / denom);
          ++e.coordinates;
        }
      }
    }
    e.pass = e.max_rel_error <= opt.tolerance;
    out.push_back(e);
  }
  return out;
}

}  // namespace hicmd::gradcheck
