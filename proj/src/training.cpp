#include "hicmd/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hicmd/hfl.hpp"
#include "hicmd/io/binary.hpp"
#include "hicmd/networks.hpp"
#include "hicmd/objective.hpp"
#include "hicmd/ops.hpp"

namespace fs = std::filesystem;

namespace hicmd::train {
namespace {

constexpr char kCheckpointMagic[] = "HICMDCK1";
constexpr std::uint32_t kCheckpointVersion = 1;

using Components = loss::Objective<float>;

Components build_objective(TrainState& s, Graph<float>& g, const nn::IdPig<float>& net, const nn::GenerationVars<float>& rec,
                           const std::vector<int>& identities, bool trainable) {
  const hfl::Hfl<float> feat(s.cfg, s.hfl);
  return loss::build_objective(s.cfg, g, net, feat, rec, identities, s.iteration, trainable);
}

void fill_report(loss::LossReport& r, const Components& c) {
  r.recon_cross = c.cross.value().item();
  r.recon_same = c.same.value().item();
  r.recon_cycle = c.cycle.value().item();
  r.recon_code = c.code.value().item();
  r.recon_total = c.recon.value().item();
  r.kl = c.kl.value().item();
  r.adv_gen = c.adv.value().item();
  r.ce = c.ce.value().item();
  r.trip = c.trip.value().item();
  r.total = c.total.value().item();
}

void check_finite(const loss::LossReport& r, long iteration) {
  const std::pair<const char*, double> items[] = {
      {"recon_cross", r.recon_cross}, {"recon_same", r.recon_same}, {"recon_cycle", r.recon_cycle},
      {"recon_code", r.recon_code},   {"kl", r.kl},                 {"adv_gen", r.adv_gen},
      {"adv_dis", r.adv_dis},         {"ce", r.ce},                 {"trip", r.trip},
      {"total", r.total}};
  for (const auto& [name, v] : items) {
    if (!std::isfinite(v)) {
      throw Error("non-finite loss component '" + std::string(name) + "' at iteration " + std::to_string(iteration));
    }
  }
}

// Fields that do not change the model or its optimization trajectory.
RunConfig model_part(RunConfig c) {
  c.iterations = 0;
  c.checkpoint_every = 0;
  c.data.clear();
  return c;
}

}  // namespace

std::string checkpoint_name(long iteration) { return "checkpoint_" + std::to_string(iteration) + ".bin"; }

TrainState TrainState::create(const RunConfig& cfg) {
  validate_config(cfg);
  if (cfg.identities <= 0) throw Error("TrainState: identities must be set");
  TrainState s;
  s.cfg = cfg;
  s.rng.seed(cfg.seed);
  nn::init_generation_params(s.gen, cfg, s.rng);
  nn::init_discriminator_params(s.dis, cfg, s.rng);
  hfl::init_hfl_params(s.hfl, cfg, s.rng);
  s.adam_gen = optim::Adam(cfg.lr_gen, cfg.beta1, cfg.beta2);
  s.adam_dis = optim::Adam(cfg.lr_gen, cfg.beta1, cfg.beta2);
  s.sgd_hfl = optim::Sgd(cfg.lr_hfl, cfg.momentum);
  return s;
}

loss::LossReport train_step(TrainState& s, const PairBatch& batch) {
  if (static_cast<int>(batch.size()) < 2) throw Error("train_step: batch needs at least 2 identities");
  for (int id : batch.identities()) {
    if (id > s.cfg.identities) throw Error("train_step: identity " + std::to_string(id) + " outside the classifier range");
  }
  const nn::IdPig<float> net(s.cfg, s.gen, s.dis);
  Graph<float> g;
  Var<float> x1 = g.constant(nn::stack_images<float>(batch.visible()));
  Var<float> x2 = g.constant(nn::stack_images<float>(batch.infrared()));
  const auto rec = net.forward_generation(g, x1, x2, true);

  loss::LossReport report;
  {
    // Discriminator step on its own graph: the fakes enter as constants.
    Graph<float> gd;
    std::array<Var<float>, 2> real, fake_a, fake_b;
    for (int i = 0; i < 2; ++i) {
      real[i] = gd.constant(rec.real[i].value());
      fake_a[i] = gd.constant(rec.cross[i].value());
      fake_b[i] = gd.constant(rec.illum[i].value());
    }
    Var<float> ld = loss::adv_discriminator_loss(gd, net, real, fake_a, fake_b, true);
    report.adv_dis = ld.value().item();
    if (!std::isfinite(report.adv_dis)) {
      throw Error("non-finite loss component 'adv_dis' at iteration " + std::to_string(s.iteration));
    }
    s.dis.zero_grad();
    gd.backward(ld);
    optim::clip_grad_norm(s.dis, s.cfg.grad_clip);
    s.adam_dis.step(s.dis);
  }

  // Generator step; the discriminators are bound frozen with their updated
  // values.
  const Components c = build_objective(s, g, net, rec, batch.identities(), true);
  fill_report(report, c);
  check_finite(report, s.iteration);
  s.gen.zero_grad();
  s.hfl.zero_grad();
  g.backward(c.total);
  optim::clip_grad_norm(s.gen, s.cfg.grad_clip);
  optim::clip_grad_norm(s.hfl, s.cfg.grad_clip);
  s.adam_gen.step(s.gen);
  s.sgd_hfl.step(s.hfl);
  hfl::clamp_alpha(s.hfl);
  ++s.iteration;
  return report;
}

loss::LossReport evaluate_losses(TrainState& s, const PairBatch& batch) {
  const nn::IdPig<float> net(s.cfg, s.gen, s.dis);
  Graph<float> g;
  Var<float> x1 = g.constant(nn::stack_images<float>(batch.visible()));
  Var<float> x2 = g.constant(nn::stack_images<float>(batch.infrared()));
  const auto rec = net.forward_generation(g, x1, x2, false);
  loss::LossReport report;
  report.adv_dis = loss::adv_discriminator_loss(g, net, rec.real, rec.cross, rec.illum, false).value().item();
  fill_report(report, build_objective(s, g, net, rec, batch.identities(), false));
  return report;
}

void save_checkpoint(const std::string& path, const TrainState& s) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write checkpoint " + path);
    io::BinaryWriter w(os);
    w.str(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.str(config_to_string(s.cfg));
    w.pod(static_cast<std::int64_t>(s.iteration));
    std::ostringstream rng;
    rng << s.rng;
    w.str(rng.str());
    optim::save_params(w, s.gen);
    optim::save_params(w, s.dis);
    optim::save_params(w, s.hfl);
    s.adam_gen.save(w);
    s.adam_dis.save(w);
    s.sgd_hfl.save(w);
    if (!os) throw Error("write failed: " + path);
  }
  fs::rename(tmp, path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read checkpoint " + path);
  io::BinaryReader r(is);
  if (r.str(64) != kCheckpointMagic) throw Error(path + " is not a checkpoint");
  if (r.u32() != kCheckpointVersion) throw Error(path + ": unsupported checkpoint version");
  std::istringstream cfg_text(r.str());
  TrainState s = TrainState::create(parse_config(cfg_text));
  s.iteration = static_cast<long>(r.pod<std::int64_t>());
  std::istringstream rng(r.str());
  rng >> s.rng;
  if (!rng) throw Error(path + ": corrupt random generator state");
  optim::load_params(r, s.gen);
  optim::load_params(r, s.dis);
  optim::load_params(r, s.hfl);
  s.adam_gen.load(r, s.gen);
  s.adam_dis.load(r, s.dis);
  s.sgd_hfl.load(r, s.hfl);
  return s;
}

TrainState fit(RunConfig cfg, const data::Dataset& ds, const FitOptions& opt) {
  const int n = ds.index.identities;
  if (n < 2) throw Error("training needs at least 2 identities, dataset has " + std::to_string(n));
  if (cfg.identities == 0) cfg.identities = n;
  if (cfg.identities != n) {
    throw Error("config identities = " + std::to_string(cfg.identities) + " but the dataset has " + std::to_string(n));
  }
  validate_config(cfg);
  if (opt.out_dir.empty()) throw Error("fit: output directory required");
  fs::create_directories(opt.out_dir);
  const fs::path out(opt.out_dir);

  TrainState s;
  std::vector<std::string> kept_rows;
  if (!opt.resume.empty()) {
    s = load_checkpoint(opt.resume);
    if (!(model_part(s.cfg) == model_part(cfg))) {
      throw Error("checkpoint " + opt.resume + " was trained with a different configuration");
    }
    s.cfg = cfg;
    std::ifstream old(out / "losses.csv");
    std::string line;
    if (std::getline(old, line) && line == loss::csv_header()) {
      while (std::getline(old, line)) {
        if (std::stol(line.substr(0, line.find(','))) <= s.iteration) kept_rows.push_back(line);
      }
    }
  } else {
    s = TrainState::create(cfg);
  }

  {
    std::ofstream snap(out / "config_snapshot.txt");
    write_config(snap, cfg);
  }
  std::ofstream csv(out / "losses.csv", std::ios::trunc);
  if (!csv) throw Error("cannot write " + (out / "losses.csv").string());
  csv << loss::csv_header() << '\n';
  for (const auto& row : kept_rows) csv << row << '\n';
  csv.flush();

  while (s.iteration < cfg.iterations) {
    const PairBatch batch = data::sample_pair_batch(ds, s.rng, cfg.batch_pairs);
    const loss::LossReport r = train_step(s, batch);
    csv << loss::csv_row(static_cast<int>(s.iteration), r, s.hfl.at("hfl.alpha").value[0]) << '\n';
    csv.flush();
    if (opt.on_step) opt.on_step(s.iteration, r);
    if ((cfg.checkpoint_every > 0 && s.iteration % cfg.checkpoint_every == 0) || s.iteration == cfg.iterations) {
      save_checkpoint((out / checkpoint_name(s.iteration)).string(), s);
    }
  }
  return s;
}

}  // namespace hicmd::train
