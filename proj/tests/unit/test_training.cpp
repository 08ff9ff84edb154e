#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hicmd/training.hpp"

using namespace hicmd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunConfig small_config() {
  RunConfig c;
  c.height = 16;
  c.width = 8;
  c.proto_channels = 4;
  c.base_channels = 4;
  c.mlp_dim = 8;
  c.dis_channels = 4;
  c.embed_channels = 4;
  c.embed_dim = 8;
  c.feature_dim = 8;
  c.batch_pairs = 3;
  c.iterations = 6;
  c.checkpoint_every = 3;
  c.seed = 21;
  return c;
}

const data::Dataset& dataset() {
  static const data::Dataset ds = [] {
    const fs::path root = fs::temp_directory_path() / "hicmd_test_train_data";
    fs::remove_all(root);
    data::SyntheticSpec spec;
    spec.identities = 4;
    spec.poses = 4;
    spec.height = 16;
    spec.width = 8;
    data::make_synthetic(spec, 3, root.string());
    return data::load_dataset(root.string(), 16, 8);
  }();
  return ds;
}

fs::path fresh(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("a step updates all three parameter groups and reports finite losses") {
  RunConfig cfg = small_config();
  cfg.identities = 4;
  auto s = train::TrainState::create(cfg);
  const auto gen0 = s.gen.at("dec.out.w").value;
  // Earlier discriminator layers only start moving once the zero scoring layer has.
  const auto dis0 = s.dis.at("dis1.fc.w").value;
  const auto hfl0 = s.hfl.at("hfl.cls.w").value;
  std::mt19937_64 rng(1);
  auto batch = data::sample_pair_batch(dataset(), rng, 3);
  auto r = train::train_step(s, batch);
  CHECK(s.iteration == 1);
  CHECK_FALSE(s.gen.at("dec.out.w").value == gen0);
  CHECK_FALSE(s.dis.at("dis1.fc.w").value == dis0);
  CHECK_FALSE(s.hfl.at("hfl.cls.w").value == hfl0);
  CHECK(std::isfinite(r.total));
  CHECK(r.total == doctest::Approx(loss::weighted_total(r, cfg)).epsilon(1e-4));
  CHECK(r.recon_total == doctest::Approx(loss::weighted_recon(r, cfg)).epsilon(1e-4));
  // Untrained discriminators output 0.5: log terms are exactly known.
  CHECK(r.adv_dis == doctest::Approx(6 * std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("non-finite losses are reported by name") {
  RunConfig cfg = small_config();
  cfg.identities = 4;
  auto s = train::TrainState::create(cfg);
  s.gen.at("enc_a1.fc.w").value[0] = std::numeric_limits<float>::quiet_NaN();
  std::mt19937_64 rng(1);
  auto batch = data::sample_pair_batch(dataset(), rng, 3);
  CHECK_THROWS_WITH_AS(train::train_step(s, batch), doctest::Contains("non-finite"), Error);
}

TEST_CASE("training is deterministic and resume reproduces the uninterrupted run") {
  RunConfig cfg = small_config();
  const fs::path a = fresh("hicmd_run_a"), b = fresh("hicmd_run_b"), c = fresh("hicmd_run_c");
  train::FitOptions oa;
  oa.out_dir = a.string();
  train::fit(cfg, dataset(), oa);
  train::FitOptions ob;
  ob.out_dir = b.string();
  train::fit(cfg, dataset(), ob);
  CHECK(slurp(a / "losses.csv") == slurp(b / "losses.csv"));
  CHECK(slurp(a / "checkpoint_6.bin") == slurp(b / "checkpoint_6.bin"));
  CHECK(fs::exists(a / "checkpoint_3.bin"));
  CHECK(fs::exists(a / "config_snapshot.txt"));

  const std::string csv = slurp(a / "losses.csv");
  CHECK(csv.rfind(loss::csv_header() + "\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  // Stop at 3, then resume to 6 in a directory that also holds a stale row.
  RunConfig half = cfg;
  half.iterations = 3;
  train::FitOptions oc;
  oc.out_dir = c.string();
  train::fit(half, dataset(), oc);
  {
    std::ofstream app(c / "losses.csv", std::ios::app);
    app << "4,stale\n";
  }
  oc.resume = (c / "checkpoint_3.bin").string();
  auto resumed = train::fit(cfg, dataset(), oc);
  CHECK(resumed.iteration == 6);
  CHECK(slurp(c / "losses.csv") == slurp(a / "losses.csv"));
  CHECK(slurp(c / "checkpoint_6.bin") == slurp(a / "checkpoint_6.bin"));

  // A checkpoint from a different model shape is refused.
  RunConfig other = cfg;
  other.style_dim = 4;
  train::FitOptions od;
  od.out_dir = c.string();
  od.resume = (c / "checkpoint_3.bin").string();
  CHECK_THROWS_AS(train::fit(other, dataset(), od), Error);
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("checkpoint round-trip restores the full state") {
  RunConfig cfg = small_config();
  cfg.identities = 4;
  auto s = train::TrainState::create(cfg);
  std::mt19937_64 rng(5);
  train::train_step(s, data::sample_pair_batch(dataset(), rng, 3));
  const auto path = (fs::temp_directory_path() / "hicmd_ck.bin").string();
  train::save_checkpoint(path, s);
  auto t = train::load_checkpoint(path);
  CHECK(t.cfg == s.cfg);
  CHECK(t.iteration == 1);
  CHECK(t.rng == s.rng);
  CHECK(t.adam_gen == s.adam_gen);
  CHECK(t.sgd_hfl == s.sgd_hfl);
  for (auto& [name, p] : s.gen) CHECK(t.gen.at(name).value == p.value);
  auto batch = data::sample_pair_batch(dataset(), rng, 3);
  CHECK(train::train_step(s, batch) == train::train_step(t, batch));
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTACHECKPOINT";
  }
  CHECK_THROWS_AS(train::load_checkpoint(path), Error);
  fs::remove(path);
}
