// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--work DIR] [--reuse] [criterion ...]
//
// Without criteria all seven run. The work directory is wiped first unless
// --reuse is given, in which case finished runs found there are kept. The
// result lines are also appended to DIR/report.txt.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hicmd/cli.hpp"
#include "hicmd/data.hpp"
#include "hicmd/eval.hpp"
#include "hicmd/gradcheck.hpp"
#include "hicmd/hfl.hpp"
#include "hicmd/image_io.hpp"
#include "hicmd/losses.hpp"
#include "hicmd/probe.hpp"
#include "metric_oracle.hpp"

using namespace hicmd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw Error("cannot read " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// Header-keyed rows of a small CSV file.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw Error("cannot read " + p.string());
  std::string line;
  std::getline(is, line);
  const auto header = split_csv(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(is, line)) {
    const auto cells = split_csv(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(row);
  }
  return rows;
}

void hicmd_cli(std::vector<std::string> args) {
  std::fprintf(stderr, "  $ hicmd");
  for (const auto& a : args) std::fprintf(stderr, " %s", a.c_str());
  std::fprintf(stderr, "\n");
  args.insert(args.begin(), "hicmd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) throw Error("hicmd " + args[1] + " exited with " + std::to_string(code) + ": " + err.str());
}

struct Metrics {
  double rank1 = 0, rank10 = 0, map = 0, intra = 0, inter = 0;
};

Metrics read_metrics(const fs::path& dir) {
  const auto rows = read_csv(dir / "metrics.csv");
  if (rows.size() != 1) throw Error("metrics.csv should hold one row");
  const auto& r = rows[0];
  return {std::stod(r.at("rank1")), std::stod(r.at("rank10")), std::stod(r.at("mAP")), std::stod(r.at("intra_mean")),
          std::stod(r.at("inter_mean"))};
}

class Suite {
 public:
  Suite(fs::path work, bool reuse) : work_(std::move(work)), reuse_(reuse) {}

  // Synthetic dataset shared by the end-to-end criteria.
  const fs::path& dataset() {
    if (!data_ready_) {
      const fs::path d = work_ / "data";
      if (!(reuse_ && fs::exists(d / "factors.csv"))) {
        hicmd_cli({"make-synthetic", "--out", d.string(), "--identities", "20", "--poses", "10", "--size", "64x32",
                   "--noise", "0.03", "--seed", "7", "--force"});
      }
      data_ready_ = true;
    }
    return data_path_ = work_ / "data";
  }

  // Full-length train + eval under a config override; returns the run dir.
  fs::path trained(const std::string& name, const std::string& config_text) {
    const fs::path run = work_ / ("run_" + name), ev = work_ / ("eval_" + name);
    const fs::path ck = run / "checkpoint_2000.bin";
    if (done_.count(name) || (reuse_ && fs::exists(ck) && fs::exists(ev / "metrics.csv"))) return run;
    const fs::path cfg = work_ / (name + ".cfg");
    std::ofstream(cfg) << config_text;
    const auto t0 = std::chrono::steady_clock::now();
    hicmd_cli({"train", "--config", cfg.string(), "--data", dataset().string(), "--out", run.string(), "--seed", "1",
               "--log-every", "0", "--force"});
    train_seconds_[name] = seconds_since(t0);
    hicmd_cli({"eval", "--checkpoint", ck.string(), "--data", dataset().string(), "--out", ev.string(), "--seed", "1",
               "--force"});
    done_.insert(name);
    return run;
  }

  Metrics metrics(const std::string& name) { return read_metrics(work_ / ("eval_" + name)); }

  Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto entries = gradcheck::run(gradcheck::tiny_config(), gradcheck::Options{});
    const double secs = seconds_since(t0);
    bool ok = entries.size() == gradcheck::loss_names().size();
    double worst = 0;
    std::string failed;
    for (const auto& e : entries) {
      worst = std::max(worst, e.max_rel_error);
      if (!e.pass) {
        ok = false;
        failed += " " + e.name;
      }
    }
    std::string d = std::to_string(entries.size()) + " losses, worst relative error " + fmt("%.2e", worst) +
                    " (limit 1e-4), " + fmt("%.1f", secs) + " s (limit 120 s)";
    if (!failed.empty()) d += "; failing:" + failed;
    return {ok && secs <= 120.0, d};
  }

  Outcome metric_oracle() {
    bool ok = true;
    eval::Matrix d = {{0.3, 0.1, 0.9}};
    const auto one = eval::cmc_map(d, {5}, {5, 2, 7}, 3);
    ok = ok && one.ap.size() == 1 && one.ap[0] == 0.5 && one.cmc == std::vector<double>{0, 1, 1};

    std::mt19937_64 rng(20240);
    int agree = 0;
    const int instances = 200;
    for (int inst = 0; inst < instances; ++inst) {
      std::uniform_int_distribution<int> gsize(1, 6), qsize(1, 5), label(1, 3), dist(0, 4);
      const int ng = gsize(rng), nq = qsize(rng);
      std::vector<int> gl(ng), ql(nq);
      for (auto& l : gl) l = label(rng);
      for (auto& l : ql) l = gl[std::uniform_int_distribution<int>(0, ng - 1)(rng)];
      eval::Matrix m(nq, std::vector<double>(ng));
      for (auto& row : m)
        for (auto& v : row) v = dist(rng) * 0.5;
      const auto got = eval::cmc_map(m, ql, gl, 6);
      const auto want = oracle::brute_force(m, ql, gl, 6);
      agree += (got.map == want.map && got.cmc == want.cmc) ? 1 : 0;
    }
    return {ok && agree == instances, "rank-2-of-3 example AP " + fmt("%.3f", one.ap.empty() ? -1 : one.ap[0]) +
                                          "; exact agreement on " + std::to_string(agree) + "/" +
                                          std::to_string(instances) + " random instances"};
  }

  Outcome closed_form() {
    Graph<double> g;
    auto filled = [&](Shape s, double v) { return g.constant(Tensor<double>(std::move(s), v)); };
    std::array<std::array<Var<double>, 2>, 2> fakes;
    for (auto& row : fakes)
      for (auto& s : row) s = filled({4, 1}, 0.5);
    std::array<Var<double>, 2> real = {filled({4, 1}, 0.5), filled({4, 1}, 0.5)};
    const double gen = loss::adv_generator_loss_from_scores(fakes, AdversarialForm::kMinimax).value().item();
    const double dis = loss::adv_discriminator_loss_from_scores(real, fakes).value().item();
    const double ce = hfl::ce_loss(filled({4, 20}, 0.0), {1, 7, 13, 20}).value().item();
    Tensor<double> e1({1, 6}, 0.0);
    e1[0] = 1.0;
    const double kl = loss::kl_loss(g.constant(e1), g.constant(Tensor<double>({1, 6}, 0.0))).value().item();

    const double tol = 1e-9;
    const bool ok = std::abs(gen - 4 * std::log(0.5)) <= tol && std::abs(dis + 6 * std::log(0.5)) <= tol &&
                    std::abs(ce - std::log(20.0)) <= tol && std::abs(kl - 0.5) <= tol;
    return {ok, "generator " + fmt("%.10f", gen) + ", discriminator " + fmt("%.10f", dis) + ", CE " + fmt("%.10f", ce) +
                    ", KL " + fmt("%.10f", kl)};
  }

  Outcome end_to_end() {
    trained("main", "");
    const auto rows = read_csv(work_ / "run_main" / "losses.csv");
    if (rows.size() < 2000) throw Error("losses.csv is short");
    const double at10 = std::stod(rows[9].at("recon_same"));
    double tail = 0;
    for (std::size_t i = rows.size() - 100; i < rows.size(); ++i) tail += std::stod(rows[i].at("recon_same"));
    tail /= 100;
    const Metrics m = metrics("main");
    const bool a = tail < 0.5 * at10;
    const bool b = m.rank1 >= 0.5 && m.map >= 0.5;
    const bool c = m.intra < m.inter;
    std::string d = "(a) recon_same " + fmt("%.4f", at10) + " at iteration 10, " + fmt("%.4f", tail) +
                    " mean of the last 100 " + (a ? "ok" : "FAIL") + "; (b) rank-1 " + fmt("%.3f", m.rank1) +
                    " (need >= 0.5), mAP " + fmt("%.3f", m.map) + " (need >= 0.5) " + (b ? "ok" : "FAIL") +
                    "; (c) intra " + fmt("%.3f", m.intra) + " < inter " + fmt("%.3f", m.inter) + " " + (c ? "ok" : "FAIL");
    bool t = true;
    if (train_seconds_.count("main")) {
      t = train_seconds_["main"] <= 1800;
      d += "; training " + fmt("%.0f", train_seconds_["main"]) + " s (limit 1800 s)";
    }
    return {a && b && c && t, d};
  }

  Outcome ablation() {
    trained("main", "");
    trained("original", "sampling = original\n");
    trained("prototype", "sampling = original\nfeature = p\n");
    trained("style", "sampling = original\nfeature = a\n");
    const double alt = metrics("main").map, orig = metrics("original").map, p = metrics("prototype").map,
                 a = metrics("style").map;
    const bool ok = alt > orig && orig >= p && p > a;
    return {ok, "mAP alternate/A+P " + fmt("%.4f", alt) + " > original/A+P " + fmt("%.4f", orig) + " >= original/P " +
                    fmt("%.4f", p) + " > original/A " + fmt("%.4f", a)};
  }

  Outcome determinism() {
    const fs::path cfg = work_ / "short.cfg";
    std::ofstream(cfg) << "iterations = 120\ncheckpoint_every = 60\n";
    for (const char* name : {"det_a", "det_b"}) {
      hicmd_cli({"train", "--config", cfg.string(), "--data", dataset().string(), "--out", (work_ / name).string(),
                 "--seed", "3", "--log-every", "0", "--force"});
      hicmd_cli({"eval", "--checkpoint", (work_ / name / "checkpoint_120.bin").string(), "--data",
                 dataset().string(), "--out", (work_ / (std::string(name) + "_eval")).string(), "--seed", "3", "--force"});
    }
    // Interrupted run: stop at 60, then resume into the same directory.
    const fs::path r = work_ / "det_resume";
    hicmd_cli({"train", "--config", cfg.string(), "--data", dataset().string(), "--out", r.string(), "--seed", "3",
               "--iterations", "60", "--log-every", "0", "--force"});
    hicmd_cli({"train", "--config", cfg.string(), "--data", dataset().string(), "--out", r.string(), "--seed", "3",
               "--resume", (r / "checkpoint_60.bin").string(), "--log-every", "0"});

    std::vector<std::string> diff;
    auto same = [&](const fs::path& x, const fs::path& y) {
      if (slurp(x) != slurp(y)) diff.push_back(fs::relative(x, work_).string());
    };
    same(work_ / "det_a" / "losses.csv", work_ / "det_b" / "losses.csv");
    for (const char* f : {"metrics.csv", "cmc.csv", "histogram.csv", "features.bin"})
      same(work_ / "det_a_eval" / f, work_ / "det_b_eval" / f);
    same(work_ / "det_a" / "losses.csv", r / "losses.csv");
    same(work_ / "det_a" / "checkpoint_120.bin", r / "checkpoint_120.bin");
    std::string d = "losses.csv, metrics.csv, cmc.csv, histogram.csv, features.bin identical across two 120-iteration "
                    "runs; resumed-at-60 losses.csv and final checkpoint identical to the uninterrupted run";
    if (!diff.empty()) {
      d = "differs:";
      for (const auto& x : diff) d += " " + x;
    }
    return {diff.empty(), d};
  }

  Outcome generation() {
    const fs::path run = trained("main", "");
    const fs::path out = work_ / "generate";
    hicmd_cli({"generate", "--checkpoint", (run / "checkpoint_2000.bin").string(), "--data", dataset().string(),
               "--mode", "swap-excluded", "--rows", "10", "--cols", "10", "--seed", "1", "--out", out.string(),
               "--force"});

    const auto ds = data::load_dataset(dataset().string(), 64, 32);
    std::map<std::string, int> by_path;
    std::vector<ImageTensor> train_images;
    std::vector<int> stripes, palettes;
    for (std::size_t i = 0; i < ds.index.records.size(); ++i) {
      const auto& rec = ds.index.records[i];
      by_path[rec.path] = static_cast<int>(i);
      if (rec.split != data::Split::kTrain) continue;
      train_images.push_back(ds.images[i]);
      stripes.push_back(data::identity_factors(rec.identity)[1]);
      palettes.push_back(rec.modality == kVisible ? data::kVisiblePalette : data::kInfraredPalette);
    }
    probe::StripeProbe stripe_probe;
    stripe_probe.fit(train_images, stripes);
    probe::PaletteProbe palette_probe;
    palette_probe.fit(train_images, palettes);

    const Tensor<float> grid = image::to_float(image::read_pnm((out / "grid.ppm").string()));
    const int h = 64, w = 32, gw = grid.dim(1);
    int cells = 0, stripe_ok = 0, palette_ok = 0, changed = 0, pose_cells = 0, pose_ok = 0;
    for (const auto& row : read_csv(out / "grid.csv")) {
      const int r = std::stoi(row.at("row")), c = std::stoi(row.at("col"));
      Tensor<float> t({h, w, 3});
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int k = 0; k < 3; ++k)
            t[(static_cast<std::size_t>(y) * w + x) * 3 + k] =
                grid[((static_cast<std::size_t>(r) * h + y) * gw + c * w + x) * 3 + k];
      const ImageTensor cell(t, kVisible, 1);
      const ImageTensor& in = ds.images.at(by_path.at(row.at("input_image")));
      const ImageTensor& ref = ds.images.at(by_path.at(row.at("reference_image")));
      const auto& ref_rec = ds.index.records[by_path.at(row.at("reference_image"))];
      ++cells;
      stripe_ok += stripe_probe.predict(cell) == data::identity_factors(std::stoi(row.at("input_identity")))[1];
      palette_ok += palette_probe.predict(cell) ==
                    (ref_rec.modality == kVisible ? data::kVisiblePalette : data::kInfraredPalette);
      double mad = 0;
      for (std::size_t i = 0; i < t.size(); ++i) mad += std::abs(t[i] - in.pixels()[i]);
      changed += mad / t.size() > 0.05 ? 1 : 0;
      const double ci = probe::horizontal_centroid(in), cr = probe::horizontal_centroid(ref),
                   cc = probe::horizontal_centroid(cell);
      if (std::abs(ci - cr) > 0.03) {
        ++pose_cells;
        pose_ok += std::abs(cc - cr) < std::abs(cc - ci) ? 1 : 0;
      }
    }
    if (cells == 0) throw Error("empty grid");
    auto frac = [&](int k, int n) { return n > 0 ? static_cast<double>(k) / n : 0.0; };
    const bool ok = frac(stripe_ok, cells) >= 0.8 && frac(palette_ok, cells) >= 0.8 && frac(changed, cells) >= 0.8;
    return {ok, "input stripe pattern recovered on " + std::to_string(stripe_ok) + "/" + std::to_string(cells) +
                    " cells (need 80%); palette follows the reference on " + std::to_string(palette_ok) + "/" +
                    std::to_string(cells) + "; cell differs from its input on " + std::to_string(changed) + "/" +
                    std::to_string(cells) + "; horizontal body position closer to the reference than to the input on " + std::to_string(pose_ok) +
                    "/" + std::to_string(pose_cells) + " cells whose input and reference positions differ (reported only)"};
  }

 private:
  fs::path work_;
  bool reuse_;
  bool data_ready_ = false;
  fs::path data_path_;
  std::map<std::string, double> train_seconds_;
  std::set<std::string> done_;
};

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "hicmd_acceptance";
  bool reuse = false;
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--reuse") {
      reuse = true;
    } else {
      try {
        chosen.insert(std::stoi(a));
      } catch (const std::exception&) {
        std::fprintf(stderr, "usage: acceptance [--work DIR] [--reuse] [criterion ...]\n");
        return 2;
      }
    }
  }
  unsetenv("HICMD_SEED");
  if (!reuse) fs::remove_all(work);
  fs::create_directories(work);

  Suite suite(work, reuse);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", [&] { return suite.gradients(); }},
      {"metric oracle", [&] { return suite.metric_oracle(); }},
      {"closed-form loss values", [&] { return suite.closed_form(); }},
      {"end-to-end synthetic run", [&] { return suite.end_to_end(); }},
      {"ablation direction", [&] { return suite.ablation(); }},
      {"determinism", [&] { return suite.determinism(); }},
      {"generation sanity", [&] { return suite.generation(); }},
  };
  std::ofstream report(work / "report.txt", std::ios::app);
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!chosen.empty() && !chosen.count(id)) continue;
    std::fprintf(stderr, "criterion %d: %s\n", id, criteria[k].first.c_str());
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    char head[96];
    std::snprintf(head, sizeof head, "%s criterion %d (%s): ", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str());
    std::printf("%s%s\n", head, o.detail.c_str());
    std::fflush(stdout);
    report << head << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
