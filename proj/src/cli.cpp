#include "hicmd/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>

#include "hicmd/eval.hpp"
#include "hicmd/generation.hpp"
#include "hicmd/gradcheck.hpp"

namespace hicmd::cli {
namespace {

namespace fs = std::filesystem;

std::uint64_t effective_seed(std::uint64_t flag) {
  if (const char* env = std::getenv("HICMD_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw Error(std::string("HICMD_SEED is not an unsigned integer: ") + env);
    return v;
  }
  return flag;
}

// Refuses to write into a non-empty directory unless forced.
void prepare_out(const std::string& dir, bool force) {
  if (dir.empty()) throw Error("--out is required");
  if (fs::exists(dir) && !fs::is_directory(dir)) throw Error(dir + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw Error("output directory " + dir + " is not empty (use --force)");
  }
  fs::create_directories(dir);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<ImageTensor> pick(const data::Dataset& ds, const std::vector<int>& ids) {
  std::vector<ImageTensor> out;
  for (int i : ids) out.push_back(ds.images[i]);
  return out;
}

struct MakeSynthetic {
  std::string out, size = "64x32";
  int identities = 20, poses = 10;
  double noise = 0;
  std::uint64_t seed = 0;
  bool force = false;

  int run(std::ostream& os) const {
    if (identities < 4) {
      throw Error("--identities " + std::to_string(identities) +
                  ": training needs at least 4 identities (batches hold 4 distinct people); smaller sets are eval-only");
    }
    data::SyntheticSpec spec;
    spec.identities = identities;
    spec.poses = poses;
    spec.noise = noise;
    if (std::sscanf(size.c_str(), "%dx%d", &spec.height, &spec.width) != 2) throw Error("--size expects HxW, got " + size);
    prepare_out(out, force);
    const auto syn = data::make_synthetic(spec, effective_seed(seed), out);
    os << "wrote " << syn.index.records.size() << " images (" << identities << " identities x 2 modalities x " << poses
       << " poses) to " << out << '\n';
    return 0;
  }
};

struct Train {
  std::string config, data, out, resume;
  std::uint64_t seed = 0;
  bool seed_given = false, force = false;
  int iterations = 0;
  int log_every = 100;

  int run(std::ostream& os) const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
    if (seed_given || std::getenv("HICMD_SEED")) cfg.seed = effective_seed(seed);
    if (iterations > 0) cfg.iterations = iterations;
    if (!data.empty()) cfg.data = data;
    if (cfg.data.empty()) throw Error("no dataset: pass --data or set `data` in the config");
    validate_config(cfg);
    if (resume.empty()) prepare_out(out, force);
    const auto ds = data::load_dataset(cfg.data, cfg.height, cfg.width);
    train::FitOptions opt;
    opt.out_dir = out;
    opt.resume = resume;
    opt.on_step = [&](long it, const loss::LossReport& r) {
      if (log_every > 0 && (it % log_every == 0 || it == cfg.iterations)) {
        os << "iter " << it << " total " << fmt("%.4f", r.total) << " same " << fmt("%.4f", r.recon_same) << " cross "
           << fmt("%.4f", r.recon_cross) << " ce " << fmt("%.4f", r.ce) << " trip " << fmt("%.4f", r.trip) << '\n';
      }
    };
    const auto s = train::fit(cfg, ds, opt);
    os << "finished at iteration " << s.iteration << "; checkpoint " << (fs::path(out) / train::checkpoint_name(s.iteration)).string()
       << '\n';
    return 0;
  }
};

struct Eval {
  std::string checkpoint, data, out, protocol = "allsearch";
  int trials = eval::kDefaultTrials, bins = 20;
  std::uint64_t seed = 0;
  bool force = false;

  int run(std::ostream& os) const {
    auto s = train::load_checkpoint(checkpoint);
    const std::string root = data.empty() ? s.cfg.data : data;
    const auto ds = data::load_dataset(root, s.cfg.height, s.cfg.width);
    if (ds.index.identities != s.cfg.identities) {
      throw Error("checkpoint classifies " + std::to_string(s.cfg.identities) + " identities but " + root + " has " +
                  std::to_string(ds.index.identities));
    }
    prepare_out(out, force);
    std::vector<int> ids = ds.index.select(data::Split::kQuery);
    const auto gallery_ids = ds.index.select(data::Split::kGallery);
    ids.insert(ids.end(), gallery_ids.begin(), gallery_ids.end());
    const auto images = pick(ds, ids);
    const auto feats = eval::extract_features(s, images);
    std::vector<hfl::FeatureVector> vis, ir;
    for (const auto& f : feats) (f.modality == kVisible ? vis : ir).push_back(f);

    std::mt19937_64 rng(effective_seed(seed));
    eval::Aggregate agg;
    if (protocol == "allsearch") {
      agg = eval::single_shot_all_search(ir, vis, trials, rng);
    } else if (protocol == "regdb") {
      agg = eval::regdb_protocol(vis, ir, trials, rng);
    } else {
      throw Error("unknown protocol '" + protocol + "' (allsearch, regdb)");
    }
    const auto hist = eval::distance_histogram(feats, bins);
    const double r10 = agg.cmc.size() >= 10 ? agg.cmc[9] : agg.cmc.back();

    const fs::path dir(out);
    eval::write_cmc_csv((dir / "cmc.csv").string(), agg);
    eval::write_histogram_csv((dir / "histogram.csv").string(), hist);
    hfl::write_features((dir / "features.bin").string(), feats);
    {
      std::ofstream m(dir / "metrics.csv");
      m << "protocol,trials,rank1,rank10,mAP,intra_mean,inter_mean\n"
        << protocol << ',' << trials << ',' << fmt("%.10f", agg.cmc[0]) << ',' << fmt("%.10f", r10) << ','
        << fmt("%.10f", agg.map) << ',' << fmt("%.10f", hist.intra_mean) << ',' << fmt("%.10f", hist.inter_mean) << '\n';
    }
    os << "protocol " << protocol << " trials " << trials << '\n'
       << "rank-1 " << fmt("%.2f", 100 * agg.cmc[0]) << "%  rank-10 " << fmt("%.2f", 100 * r10) << "%  mAP "
       << fmt("%.2f", 100 * agg.map) << "%\n"
       << "distance intra " << fmt("%.4f", hist.intra_mean) << " inter " << fmt("%.4f", hist.inter_mean) << '\n';
    return 0;
  }
};

struct Generate {
  std::string checkpoint, data, out, mode = "swap-excluded";
  int rows = 4, cols = 4;
  std::uint64_t seed = 0;
  bool force = false;

  int run(std::ostream& os) const {
    const gen::SwapMode m = gen::parse_swap_mode(mode);
    auto s = train::load_checkpoint(checkpoint);
    const std::string root = data.empty() ? s.cfg.data : data;
    const auto ds = data::load_dataset(root, s.cfg.height, s.cfg.width);
    if (rows < 1 || cols < 1) throw Error("--rows and --cols must be positive");
    std::vector<int> pool = ds.index.select(data::Split::kQuery);
    const auto gal = ds.index.select(data::Split::kGallery);
    pool.insert(pool.end(), gal.begin(), gal.end());
    if (pool.size() < static_cast<std::size_t>(rows + cols)) throw Error("not enough query/gallery images for the grid");
    std::mt19937_64 rng(effective_seed(seed));
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::vector<int> in_ids(pool.begin(), pool.begin() + rows), ref_ids(pool.begin() + rows, pool.begin() + rows + cols);
    prepare_out(out, force);
    const auto grid = gen::generate_grid(s, pick(ds, in_ids), pick(ds, ref_ids), m);
    const fs::path dir(out);
    image::write_ppm((dir / "grid.ppm").string(), gen::compose_grid(grid));
    std::ofstream man(dir / "grid.csv");
    man << "mode,row,col,input_image,input_identity,reference_image,reference_identity\n";
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        const auto& a = ds.index.records[in_ids[i]];
        const auto& b = ds.index.records[ref_ids[j]];
        man << mode << ',' << i + 1 << ',' << j + 1 << ',' << a.path << ',' << a.identity << ',' << b.path << ','
            << b.identity << '\n';
      }
    }
    os << "wrote " << rows << "x" << cols << " " << mode << " grid to " << (dir / "grid.ppm").string() << '\n';
    return 0;
  }
};

struct Interpolate {
  std::string checkpoint, data, out, pair;
  int steps = 5;
  bool force = false;

  int run(std::ostream& os) const {
    if (steps < 2) throw Error("--steps must be at least 2");
    const auto comma = pair.find(',');
    if (comma == std::string::npos) throw Error("--pair expects A,B (image paths relative to the dataset root)");
    auto s = train::load_checkpoint(checkpoint);
    const std::string root = data.empty() ? s.cfg.data : data;
    const auto ds = data::load_dataset(root, s.cfg.height, s.cfg.width);
    auto find = [&](const std::string& rel) {
      for (std::size_t i = 0; i < ds.index.records.size(); ++i) {
        if (ds.index.records[i].path == rel) return ds.images[i];
      }
      throw Error("image " + rel + " not found under " + root);
    };
    const ImageTensor a = find(pair.substr(0, comma)), b = find(pair.substr(comma + 1));
    prepare_out(out, force);
    const auto strip = gen::interpolate_strip(s, a, b, steps);
    const fs::path dir(out);
    image::write_ppm((dir / "interpolation.ppm").string(), gen::compose_strip(strip));
    std::ofstream man(dir / "interpolation.csv");
    man << "step,t\n";
    for (int k = 0; k < steps; ++k) man << k << ',' << fmt("%.6f", static_cast<double>(k) / (steps - 1)) << '\n';
    os << "wrote " << steps << "-step interpolation to " << (dir / "interpolation.ppm").string() << '\n';
    return 0;
  }
};

struct GradCheck {
  std::string config, corrupt;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;

  int run(std::ostream& os) const {
    const RunConfig cfg = config.empty() ? gradcheck::tiny_config() : load_config(config);
    gradcheck::Options opt;
    opt.seed = effective_seed(seed);
    opt.corrupt = corrupt;
    opt.tolerance = tolerance;
    bool ok = true;
    os << "loss,max_rel_error,coordinates,result\n";
    for (const auto& e : gradcheck::run(cfg, opt)) {
      os << e.name << ',' << fmt("%.3e", e.max_rel_error) << ',' << e.coordinates << ',' << (e.pass ? "PASS" : "FAIL")
         << '\n';
      ok = ok && e.pass;
    }
    return ok ? 0 : 1;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical cross-modality disentanglement for visible-infrared re-identification"};
  app.require_subcommand(1, 1);

  MakeSynthetic mk;
  auto* c_mk = app.add_subcommand("make-synthetic", "Render the procedural two-modality dataset");
  c_mk->add_option("--out", mk.out, "Dataset root")->required();
  c_mk->add_option("--identities", mk.identities, "Number of identities (4..20)");
  c_mk->add_option("--poses", mk.poses, "Poses per identity and modality");
  c_mk->add_option("--size", mk.size, "Image size HxW");
  c_mk->add_option("--noise", mk.noise, "Pixel noise std in [0, 1] units");
  c_mk->add_option("--seed", mk.seed, "Random seed");
  c_mk->add_flag("--force", mk.force, "Write into a non-empty directory");

  Train tr;
  auto* c_tr = app.add_subcommand("train", "Train the generation network and feature module");
  c_tr->add_option("--config", tr.config, "Config file (key = value)");
  c_tr->add_option("--data", tr.data, "Dataset root");
  c_tr->add_option("--out", tr.out, "Run directory")->required();
  c_tr->add_option("--resume", tr.resume, "Checkpoint to continue from");
  auto* seed_opt = c_tr->add_option("--seed", tr.seed, "Random seed (overrides the config)");
  c_tr->add_option("--iterations", tr.iterations, "Override the iteration count");
  c_tr->add_option("--log-every", tr.log_every, "Progress line interval (0 = quiet)");
  c_tr->add_flag("--force", tr.force, "Write into a non-empty directory");

  Eval ev;
  auto* c_ev = app.add_subcommand("eval", "Cross-modality retrieval metrics");
  c_ev->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  c_ev->add_option("--data", ev.data, "Dataset root (default: the one in the checkpoint config)");
  c_ev->add_option("--protocol", ev.protocol, "allsearch or regdb");
  c_ev->add_option("--trials", ev.trials, "Random gallery/split trials");
  c_ev->add_option("--bins", ev.bins, "Distance histogram bins");
  c_ev->add_option("--seed", ev.seed, "Random seed");
  c_ev->add_option("--out", ev.out, "Directory for metrics.csv, cmc.csv, histogram.csv")->required();
  c_ev->add_flag("--force", ev.force, "Write into a non-empty directory");

  Generate gn;
  auto* c_gn = app.add_subcommand("generate", "Factor-swap image grid");
  c_gn->add_option("--checkpoint", gn.checkpoint, "Checkpoint file")->required();
  c_gn->add_option("--data", gn.data, "Dataset root");
  c_gn->add_option("--mode", gn.mode, "swap-excluded, swap-discriminative or swap-illum");
  c_gn->add_option("--rows", gn.rows, "Input images");
  c_gn->add_option("--cols", gn.cols, "Reference images");
  c_gn->add_option("--seed", gn.seed, "Random seed for image selection");
  c_gn->add_option("--out", gn.out, "Directory for grid.ppm and grid.csv")->required();
  c_gn->add_flag("--force", gn.force, "Write into a non-empty directory");

  Interpolate ip;
  auto* c_ip = app.add_subcommand("interpolate", "Interpolate ID-excluded codes between two images");
  c_ip->add_option("--checkpoint", ip.checkpoint, "Checkpoint file")->required();
  c_ip->add_option("--data", ip.data, "Dataset root");
  c_ip->add_option("--pair", ip.pair, "A,B image paths relative to the dataset root")->required();
  c_ip->add_option("--steps", ip.steps, "Images in the strip (>= 2)");
  c_ip->add_option("--out", ip.out, "Directory for interpolation.ppm")->required();
  c_ip->add_flag("--force", ip.force, "Write into a non-empty directory");

  GradCheck gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every loss");
  c_gc->add_option("--config", gc.config, "Config file (default: built-in tiny configuration)");
  c_gc->add_option("--corrupt", gc.corrupt, "Perturb the analytic gradient of one loss");
  c_gc->add_option("--tolerance", gc.tolerance, "Maximum relative error");
  c_gc->add_option("--seed", gc.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  tr.seed_given = seed_opt->count() > 0;
  try {
    if (c_mk->parsed()) return mk.run(out);
    if (c_tr->parsed()) return tr.run(out);
    if (c_ev->parsed()) return ev.run(out);
    if (c_gn->parsed()) return gn.run(out);
    if (c_ip->parsed()) return ip.run(out);
    if (c_gc->parsed()) return gc.run(out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace hicmd::cli
