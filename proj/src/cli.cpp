#include "inrgan/cli.hpp"

#include "inrgan/errors.hpp"
#include "inrgan/metrics.hpp"
#include "inrgan/rng.hpp"
#include "inrgan/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace inrgan {

namespace fs = std::filesystem;

RunConfig resolve_config(const std::optional<std::string>& path, std::optional<std::uint64_t> seed) {
  nlohmann::json doc = nlohmann::json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config", *path);
    doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config: parse error in " + *path);
  }
  apply_env_overrides(doc, environment_map());
  if (seed) doc["train"]["seed"] = *seed;
  return run_config_from_json(doc);
}

Extent parse_extent(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--extent: '" + item + "' is not a number");
    }
  }
  if (v.size() != 4) throw ConfigError("--extent expects x0,x1,y0,y1");
  for (double x : v) {
    if (!std::isfinite(x)) throw ConfigError("--extent values must be finite");
  }
  if (!(v[0] < v[1] && v[2] < v[3])) throw ConfigError("--extent needs x0 < x1 and y0 < y1");
  return {v[0], v[1], v[2], v[3]};
}

namespace {

struct Options {
  std::optional<std::string> config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  int resolution = 0;
  int factor = 2;
  std::string extent = "-1.5,1.5,-1.5,1.5";
  std::optional<double> psi;
  std::string space;
  std::string mode;
  int count = 16;
  int steps = 8;
  std::uint64_t z1_seed = 1;
  std::uint64_t z2_seed = 2;
  bool resume = false;
  bool verbose = false;
  std::optional<std::string> dataset;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file", path.string());
  out << text;
  if (!out) throw IoError("write failed", path.string());
}

fs::path ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory (" + ec.message() + ")", dir);
  return fs::path(dir);
}

std::vector<Image> as_images(std::vector<Mat<float>> mats, int r) {
  std::vector<Image> out;
  out.reserve(mats.size());
  for (auto& m : mats) out.emplace_back(r, r, std::move(m));
  return out;
}

std::optional<float> psi_of(const Options& o) {
  if (!o.psi) return std::nullopt;
  if (!(*o.psi >= 0 && *o.psi <= 1)) throw ConfigError("--psi must lie in [0, 1]");
  return static_cast<float>(*o.psi);
}

std::uint64_t seed_or(const Options& o, const RunConfig& c) { return o.seed ? *o.seed : c.train.seed; }

void cmd_train(const Options& o, std::ostream& out) {
  RunConfig config = resolve_config(o.config, o.seed);
  const fs::path dir = ensure_dir(o.out);
  const ImageDataset data = build_dataset(config);
  write_text(dir / "config.json", to_json(config).dump(2) + "\n");
  write_text(dir / "config_hash.txt", config_hash(config) + "\n");
  if (config.data.source == "synthetic") write_keypoints_csv((dir / "keypoints.csv").string(), data.keypoints);
  auto trainer = std::make_unique<Trainer>(config);
  LoopOptions lo;
  lo.out_dir = dir.string();
  lo.resume = o.resume;
  lo.quiet = !o.verbose;
  train_loop(*trainer, data, lo);
  out << "trained " << trainer->step_count() << " steps; checkpoint " << (dir / "latest.ckpt").string() << "\n";
}

void cmd_sample(const Options& o, std::ostream& out) {
  LoadedModel m = load_model(o.checkpoint);
  if (o.out.empty()) throw ConfigError("--out is required");
  if (o.count < 1) throw ConfigError("--count must be positive");
  const auto& g = *m.generator;
  const Mat<float> z = eval_latents(m.config, o.count, seed_or(o, m.config));
  const int r = g.arch().resolution();
  write_png(o.out, tile_grid(as_images(g.generate_images(z, psi_of(o)), r)));
  out << o.out << "\n";
}

void cmd_superres(const Options& o, std::ostream& out) {
  LoadedModel m = load_model(o.checkpoint);
  if (o.factor < 1) throw ConfigError("--factor must be >= 1");
  const fs::path dir = ensure_dir(o.out);
  const auto& g = *m.generator;
  const Mat<float> w = g.map_latent(eval_latents(m.config, o.count, seed_or(o, m.config)));
  const int r = g.arch().resolution();
  const auto native = as_images(g.decode(w, plan_native(g.arch()), psi_of(o)), r);
  const auto dense = as_images(g.decode(w, plan_superres(g.arch(), o.factor), psi_of(o)), r * o.factor);
  write_png((dir / "native.png").string(), tile_grid(native));
  write_png((dir / "superres.png").string(), tile_grid(dense));
  out << (dir / "native.png").string() << "\n" << (dir / "superres.png").string() << "\n";
}

void cmd_zoom(const Options& o, std::ostream& out) {
  LoadedModel m = load_model(o.checkpoint);
  if (o.out.empty()) throw ConfigError("--out is required");
  const Extent extent = parse_extent(o.extent);
  const auto& g = *m.generator;
  const Mat<float> w = g.map_latent(eval_latents(m.config, o.count, seed_or(o, m.config)));
  const int r = g.arch().resolution();
  write_png(o.out, tile_grid(as_images(g.decode(w, plan_native(g.arch(), extent), psi_of(o)), r)));
  out << o.out << "\n";
}

void cmd_lowres(const Options& o, std::ostream& out) {
  LoadedModel m = load_model(o.checkpoint);
  const auto& g = *m.generator;
  if (o.resolution < 1 || o.resolution > g.arch().resolution()) {
    throw ConfigError("--resolution must lie in [1, " + std::to_string(g.arch().resolution()) + "]");
  }
  const fs::path dir = ensure_dir(o.out);
  const Mat<float> w = g.map_latent(eval_latents(m.config, o.count, seed_or(o, m.config)));
  const RenderPlan plan = plan_lowres(g.arch(), o.resolution);
  const int r = plan.resolutions.back();
  write_png((dir / "lowres.png").string(), tile_grid(as_images(g.decode(w, plan, psi_of(o)), r)));
  const MacReport full = count_macs(g.arch(), m.config.generator, g.arch().resolution());
  const MacReport low = count_macs(g.arch(), m.config.generator, o.resolution);
  write_text(dir / "macs.csv", mac_report_csv({full, low}));
  out << "macs " << low.total << " at " << o.resolution << " vs " << full.total << " at " << full.resolution << "\n";
}

void cmd_macs(const Options& o, std::ostream& out) {
  const RunConfig config = resolve_config(o.config, o.seed);
  const InrArchitecture arch = make_architecture(config.arch);
  std::vector<MacReport> sweep;
  for (int r = arch.resolution() * 2; r >= 1; r /= 2) sweep.push_back(count_macs(arch, config.generator, r));
  std::ostringstream summary;
  summary << "resolution,total_macs,hypernetwork_macs,inr_macs\n";
  for (const auto& rep : sweep) {
    summary << rep.resolution << "," << rep.total << "," << rep.hypernetwork << "," << rep.total - rep.hypernetwork << "\n";
  }
  if (!o.out.empty()) {
    const fs::path dir = ensure_dir(o.out);
    write_text(dir / "macs_sweep.csv", summary.str());
    write_text(dir / "macs_detail.csv", mac_report_csv(sweep));
  }
  out << summary.str();
}

void cmd_kpl(const Options& o, std::ostream& out) {
  LoadedModel m = load_model(o.checkpoint);
  auto& g = *m.generator;
  const EvalConfig& ev = m.config.eval;
  const std::string space_name = o.space.empty() ? ev.kpl_space : o.space;
  if (space_name != "z" && space_name != "w") throw ConfigError("--space must be z or w for kpl");
  const std::string mode = o.mode.empty() ? "generated" : o.mode;
  const int shapes = m.config.data.synthetic.shapes_per_image;
  const double bg = m.config.data.synthetic.background;
  const std::uint64_t seed = seed_or(o, m.config);
  KplResult res;
  if (mode == "generated") {
    const KeypointOracle oracle = [&](const Image& im) { return keypoints_center_of_mass(im, shapes, bg); };
    res = kpl(g, oracle, ev.kpl_train, ev.kpl_test, space_name == "z" ? LatentSpace::z : LatentSpace::w, seed, psi_of(o));
  } else if (mode == "projected") {
    if (space_name != "w") throw ConfigError("projected kpl regresses from projected w; use --space w");
    SyntheticShapeSpec spec = m.config.data.synthetic;
    spec.seed = derive_seed(seed, Stream::projection);
    const int n = ev.kpl_train + ev.kpl_test;
    const ImageDataset real = make_synthetic(spec, n);
    Mat<double> x(n, m.config.generator.hidden_dim);
    ProjectionOptions po;
    po.steps = ev.projection_steps;
    po.lr = ev.projection_lr;
    po.extractor_seed = ev.extractor_seed;
    for (int i = 0; i < n; ++i) x.row(i) = project_latent(g, real.images[i], po).w.cast<double>();
    res = kpl_fit(x.topRows(ev.kpl_train), real.keypoints.topRows(ev.kpl_train), x.bottomRows(ev.kpl_test),
                  real.keypoints.bottomRows(ev.kpl_test), derive_seed(seed, Stream::eval, 12));
  } else {
    throw ConfigError("--mode must be generated or projected for kpl");
  }
  const std::string csv = metric_csv({{"kpl_value", res.kpl_value},
                                      {"kpl_random", res.kpl_random},
                                      {"target_variance", res.target_variance},
                                      {"regularized", res.regularized ? 1.0 : 0.0},
                                      {"n_train", static_cast<double>(res.n_train)},
                                      {"n_test", static_cast<double>(res.n_test)}},
                                     config_hash(m.config), seed);
  if (!o.out.empty()) write_text(o.out, csv);
  out << csv;
}

void cmd_fid(const Options& o, std::ostream& out) {
  LoadedModel m = load_model(o.checkpoint);
  auto& g = *m.generator;
  const EvalConfig& ev = m.config.eval;
  const std::uint64_t seed = seed_or(o, m.config);
  const int r = g.arch().resolution();
  const std::string mode = o.mode.empty() ? "native" : o.mode;
  const int factor = mode == "upsampled" ? o.factor : 1;
  if (factor < 1) throw ConfigError("--factor must be >= 1");
  ImageDataset real;
  if (o.dataset) {
    real = load_folder(*o.dataset, r * factor, false);
  } else if (m.config.data.source == "synthetic") {
    SyntheticShapeSpec spec = m.config.data.synthetic;
    spec.resolution = r * factor;
    spec.seed = derive_seed(seed, Stream::eval, 21);
    real = make_synthetic(spec, ev.fid_samples);
  } else {
    real = load_folder(m.config.data.folder, r * factor, false);
  }
  const Mat<float> w = g.map_latent(eval_latents(m.config, ev.fid_samples, seed));
  const auto fakes = as_images(g.decode(w, plan_native(g.arch()), psi_of(o)), r);
  std::vector<MetricRow> rows;
  if (mode == "native") {
    rows.push_back({"fid_proxy", fid_proxy(real.images, fakes, ev.extractor_seed)});
  } else if (mode == "upsampled") {
    const SuperresSource src{&g, w, psi_of(o)};
    const std::pair<const char*, Upsampler> methods[] = {{"nearest", Upsampler::nearest},
                                                         {"bilinear", Upsampler::bilinear},
                                                         {"bicubic", Upsampler::bicubic},
                                                         {"inr_superres", Upsampler::inr_superres}};
    for (const auto& [name, up] : methods) {
      rows.push_back({std::string("upsampled_fid_") + name, upsampled_fid(real.images, fakes, up, ev.extractor_seed, &src)});
    }
  } else {
    throw ConfigError("--mode must be native or upsampled for fid");
  }
  const std::string csv = metric_csv(rows, config_hash(m.config), seed);
  if (!o.out.empty()) write_text(o.out, csv);
  out << csv;
}

void cmd_interp(const Options& o, std::ostream& out) {
  LoadedModel m = load_model(o.checkpoint);
  if (o.out.empty()) throw ConfigError("--out is required");
  if (o.steps < 2) throw ConfigError("--steps must be >= 2");
  const auto& g = *m.generator;
  const int r = g.arch().resolution();
  const int z_dim = m.config.generator.z_dim;
  const Mat<float> z1 = sample_latent<float>(1, z_dim, derive_seed(o.z1_seed, Stream::eval));
  const Mat<float> z2 = sample_latent<float>(1, z_dim, derive_seed(o.z2_seed, Stream::eval));
  const std::string space = o.space.empty() ? "latent" : o.space;
  const auto psi = psi_of(o);
  std::vector<Image> strip;
  if (space == "latent") {
    Mat<float> z(o.steps, z_dim);
    for (int i = 0; i < o.steps; ++i) {
      const float t = static_cast<float>(i) / static_cast<float>(o.steps - 1);
      z.row(i) = (1 - t) * z1.row(0) + t * z2.row(0);
    }
    strip = as_images(g.generate_images(z, psi), r);
  } else if (space == "inr_params" || space == "pixel") {
    Mat<float> z(2, z_dim);
    z.row(0) = z1.row(0);
    z.row(1) = z2.row(0);
    Mat<float> w = g.map_latent(z);
    if (psi) w = truncate(w, *psi, g.w_average());
    const InrParams<float> p1 = g.generate_params(w.row(0));
    const InrParams<float> p2 = g.generate_params(w.row(1));
    const Mat<float> a = g.decoder().evaluate(p1), b = g.decoder().evaluate(p2);
    for (int i = 0; i < o.steps; ++i) {
      const float t = static_cast<float>(i) / static_cast<float>(o.steps - 1);
      Mat<float> img = space == "pixel" ? Mat<float>((1 - t) * a + t * b) : g.decoder().evaluate(lerp_params(p1, p2, t));
      strip.emplace_back(r, r, std::move(img));
    }
  } else {
    throw ConfigError("--space must be latent, inr_params or pixel for interp");
  }
  write_png(o.out, tile_row(strip));
  out << o.out << "\n";
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return s;
}

int report(std::ostream& err, int code, const char* type, const std::string& message) {
  err << "inrgan: error code=" << code << " type=" << type << " message=\"" << one_line(message) << "\"\n";
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"INR-based GAN: training, sampling and evaluation", "inrgan"};
  app.require_subcommand(1);
  Options o;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Root seed (defaults to the configured seed)");
    sub->add_option("--psi", o.psi, "Truncation factor in [0, 1]");
  };
  const auto need_ckpt = [&](CLI::App* sub) { sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required(); };

  auto* train = app.add_subcommand("train", "Train on the configured dataset");
  train->add_option("--config", o.config, "JSON run configuration");
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--seed", o.seed, "Root seed");
  train->add_flag("--resume", o.resume, "Continue from <out>/latest.ckpt");
  train->add_flag("--verbose", o.verbose, "Progress on stderr");

  auto* sample = app.add_subcommand("sample", "PNG grid of samples");
  need_ckpt(sample);
  common(sample);
  sample->add_option("--out", o.out, "PNG path")->required();
  sample->add_option("--count", o.count, "Number of samples");

  auto* superres = app.add_subcommand("superres", "Native and densely evaluated samples");
  need_ckpt(superres);
  common(superres);
  superres->add_option("--factor", o.factor, "Density factor of the final grid");
  superres->add_option("--out", o.out, "Output directory")->required();
  superres->add_option("--count", o.count, "Number of samples");

  auto* zoom = app.add_subcommand("zoom", "Samples evaluated over another coordinate extent");
  need_ckpt(zoom);
  common(zoom);
  zoom->add_option("--extent", o.extent, "x0,x1,y0,y1");
  zoom->add_option("--out", o.out, "PNG path")->required();
  zoom->add_option("--count", o.count, "Number of samples");

  auto* lowres = app.add_subcommand("lowres", "Samples on a sparser grid plus their MAC cost");
  need_ckpt(lowres);
  common(lowres);
  lowres->add_option("--resolution", o.resolution, "Output resolution")->required();
  lowres->add_option("--out", o.out, "Output directory")->required();
  lowres->add_option("--count", o.count, "Number of samples");

  auto* macs = app.add_subcommand("macs", "MAC counts over a resolution sweep");
  macs->add_option("--config", o.config, "JSON run configuration");
  macs->add_option("--out", o.out, "Output directory");

  auto* kplc = app.add_subcommand("kpl", "Keypoint prediction loss");
  need_ckpt(kplc);
  common(kplc);
  kplc->add_option("--mode", o.mode, "generated (default) or projected");
  kplc->add_option("--space", o.space, "z or w");
  kplc->add_option("--out", o.out, "CSV path");

  auto* fid = app.add_subcommand("fid", "FID-proxy against the dataset");
  need_ckpt(fid);
  common(fid);
  fid->add_option("--mode", o.mode, "native (default) or upsampled");
  fid->add_option("--factor", o.factor, "Upsampling factor for --mode upsampled");
  fid->add_option("--dataset", o.dataset, "Image folder overriding the configured data");
  fid->add_option("--out", o.out, "CSV path");

  auto* interp = app.add_subcommand("interp", "Interpolation strip between two latents");
  need_ckpt(interp);
  common(interp);
  interp->add_option("--z1-seed", o.z1_seed, "Seed of the first latent");
  interp->add_option("--z2-seed", o.z2_seed, "Seed of the second latent");
  interp->add_option("--steps", o.steps, "Frames including both ends");
  interp->add_option("--space", o.space, "latent, inr_params or pixel");
  interp->add_option("--out", o.out, "PNG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report(err, kExitConfig, "usage", e.what());
  }

  try {
    if (*train) cmd_train(o, out);
    else if (*sample) cmd_sample(o, out);
    else if (*superres) cmd_superres(o, out);
    else if (*zoom) cmd_zoom(o, out);
    else if (*lowres) cmd_lowres(o, out);
    else if (*macs) cmd_macs(o, out);
    else if (*kplc) cmd_kpl(o, out);
    else if (*fid) cmd_fid(o, out);
    else if (*interp) cmd_interp(o, out);
  } catch (const ConfigError& e) {
    return report(err, kExitConfig, "config", e.what());
  } catch (const IoError& e) {
    return report(err, kExitIo, "io", e.what());
  } catch (const IngestionError& e) {
    return report(err, kExitIo, "ingestion", e.what());
  } catch (const fs::filesystem_error& e) {
    return report(err, kExitIo, "io", e.what());
  } catch (const NanAbortError& e) {
    return report(err, kExitRuntime, "nan_abort", std::string(e.what()) + " last=" + e.record());
  } catch (const std::invalid_argument& e) {
    return report(err, kExitConfig, "invalid_argument", e.what());
  } catch (const std::exception& e) {
    return report(err, kExitRuntime, "runtime", e.what());
  }
  return kExitOk;
}

}  // namespace inrgan
