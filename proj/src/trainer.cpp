#include "inrgan/trainer.hpp"

#include "inrgan/errors.hpp"
#include "inrgan/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace inrgan {

namespace fs = std::filesystem;

std::string train_log_header() { return "step,loss_d,loss_g,r1,seconds_per_step"; }

std::string to_csv(const TrainRecord& r) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g,%.6f", r.step, r.loss_d, r.loss_g, r.r1, r.seconds_per_step);
  return buf;
}

Activations<float> to_activations(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("to_activations: empty batch");
  std::vector<Mat<float>> px;
  px.reserve(images.size());
  for (const auto& im : images) px.push_back(im.data);
  return stack_images(px, images.front().height, images.front().width);
}

Activations<float> to_activations(const std::vector<Mat<float>>& images, int resolution) {
  return stack_images(images, resolution, resolution);
}

namespace {

AdamConfig adam_config(const TrainConfig& t, double lr) { return {lr, t.adam_beta1, t.adam_beta2, t.adam_eps}; }

std::vector<float> to_std(const Vec<float>& v) { return {v.data(), v.data() + v.size()}; }

constexpr std::uint64_t kBatchStreamOffset = 1ull << 40;

}  // namespace

Trainer::Trainer(RunConfig config)
    : config_((config.validate(), std::move(config))),
      generator_(config_.generator, make_architecture(config_.arch), config_.train.seed),
      discriminator_(config_.discriminator, config_.train.seed),
      opt_g_("g", generator_.hyper_params(), adam_config(config_.train, config_.train.lr_g)),
      opt_shared_("shared", generator_.shared_params(), adam_config(config_.train, config_.train.lr_shared)),
      opt_d_("d", discriminator_.params(), adam_config(config_.train, config_.train.lr_d)) {}

TrainRecord Trainer::step(const ImageDataset& data) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainConfig& tc = config_.train;
  const int batch = tc.batch_size;
  const int res = generator_.arch().resolution();
  if (data.resolution != res) throw std::invalid_argument("train step: dataset resolution differs from the generator");
  const auto step_index = static_cast<std::uint64_t>(step_);

  const Mat<float> z = sample_latent<float>(batch, config_.generator.z_dim, derive_seed(tc.seed, Stream::latent, step_index));
  MappingTrace<float> mtrace;
  DecodeTrace<float> dtrace;
  const Mat<float> w = generator_.map_latent(z, &mtrace);
  const std::vector<Mat<float>> fakes = generator_.decode(w, plan_native(generator_.arch()), std::nullopt, &dtrace);
  const Activations<float> fake_x = to_activations(fakes, res);
  const Batch real_batch = sample_batch(data, batch, derive_seed(tc.seed, Stream::data, kBatchStreamOffset + step_index));
  const Activations<float> real_x = to_activations(real_batch.images);

  // Discriminator: logistic loss on both sides plus R1 on the reals.
  const float gamma = static_cast<float>(tc.r1_gamma);
  discriminator_.zero_grad();
  const R1Result<float> r1 = r1_penalty(discriminator_, real_x, gamma);
  r1_accumulate(discriminator_, r1, gamma, to_std(d_logistic_grad_real(r1.logits)));
  const Vec<float> fake_logits = discriminator_.forward(fake_x);
  discriminator_.backward(Vec<float>::Ones(batch));
  discriminator_.accumulate_grads(to_std(d_logistic_grad_fake(fake_logits)), 0.0f);
  const double loss_d = d_logistic_loss(r1.logits, fake_logits);

  TrainRecord rec;
  rec.step = step_ + 1;
  rec.loss_d = loss_d;
  rec.r1 = r1.penalty;
  if (!std::isfinite(rec.loss_d) || !std::isfinite(rec.r1)) {
    throw NanAbortError("non-finite discriminator loss at step " + std::to_string(rec.step), to_csv(rec));
  }
  opt_d_.step();

  // Generator: non-saturating loss through the updated discriminator.
  generator_.zero_grad();
  const Vec<float> g_logits = discriminator_.forward(fake_x);
  rec.loss_g = g_nonsaturating_loss(g_logits);
  if (!std::isfinite(rec.loss_g)) {
    throw NanAbortError("non-finite generator loss at step " + std::to_string(rec.step), to_csv(rec));
  }
  const Activations<float> dx = discriminator_.backward(g_nonsaturating_grad(g_logits));
  std::vector<Mat<float>> d_images(batch);
  const Eigen::Index px = static_cast<Eigen::Index>(res) * res;
  for (int i = 0; i < batch; ++i) d_images[i] = dx.data.middleRows(i * px, px);
  const Mat<float> dw = generator_.decode_backward(dtrace, d_images, std::nullopt, true);
  generator_.mapping_backward(mtrace, dw, true);
  opt_g_.step();
  opt_shared_.step();
  generator_.update_w_average(w);

  ++step_;
  rec.seconds_per_step = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

nlohmann::json checkpoint_metadata(const RunConfig& config, long step) {
  return {{"format", "inrgan-checkpoint"},
          {"step", step},
          {"seed", config.train.seed},
          {"config_hash", config_hash(config)},
          {"config", to_json(config)}};
}

Checkpoint Trainer::to_checkpoint() {
  Checkpoint ckpt;
  ckpt.metadata = checkpoint_metadata(config_, step_);
  export_arrays(generator_.state_arrays(), ckpt);
  export_arrays(discriminator_.params(), ckpt);
  export_arrays(opt_g_.state_arrays(), ckpt);
  export_arrays(opt_shared_.state_arrays(), ckpt);
  export_arrays(opt_d_.state_arrays(), ckpt);
  return ckpt;
}

namespace {

// Model-defining part of a config; run length and cadence may change on resume.
nlohmann::json model_identity(nlohmann::json cfg) {
  for (const char* k : {"total_steps", "log_every", "checkpoint_every", "sample_every", "sample_count"}) cfg["train"].erase(k);
  cfg.erase("eval");
  return cfg;
}

}  // namespace

void Trainer::load(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("config") || model_identity(ckpt.metadata["config"]) != model_identity(to_json(config_))) {
    throw InvalidStateError("checkpoint was written with a different configuration");
  }
  import_arrays(ckpt, generator_.state_arrays());
  import_arrays(ckpt, discriminator_.params());
  for (Adam<float>* opt : {&opt_g_, &opt_shared_, &opt_d_}) {
    import_arrays(ckpt, opt->state_arrays());
    opt->sync_from_state();
  }
  step_ = ckpt.metadata.at("step").get<long>();
}

LoadedModel load_model(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  if (!ckpt.metadata.contains("config")) throw IoError("checkpoint has no configuration", path);
  LoadedModel m;
  m.config = run_config_from_json(ckpt.metadata["config"]);
  m.step = ckpt.metadata.value("step", 0L);
  m.generator = std::make_unique<Generator<float>>(m.config.generator, make_architecture(m.config.arch), m.config.train.seed);
  import_arrays(ckpt, m.generator->state_arrays());
  return m;
}

ImageDataset build_dataset(const RunConfig& config) {
  if (config.data.source == "folder") {
    return load_folder(config.data.folder, config.train.resolution, config.data.hflip);
  }
  return make_synthetic(config.data.synthetic, config.data.count, config.data.hflip);
}

Mat<float> eval_latents(const RunConfig& config, int count, std::uint64_t seed) {
  return sample_latent<float>(count, config.generator.z_dim, derive_seed(seed, Stream::eval));
}

namespace {

void write_samples(Trainer& trainer, const fs::path& path) {
  const RunConfig& c = trainer.config();
  const Mat<float> z = eval_latents(c, c.train.sample_count, c.train.seed);
  const auto imgs = trainer.generator().generate_images(z);
  std::vector<Image> tiles;
  const int r = trainer.generator().arch().resolution();
  for (const auto& m : imgs) tiles.emplace_back(r, r, m);
  write_png(path.string(), tile_grid(tiles));
}

void save(Trainer& trainer, const fs::path& dir) {
  const Checkpoint ckpt = trainer.to_checkpoint();
  char name[64];
  std::snprintf(name, sizeof(name), "checkpoint_%07ld.ckpt", trainer.step_count());
  write_checkpoint((dir / name).string(), ckpt);
  write_checkpoint((dir / "latest.ckpt").string(), ckpt);
}

// Keeps the header and the records up to `step`.
void truncate_log(const fs::path& path, long step) {
  std::ifstream in(path);
  if (!in) return;
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (keep.empty()) {
      keep.push_back(line);
      continue;
    }
    if (std::stol(line.substr(0, line.find(','))) <= step) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

}  // namespace

void train_loop(Trainer& trainer, const ImageDataset& data, const LoopOptions& options) {
  if (data.size() == 0) throw std::invalid_argument("train_loop: empty dataset");
  const fs::path dir(options.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory (" + ec.message() + ")", dir.string());
  const fs::path log_path = dir / "train_log.csv";
  const fs::path latest = dir / "latest.ckpt";
  if (options.resume && fs::exists(latest)) {
    trainer.load(read_checkpoint(latest.string()));
    truncate_log(log_path, trainer.step_count());
  } else {
    std::ofstream out(log_path, std::ios::trunc);
    if (!out) throw IoError("cannot write log", log_path.string());
    out << train_log_header() << "\n";
  }
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw IoError("cannot write log", log_path.string());
  const TrainConfig& tc = trainer.config().train;
  if (trainer.step_count() == 0 && tc.sample_every > 0) write_samples(trainer, dir / "samples_0000000.png");
  while (trainer.step_count() < tc.total_steps) {
    const TrainRecord rec = trainer.step(data);
    if (rec.step % tc.log_every == 0 || rec.step == tc.total_steps) {
      log << to_csv(rec) << "\n";
      log.flush();
      if (!log) throw IoError("write failed", log_path.string());
    }
    if (options.on_record) options.on_record(rec);
    if (!options.quiet && (rec.step % 100 == 0)) {
      std::cerr << "step " << rec.step << " loss_d " << rec.loss_d << " loss_g " << rec.loss_g << " r1 " << rec.r1
                << " (" << rec.seconds_per_step << " s/step)\n";
    }
    if (tc.checkpoint_every > 0 && rec.step % tc.checkpoint_every == 0) save(trainer, dir);
    if (tc.sample_every > 0 && rec.step % tc.sample_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "samples_%07ld.png", rec.step);
      write_samples(trainer, dir / name);
    }
  }
  save(trainer, dir);
}

}  // namespace inrgan
