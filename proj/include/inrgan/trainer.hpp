#pragma once

#include "inrgan/checkpoint.hpp"
#include "inrgan/config.hpp"
#include "inrgan/data.hpp"
#include "inrgan/gan.hpp"
#include "inrgan/hypernet.hpp"

#include <functional>
#include <memory>
#include <string>

namespace inrgan {

struct TrainRecord {
  long step = 0;  // number of completed updates after this record
  double loss_d = 0;
  double loss_g = 0;
  double r1 = 0;
  double seconds_per_step = 0;
};

std::string train_log_header();
std::string to_csv(const TrainRecord& r);

/// Images (pixels x 3 each) as an NHWC batch.
Activations<float> to_activations(const std::vector<Image>& images);
Activations<float> to_activations(const std::vector<Mat<float>>& images, int resolution);

/// Generator, discriminator and three Adam groups (mapping + head, shared
/// INR matrices, discriminator). Not copyable or movable: the optimizers
/// hold pointers into the networks.
class Trainer {
 public:
  explicit Trainer(RunConfig config);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// One D update (logistic loss + R1) then one G update on the same
  /// latents. Throws NanAbortError on non-finite losses.
  TrainRecord step(const ImageDataset& data);

  long step_count() const { return step_; }
  const RunConfig& config() const { return config_; }
  Generator<float>& generator() { return generator_; }
  Discriminator<float>& discriminator() { return discriminator_; }

  Checkpoint to_checkpoint();
  void load(const Checkpoint& ckpt);

 private:
  RunConfig config_;
  Generator<float> generator_;
  Discriminator<float> discriminator_;
  Adam<float> opt_g_;
  Adam<float> opt_shared_;
  Adam<float> opt_d_;
  long step_ = 0;
};

nlohmann::json checkpoint_metadata(const RunConfig& config, long step);

/// Generator restored from a checkpoint written by Trainer::to_checkpoint.
struct LoadedModel {
  RunConfig config;
  long step = 0;
  std::unique_ptr<Generator<float>> generator;
};
LoadedModel load_model(const std::string& path);

ImageDataset build_dataset(const RunConfig& config);

struct LoopOptions {
  std::string out_dir;
  bool resume = false;  // continue from out_dir/latest.ckpt when present
  bool quiet = true;
  std::function<void(const TrainRecord&)> on_record;
};

/// Runs until train.total_steps. Writes train_log.csv, periodic
/// checkpoints (checkpoint_<step>.ckpt and latest.ckpt) and sample grids.
void train_loop(Trainer& trainer, const ImageDataset& data, const LoopOptions& options);

/// Fixed evaluation latents used for sample grids.
Mat<float> eval_latents(const RunConfig& config, int count, std::uint64_t seed);

}  // namespace inrgan
