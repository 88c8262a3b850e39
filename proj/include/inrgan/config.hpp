#pragma once

// Run configuration as a nested JSON document. Every default is written
// back out by to_json, unknown keys are rejected and the hash is taken over
// the canonical (sorted, compact) dump.

#include "inrgan/data.hpp"
#include "inrgan/gan.hpp"
#include "inrgan/hypernet.hpp"
#include "inrgan/inr.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>

namespace inrgan {

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "folder"
  std::string folder;
  int count = 5000;
  bool hflip = true;
  SyntheticShapeSpec synthetic;
};

struct EvalConfig {
  int fid_samples = 512;
  std::uint64_t extractor_seed = 7;
  int kpl_train = 1000;
  int kpl_test = 256;
  std::string kpl_space = "z";  // "z" or "w"
  double psi = 0.9;
  int sample_count = 16;
  int projection_steps = 100;
  double projection_lr = 0.02;
};

struct RunConfig {
  ArchConfig arch;
  GeneratorConfig generator;
  DiscriminatorSpec discriminator;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;

  /// Module-level validation plus cross-module resolution agreement.
  /// Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys and type errors throw
/// ConfigError naming the offending path.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

/// Hex SHA-256 of the canonical dump of to_json(config).
std::string config_hash(const RunConfig& config);

/// Applies PREFIX<section>__<key>=<value> variables (case-insensitive
/// keys); values are parsed as JSON when possible, else taken as strings.
void apply_env_overrides(nlohmann::json& doc, const std::map<std::string, std::string>& env,
                         const std::string& prefix = "INRGAN_");
std::map<std::string, std::string> environment_map();

std::string to_string(UpsampleMode m);
std::string to_string(OutputActivation m);
std::string to_string(Modulation m);
std::string to_string(FourierMode m);

}  // namespace inrgan
