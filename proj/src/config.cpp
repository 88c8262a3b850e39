#include "inrgan/config.hpp"

#include "inrgan/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

extern char** environ;

namespace inrgan {

using nlohmann::json;

std::string to_string(UpsampleMode m) { return m == UpsampleMode::nearest ? "nearest" : "bilinear"; }
std::string to_string(OutputActivation m) { return m == OutputActivation::sigmoid_to_unit ? "sigmoid" : "clamp"; }
std::string to_string(Modulation m) { return m == Modulation::sigmoid ? "sigmoid" : "identity"; }
std::string to_string(FourierMode m) { return m == FourierMode::sincos ? "sincos" : "sin"; }

namespace {

template <typename E>
E parse_enum(const std::string& path, const std::string& value, std::initializer_list<std::pair<const char*, E>> options) {
  std::string allowed;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  throw ConfigError("config: " + path + " must be one of " + allowed + ", got '" + value + "'");
}

// Reads known keys from one object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: " + where() + " must be an object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const json::exception&) {
      throw ConfigError("config: wrong type for " + child_path(key));
    }
  }

  template <typename E>
  void get_enum(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> options) {
    std::string s;
    bool present = j_.contains(key);
    get(key, s);
    if (present) out = parse_enum(child_path(key), s, options);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key " + child_path(it.key()));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "document" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const std::initializer_list<std::pair<const char*, UpsampleMode>> kUpsample{{"nearest", UpsampleMode::nearest},
                                                                           {"bilinear", UpsampleMode::bilinear}};
const std::initializer_list<std::pair<const char*, OutputActivation>> kOutput{
    {"sigmoid", OutputActivation::sigmoid_to_unit}, {"clamp", OutputActivation::clamp}};
const std::initializer_list<std::pair<const char*, Modulation>> kModulation{{"sigmoid", Modulation::sigmoid},
                                                                           {"identity", Modulation::identity}};
const std::initializer_list<std::pair<const char*, FourierMode>> kFourier{{"sincos", FourierMode::sincos},
                                                                         {"sin", FourierMode::sin}};

json arch_json(const ArchConfig& a) {
  return {{"resolutions", a.resolutions},
          {"hidden_widths", a.hidden_widths},
          {"fourier_features", a.fourier_features},
          {"rank", a.rank},
          {"upsample", to_string(a.upsample)},
          {"output", to_string(a.output)},
          {"modulation", to_string(a.modulation)},
          {"fourier_mode", to_string(a.fourier_mode)},
          {"fourier_gamma", a.fourier_gamma},
          {"strict", a.strict}};
}

void read_arch(const json& j, const std::string& path, ArchConfig& a) {
  Reader r(j, path);
  r.get("resolutions", a.resolutions);
  r.get("hidden_widths", a.hidden_widths);
  r.get("fourier_features", a.fourier_features);
  r.get("rank", a.rank);
  r.get_enum("upsample", a.upsample, kUpsample);
  r.get_enum("output", a.output, kOutput);
  r.get_enum("modulation", a.modulation, kModulation);
  r.get_enum("fourier_mode", a.fourier_mode, kFourier);
  r.get("fourier_gamma", a.fourier_gamma);
  r.get("strict", a.strict);
  r.finish();
}

json generator_json(const GeneratorConfig& g) {
  return {{"z_dim", g.z_dim},
          {"hidden_dim", g.hidden_dim},
          {"num_layers", g.num_layers},
          {"leaky_slope", g.leaky_slope},
          {"head_init_std", g.head_init_std},
          {"fourier_init_std", g.fourier_init_std},
          {"w_avg_decay", g.w_avg_decay}};
}

void read_generator(const json& j, const std::string& path, GeneratorConfig& g) {
  Reader r(j, path);
  r.get("z_dim", g.z_dim);
  r.get("hidden_dim", g.hidden_dim);
  r.get("num_layers", g.num_layers);
  r.get("leaky_slope", g.leaky_slope);
  r.get("head_init_std", g.head_init_std);
  r.get("fourier_init_std", g.fourier_init_std);
  r.get("w_avg_decay", g.w_avg_decay);
  r.finish();
}

json disc_json(const DiscriminatorSpec& d) {
  return {{"resolution", d.resolution},
          {"final_resolution", d.final_resolution},
          {"channels", d.channels},
          {"fc_dim", d.fc_dim},
          {"equalized_lr", d.equalized_lr}};
}

void read_disc(const json& j, const std::string& path, DiscriminatorSpec& d) {
  Reader r(j, path);
  r.get("resolution", d.resolution);
  r.get("final_resolution", d.final_resolution);
  r.get("channels", d.channels);
  r.get("fc_dim", d.fc_dim);
  r.get("equalized_lr", d.equalized_lr);
  r.finish();
}

json train_json(const TrainConfig& t) {
  return {{"lr_g", t.lr_g},
          {"lr_shared", t.lr_shared},
          {"lr_d", t.lr_d},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_eps", t.adam_eps},
          {"r1_gamma", t.r1_gamma},
          {"batch_size", t.batch_size},
          {"total_steps", t.total_steps},
          {"seed", t.seed},
          {"resolution", t.resolution},
          {"log_every", t.log_every},
          {"checkpoint_every", t.checkpoint_every},
          {"sample_every", t.sample_every},
          {"sample_count", t.sample_count}};
}

void read_train(const json& j, const std::string& path, TrainConfig& t) {
  Reader r(j, path);
  r.get("lr_g", t.lr_g);
  r.get("lr_shared", t.lr_shared);
  r.get("lr_d", t.lr_d);
  r.get("adam_beta1", t.adam_beta1);
  r.get("adam_beta2", t.adam_beta2);
  r.get("adam_eps", t.adam_eps);
  r.get("r1_gamma", t.r1_gamma);
  r.get("batch_size", t.batch_size);
  r.get("total_steps", t.total_steps);
  r.get("seed", t.seed);
  r.get("resolution", t.resolution);
  r.get("log_every", t.log_every);
  r.get("checkpoint_every", t.checkpoint_every);
  r.get("sample_every", t.sample_every);
  r.get("sample_count", t.sample_count);
  r.finish();
}

json synthetic_json(const SyntheticShapeSpec& s) {
  return {{"resolution", s.resolution},       {"shapes_per_image", s.shapes_per_image},
          {"sigma_min", s.sigma_min},         {"sigma_max", s.sigma_max},
          {"max_aspect", s.max_aspect},       {"center_min", s.center_min},
          {"center_max", s.center_max},       {"amplitude_min", s.amplitude_min},
          {"amplitude_max", s.amplitude_max}, {"background", s.background},
          {"seed", s.seed}};
}

void read_synthetic(const json& j, const std::string& path, SyntheticShapeSpec& s) {
  Reader r(j, path);
  r.get("resolution", s.resolution);
  r.get("shapes_per_image", s.shapes_per_image);
  r.get("sigma_min", s.sigma_min);
  r.get("sigma_max", s.sigma_max);
  r.get("max_aspect", s.max_aspect);
  r.get("center_min", s.center_min);
  r.get("center_max", s.center_max);
  r.get("amplitude_min", s.amplitude_min);
  r.get("amplitude_max", s.amplitude_max);
  r.get("background", s.background);
  r.get("seed", s.seed);
  r.finish();
}

json data_json(const DataConfig& d) {
  return {{"source", d.source}, {"folder", d.folder}, {"count", d.count}, {"hflip", d.hflip},
          {"synthetic", synthetic_json(d.synthetic)}};
}

void read_data(const json& j, const std::string& path, DataConfig& d) {
  Reader r(j, path);
  r.get("source", d.source);
  r.get("folder", d.folder);
  r.get("count", d.count);
  r.get("hflip", d.hflip);
  if (const json* s = r.child("synthetic")) read_synthetic(*s, r.child_path("synthetic"), d.synthetic);
  r.finish();
}

json eval_json(const EvalConfig& e) {
  return {{"fid_samples", e.fid_samples}, {"extractor_seed", e.extractor_seed}, {"kpl_train", e.kpl_train},
          {"kpl_test", e.kpl_test},       {"kpl_space", e.kpl_space},           {"psi", e.psi},
          {"sample_count", e.sample_count}, {"projection_steps", e.projection_steps},
          {"projection_lr", e.projection_lr}};
}

void read_eval(const json& j, const std::string& path, EvalConfig& e) {
  Reader r(j, path);
  r.get("fid_samples", e.fid_samples);
  r.get("extractor_seed", e.extractor_seed);
  r.get("kpl_train", e.kpl_train);
  r.get("kpl_test", e.kpl_test);
  r.get("kpl_space", e.kpl_space);
  r.get("psi", e.psi);
  r.get("sample_count", e.sample_count);
  r.get("projection_steps", e.projection_steps);
  r.get("projection_lr", e.projection_lr);
  r.finish();
}

template <typename F>
void wrap(const std::string& section, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: " + section + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  InrArchitecture a;
  wrap("arch", [&] { a = make_architecture(arch); });
  wrap("generator", [&] { generator.validate(); });
  wrap("discriminator", [&] { discriminator.validate(); });
  wrap("train", [&] { train.validate(); });
  if (data.source == "synthetic") {
    wrap("data.synthetic", [&] { data.synthetic.validate(); });
    if (data.synthetic.resolution != train.resolution) {
      throw ConfigError("config: data.synthetic.resolution must equal train.resolution");
    }
  } else if (data.source == "folder") {
    if (data.folder.empty()) throw ConfigError("config: data.folder is required when data.source is 'folder'");
  } else {
    throw ConfigError("config: data.source must be one of synthetic|folder, got '" + data.source + "'");
  }
  if (data.count < 1) throw ConfigError("config: data.count must be positive");
  if (a.resolution() != train.resolution) throw ConfigError("config: arch final resolution must equal train.resolution");
  if (discriminator.resolution != train.resolution) {
    throw ConfigError("config: discriminator.resolution must equal train.resolution");
  }
  if (eval.kpl_space != "z" && eval.kpl_space != "w") throw ConfigError("config: eval.kpl_space must be one of z|w");
  if (!(eval.psi >= 0 && eval.psi <= 1)) throw ConfigError("config: eval.psi must lie in [0, 1]");
  if (eval.fid_samples < 2 || eval.kpl_train < 1 || eval.kpl_test < 1 || eval.sample_count < 1) {
    throw ConfigError("config: eval sample counts must be positive");
  }
  if (eval.projection_steps < 0 || !(eval.projection_lr > 0)) throw ConfigError("config: invalid projection settings");
}

json to_json(const RunConfig& c) {
  return {{"arch", arch_json(c.arch)},   {"generator", generator_json(c.generator)},
          {"discriminator", disc_json(c.discriminator)}, {"train", train_json(c.train)},
          {"data", data_json(c.data)},   {"eval", eval_json(c.eval)}};
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  Reader r(doc, "");
  if (const json* j = r.child("arch")) read_arch(*j, "arch", c.arch);
  if (const json* j = r.child("generator")) read_generator(*j, "generator", c.generator);
  if (const json* j = r.child("discriminator")) read_disc(*j, "discriminator", c.discriminator);
  if (const json* j = r.child("train")) read_train(*j, "train", c.train);
  if (const json* j = r.child("data")) read_data(*j, "data", c.data);
  if (const json* j = r.child("eval")) read_eval(*j, "eval", c.eval);
  r.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config", path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: parse error in ") + path + ": " + e.what());
  }
  apply_env_overrides(doc, environment_map());
  return run_config_from_json(doc);
}

std::string config_hash(const RunConfig& config) {
  const std::string text = to_json(config).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("config_hash: SHA-256 failed");
  }
  std::ostringstream out;
  out << std::hex;
  for (unsigned int i = 0; i < len; ++i) out << (digest[i] >> 4) << (digest[i] & 0xF);
  return out.str();
}

void apply_env_overrides(json& doc, const std::map<std::string, std::string>& env, const std::string& prefix) {
  if (!doc.is_object()) throw ConfigError("config: document must be an object");
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) continue;
    std::string rest = name.substr(prefix.size());
    std::transform(rest.begin(), rest.end(), rest.begin(), [](unsigned char ch) { return std::tolower(ch); });
    std::vector<std::string> parts;
    for (std::size_t pos = 0;;) {
      const std::size_t next = rest.find("__", pos);
      parts.push_back(rest.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    json* node = &doc;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      json& childnode = (*node)[parts[i]];
      if (childnode.is_null()) childnode = json::object();
      if (!childnode.is_object()) throw ConfigError("config: environment override " + name + " descends into a non-object");
      node = &childnode;
    }
    json parsed = json::parse(value, nullptr, false);
    (*node)[parts.back()] = parsed.is_discarded() ? json(value) : parsed;
  }
}

std::map<std::string, std::string> environment_map() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string kv(*e);
    const auto eq = kv.find('=');
    if (eq != std::string::npos) out.emplace(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return out;
}

}  // namespace inrgan
