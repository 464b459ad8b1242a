#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glyphnet/augment.hpp"
#include "glyphnet/errors.hpp"
#include "glyphnet/losses.hpp"
#include "glyphnet/schedule.hpp"

namespace glyphnet {

// Everything a training run needs, parsed from a flat key = value file.
struct TrainConfig {
  int stage = 2;                        // 1 or 2
  std::string optimizer = "adam";       // adam | sgd
  double initial_lr = 1e-4;
  std::string lr_schedule = "multi_step";  // multi_step | warm_cosine
  std::vector<int> milestones;          // empty -> 60%/80% of epochs
  double lr_gamma = 0.1;
  int warmup_epochs = 5;
  int batch_size = 128;                 // images (stage 1) or pairs (stage 2)
  int epochs = 25;
  int z_dim = 64;
  std::uint64_t seed = 0;
  std::string init_mode = "scratch";    // scratch | pretrained | ce_trained | stage1_checkpoint
  double weight_decay = 0.0;
  double momentum = 0.9;
  std::string encoder = "tiny_cnn";
  int input_channels = 1;
  LossConfig loss;
  LossMask mask;
  double neg_pos_ratio = 0.0;           // > 0 overrides p_n to hit this Neg/Pos ratio
  AugmentationConfig aug;
  bool dump_plans = false;
  int min_samples = 20;
  int cap = 20;
  std::string config_hash;              // FNV-1a of the source text

  void validate() const {
    require(stage == 1 || stage == 2, "config: stage must be 1 or 2");
    require(optimizer == "adam" || optimizer == "sgd",
            "config: optimizer must be adam or sgd");
    require(initial_lr > 0.0, "config: initial_lr must be positive");
    require(lr_schedule == "multi_step" || lr_schedule == "warm_cosine",
            "config: lr_schedule must be multi_step or warm_cosine");
    require(batch_size >= 1, "config: batch_size must be positive");
    require(epochs >= 1, "config: epochs must be positive");
    require(z_dim >= 1, "config: z_dim must be positive");
    require(init_mode == "scratch" || init_mode == "pretrained" ||
                init_mode == "ce_trained" || init_mode == "stage1_checkpoint",
            "config: unknown init_mode '" + init_mode + "'");
    require(weight_decay >= 0.0, "config: weight_decay must be nonnegative");
    require(momentum >= 0.0 && momentum < 1.0, "config: momentum must lie in [0, 1)");
    require(input_channels == 1 || input_channels == 3,
            "config: input_channels must be 1 or 3");
    require(neg_pos_ratio >= 0.0, "config: neg_pos_ratio must be nonnegative");
    require(min_samples >= 1 && cap >= 1, "config: min_samples and cap must be positive");
    loss.validate();
    aug.validate();
  }

  LrSchedule schedule() const {
    LrSchedule s;
    s.kind = lr_schedule;
    s.initial_lr = initial_lr;
    s.epochs = epochs;
    s.milestones = milestones.empty() ? default_milestones(epochs) : milestones;
    s.gamma = lr_gamma;
    s.warmup_epochs = warmup_epochs;
    return s;
  }
};

namespace detail {

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  std::istringstream ss(v);
  T out;
  ss >> out;
  if (ss.fail() || !(ss >> std::ws).eof())
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
  std::vector<int> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_number<int>(item, key));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

// Parses `key = value` lines ('#' starts a comment). Unknown keys are an
// error so typos cannot silently fall back to defaults.
inline TrainConfig parse_train_config_text(const std::string& text) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not of the form key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError("config: duplicate key '" + key + "'");

    if (key == "stage") cfg.stage = detail::parse_number<int>(value, key);
    else if (key == "optimizer") cfg.optimizer = value;
    else if (key == "initial_lr") cfg.initial_lr = detail::parse_number<double>(value, key);
    else if (key == "lr_schedule") cfg.lr_schedule = value;
    else if (key == "milestones") cfg.milestones = detail::parse_int_list(value, key);
    else if (key == "lr_gamma") cfg.lr_gamma = detail::parse_number<double>(value, key);
    else if (key == "warmup_epochs") cfg.warmup_epochs = detail::parse_number<int>(value, key);
    else if (key == "batch_size") cfg.batch_size = detail::parse_number<int>(value, key);
    else if (key == "epochs") cfg.epochs = detail::parse_number<int>(value, key);
    else if (key == "z_dim") cfg.z_dim = detail::parse_number<int>(value, key);
    else if (key == "seed") cfg.seed = detail::parse_number<std::uint64_t>(value, key);
    else if (key == "init_mode") cfg.init_mode = value;
    else if (key == "weight_decay") cfg.weight_decay = detail::parse_number<double>(value, key);
    else if (key == "momentum") cfg.momentum = detail::parse_number<double>(value, key);
    else if (key == "encoder") cfg.encoder = value;
    else if (key == "input_channels") cfg.input_channels = detail::parse_number<int>(value, key);
    else if (key == "tau") cfg.loss.tau = detail::parse_number<double>(value, key);
    else if (key == "base_temperature") cfg.loss.base_temperature = detail::parse_number<double>(value, key);
    else if (key == "gamma") cfg.loss.gamma = detail::parse_number<double>(value, key);
    else if (key == "s") cfg.loss.s = detail::parse_number<double>(value, key);
    else if (key == "m_c") cfg.loss.m_c = detail::parse_number<double>(value, key);
    else if (key == "m_e") cfg.loss.m_e = detail::parse_number<double>(value, key);
    else if (key == "m_a") cfg.loss.m_a = detail::parse_number<double>(value, key);
    else if (key == "lambda") cfg.loss.lambda = detail::parse_number<double>(value, key);
    else if (key == "p_n") cfg.loss.p_n = detail::parse_number<int>(value, key);
    else if (key == "neg_pos_ratio") cfg.neg_pos_ratio = detail::parse_number<double>(value, key);
    else if (key == "loss_focal") cfg.mask.focal = detail::parse_bool(value, key);
    else if (key == "loss_lmcl") cfg.mask.lmcl = detail::parse_bool(value, key);
    else if (key == "loss_euclidean") cfg.mask.euclidean = detail::parse_bool(value, key);
    else if (key == "loss_angular") cfg.mask.angular = detail::parse_bool(value, key);
    else if (key == "aug_enabled") cfg.aug.enabled = detail::parse_bool(value, key);
    else if (key == "aug_brightness") cfg.aug.brightness = detail::parse_number<double>(value, key);
    else if (key == "aug_contrast") cfg.aug.contrast = detail::parse_number<double>(value, key);
    else if (key == "aug_saturation") cfg.aug.saturation = detail::parse_number<double>(value, key);
    else if (key == "aug_hue") cfg.aug.hue = detail::parse_number<double>(value, key);
    else if (key == "aug_grayscale_prob") cfg.aug.grayscale_probability = detail::parse_number<double>(value, key);
    else if (key == "aug_rotation_degrees") cfg.aug.rotation_degrees = detail::parse_number<double>(value, key);
    else if (key == "dump_plans") cfg.dump_plans = detail::parse_bool(value, key);
    else if (key == "min_samples") cfg.min_samples = detail::parse_number<int>(value, key);
    else if (key == "cap") cfg.cap = detail::parse_number<int>(value, key);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  cfg.config_hash = detail::fnv1a_hex(text);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline TrainConfig parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_train_config_text(ss.str());
}

}  // namespace glyphnet
