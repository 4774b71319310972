// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnifuse/curation/curation.hpp"
#include "omnifuse/training/model.hpp"
#include "omnifuse/training/stages.hpp"

namespace omnifuse::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tunables of one training stage kind. Branch pretraining shares one entry
/// across the three branches.
struct StageParams {
  std::size_t steps = 100;
  double lr = 3e-3;
  std::size_t batch = 4;
  std::size_t per_family = 30;
  std::size_t heldout_per_family = 20;
  double av_fraction = 0.0;
  double blank_prob = 0.5;
  double noise = 0.05;
};

/// Per-kind defaults taken from the training stage defaults.
std::map<std::string, StageParams> default_stage_params();

inline constexpr const char* kEnvConfig = "OMNIFUSE_CONFIG";
inline constexpr const char* kEnvSeed = "OMNIFUSE_SEED";

struct AppConfig {
  std::uint64_t seed = 7;  // drives stage data, training order and curation
  std::filesystem::path out = "omnifuse_out";
  training::ModelConfig model;
  std::map<std::string, StageParams> stages = default_stage_params();  // by stage kind name
  curation::CurationConfig curation;
  std::filesystem::path curation_input;      // raw manifest; empty: bundled corpus
  std::optional<std::size_t> stage_steps;    // replaces every stage's steps

  /// Training configuration for one stage, seeded from `seed`.
  training::StageConfig stage_config(const training::StageId& stage) const;
  std::filesystem::path checkpoint_dir() const { return out / "checkpoints"; }
  std::filesystem::path log_dir() const { return out / "logs"; }
  std::filesystem::path curation_dir() const { return out / "curation"; }

  /// Every resolved value, including the fixed audio parameters.
  nlohmann::ordered_json to_json() const;
};

/// "branch_pretrain", "visual_finetune", "audio_align" or "crossmodal".
std::string stage_kind_key(training::StageKind kind);

/// The default configuration as a JSON document; config files may set any
/// subset of its keys and nothing else.
nlohmann::ordered_json default_config_json();

/// Strict conversion: unknown keys, wrong types, out-of-range values and any
/// change to the fixed audio parameters raise ConfigError.
AppConfig config_from_json(const nlohmann::json& document);

/// Command-line values; unset fields leave lower layers in place.
struct Overrides {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::string> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> clients;
  std::optional<std::size_t> stage_steps;
  std::vector<std::string> sets;  // "dotted.key=value", value parsed as JSON when it can be
};

struct Environment {
  std::optional<std::string> config_path;
  std::optional<std::string> seed;

  static Environment from_process();
};

/// Defaults, then the config file (flag path, else env path), then env
/// values, then flags.
AppConfig resolve_config(const Overrides& flags, const Environment& env);

/// Applies one "a.b.c=value" assignment to a JSON document.
void apply_assignment(nlohmann::json& document, const std::string& assignment);

std::uint64_t parse_seed(const std::string& text);

}  // namespace omnifuse::cli
