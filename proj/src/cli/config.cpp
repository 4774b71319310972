// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "omnifuse/audio/audio.hpp"

namespace omnifuse::cli {

using nlohmann::json;
using nlohmann::ordered_json;
using training::StageConfig;
using training::StageId;
using training::StageKind;

namespace {

const ordered_json& fixed_audio() {
  static const ordered_json audio{{"sample_rate", audio::kSampleRate},
                                  {"window", audio::kWindowSamples},
                                  {"hop", audio::kHopSamples},
                                  {"fft_size", audio::kFftSize},
                                  {"mel_bands", audio::kMelBands},
                                  {"encoder_stride", audio::kEncoderStride},
                                  {"pool_stride", audio::kPoolStride}};
  return audio;
}

// Every key of `patch` must exist in `reference` with a compatible type.
void check_shape(const json& patch, const json& reference, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("'" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    const json& ref = reference.at(key);
    bool ok = true;
    if (ref.is_object()) {
      check_shape(value, ref, where);
    } else if (ref.is_null()) {
      ok = value.is_null() || value.is_number_unsigned();
    } else if (ref.is_number_unsigned()) {
      ok = value.is_number_unsigned();
    } else if (ref.is_number()) {
      ok = value.is_number();
    } else if (ref.is_string()) {
      ok = value.is_string();
    } else if (ref.is_boolean()) {
      ok = value.is_boolean();
    } else if (ref.is_array()) {
      ok = value.is_array() &&
           std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_string(); });
    }
    if (!ok) {
      throw ConfigError("config key '" + where + "' expects " + std::string(ref.type_name()) +
                        ", got " + value.dump());
    }
  }
}

void check_audio(const json& document) {
  if (!document.contains("audio")) return;
  for (const auto& [key, value] : document.at("audio").items()) {
    const std::string expected = fixed_audio().at(key).dump();
    if (value.dump() != expected) {
      throw ConfigError("audio." + key + " is fixed at " + expected + " and cannot be set to " +
                        value.dump());
    }
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

StageParams stage_from_json(const json& j, const std::string& key) {
  StageParams p;
  p.steps = j.at("steps");
  p.lr = j.at("lr");
  p.batch = j.at("batch");
  p.per_family = j.at("per_family");
  p.heldout_per_family = j.at("heldout_per_family");
  p.av_fraction = j.at("av_fraction");
  p.blank_prob = j.at("blank_prob");
  p.noise = j.at("noise");
  const std::string at = "stages." + key;
  require(p.steps > 0, at + ".steps must be positive");
  require(p.batch > 0, at + ".batch must be positive");
  require(p.per_family > 0, at + ".per_family must be positive");
  require(std::isfinite(p.lr) && p.lr > 0.0, at + ".lr must be positive");
  require(p.av_fraction >= 0.0 && p.av_fraction <= 1.0, at + ".av_fraction must lie in [0, 1]");
  require(p.blank_prob >= 0.0 && p.blank_prob <= 1.0, at + ".blank_prob must lie in [0, 1]");
  require(p.noise >= 0.0, at + ".noise must be non-negative");
  return p;
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::string stage_kind_key(StageKind kind) {
  switch (kind) {
    case StageKind::kBranchPretrain: return "branch_pretrain";
    case StageKind::kVisualFinetune: return "visual_finetune";
    case StageKind::kAudioAlign: return "audio_align";
    case StageKind::kCrossmodal: return "crossmodal";
  }
  return "?";
}

std::map<std::string, StageParams> default_stage_params() {
  std::map<std::string, StageParams> out;
  const StageId ids[] = {{StageKind::kBranchPretrain}, {StageKind::kVisualFinetune},
                         {StageKind::kAudioAlign}, {StageKind::kCrossmodal}};
  for (const auto& id : ids) {
    const StageConfig c = StageConfig::defaults(id);
    out[stage_kind_key(id.kind)] = {c.steps,           c.lr,
                                    c.batch,           c.data.per_family,
                                    c.heldout_per_family, c.data.av_fraction,
                                    c.data.blank_prob, c.data.noise};
  }
  return out;
}

StageConfig AppConfig::stage_config(const StageId& stage) const {
  StageConfig c = StageConfig::defaults(stage);
  const auto it = stages.find(stage_kind_key(stage.kind));
  if (it == stages.end()) throw ConfigError("no parameters for stage " + stage.name());
  const StageParams& p = it->second;
  c.steps = stage_steps.value_or(p.steps);
  c.lr = p.lr;
  c.batch = p.batch;
  c.data.per_family = p.per_family;
  c.heldout_per_family = p.heldout_per_family;
  c.data.av_fraction = p.av_fraction;
  c.data.blank_prob = p.blank_prob;
  c.data.noise = p.noise;
  c.data.size = model.input_size;
  c.seed = seed;
  return c;
}

ordered_json AppConfig::to_json() const {
  ordered_json stage_json = ordered_json::object();
  for (const auto& [key, p] : stages) {
    stage_json[key] = {{"steps", p.steps},
                       {"lr", p.lr},
                       {"batch", p.batch},
                       {"per_family", p.per_family},
                       {"heldout_per_family", p.heldout_per_family},
                       {"av_fraction", p.av_fraction},
                       {"blank_prob", p.blank_prob},
                       {"noise", p.noise}};
  }
  const auto& cur = curation;
  return {{"seed", seed},
          {"out", out.string()},
          {"stage_steps", stage_steps ? ordered_json(*stage_steps) : ordered_json(nullptr)},
          {"model", ordered_json::parse(training::config_to_json(model))},
          {"audio", fixed_audio()},
          {"stages", stage_json},
          {"curation",
           {{"input", curation_input.string()},
            {"tau_scene", cur.tau_scene},
            {"min_scene_len", cur.min_scene_len},
            {"tau_key", cur.tau_key},
            {"min_height", cur.rules.min_height},
            {"min_keyframes", cur.rules.min_keyframes},
            {"max_keyframe_rate", cur.rules.max_keyframe_rate},
            {"tau_sim", cur.tau_sim},
            {"consensus_jaccard", cur.consensus_jaccard},
            {"detailed_models", cur.detailed_models},
            {"embed_dim", cur.embed_dim},
            {"workers", cur.workers}}},
          {"clients",
           {{"kind", cur.clients},
            {"base_url", cur.http.base_url},
            {"timeout_seconds", cur.http.options.timeout_seconds},
            {"retries", cur.http.options.retries},
            {"backoff_seconds", cur.http.options.backoff_seconds}}}};
}

ordered_json default_config_json() { return AppConfig{}.to_json(); }

AppConfig config_from_json(const json& document) {
  const json defaults = json::parse(default_config_json().dump());
  check_shape(document, defaults, "");
  check_audio(document);
  json j = defaults;
  j.merge_patch(document);

  AppConfig c;
  c.stages.clear();
  try {
    c.seed = j.at("seed");
    c.out = j.at("out").get<std::string>();
    require(!c.out.empty(), "out must not be empty");
    if (!j.at("stage_steps").is_null()) {
      c.stage_steps = j.at("stage_steps").get<std::size_t>();
      require(*c.stage_steps > 0, "stage_steps must be positive");
    }
    c.model = training::config_from_json(j.at("model").dump());
    for (const auto& [key, value] : j.at("stages").items()) {
      c.stages[key] = stage_from_json(value, key);
    }
    const json& cur = j.at("curation");
    c.curation_input = cur.at("input").get<std::string>();
    c.curation.tau_scene = cur.at("tau_scene");
    c.curation.min_scene_len = cur.at("min_scene_len");
    c.curation.tau_key = cur.at("tau_key");
    c.curation.rules.min_height = cur.at("min_height");
    c.curation.rules.min_keyframes = cur.at("min_keyframes");
    c.curation.rules.max_keyframe_rate = cur.at("max_keyframe_rate");
    c.curation.tau_sim = cur.at("tau_sim");
    c.curation.consensus_jaccard = cur.at("consensus_jaccard");
    c.curation.detailed_models = cur.at("detailed_models").get<std::vector<std::string>>();
    c.curation.embed_dim = cur.at("embed_dim");
    c.curation.workers = cur.at("workers");
    c.curation.seed = c.seed;
    const json& cl = j.at("clients");
    c.curation.clients = cl.at("kind");
    c.curation.http.base_url = cl.at("base_url");
    c.curation.http.options.timeout_seconds = cl.at("timeout_seconds");
    c.curation.http.options.retries = cl.at("retries");
    c.curation.http.options.backoff_seconds = cl.at("backoff_seconds");
    require(c.curation.http.options.timeout_seconds > 0.0, "clients.timeout_seconds must be positive");
    require(c.curation.http.options.backoff_seconds >= 0.0,
            "clients.backoff_seconds must be non-negative");
    c.curation.validate();
  } catch (const curation::CurationError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Environment Environment::from_process() {
  Environment env;
  if (const char* v = std::getenv(kEnvConfig); v != nullptr && *v != '\0') env.config_path = v;
  if (const char* v = std::getenv(kEnvSeed); v != nullptr && *v != '\0') env.seed = v;
  return env;
}

std::uint64_t parse_seed(const std::string& text) {
  std::uint64_t value = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw ConfigError("seed must be a non-negative integer, got '" + text + "'");
  }
  return value;
}

void apply_assignment(json& document, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;  // bare strings need no quotes
  }
  json* node = &document;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    path.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    json& next = (*node)[path[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError("override key '" + key + "' crosses a non-object");
    node = &next;
  }
  (*node)[path.back()] = value;
}

AppConfig resolve_config(const Overrides& flags, const Environment& env) {
  json document = json::object();
  std::optional<std::filesystem::path> path = flags.config_path;
  if (!path && env.config_path) path = *env.config_path;
  if (path) {
    document = read_config_file(*path);
    if (!document.is_object()) throw ConfigError("config file " + path->string() + " must hold an object");
  }
  if (env.seed) document["seed"] = parse_seed(*env.seed);
  if (flags.seed) document["seed"] = parse_seed(*flags.seed);
  if (flags.out) document["out"] = flags.out->string();
  if (flags.clients) document["clients"]["kind"] = *flags.clients;
  if (flags.stage_steps) document["stage_steps"] = *flags.stage_steps;
  for (const auto& s : flags.sets) apply_assignment(document, s);
  return config_from_json(document);
}

}  // namespace omnifuse::cli
