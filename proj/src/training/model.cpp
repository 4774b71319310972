// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/training/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "omnifuse/numerics/ops.hpp"

namespace omnifuse::training {

using fusion::Vocabulary;
using json = nlohmann::json;
using sequence::Directive;

visual::VisualConfig ModelConfig::visual() const {
  visual::VisualConfig v;
  v.input_size = input_size;
  v.patch = patch;
  v.target_grid = target_grid;
  v.d_enc = d_enc;
  v.d_model = d_model;
  return v;
}

bool is_group_name(std::string_view name) {
  return std::find(kGroupNames.begin(), kGroupNames.end(), name) != kGroupNames.end();
}

std::string_view projector_group(visual::BranchId branch) {
  switch (branch) {
    case visual::BranchId::kFace: return "proj_face";
    case visual::BranchId::kBody: return "proj_body";
    case visual::BranchId::kInteraction: return "proj_inter";
  }
  return "proj_face";
}

namespace {

Rng named_rng(std::uint64_t seed, std::string_view name) { return Rng(derive_seed(seed, name)); }

audio::AudioEncoderStub make_audio_encoder(const ModelConfig& c) {
  Rng rng = named_rng(c.seed, "audio_encoder");
  return audio::AudioEncoderStub(c.d_audio, rng);
}

audio::AudioProjector make_audio_projector(const ModelConfig& c) {
  Rng rng = named_rng(c.seed, "proj_audio");
  return audio::AudioProjector(c.d_audio, c.d_model, rng);
}

sequence::DecoderConfig decoder_config(const ModelConfig& c) {
  sequence::DecoderConfig d;
  d.vocab_size = Vocabulary::standard().size();
  d.d_model = c.d_model;
  d.layers = c.decoder_layers;
  d.hidden = c.decoder_hidden;
  d.max_len = c.max_len;
  return d;
}

}  // namespace

OmniModel::OmniModel(const ModelConfig& config)
    : config_(config),
      visual_(config.visual(), config.seed),
      instr_(Vocabulary::standard(), config.d_text, config.instruction_max_len, config.seed),
      audio_encoder_(make_audio_encoder(config)),
      audio_projector_(make_audio_projector(config)),
      gate_(config.d_text, config.d_hidden, config.seed, config.normalization),
      decoder_(decoder_config(config), config.seed),
      specials_(config.d_model, config.seed) {
  if (config.placeholder_len == 0) throw TrainingError("placeholder_len must be positive");
  auto add = [&](std::string_view name, auto&& fill) {
    ParamGroup g;
    g.name = std::string(name);
    fill(g.params);
    groups_.push_back(std::move(g));
  };
  add("vis_encoder", [&](auto& out) { visual_.encoder().collect(out); });
  add("instr_encoder", [&](auto& out) { instr_.collect(out); });
  add("audio_encoder", [&](auto& out) { audio_encoder_.collect(out); });
  add("proj_face", [&](auto& out) { visual_.face().collect("proj_face", out); });
  add("proj_body", [&](auto& out) { visual_.body().collect("proj_body", out); });
  add("proj_inter", [&](auto& out) { visual_.interaction().collect("proj_inter", out); });
  add("proj_audio", [&](auto& out) { audio_projector_.collect(out); });
  add("weight_mlps", [&](auto& out) { gate_.collect(out); });
  add("decoder", [&](auto& out) { decoder_.collect(out); });
  add("special_tokens", [&](auto& out) { specials_.collect(out); });
  for (auto& g : groups_) {
    const bool encoder = g.name.ends_with("_encoder");
    g.frozen = encoder;
  }
}

ParamGroup& OmniModel::group(std::string_view name) {
  for (auto& g : groups_) {
    if (g.name == name) return g;
  }
  throw TrainingError("unknown parameter group '" + std::string(name) + "'");
}

const ParamGroup& OmniModel::group(std::string_view name) const {
  return const_cast<OmniModel*>(this)->group(name);
}

PreparedSample OmniModel::prepare(const std::string& id, const visual::VideoClip& clip,
                                  const audio::AudioWave* wave, std::string_view instruction,
                                  std::string_view answer, visual::BranchId family) const {
  PreparedSample s;
  s.id = id;
  s.family = family;
  s.raw_grid = visual_.encode(clip);
  s.cls = instr_.encode(instruction);
  s.prompt_ids = vocab().tokenize(instruction);
  if (!answer.empty()) {
    s.answer_ids = vocab().tokenize(answer);
    s.answer_ids.push_back(Vocabulary::kEos);
  }
  if (wave != nullptr) {
    s.audio_frames = audio_encoder_.encode(audio::log_mel(audio::resample(*wave)));
  }
  return s;
}

Tensor OmniModel::visual_tokens(const PreparedSample& s, FusionMode mode) const {
  if (!mode.gated) return visual_.project_one(mode.branch, s.raw_grid);
  const visual::BranchFeatures f = visual_.project(s.raw_grid);
  return fusion::fuse(f.face, f.body, f.interaction, gate_.weights(s.cls));
}

Tensor OmniModel::audio_tokens(const PreparedSample& s) const {
  if (!s.audio_frames) throw TrainingError("sample " + s.id + " has no audio");
  return audio_projector_.pool_and_project(*s.audio_frames).tokens;
}

sequence::TokenSequence OmniModel::build_sequence(const PreparedSample& s, Directive directive,
                                                  FusionMode mode,
                                                  const std::vector<std::size_t>& extra) const {
  std::optional<Tensor> vision;
  std::optional<Tensor> audio;
  if (sequence::directive_wants_video(directive)) vision = visual_tokens(s, mode);
  if (sequence::directive_wants_audio(directive) && s.audio_frames) audio = audio_tokens(s);
  std::vector<std::size_t> text = s.prompt_ids;
  text.insert(text.end(), extra.begin(), extra.end());
  sequence::AssembleOptions options;
  options.placeholder_len = config_.placeholder_len;
  return sequence::assemble(decoder_, specials_, text, vision ? &*vision : nullptr,
                            audio ? &*audio : nullptr, directive, options);
}

Tensor OmniModel::loss(const PreparedSample& s, Directive directive, FusionMode mode) const {
  if (s.answer_ids.empty()) throw TrainingError("sample " + s.id + " has no answer");
  // Teacher forcing: feed all but the last answer token; the final
  // answer_ids.size() positions then predict the answer.
  const std::vector<std::size_t> fed(s.answer_ids.begin(), s.answer_ids.end() - 1);
  const sequence::TokenSequence seq = build_sequence(s, directive, mode, fed);
  const Tensor logits = decoder_.logits_tail(seq, s.answer_ids.size());
  return cross_entropy(logits, s.answer_ids);
}

std::size_t OmniModel::predict(const PreparedSample& s, Directive directive,
                               FusionMode mode) const {
  const Tensor logits = decoder_.logits_tail(build_sequence(s, directive, mode), 1);
  const auto values = logits.data();
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) -
                                  values.begin());
}

std::vector<std::size_t> OmniModel::generate(const PreparedSample& s, Directive directive,
                                             std::size_t max_new) const {
  return sequence::generate(decoder_, build_sequence(s, directive, FusionMode::gate()), max_new);
}

fusion::FusionWeights OmniModel::fusion_weights(std::string_view instruction) const {
  return gate_.generate(instr_.encode(instruction));
}

// ---------------------------------------------------------------------------
// Configuration serialisation.

std::string config_to_json(const ModelConfig& c) {
  json j = {{"input_size", c.input_size},
            {"patch", c.patch},
            {"target_grid", c.target_grid},
            {"d_enc", c.d_enc},
            {"d_model", c.d_model},
            {"d_text", c.d_text},
            {"d_hidden", c.d_hidden},
            {"d_audio", c.d_audio},
            {"placeholder_len", c.placeholder_len},
            {"decoder_layers", c.decoder_layers},
            {"decoder_hidden", c.decoder_hidden},
            {"max_len", c.max_len},
            {"instruction_max_len", c.instruction_max_len},
            {"normalization", std::string(fusion::normalization_name(c.normalization))},
            {"seed", c.seed}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  c.input_size = j.at("input_size");
  c.patch = j.at("patch");
  c.target_grid = j.at("target_grid");
  c.d_enc = j.at("d_enc");
  c.d_model = j.at("d_model");
  c.d_text = j.at("d_text");
  c.d_hidden = j.at("d_hidden");
  c.d_audio = j.at("d_audio");
  c.placeholder_len = j.at("placeholder_len");
  c.decoder_layers = j.at("decoder_layers");
  c.decoder_hidden = j.at("decoder_hidden");
  c.max_len = j.at("max_len");
  c.instruction_max_len = j.at("instruction_max_len");
  c.normalization = fusion::parse_normalization(j.at("normalization").get<std::string>());
  c.seed = j.at("seed");
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace {

constexpr char kMagic[8] = {'O', 'M', 'N', 'I', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

struct RawCheckpoint {
  json header;
  std::vector<double> payload;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrainingError("checkpoint not found: " + path.string());
  char magic[8];
  std::uint64_t header_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw TrainingError(path.string() + ": not a checkpoint file");
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  RawCheckpoint raw;
  try {
    raw.header = json::parse(header);
  } catch (const json::exception& e) {
    throw TrainingError(path.string() + ": corrupt header: " + e.what());
  }
  if (raw.header.value("format_version", 0) != kFormatVersion) {
    throw TrainingError(path.string() + ": unsupported checkpoint version");
  }
  std::size_t total = 0;
  for (const auto& t : raw.header.at("tensors")) total += t.at("numel").get<std::size_t>();
  raw.payload.resize(total);
  in.read(reinterpret_cast<char*>(raw.payload.data()),
          static_cast<std::streamsize>(total * sizeof(double)));
  if (!in) throw TrainingError(path.string() + ": truncated tensor payload");
  return raw;
}

CheckpointMeta meta_from(const json& header) {
  CheckpointMeta meta;
  meta.stage = header.at("stage");
  meta.lineage = header.at("lineage").get<std::vector<std::string>>();
  meta.config = config_from_json(header.at("config").dump());
  return meta;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const OmniModel& model,
                     const CheckpointMeta& meta) {
  json header;
  header["format_version"] = kFormatVersion;
  header["stage"] = meta.stage;
  header["lineage"] = meta.lineage;
  header["config"] = json::parse(config_to_json(model.config()));
  header["vocab"] = model.vocab().words();
  json markers = json::object();
  for (std::size_t m = 0; m < sequence::kMarkerCount; ++m) {
    const auto marker = static_cast<sequence::Marker>(m);
    markers[std::string(sequence::marker_name(marker))] =
        sequence::SpecialTokens::serialized_id(marker, model.vocab().size());
  }
  header["special_ids"] = markers;
  json tensors = json::array();
  std::vector<const Tensor*> order;
  for (const auto& g : model.groups()) {
    for (const auto& p : g.params) {
      tensors.push_back({{"group", g.name},
                         {"name", p.name},
                         {"shape", p.tensor.shape()},
                         {"numel", p.tensor.numel()}});
      order.push_back(&p.tensor);
    }
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw TrainingError("cannot write checkpoint " + path.string());
    const std::uint64_t len = text.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Tensor* t : order) {
      const auto d = t->data();
      out.write(reinterpret_cast<const char*>(d.data()),
                static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
    if (!out) throw TrainingError("short write on checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  return meta_from(read_raw(path).header);
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, OmniModel& model,
                               const std::vector<std::string>& groups) {
  const RawCheckpoint raw = read_raw(path);
  CheckpointMeta meta = meta_from(raw.header);
  if (!(meta.config == model.config())) {
    throw TrainingError(path.string() + ": model config differs from the running model");
  }
  if (raw.header.at("vocab").get<std::vector<std::string>>() != model.vocab().words()) {
    throw TrainingError(path.string() + ": vocabulary differs from the running model");
  }
  for (const auto& g : groups) {
    if (!is_group_name(g)) throw TrainingError("unknown parameter group '" + g + "'");
  }
  auto wanted = [&](const std::string& g) {
    return groups.empty() || std::find(groups.begin(), groups.end(), g) != groups.end();
  };
  std::size_t offset = 0;
  for (const auto& entry : raw.header.at("tensors")) {
    const std::string group = entry.at("group");
    const std::string name = entry.at("name");
    const std::size_t n = entry.at("numel");
    if (wanted(group)) {
      bool found = false;
      for (auto& p : model.group(group).params) {
        if (p.name != name) continue;
        if (p.tensor.numel() != n) throw TrainingError(path.string() + ": size mismatch for " + name);
        auto dst = p.tensor.mutable_data();
        std::copy_n(raw.payload.begin() + static_cast<std::ptrdiff_t>(offset), n, dst.begin());
        found = true;
        break;
      }
      if (!found) throw TrainingError(path.string() + ": unexpected tensor " + name);
    }
    offset += n;
  }
  return meta;
}

}  // namespace omnifuse::training
