// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>

#include "omnifuse/audio/audio.hpp"
#include "omnifuse/curation/corpus.hpp"
#include "omnifuse/curation/curation.hpp"
#include "omnifuse/eval/metrics.hpp"
#include "omnifuse/training/model.hpp"
#include "omnifuse/training/stages.hpp"
#include "omnifuse/visual/visual.hpp"

namespace omnifuse::cli {

using nlohmann::ordered_json;
using training::StageId;
using training::StageKind;

LineageError::LineageError(const std::string& stage, const std::string& missing)
    : std::runtime_error(stage + " requires checkpoint " + missing + ", which does not exist"),
      stage_(stage),
      missing_(missing) {}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  AppConfig config;
  std::ostream& out;
  std::ostream& err;

  void log(const std::string& event, ordered_json fields) const {
    ordered_json line{{"event", event}};
    line.update(fields);
    err << line.dump() << '\n';
  }
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void check_lineage(const AppConfig& config, const StageId& stage) {
  for (const auto& parent : training::required_parents(stage)) {
    const auto path = config.checkpoint_dir() / (parent + ".ckpt");
    if (!std::filesystem::exists(path)) throw LineageError(stage.name(), path.string());
  }
}

ordered_json weights_json(const fusion::FusionWeights& w) {
  return {{"face", w.w[0]}, {"body", w.w[1]}, {"interaction", w.w[2]}, {"sum", w.sum()}};
}

int train(const Context& ctx, const StageId& stage) {
  check_lineage(ctx.config, stage);
  const training::StageConfig sc = ctx.config.stage_config(stage);
  ctx.log("stage", {{"stage", stage.name()},
                    {"steps", sc.steps},
                    {"lr", sc.lr},
                    {"batch", sc.batch},
                    {"seed", sc.seed}});
  training::OmniModel model(ctx.config.model);
  const training::StageData data = training::make_stage_data(sc);
  const training::StageResult result =
      training::run_stage(model, sc, data, ctx.config.checkpoint_dir());

  const auto log_path = ctx.config.log_dir() / (stage.checkpoint_stem() + ".csv");
  std::filesystem::create_directories(log_path.parent_path());
  {
    std::ofstream f(log_path, std::ios::trunc);
    result.log.write_csv(f);
  }
  const auto smooth = result.log.smoothed(20);
  ordered_json summary{{"stage", stage.name()},
                       {"checkpoint", result.checkpoint.string()},
                       {"log", log_path.string()},
                       {"steps", result.log.rows.size()},
                       {"final_loss", smooth.empty() ? 0.0 : smooth.back()},
                       {"heldout_accuracy", result.heldout_accuracy},
                       {"frozen_unchanged", result.frozen_hash_before == result.frozen_hash_after}};
  if (stage.kind == StageKind::kVisualFinetune || stage.kind == StageKind::kCrossmodal) {
    ordered_json spec = ordered_json::array();
    for (const auto& fw : training::specialization_report(model)) {
      spec.push_back({{"family", visual::branch_name(fw.family)},
                      {"weights", weights_json(fw.mean)},
                      {"argmax_matches", fw.argmax_matches}});
    }
    summary["specialization"] = spec;
  }
  if (result.modality) {
    summary["modality"] = {{"video_audio", result.modality->video_audio},
                           {"video_only", result.modality->video_only},
                           {"chance", result.modality->chance}};
  }
  ctx.out << summary.dump(2) << '\n';
  return 0;
}

struct CurateOptions {
  bool resume = false;
  std::string from;
  std::string stop_after{curation::kStageAnnotate};
};

int curate(const Context& ctx, const CurateOptions& opt) {
  const AppConfig& cfg = ctx.config;
  const auto& stages = curation::stage_order();
  for (const auto* name : {&opt.from, &opt.stop_after}) {
    if (!name->empty() && std::find(stages.begin(), stages.end(), *name) == stages.end()) {
      throw UsageError("unknown curation stage '" + *name + "'");
    }
  }
  const curation::SyntheticCorpus corpus(cfg.seed);
  const bool synthetic = cfg.curation_input.empty();
  const curation::DirectoryFrameSource frames(curation::SyntheticCorpus::kThumbWidth,
                                              synthetic ? &corpus : nullptr);
  const curation::ClientSet clients = curation::make_clients(cfg.curation);
  const auto dir = cfg.curation_dir();
  ctx.log("curate", {{"input", synthetic ? "synthetic" : cfg.curation_input.string()},
                     {"dir", dir.string()},
                     {"config_hash", curation::config_hash(cfg.curation)},
                     {"resume", opt.resume}});
  curation::Manifest m;
  if (opt.resume) {
    m = curation::resume_pipeline(cfg.curation, clients, frames, dir, opt.from);
  } else {
    if (!opt.from.empty()) throw UsageError("--from needs --resume");
    if (synthetic) {
      m = corpus.raw_manifest();
    } else {
      m.records = curation::read_jsonl(cfg.curation_input);
    }
    m = curation::run_pipeline(std::move(m), cfg.curation, clients, frames, dir, opt.stop_after);
  }
  const auto c = curation::count_records(m.records);
  ordered_json summary{{"watermark", m.watermark},
                       {"config_hash", m.config_hash},
                       {"records", c.records},
                       {"kept", c.kept},
                       {"low_res", c.low_res},
                       {"static", c.static_clips},
                       {"hyperactive", c.hyperactive},
                       {"duplicate", c.duplicate},
                       {"client_error", c.client_error},
                       {"needs_review", c.needs_review}};
  if (m.watermark == curation::kStageAnnotate) summary["manifest"] = (dir / "manifest.jsonl").string();
  ctx.out << summary.dump(2) << '\n';
  return 0;
}

int evaluate(const Context& ctx, const std::filesystem::path& file, double beta) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot open predictions file " + file.string());
  const auto report = eval::evaluate(eval::read_predictions(in), beta);
  report.write_table(ctx.out);
  const auto csv = ctx.config.out / "eval.csv";
  std::filesystem::create_directories(ctx.config.out);
  std::ofstream f(csv, std::ios::trunc);
  report.write_csv(f);
  ctx.log("eval", {{"file", file.string()}, {"csv", csv.string()}});
  return 0;
}

/// The newest checkpoint that carries a trained gate.
std::filesystem::path default_checkpoint(const AppConfig& cfg, const std::string& explicit_path) {
  if (!explicit_path.empty()) {
    if (!std::filesystem::exists(explicit_path)) throw LineageError("inference", explicit_path);
    return explicit_path;
  }
  for (const char* stem : {"crossmodal", "audio_align", "visual_finetune"}) {
    const auto p = cfg.checkpoint_dir() / (std::string(stem) + ".ckpt");
    if (std::filesystem::exists(p)) return p;
  }
  throw LineageError("inference", (cfg.checkpoint_dir() / "visual_finetune.ckpt").string());
}

std::unique_ptr<training::OmniModel> load_model(const Context& ctx, const std::filesystem::path& path) {
  const auto meta = training::read_checkpoint_meta(path);
  auto model = std::make_unique<training::OmniModel>(meta.config);
  training::load_checkpoint(path, *model);
  ctx.log("checkpoint", {{"path", path.string()}, {"stage", meta.stage}, {"lineage", meta.lineage}});
  return model;
}

int inspect_weights(const Context& ctx, const std::string& instruction, const std::string& ckpt) {
  const auto model = load_model(ctx, default_checkpoint(ctx.config, ckpt));
  const auto w = model->fusion_weights(instruction);
  ordered_json out{{"instruction", instruction}, {"weights", weights_json(w)}};
  ctx.out << out.dump(2) << '\n';
  return 0;
}

struct InferOptions {
  std::string clip;
  std::string audio;
  std::string instruction;
  std::string checkpoint;
  double fps = 1.0;
  std::size_t max_new = 4;
};

int infer(const Context& ctx, const InferOptions& opt) {
  const auto model = load_model(ctx, default_checkpoint(ctx.config, opt.checkpoint));
  const visual::VideoClip clip = visual::load_clip(opt.clip, opt.fps);
  std::optional<audio::AudioWave> wave;
  if (!opt.audio.empty()) wave = audio::read_wav(opt.audio);
  const auto s = model->prepare("infer", clip, wave ? &*wave : nullptr, opt.instruction, "",
                                visual::BranchId::kFace);
  const auto directive = wave ? sequence::Directive::kVideoAudio : sequence::Directive::kVideo;
  auto ids = model->generate(s, directive, opt.max_new);
  ids.erase(std::find(ids.begin(), ids.end(), fusion::Vocabulary::kEos), ids.end());
  ordered_json out{{"instruction", opt.instruction},
                   {"directive", sequence::directive_token(directive)},
                   {"answer", model->vocab().detokenize(ids)},
                   {"weights", weights_json(model->fusion_weights(opt.instruction))}};
  ctx.out << out.dump(2) << '\n';
  return 0;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const LineageError*>(&e)) return "lineage";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const curation::CurationError*>(&e)) return "curation";
  if (dynamic_cast<const curation::ClientError*>(&e)) return "client";
  if (dynamic_cast<const training::TrainingError*>(&e)) return "training";
  if (dynamic_cast<const eval::MetricError*>(&e)) return "eval";
  return "internal";
}

int report_error(std::ostream& err, const std::string& type, const std::string& message,
                 ordered_json extra = ordered_json::object()) {
  ordered_json body{{"type", type}, {"message", message}};
  body.update(extra);
  err << ordered_json{{"error", body}}.dump() << '\n';
  return type == "usage" ? 2 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Environment& env) {
  CLI::App app{"Instruction-gated multimodal fusion toolkit", "omnifuse"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  std::string config_path, seed, out_dir, clients;
  std::size_t stage_steps = 0;
  app.add_option("--config", config_path, "JSON config file (env " + std::string(kEnvConfig) + ")");
  app.add_option("--seed", seed, "Run seed (env " + std::string(kEnvSeed) + ")");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--clients", clients, "Curation clients")->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--stage-steps", stage_steps, "Optimizer steps for the stage being run")
      ->check(CLI::PositiveNumber);
  app.add_option("--set", ov.sets, "Config override key=value (repeatable)");

  CurateOptions curate_opt;
  auto* curate_cmd = app.add_subcommand("curate", "Run the curation pipeline");
  curate_cmd->add_flag("--resume", curate_opt.resume, "Continue from the recorded watermark");
  curate_cmd->add_option("--from", curate_opt.from, "Resume from an earlier finished stage");
  curate_cmd->add_option("--stop-after", curate_opt.stop_after, "Last stage to run");

  std::string branch;
  auto* pretrain_cmd = app.add_subcommand("pretrain-branch", "Pretrain one visual branch");
  pretrain_cmd->add_option("branch", branch, "face, body or interaction")
      ->required()
      ->check(CLI::IsMember({"face", "body", "interaction"}));
  auto* finetune_cmd = app.add_subcommand("finetune-visual", "Joint visual instruction tuning");
  auto* audio_cmd = app.add_subcommand("train-audio", "Audio projector alignment");
  auto* omni_cmd = app.add_subcommand("train-omni", "Cross-modal instruction tuning");

  std::string eval_file;
  double beta = 1.2;
  auto* eval_cmd = app.add_subcommand("eval", "Score a JSONL predictions file");
  eval_cmd->add_option("file", eval_file, "Predictions (JSONL)")->required();
  eval_cmd->add_option("--beta", beta, "ROUGE-L recall weight")->check(CLI::PositiveNumber);

  InferOptions infer_opt;
  auto* infer_cmd = app.add_subcommand("infer", "Answer an instruction about a clip");
  infer_cmd->add_option("--clip", infer_opt.clip, "Frame directory or raw clip file")->required();
  infer_cmd->add_option("--audio", infer_opt.audio, "WAV file");
  infer_cmd->add_option("--instruction", infer_opt.instruction, "Instruction text")->required();
  infer_cmd->add_option("--checkpoint", infer_opt.checkpoint, "Checkpoint path");
  infer_cmd->add_option("--fps", infer_opt.fps, "Frame rate of a frame directory");
  infer_cmd->add_option("--max-new", infer_opt.max_new, "Maximum generated tokens");

  std::string instruction, inspect_ckpt;
  auto* inspect_cmd = app.add_subcommand("inspect-weights", "Print the fusion weights of an instruction");
  inspect_cmd->add_option("instruction", instruction, "Instruction text")->required();
  inspect_cmd->add_option("--checkpoint", inspect_ckpt, "Checkpoint path");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return report_error(err, "usage", e.what());
  }

  try {
    if (!config_path.empty()) ov.config_path = config_path;
    if (!seed.empty()) ov.seed = seed;
    if (!out_dir.empty()) ov.out = out_dir;
    if (!clients.empty()) ov.clients = clients;
    if (stage_steps > 0) ov.stage_steps = stage_steps;
    Context ctx{resolve_config(ov, env), out, err};
    const auto resolved = ctx.config.to_json();
    ctx.log("config", {{"seed", ctx.config.seed}, {"config", resolved}});
    write_text(ctx.config.out / "resolved_config.json", resolved.dump(2) + "\n");

    if (curate_cmd->parsed()) return curate(ctx, curate_opt);
    if (pretrain_cmd->parsed()) {
      return train(ctx, {StageKind::kBranchPretrain, visual::parse_branch(branch)});
    }
    if (finetune_cmd->parsed()) return train(ctx, {StageKind::kVisualFinetune});
    if (audio_cmd->parsed()) return train(ctx, {StageKind::kAudioAlign});
    if (omni_cmd->parsed()) return train(ctx, {StageKind::kCrossmodal});
    if (eval_cmd->parsed()) return evaluate(ctx, eval_file, beta);
    if (infer_cmd->parsed()) return infer(ctx, infer_opt);
    if (inspect_cmd->parsed()) return inspect_weights(ctx, instruction, inspect_ckpt);
    return report_error(err, "usage", "no command given");
  } catch (const LineageError& e) {
    return report_error(err, "lineage", e.what(),
                        {{"stage", e.stage()}, {"missing_checkpoint", e.missing()}});
  } catch (const std::exception& e) {
    return report_error(err, error_type(e), e.what());
  }
}

}  // namespace omnifuse::cli
