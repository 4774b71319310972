// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

// Runs the nine acceptance checks and prints one PASS/FAIL line for each.
// Exit status is the number of failed checks.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "omnifuse/audio/audio.hpp"
#include "omnifuse/cli/commands.hpp"
#include "omnifuse/curation/corpus.hpp"
#include "omnifuse/curation/curation.hpp"
#include "omnifuse/eval/metrics.hpp"
#include "omnifuse/fusion/fusion.hpp"
#include "omnifuse/sequence/sequence.hpp"
#include "omnifuse/training/model.hpp"
#include "omnifuse/training/stages.hpp"
#include "support/gradcheck_suite.hpp"
#include "support/oracles.hpp"
#include "support/stage_checks.hpp"

using namespace omnifuse;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

Outcome gradients() {
  const auto start = Clock::now();
  const auto graphs = testsupport::check_random_graphs(200, 20260101);
  const auto model = testsupport::check_model_gradients(11);
  const double elapsed = seconds_since(start);
  const bool ok = graphs.checked >= 200 && graphs.failures == 0 && model.checked > 0 &&
                  model.failures == 0 && elapsed < 60.0;
  return {ok, fmt("%.0f graphs and %.0f model tensors, worst rel err %.2e, %.1f s", double(graphs.checked),
                  double(model.checked), std::max(graphs.worst, model.worst), elapsed)};
}

Outcome fuse_exactness() {
  Rng rng(3);
  bool bitwise = true;
  for (int i = 0; i < 100 && bitwise; ++i) {
    const Tensor f1 = normal_tensor({2, 4, 4, 8}, 1.0, rng, false);
    const Tensor f2 = normal_tensor({2, 4, 4, 8}, 1.0, rng, false);
    const Tensor f3 = normal_tensor({2, 4, 4, 8}, 1.0, rng, false);
    fusion::FusionWeights one_hot;
    one_hot.w = {1.0, 0.0, 0.0};
    bitwise = same_bits(fusion::fuse(f1, f2, f3, one_hot), f1);
  }
  std::size_t violations = 0;
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  std::exponential_distribution<double> e(1.0);
  for (int i = 0; i < 1000; ++i) {
    const Shape shape{dim(rng), dim(rng), dim(rng), dim(rng)};
    const Tensor f1 = normal_tensor(shape, 1.0, rng, false);
    const Tensor f2 = normal_tensor(shape, 2.0, rng, false);
    const Tensor f3 = normal_tensor(shape, 0.5, rng, false);
    fusion::FusionWeights w;
    double total = 0.0;
    for (double& v : w.w) total += (v = e(rng) + 1e-6);
    for (double& v : w.w) v /= total;
    const Tensor out = fusion::fuse(f1, f2, f3, w);
    for (std::size_t k = 0; k < out.numel(); ++k) {
      const double lo = std::min({f1[k], f2[k], f3[k]}), hi = std::max({f1[k], f2[k], f3[k]});
      violations += out[k] < lo || out[k] > hi;
    }
  }
  return {bitwise && violations == 0,
          std::string(bitwise ? "one-hot fuse is bitwise F1" : "one-hot fuse differs from F1") +
              fmt(", %.0f bound violations over 1000 grids", double(violations))};
}

Outcome timing_chain() {
  Rng rng(1000);
  std::uniform_int_distribution<std::size_t> samples(1, 60 * audio::kSampleRate);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t s = samples(rng);
    const std::size_t t_mel = audio::mel_frame_count(s);
    const std::size_t t_enc = audio::encoder_frame_count(t_mel);
    const std::size_t t_a = audio::audio_token_count(t_enc);
    bad += t_mel != oracle::ceil_div(s, 160) || t_enc != oracle::ceil_div(t_mel, 2) ||
           t_a != oracle::ceil_div(t_enc, 3);
  }
  // 30 s through the actual feature path, encoder and pooling.
  audio::AudioWave wave;
  wave.samples.resize(30 * audio::kSampleRate);
  for (std::size_t i = 0; i < wave.samples.size(); ++i) wave.samples[i] = 0.5 * std::sin(0.01 * double(i));
  const audio::MelSpectrogram mel = audio::log_mel(wave);
  Rng init(5);
  const audio::AudioEncoderStub encoder(8, init);
  const audio::AudioProjector projector(8, 8, init);
  const Tensor frames = encoder.encode(mel);
  const std::size_t tokens = projector.pool_and_project(frames).count();
  const bool ok = bad == 0 && mel.frames == 3000 && frames.dim(0) == 1500 && tokens == 500;
  return {ok, fmt("%.0f mismatches over 1000 durations, 30 s gives %.0f -> %.0f -> %.0f", double(bad),
                  double(mel.frames), double(frames.dim(0)), double(tokens))};
}

Outcome freeze_schedule() {
  const auto outcomes = testsupport::check_freeze_schedule(100, 21);
  std::string failed;
  for (const auto& o : outcomes) {
    if (!o.ok()) failed += (failed.empty() ? "" : ", ") + o.stage;
  }
  return {outcomes.size() == 6 && failed.empty(),
          fmt("%.0f stages x 100 steps", double(outcomes.size())) +
              (failed.empty() ? std::string(", frozen groups unchanged, trainable groups moved")
                              : ", failing: " + failed)};
}

json cli_json(const std::vector<std::string>& args, int& code) {
  std::vector<std::string> argv{"omnifuse"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::ostringstream out, err;
  code = cli::run_cli(argv, out, err, {});
  if (code != 0) {
    std::fprintf(stderr, "%s", err.str().c_str());
    return {};
  }
  return json::parse(out.str());
}

// Criteria 5 and 6 share one run of the default stage pipeline.
struct PipelineRun {
  bool ok = true;
  json finetune;
  json crossmodal;
  double visual_seconds = 0.0;
};

PipelineRun run_default_pipeline(const fs::path& dir) {
  PipelineRun run;
  int code = 0;
  const auto start = Clock::now();
  for (const char* branch : {"face", "body", "interaction"}) {
    cli_json({"--out", dir.string(), "pretrain-branch", branch}, code);
    run.ok &= code == 0;
  }
  run.finetune = cli_json({"--out", dir.string(), "finetune-visual"}, code);
  run.ok &= code == 0;
  run.visual_seconds = seconds_since(start);
  cli_json({"--out", dir.string(), "train-audio"}, code);
  run.ok &= code == 0;
  run.crossmodal = cli_json({"--out", dir.string(), "train-omni"}, code);
  run.ok &= code == 0;
  return run;
}

Outcome specialization(const PipelineRun& run) {
  if (!run.ok) return {false, "stage pipeline did not complete"};
  bool all_match = true;
  std::string weights;
  for (const auto& fam : run.finetune.at("specialization")) {
    all_match &= fam.at("argmax_matches").get<bool>();
    const auto& w = fam.at("weights");
    weights += " " + fam.at("family").get<std::string>() +
               fmt("(%.2f/%.2f/%.2f)", w.at("face").get<double>(), w.at("body").get<double>(),
                   w.at("interaction").get<double>());
  }
  const double acc = run.finetune.at("heldout_accuracy").get<double>();
  return {all_match && acc >= 0.9 && run.visual_seconds <= 600.0,
          fmt("held-out accuracy %.3f, %.0f s;", acc, run.visual_seconds) + weights};
}

Outcome modality_ordering(const PipelineRun& run) {
  if (!run.ok) return {false, "stage pipeline did not complete"};
  const auto& m = run.crossmodal.at("modality");
  const double av = m.at("video_audio"), v = m.at("video_only"), chance = m.at("chance");
  return {av >= v && v >= chance && av - v >= 0.05,
          fmt("video+audio %.3f, video-only %.3f, chance %.3f", av, v, chance)};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(1000);
  static const char* kWords[] = {"a", "b", "c", "d", "e", "f"};
  std::uniform_int_distribution<std::size_t> w(0, 5), len_ref(1, 12), len_hyp(0, 12);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> ref(len_ref(rng)), hyp(len_hyp(rng));
    for (auto& s : ref) s = kWords[w(rng)];
    for (auto& s : hyp) s = kWords[w(rng)];
    const double expected = double(oracle::edit_distance(ref, hyp)) / double(ref.size());
    bad += eval::wer(ref, hyp) != expected;
  }
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  const bool hand = near(eval::uar({{2, 0}, {1, 1}}), 0.75) && near(eval::war({{2, 0}, {1, 1}}), 0.75) &&
                    near(eval::uar({{3, 0, 0}, {0, 1, 1}, {0, 0, 0}}), 0.75) &&
                    near(eval::war({{3, 0}, {1, 1}}), 0.8) && near(eval::uar({{3, 0}, {1, 1}}), 0.75) &&
                    eval::war({{0, 1}, {1, 0}}) == 0.0 && near(eval::wer("a b c d e", "a x c e"), 0.4) &&
                    near(eval::wer("a", "x y z"), 3.0) &&
                    near(eval::rouge_l("a b c d", "a b d"), 2.44 * 0.75 / (0.75 + 1.44)) &&
                    near(eval::rouge_l("a b c", "a b c"), 1.0) && eval::rouge_l("a b c", "x y z") == 0.0;
  return {bad == 0 && hand, fmt("%.0f WER mismatches over 1000 pairs, hand examples ", double(bad)) +
                                (hand ? "match" : "differ")};
}

Outcome curation_determinism() {
  const curation::SyntheticCorpus corpus(7);
  const curation::DirectoryFrameSource frames(curation::SyntheticCorpus::kThumbWidth, &corpus);
  curation::CurationConfig config;
  config.seed = 7;
  const auto clients = curation::make_clients(config);
  const fs::path root = fs::temp_directory_path() / "omnifuse_acceptance_curation";
  fs::remove_all(root);
  const std::string golden = slurp(fs::path(OMNIFUSE_TEST_DATA) / "golden_manifest.jsonl");
  std::size_t runs = 0, identical = 0;
  curation::StageCounts counts;
  for (int i = 0; i < 2; ++i) {
    const auto dir = root / ("cold" + std::to_string(i));
    counts = curation::count_records(curation::run_pipeline(corpus.raw_manifest(), config, clients, frames, dir).records);
    ++runs;
    identical += slurp(dir / "manifest.jsonl") == golden;
  }
  for (const auto stage : curation::stage_order()) {
    const auto dir = root / ("resume_" + std::string(stage));
    curation::run_pipeline(corpus.raw_manifest(), config, clients, frames, dir, stage);
    curation::resume_pipeline(config, clients, frames, dir);
    ++runs;
    identical += slurp(dir / "manifest.jsonl") == golden;
  }
  fs::remove_all(root);
  const auto e = corpus.expected();
  const bool counts_ok = counts.low_res == e.low_res && counts.static_clips == e.static_clips &&
                         counts.hyperactive == e.hyperactive && counts.records == e.clips_after_split;
  return {!golden.empty() && identical == runs && counts_ok,
          fmt("%.0f/%.0f runs byte-identical to the golden manifest; low_res %.0f, ", double(identical),
              double(runs), double(counts.low_res)) +
              fmt("static %.0f, hyperactive %.0f (expected %.0f/", double(counts.static_clips),
                  double(counts.hyperactive), double(e.low_res)) +
              fmt("%.0f/%.0f)", double(e.static_clips), double(e.hyperactive))};
}

Outcome sequence_assembly() {
  using namespace sequence;
  const std::size_t d = 8;
  const Decoder decoder({.vocab_size = fusion::Vocabulary::standard().size(), .d_model = d, .layers = 1,
                         .hidden = 16, .max_len = 160},
                        1);
  const SpecialTokens specials(d, 2);
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> small(1, 4), tokens(1, 20), words(1, 9), fill(1, 6),
      word(6, fusion::Vocabulary::standard().size() - 1);
  std::size_t cases = 0, bad = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const Shape grid{small(rng), small(rng), small(rng), d};
    const Tensor vision = normal_tensor(grid, 1.0, rng, false);
    const Tensor audio = normal_tensor({tokens(rng), d}, 1.0, rng, false);
    std::vector<std::size_t> ids(words(rng));
    for (auto& id : ids) id = word(rng);
    const std::size_t p = fill(rng), n_vis = grid[0] * grid[1] * grid[2];
    for (bool has_v : {false, true}) {
      for (bool has_a : {false, true}) {
        for (Directive dir : {Directive::kVideo, Directive::kAudio, Directive::kVideoAudio}) {
          const TokenSequence seq = assemble(decoder, specials, ids, has_v ? &vision : nullptr,
                                             has_a ? &audio : nullptr, dir, {.placeholder_len = p});
          const bool v_in = has_v && dir != Directive::kAudio, a_in = has_a && dir != Directive::kVideo;
          const std::size_t expected = 1 + 2 + (v_in ? n_vis : p) + 2 + (a_in ? audio.dim(0) : p) + ids.size();
          ++cases;
          bad += seq.length() != expected || !markers_well_nested(seq);
        }
      }
    }
  }

  training::ModelConfig config;
  config.d_enc = config.d_model = config.d_text = config.d_hidden = config.d_audio = 16;
  config.decoder_hidden = 32;
  config.decoder_layers = 1;
  const training::OmniModel model(config);
  training::DataSpec spec;
  spec.per_family = 34;
  spec.av_fraction = 1.0;
  spec.frames = 2;
  spec.audio_seconds = 0.3;
  const auto samples = training::make_synthetic_dataset(spec, 12);
  std::size_t twins = 0, twin_bad = 0;
  const auto mode = training::FusionMode::gate();
  for (const auto& twin : samples) {
    if (!twin.twin_of || twins == 100) continue;
    const auto& original = samples[*twin.twin_of];
    const auto a = model.prepare(original.id, original.clip, &*original.wave, original.instruction,
                                 original.answer, original.family);
    const auto b = model.prepare(twin.id, twin.clip, nullptr, twin.instruction, twin.answer, twin.family);
    const double la = model.loss(a, Directive::kVideo, mode).item();
    const double lb = model.loss(b, Directive::kVideo, mode).item();
    twin_bad += !same_bits(model.build_sequence(a, Directive::kVideo, mode).embeddings,
                           model.build_sequence(b, Directive::kVideo, mode).embeddings) ||
                std::memcmp(&la, &lb, sizeof la) != 0;
    ++twins;
  }
  return {bad == 0 && twins == 100 && twin_bad == 0,
          fmt("%.0f/%.0f presence-grid cases match the length formula, %.0f/%.0f twins identical",
              double(cases - bad), double(cases), double(twins - twin_bad), double(twins))};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const std::function<Outcome()>& check) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d: %s (%s) [%.1f s]\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  };

  report(1, gradients);
  report(2, fuse_exactness);
  report(3, timing_chain);
  report(4, freeze_schedule);

  const fs::path dir = fs::temp_directory_path() / "omnifuse_acceptance_stages";
  fs::remove_all(dir);
  PipelineRun run;
  report(5, [&] {
    run = run_default_pipeline(dir);
    return specialization(run);
  });
  report(6, [&] { return modality_ordering(run); });
  fs::remove_all(dir);

  report(7, metric_oracles);
  report(8, curation_determinism);
  report(9, sequence_assembly);
  std::printf("%d of 9 criteria passed\n", 9 - failed);
  return failed;
}
