// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>

#include "omnifuse/training/model.hpp"
#include "omnifuse/training/stages.hpp"
#include "support/stage_checks.hpp"

using namespace omnifuse;
using namespace omnifuse::training;
using visual::BranchId;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("omnifuse_training_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::set<std::string> trainable_after_freeze(const StageId& id) {
  OmniModel model(testsupport::small_model_config());
  apply_freeze(model, StageConfig::defaults(id));
  std::set<std::string> out;
  for (const auto& g : model.groups()) {
    if (!g.frozen) out.insert(g.name);
    for (const auto& p : g.params) CHECK(p.tensor.requires_grad() == !g.frozen);
  }
  return out;
}

}  // namespace

TEST_CASE("freeze table per stage") {
  using S = std::set<std::string>;
  CHECK(trainable_after_freeze({StageKind::kBranchPretrain, BranchId::kFace}) == S{"proj_face"});
  CHECK(trainable_after_freeze({StageKind::kBranchPretrain, BranchId::kBody}) == S{"proj_body"});
  CHECK(trainable_after_freeze({StageKind::kBranchPretrain, BranchId::kInteraction}) == S{"proj_inter"});
  CHECK(trainable_after_freeze({StageKind::kVisualFinetune}) ==
        S{"proj_face", "proj_body", "proj_inter", "decoder", "weight_mlps", "special_tokens"});
  CHECK(trainable_after_freeze({StageKind::kAudioAlign}) == S{"proj_audio"});
  CHECK(trainable_after_freeze({StageKind::kCrossmodal}) ==
        S{"decoder", "proj_face", "proj_body", "proj_inter", "proj_audio", "weight_mlps", "special_tokens"});
  for (const auto& id : all_stages()) {
    const S t = trainable_after_freeze(id);
    CHECK(t.count("vis_encoder") == 0);
    CHECK(t.count("instr_encoder") == 0);
    CHECK(t.count("audio_encoder") == 0);
  }
  CHECK(all_stages().size() == 6);
}

TEST_CASE("freeze rejects unknown or off-schedule groups") {
  OmniModel model(testsupport::small_model_config());
  StageConfig c = StageConfig::defaults({StageKind::kAudioAlign});
  c.trainable_groups.insert("proj_torso");
  CHECK_THROWS_AS(apply_freeze(model, c), TrainingError);
  c = StageConfig::defaults({StageKind::kAudioAlign});
  c.trainable_groups.insert("vis_encoder");
  CHECK_THROWS_AS(apply_freeze(model, c), TrainingError);
  CHECK_THROWS_AS(model.group("nope"), TrainingError);
}

TEST_CASE("six stages x 100 steps leave frozen groups bitwise unchanged") {
  for (const auto& r : testsupport::check_freeze_schedule(100, 21)) {
    INFO(r.stage);
    CHECK(r.frozen_changed.empty());
    CHECK(r.trainable_static.empty());
  }
}

TEST_CASE("stage names round trip") {
  for (const auto& id : all_stages()) CHECK(parse_stage(id.name()) == id);
  CHECK(parse_stage("branch_pretrain(body)").branch == BranchId::kBody);
  CHECK(StageId{StageKind::kBranchPretrain, BranchId::kInteraction}.checkpoint_stem() == "branch_interaction");
  CHECK_THROWS_AS(parse_stage("pretrain"), TrainingError);
  CHECK(required_parents({StageKind::kCrossmodal}) == std::vector<std::string>{"visual_finetune", "audio_align"});
}

TEST_CASE("synthetic dataset sizes and twins") {
  DataSpec spec;
  spec.per_family = 30;
  CHECK(make_synthetic_dataset(spec, 1).size() == 90);
  spec.av_fraction = 1.0;
  const auto av = make_synthetic_dataset(spec, 1);
  CHECK(av.size() == 180);
  std::size_t twins = 0;
  for (const auto& s : av) {
    if (!s.twin_of) continue;
    ++twins;
    const auto& o = av[*s.twin_of];
    CHECK(o.has_audio);
    CHECK_FALSE(s.has_audio);
    CHECK(o.clip.pixels == s.clip.pixels);
    CHECK(o.answer == s.answer);
  }
  CHECK(twins == 90);
}

TEST_CASE("synthetic dataset is deterministic per seed") {
  DataSpec spec;
  spec.per_family = 5;
  spec.av_fraction = 0.5;
  const auto a = make_synthetic_dataset(spec, 9), b = make_synthetic_dataset(spec, 9);
  const auto c = make_synthetic_dataset(spec, 10);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].clip.pixels == b[i].clip.pixels);
    CHECK(a[i].instruction == b[i].instruction);
    CHECK(a[i].has_audio == b[i].has_audio);
    if (a[i].wave) CHECK(a[i].wave->samples == b[i].wave->samples);
  }
  bool differs = a.size() != c.size();
  for (std::size_t i = 0; !differs && i < a.size(); ++i) differs = a[i].clip.pixels != c[i].clip.pixels;
  CHECK(differs);
}

TEST_CASE("labels are decodable only from the matching aspect") {
  DataSpec spec;
  spec.per_family = 90;
  spec.blank_prob = 0.0;
  const auto samples = make_synthetic_dataset(spec, 3);
  const OracleReport r = oracle_report(samples, spec.classes);
  CHECK(r.scored == 270);
  CHECK(r.matching == 1.0);
  CHECK(std::abs(r.non_matching - 1.0 / 3) <= 0.1);
}

TEST_CASE("invalid data specs are rejected") {
  DataSpec spec;
  spec.classes = 4;
  CHECK_THROWS_AS(spec.validate(), TrainingError);
  spec = DataSpec{};
  spec.frames = 1;
  CHECK_THROWS_AS(make_synthetic_dataset(spec, 1), TrainingError);
  spec = DataSpec{};
  spec.av_fraction = 1.5;
  CHECK_THROWS_AS(spec.validate(), TrainingError);
}

TEST_CASE("stages refuse to start without their parent checkpoints") {
  const auto dir = scratch_dir("lineage");
  for (StageKind kind : {StageKind::kVisualFinetune, StageKind::kAudioAlign, StageKind::kCrossmodal}) {
    OmniModel model(testsupport::small_model_config());
    StageConfig c = StageConfig::defaults({kind});
    c.data.per_family = 1;
    c.steps = 1;
    const StageData data = make_stage_data(c);
    try {
      run_stage(model, c, data, dir);
      FAIL("expected a lineage error");
    } catch (const TrainingError& e) {
      const std::string what = e.what();
      CHECK(what.find(required_parents(c.stage).front() + ".ckpt") != std::string::npos);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("short branch pretraining lowers the smoothed loss and checkpoints") {
  const auto dir = scratch_dir("pretrain");
  OmniModel model(testsupport::small_model_config(8));
  StageConfig c = StageConfig::defaults({StageKind::kBranchPretrain, BranchId::kFace});
  c.data.per_family = 30;
  c.data.frames = 2;
  c.steps = 120;
  c.heldout_per_family = 6;
  const StageResult r = run_stage(model, c, make_stage_data(c), dir);
  REQUIRE(r.log.rows.size() == 120);
  const auto smooth = r.log.smoothed(20);
  CHECK(smooth.back() < smooth.front());
  CHECK(r.frozen_hash_before == r.frozen_hash_after);
  for (const auto& row : r.log.rows) CHECK(row.frozen_hash == r.frozen_hash_before);
  CHECK(std::filesystem::exists(r.checkpoint));
  CHECK(r.checkpoint.filename() == "branch_face.ckpt");
  CHECK(read_checkpoint_meta(r.checkpoint).stage == "branch_face");

  std::ostringstream csv;
  r.log.write_csv(csv);
  CHECK(csv.str().rfind("step,loss,lr,frozen_hash\n0,", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("smoothing is a trailing mean") {
  TrainLog log;
  for (double v : {4.0, 2.0, 6.0, 0.0}) log.rows.push_back({log.rows.size(), v, 0.1, 0});
  const auto s = log.smoothed(2);
  CHECK(s == std::vector<double>{4.0, 3.0, 4.0, 3.0});
}

TEST_CASE("checkpoints round trip parameters, config and lineage") {
  const auto dir = scratch_dir("ckpt");
  ModelConfig config = testsupport::small_model_config(31);
  config.normalization = fusion::WeightNormalization::kRaw;
  OmniModel a(config);
  const CheckpointMeta meta{"visual_finetune", {"branch_face", "branch_body"}, config};
  save_checkpoint(dir / "vf.ckpt", a, meta);

  auto perturbed = [&] {
    auto m = std::make_unique<OmniModel>(config);
    for (auto& g : m->groups()) {
      for (auto& p : g.params) {
        for (double& v : p.tensor.mutable_data()) v += 0.125;
      }
    }
    return m;
  };
  auto b = perturbed();
  const CheckpointMeta back = load_checkpoint(dir / "vf.ckpt", *b);
  CHECK(back.stage == "visual_finetune");
  CHECK(back.lineage == meta.lineage);
  CHECK(back.config == config);
  for (std::size_t i = 0; i < a.groups().size(); ++i) {
    CHECK(parameter_hash(a.groups()[i]) == parameter_hash(b->groups()[i]));
  }

  // Loading a single group leaves the others alone.
  auto c = perturbed();
  const auto decoder_before = parameter_hash(c->group("decoder"));
  load_checkpoint(dir / "vf.ckpt", *c, {"proj_face"});
  CHECK(parameter_hash(c->group("proj_face")) == parameter_hash(a.group("proj_face")));
  CHECK(parameter_hash(c->group("decoder")) == decoder_before);
  CHECK(parameter_hash(c->group("decoder")) != parameter_hash(a.group("decoder")));

  OmniModel wrong_shape(ModelConfig{});
  CHECK_THROWS_AS(load_checkpoint(dir / "vf.ckpt", wrong_shape), TrainingError);
  CHECK_THROWS_AS(read_checkpoint_meta(dir / "absent.ckpt"), TrainingError);
  CHECK(config_from_json(config_to_json(config)) == config);
  std::filesystem::remove_all(dir);
}

TEST_CASE("untrained gates are near uniform over 10 seeds") {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelConfig config;
    config.seed = 100 + seed;
    const OmniModel model(config);
    for (const auto& fw : specialization_report(model)) {
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(fw.mean.w[i] - 1.0 / 3) <= 0.2);
        mean[i] += fw.mean.w[i] / 30.0;
      }
    }
  }
  for (double m : mean) CHECK(std::abs(m - 1.0 / 3) <= 0.05);
}

TEST_CASE("repeated instructions give identical weights") {
  const OmniModel model(testsupport::small_model_config());
  const auto report = specialization_report(
      model, {{BranchId::kBody, {"what action is the person doing", "what action is the person doing"}}});
  const auto single = model.fusion_weights("what action is the person doing");
  CHECK(report.front().mean.w == single.w);
  CHECK(report.front().family == BranchId::kBody);
}
