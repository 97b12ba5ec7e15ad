#include "doctest.h"
#include "helpers.hpp"
#include "idseq/config.hpp"
#include "idseq/error.hpp"

#include <fstream>

using namespace idseq;

TEST_CASE("train config JSON round trip") {
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.learning_rate = 0.003;
  cfg.embedding_type = DiffKind::kAux;
  cfg.augment_rotation = true;
  cfg.sampler.sequence_length = 2;
  cfg.sampler.mode = SamplingMode::kRandom;
  cfg.loss.margin = 0.35;
  cfg.detector.hidden_size = 17;
  const auto text = to_json(cfg).dump();
  CHECK(train_config_from_json(nlohmann::json::parse(text)) == cfg);
}

TEST_CASE("defaults match the documented training setup") {
  const TrainConfig cfg = train_config_from_json(nlohmann::json::object());
  CHECK(cfg.epochs == 100);
  CHECK(cfg.learning_rate == 0.0005);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.sampler.sequence_length == 64);
  CHECK(cfg.sampler.sequences_per_video_per_epoch == 20);
  CHECK(cfg.loss.margin == 0.2);
  CHECK(cfg.loss.lambda1 == 1.0);
  CHECK(cfg.loss.lambda2 == 0.1);
  CHECK(cfg.detector.hidden_size == 1024);
  CHECK(cfg.detector.head_hidden == 512);
  CHECK(cfg.detector.dropout_pre_rnn == 0.2);
  CHECK(cfg.detector.dropout_pre_head == 0.5);
  CHECK(cfg.adam.beta1 == 0.9);
  CHECK(cfg.adam.beta2 == 0.999);
  CHECK(cfg.adam.epsilon == 1e-8);
}

TEST_CASE("unknown keys and invalid values are rejected") {
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"epoch": 3})")),
                  ValidationError);
  CHECK_THROWS_AS(
      train_config_from_json(nlohmann::json::parse(R"({"loss": {"margn": 0.1}})")),
      ValidationError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"epochs": 0})")),
                  ValidationError);
  CHECK_THROWS_AS(
      train_config_from_json(nlohmann::json::parse(R"({"embedding_type": "sum"})")),
      ValidationError);
}

TEST_CASE("dotted overrides") {
  nlohmann::json doc = nlohmann::json::object();
  apply_override(doc, "loss.margin=0.5");
  apply_override(doc, "embedding_type=tmp");
  apply_override(doc, "sampler.sequence_length=16");
  CHECK(doc["loss"]["margin"] == 0.5);
  CHECK(doc["embedding_type"] == "tmp");
  const auto cfg = train_config_from_json(doc);
  CHECK(cfg.embedding_type == DiffKind::kTmp);
  CHECK(cfg.sampler.sequence_length == 16);
  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ValidationError);

  testing::TempDir dir;
  std::ofstream(dir / "c.json") << R"({"epochs": 3, "seed": 9})";
  const auto loaded = load_train_config(dir / "c.json", {"epochs=4"});
  CHECK(loaded.epochs == 4);
  CHECK(loaded.seed == 9);
}

TEST_CASE("checkpoint meta round trip") {
  CheckpointMeta m;
  m.embedding_type = DiffKind::kTmp;
  m.embedding_dim = 32;
  m.backend_id = "synthetic";
  m.val_auc = 0.8125;
  m.epoch = 3;
  CHECK(checkpoint_meta_from_json(nlohmann::json::parse(to_json(m).dump())) == m);
  m.val_auc.reset();
  CHECK(checkpoint_meta_from_json(nlohmann::json::parse(to_json(m).dump())) == m);
}
