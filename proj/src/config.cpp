#include "idseq/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "idseq/error.hpp"

namespace idseq {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + ": wrong type");
  }
}

std::string read_string(const json& j, const char* key, const std::string& fallback,
                        const std::string& where) {
  std::string v = fallback;
  read(j, key, v, where);
  return v;
}

SamplerConfig sampler_from_json(const json& j) {
  const std::string where = "sampler";
  reject_unknown(j, {"sequence_length", "sequences_per_video_per_epoch", "sampling_mode",
                     "eval_stride"},
                 where);
  SamplerConfig s;
  read(j, "sequence_length", s.sequence_length, where);
  read(j, "sequences_per_video_per_epoch", s.sequences_per_video_per_epoch, where);
  read(j, "eval_stride", s.eval_stride, where);
  const auto mode = read_string(j, "sampling_mode", std::string(to_string(s.mode)), where);
  auto parsed = parse_sampling_mode(mode);
  if (!parsed) throw ValidationError("sampler.sampling_mode: unknown value '" + mode + "'");
  s.mode = *parsed;
  return s;
}

ojson to_json(const SamplerConfig& s) {
  ojson j;
  j["sequence_length"] = s.sequence_length;
  j["sequences_per_video_per_epoch"] = s.sequences_per_video_per_epoch;
  j["sampling_mode"] = to_string(s.mode);
  j["eval_stride"] = s.eval_stride;
  return j;
}

}  // namespace

ojson to_json(const DetectorConfig& cfg) {
  ojson j;
  j["input_dim"] = cfg.input_dim;
  j["hidden_size"] = cfg.hidden_size;
  j["bidirectional"] = cfg.bidirectional;
  j["head_hidden"] = cfg.head_hidden;
  j["dropout_pre_rnn"] = cfg.dropout_pre_rnn;
  j["dropout_pre_head"] = cfg.dropout_pre_head;
  j["num_classes"] = cfg.num_classes;
  return j;
}

DetectorConfig detector_config_from_json(const json& j) {
  const std::string where = "detector";
  reject_unknown(j, {"input_dim", "hidden_size", "bidirectional", "head_hidden",
                     "dropout_pre_rnn", "dropout_pre_head", "num_classes"},
                 where);
  DetectorConfig c;
  read(j, "input_dim", c.input_dim, where);
  read(j, "hidden_size", c.hidden_size, where);
  read(j, "bidirectional", c.bidirectional, where);
  read(j, "head_hidden", c.head_hidden, where);
  read(j, "dropout_pre_rnn", c.dropout_pre_rnn, where);
  read(j, "dropout_pre_head", c.dropout_pre_head, where);
  read(j, "num_classes", c.num_classes, where);
  return c;
}

ojson to_json(const TrainConfig& cfg) {
  ojson j;
  j["epochs"] = cfg.epochs;
  j["learning_rate"] = cfg.learning_rate;
  j["optimizer"] = cfg.optimizer;
  j["adam"] = {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2},
               {"epsilon", cfg.adam.epsilon}};
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["embedding_type"] = to_string(cfg.embedding_type);
  j["ap_same_identity"] = cfg.ap_same_identity;
  j["triplets_per_epoch"] = cfg.triplets_per_epoch;
  j["normalize_embeddings"] = cfg.normalize_embeddings;
  j["augment_rotation"] = cfg.augment_rotation;
  j["aggregation"] = to_string(cfg.aggregation);
  j["workers"] = cfg.workers;
  j["sampler"] = to_json(cfg.sampler);
  j["loss"] = {{"margin", cfg.loss.margin},
               {"lambda1", cfg.loss.lambda1},
               {"lambda2", cfg.loss.lambda2}};
  j["detector"] = to_json(cfg.detector);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  const std::string where = "config";
  reject_unknown(j, {"epochs", "learning_rate", "optimizer", "adam", "batch_size", "seed",
                     "embedding_type", "ap_same_identity", "triplets_per_epoch",
                     "normalize_embeddings", "augment_rotation", "aggregation", "workers",
                     "sampler", "loss",
                     "detector"},
                 where);
  TrainConfig c;
  read(j, "epochs", c.epochs, where);
  read(j, "learning_rate", c.learning_rate, where);
  read(j, "optimizer", c.optimizer, where);
  read(j, "batch_size", c.batch_size, where);
  read(j, "seed", c.seed, where);
  read(j, "ap_same_identity", c.ap_same_identity, where);
  read(j, "triplets_per_epoch", c.triplets_per_epoch, where);
  read(j, "normalize_embeddings", c.normalize_embeddings, where);
  read(j, "augment_rotation", c.augment_rotation, where);
  read(j, "workers", c.workers, where);

  const auto kind = read_string(j, "embedding_type", std::string(to_string(c.embedding_type)), where);
  auto parsed_kind = parse_diff_kind(kind);
  if (!parsed_kind) throw ValidationError("config.embedding_type: unknown value '" + kind + "'");
  c.embedding_type = *parsed_kind;

  const auto agg = read_string(j, "aggregation", std::string(to_string(c.aggregation)), where);
  auto parsed_agg = parse_aggregation(agg);
  if (!parsed_agg) throw ValidationError("config.aggregation: unknown value '" + agg + "'");
  c.aggregation = *parsed_agg;

  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    reject_unknown(a, {"beta1", "beta2", "epsilon"}, "adam");
    read(a, "beta1", c.adam.beta1, "adam");
    read(a, "beta2", c.adam.beta2, "adam");
    read(a, "epsilon", c.adam.epsilon, "adam");
  }
  if (j.contains("sampler")) c.sampler = sampler_from_json(j.at("sampler"));
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    reject_unknown(l, {"margin", "lambda1", "lambda2"}, "loss");
    read(l, "margin", c.loss.margin, "loss");
    read(l, "lambda1", c.loss.lambda1, "loss");
    read(l, "lambda2", c.loss.lambda2, "loss");
  }
  if (j.contains("detector")) c.detector = detector_config_from_json(j.at("detector"));
  c.validate();
  return c;
}

ojson to_json(const CheckpointMeta& m) {
  ojson j;
  j["embedding_type"] = to_string(m.embedding_type);
  j["embedding_dim"] = m.embedding_dim;
  j["backend_id"] = m.backend_id;
  j["sequence_length"] = m.sequence_length;
  j["eval_stride"] = m.eval_stride;
  j["aggregation"] = to_string(m.aggregation);
  j["normalize_embeddings"] = m.normalize_embeddings;
  j["epoch"] = m.epoch;
  j["val_auc"] = m.val_auc ? ojson(*m.val_auc) : ojson(nullptr);
  return j;
}

CheckpointMeta checkpoint_meta_from_json(const json& j) {
  const std::string where = "checkpoint meta";
  reject_unknown(j, {"embedding_type", "embedding_dim", "backend_id", "sequence_length",
                     "eval_stride", "aggregation", "normalize_embeddings", "epoch", "val_auc"},
                 where);
  CheckpointMeta m;
  const auto kind = read_string(j, "embedding_type", "", where);
  auto parsed_kind = parse_diff_kind(kind);
  if (!parsed_kind) throw FormatError(where + ": bad embedding_type '" + kind + "'");
  m.embedding_type = *parsed_kind;
  read(j, "embedding_dim", m.embedding_dim, where);
  read(j, "backend_id", m.backend_id, where);
  read(j, "sequence_length", m.sequence_length, where);
  read(j, "eval_stride", m.eval_stride, where);
  const auto agg = read_string(j, "aggregation", "MEAN", where);
  auto parsed_agg = parse_aggregation(agg);
  if (!parsed_agg) throw FormatError(where + ": bad aggregation '" + agg + "'");
  m.aggregation = *parsed_agg;
  read(j, "normalize_embeddings", m.normalize_embeddings, where);
  read(j, "epoch", m.epoch, where);
  if (j.contains("val_auc") && !j.at("val_auc").is_null()) {
    m.val_auc = j.at("val_auc").get<double>();
  }
  return m;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::istringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) throw ValidationError("override '" + assignment + "': empty key segment");
    path.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object()) *node = json::object();
    node = &(*node)[path[i]];
  }
  if (!node->is_object()) *node = json::object();
  (*node)[path.back()] = value;
}

TrainConfig load_train_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config '" + path.string() + "'");
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError("config '" + path.string() + "': " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return train_config_from_json(doc);
}

}  // namespace idseq
