#include "nqreader/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace nqreader {

using nlohmann::json;

PredictionLayerKind prediction_layer_from_string(const std::string& name) {
  if (name == "tanh") return PredictionLayerKind::kTanh;
  if (name == "gelu") return PredictionLayerKind::kGelu;
  if (name == "transformer") return PredictionLayerKind::kTransformer;
  if (name == "recurrent") return PredictionLayerKind::kRecurrent;
  throw ConfigError("unknown prediction layer '" + name +
                    "' (expected tanh, gelu, transformer, or recurrent)");
}

std::string to_string(PredictionLayerKind kind) {
  switch (kind) {
    case PredictionLayerKind::kTanh: return "tanh";
    case PredictionLayerKind::kGelu: return "gelu";
    case PredictionLayerKind::kTransformer: return "transformer";
    case PredictionLayerKind::kRecurrent: return "recurrent";
  }
  throw ConfigError("unknown prediction layer kind");
}

void ModelConfig::validate() const {
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (blocks < 0) throw ConfigError("blocks must be >= 0");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (hidden % heads != 0)
    throw ConfigError("hidden (" + std::to_string(hidden) + ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  if (encoder_depth < 0 || encoder_depth > 2) throw ConfigError("encoder_depth must be 0, 1, or 2");
  if (vocab < 8) throw ConfigError("vocab must be >= 8");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (stride < 1 || stride > window) throw ConfigError("stride must satisfy 1 <= stride <= window");
  if (max_len < window + 4) throw ConfigError("max_len must leave room for window plus specials");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (keep_negative_p <= 0.0 || keep_negative_p > 1.0)
    throw ConfigError("keep_negative_p must be in (0, 1]");
  if (max_span_len < 1) throw ConfigError("max_span_len must be >= 1");
  if (prediction_layer == PredictionLayerKind::kRecurrent && hidden % 2 != 0)
    throw ConfigError("recurrent prediction layer needs an even hidden size");
  if (s2l_cascade && (no_multilevel || no_cascade))
    throw ConfigError("s2l_cascade needs the long head and the cascaded structure");
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ModelConfig config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");

  static const std::vector<std::string> known = {
      "hidden", "blocks", "top_k", "heads", "encoder_depth", "vocab", "max_len", "window",
      "stride", "learning_rate", "batch", "epochs", "max_steps", "keep_negative_p",
      "max_span_len", "seed", "no_dual_attention", "no_question_self_attention",
      "no_paragraph_self_attention", "no_paragraph_mask", "no_dynamic_mask", "no_multilevel",
      "no_cascade", "s2l_cascade", "no_question_embedding", "prediction_layer",
      "question_embed_post_self_attention", "short_answer_cross_span", "type_head_softmax"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config key '" + it.key() + "'");
  }

  ModelConfig c;
  read_field(j, "hidden", c.hidden);
  read_field(j, "blocks", c.blocks);
  read_field(j, "top_k", c.top_k);
  read_field(j, "heads", c.heads);
  read_field(j, "encoder_depth", c.encoder_depth);
  read_field(j, "vocab", c.vocab);
  read_field(j, "max_len", c.max_len);
  read_field(j, "window", c.window);
  read_field(j, "stride", c.stride);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "batch", c.batch);
  read_field(j, "epochs", c.epochs);
  read_field(j, "max_steps", c.max_steps);
  read_field(j, "keep_negative_p", c.keep_negative_p);
  read_field(j, "max_span_len", c.max_span_len);
  read_field(j, "seed", c.seed);
  read_field(j, "no_dual_attention", c.no_dual_attention);
  read_field(j, "no_question_self_attention", c.no_question_self_attention);
  read_field(j, "no_paragraph_self_attention", c.no_paragraph_self_attention);
  read_field(j, "no_paragraph_mask", c.no_paragraph_mask);
  read_field(j, "no_dynamic_mask", c.no_dynamic_mask);
  read_field(j, "no_multilevel", c.no_multilevel);
  read_field(j, "no_cascade", c.no_cascade);
  read_field(j, "s2l_cascade", c.s2l_cascade);
  read_field(j, "no_question_embedding", c.no_question_embedding);
  if (j.contains("prediction_layer"))
    c.prediction_layer = prediction_layer_from_string(j.at("prediction_layer").get<std::string>());
  read_field(j, "question_embed_post_self_attention", c.question_embed_post_self_attention);
  read_field(j, "short_answer_cross_span", c.short_answer_cross_span);
  read_field(j, "type_head_softmax", c.type_head_softmax);
  return c;
}

ModelConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

std::string config_to_json(const ModelConfig& c) {
  json j;
  j["hidden"] = c.hidden;
  j["blocks"] = c.blocks;
  j["top_k"] = c.top_k;
  j["heads"] = c.heads;
  j["encoder_depth"] = c.encoder_depth;
  j["vocab"] = c.vocab;
  j["max_len"] = c.max_len;
  j["window"] = c.window;
  j["stride"] = c.stride;
  j["learning_rate"] = c.learning_rate;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["max_steps"] = c.max_steps;
  j["keep_negative_p"] = c.keep_negative_p;
  j["max_span_len"] = c.max_span_len;
  j["seed"] = c.seed;
  j["no_dual_attention"] = c.no_dual_attention;
  j["no_question_self_attention"] = c.no_question_self_attention;
  j["no_paragraph_self_attention"] = c.no_paragraph_self_attention;
  j["no_paragraph_mask"] = c.no_paragraph_mask;
  j["no_dynamic_mask"] = c.no_dynamic_mask;
  j["no_multilevel"] = c.no_multilevel;
  j["no_cascade"] = c.no_cascade;
  j["s2l_cascade"] = c.s2l_cascade;
  j["no_question_embedding"] = c.no_question_embedding;
  j["prediction_layer"] = to_string(c.prediction_layer);
  j["question_embed_post_self_attention"] = c.question_embed_post_self_attention;
  j["short_answer_cross_span"] = c.short_answer_cross_span;
  j["type_head_softmax"] = c.type_head_softmax;
  return j.dump();
}

}  // namespace nqreader
