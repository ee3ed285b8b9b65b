#include "nqreader/model.hpp"

#include "nqreader/inference.hpp"

namespace nqreader {

ModelParams model_init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams params;
  params.encoder = encoder_init(config, rng);
  for (Index t = 0; t < config.blocks; ++t)
    params.blocks.push_back(reader_block_init(config.hidden, rng));
  params.predictor = predictor_init(config, rng);
  return params;
}

std::vector<std::pair<std::string, Tensor>> named_parameters(const ModelParams& params) {
  std::vector<std::pair<std::string, Tensor>> out;
  params.encoder.collect("encoder", out);
  for (std::size_t t = 0; t < params.blocks.size(); ++t)
    params.blocks[t].collect("reader.block" + std::to_string(t), out);
  params.predictor.collect("predictor", out);
  return out;
}

std::vector<Tensor> parameters(const ModelParams& params) {
  std::vector<Tensor> out;
  for (auto& [name, tensor] : named_parameters(params)) out.push_back(tensor);
  return out;
}

void reset_gradients(const ModelParams& params) {
  for (Tensor& t : parameters(params)) t.reset_grad();
}

ModelOutput model_forward(const ModelParams& params, const ModelConfig& config,
                          const InstanceTuple& instance) {
  PackedSequence packed = pack_sequence(instance.question, instance.document, config.max_len);
  EncoderOutput encoded = encode(packed, params.encoder, config.heads);
  ModelOutput out;
  out.reader = run_reader(encoded.question, encoded.document, instance.seg, params.blocks, config);
  out.predictor = run_predictor(out.reader, instance.seg, params.predictor, config);
  return out;
}

LossTerms model_loss(const ModelParams& params, const ModelConfig& config,
                     const InstanceTuple& instance) {
  ModelOutput out = model_forward(params, config, instance);
  return total_loss(out.predictor, instance.targets, config);
}

namespace {

std::vector<Scalar> row_values(const Tensor& t) {
  std::vector<Scalar> out;
  if (!t.defined()) return out;
  out.reserve(static_cast<std::size_t>(t.cols()));
  for (Index j = 0; j < t.cols(); ++j) out.push_back(t.value()(0, j));
  return out;
}

}  // namespace

SpanPrediction span_prediction(const ModelParams& params, const ModelConfig& config,
                               const InstanceTuple& instance) {
  NoGradGuard guard;
  ModelOutput out = model_forward(params, config, instance);
  SpanPrediction span;
  span.span_id = instance.span_id;
  span.paragraph_ids = instance.paragraph_ids;
  span.seg = instance.seg;
  span.token_offset = instance.span_offset;
  span.long_logits = row_values(out.predictor.long_logits);
  span.start_logits = row_values(out.predictor.start_logits);
  span.end_logits = row_values(out.predictor.end_logits);
  span.type_output = row_values(out.predictor.type_output);
  return span;
}

}  // namespace nqreader
