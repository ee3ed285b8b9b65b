#include "nqreader/trainer.hpp"

#include <chrono>
#include <numeric>

#include <json.hpp>

namespace nqreader {

namespace {

// distinct stream from parameter initialization
constexpr std::uint64_t kShuffleSalt = 0x73687566666c65ULL;

}  // namespace

TrainResult train_model(const std::vector<Page>& pages, const ModelConfig& config,
                        ModelParams& params, AdamState& optimizer, std::ostream* metrics_out) {
  config.validate();

  PipelineConfig pipeline{config.window, config.stride, config.keep_negative_p, config.seed};
  std::vector<InstanceTuple> instances;
  for (const Page& page : pages) {
    auto page_instances = build_instances(page, pipeline);
    instances.insert(instances.end(), std::make_move_iterator(page_instances.begin()),
                     std::make_move_iterator(page_instances.end()));
  }
  instances = subsample_negatives(std::move(instances), config.keep_negative_p, config.seed);
  if (instances.empty()) throw DataError("train: no instances survived the pipeline");

  Rng shuffle_rng(config.seed ^ kShuffleSalt);
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t at = 0; at < order.size();) {
      const std::size_t batch_n =
          std::min(static_cast<std::size_t>(config.batch), order.size() - at);
      reset_gradients(params);
      StepRecord record;
      for (std::size_t b = 0; b < batch_n; ++b, ++at) {
        const InstanceTuple& instance = instances[order[at]];
        LossTerms terms = model_loss(params, config, instance);
        backward(scale(terms.total, 1.0 / static_cast<Scalar>(batch_n)));
        record.total += terms.total.item() / static_cast<Scalar>(batch_n);
        if (terms.long_term.defined())
          record.long_part += terms.long_term.item() / static_cast<Scalar>(batch_n);
        record.start_part += terms.start_term.item() / static_cast<Scalar>(batch_n);
        record.end_part += terms.end_term.item() / static_cast<Scalar>(batch_n);
        record.type_part += terms.type_term.item() / static_cast<Scalar>(batch_n);
      }
      std::vector<Tensor> tensors = parameters(params);
      adam_step(tensors, optimizer);

      record.step = ++result.steps;
      record.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
      if (metrics_out) {
        nlohmann::json j;
        j["step"] = record.step;
        j["loss"] = record.total;
        j["loss_long"] = record.long_part;
        j["loss_start"] = record.start_part;
        j["loss_end"] = record.end_part;
        j["loss_type"] = record.type_part;
        j["wall_ms"] = record.wall_ms;
        (*metrics_out) << j.dump() << "\n";
      }
      result.records.push_back(record);
      if (config.max_steps > 0 && result.steps >= config.max_steps) return result;
    }
  }
  return result;
}

}  // namespace nqreader
