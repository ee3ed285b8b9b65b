#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nqreader/commands.hpp"

using namespace nqreader;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheckFailed = 3;

// --config file first, explicit flags override
void add_model_flags(CLI::App* cmd, ModelConfig& config, std::string& config_path) {
  cmd->add_option("--config", config_path, "flat JSON config file; flags override its values");
  cmd->add_option("--hidden", config.hidden, "hidden size h");
  cmd->add_option("--blocks", config.blocks, "reader blocks T (0 removes the reader)");
  cmd->add_option("--topk", config.top_k, "dynamic-mask K");
  cmd->add_option("--heads", config.heads, "attention heads");
  cmd->add_option("--encoder-depth", config.encoder_depth, "encoder transformer blocks (0..2)");
  cmd->add_option("--vocab", config.vocab, "vocabulary size");
  cmd->add_option("--max-len", config.max_len, "packed sequence budget");
  cmd->add_option("--window", config.window, "sliding window size");
  cmd->add_option("--stride", config.stride, "sliding window stride");
  cmd->add_option("--lr", config.learning_rate, "Adam learning rate");
  cmd->add_option("--batch", config.batch, "batch size");
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--max-steps", config.max_steps, "optimizer step cap (0 = no cap)");
  cmd->add_option("--keep-negative-p", config.keep_negative_p,
                  "keep probability for NULL instances");
  cmd->add_option("--max-span-len", config.max_span_len, "short answer length cap");
  cmd->add_option("--seed", config.seed, "random seed");

  cmd->add_flag("--no-dual-attention", config.no_dual_attention, "ablation: drop dual attention");
  cmd->add_flag("--no-question-self-attention", config.no_question_self_attention,
                "ablation: drop the question transformer");
  cmd->add_flag("--no-paragraph-self-attention", config.no_paragraph_self_attention,
                "ablation: drop the paragraph transformer");
  cmd->add_flag("--no-paragraph-mask", config.no_paragraph_mask,
                "ablation: drop the paragraph attention mask");
  cmd->add_flag("--no-dynamic-mask", config.no_dynamic_mask,
                "ablation: drop the top-K attention mask");
  cmd->add_flag("--no-multilevel", config.no_multilevel,
                "ablation: short heads only, long answer derived from the span");
  cmd->add_flag("--no-cascade", config.no_cascade,
                "ablation: heads stop feeding each other");
  cmd->add_flag("--s2l-cascade", config.s2l_cascade, "ablation: short-to-long cascade order");
  cmd->add_flag("--no-question-embedding", config.no_question_embedding,
                "ablation: type head ignores the question embedding");
  cmd->add_option("--prediction-layer", [&config](const std::vector<std::string>& values) {
    config.prediction_layer = prediction_layer_from_string(values.at(0));
    return true;
  }, "prediction layer kind: tanh, gelu, transformer, recurrent");
  cmd->add_flag("--question-embed-post-self-attention",
                config.question_embed_post_self_attention,
                "pool the question embedding after self-attention instead of before");
  cmd->add_flag("--short-answer-cross-span", config.short_answer_cross_span,
                "search the short answer across every span holding the winning paragraph");
  cmd->add_flag("--no-type-head-softmax",
                [&config](std::int64_t) { config.type_head_softmax = false; },
                "emit type logits instead of probabilities");
}

ModelConfig finalize_config(CLI::App* cmd, const ModelConfig& flag_values,
                            const std::string& config_path) {
  if (config_path.empty()) {
    flag_values.validate();
    return flag_values;
  }
  ModelConfig config = config_from_file(config_path);
  // every flag the user actually passed wins over the file
  auto take = [&](const char* flag, auto member) {
    if (cmd->count(flag) > 0) config.*member = flag_values.*member;
  };
  take("--hidden", &ModelConfig::hidden);
  take("--blocks", &ModelConfig::blocks);
  take("--topk", &ModelConfig::top_k);
  take("--heads", &ModelConfig::heads);
  take("--encoder-depth", &ModelConfig::encoder_depth);
  take("--vocab", &ModelConfig::vocab);
  take("--max-len", &ModelConfig::max_len);
  take("--window", &ModelConfig::window);
  take("--stride", &ModelConfig::stride);
  take("--lr", &ModelConfig::learning_rate);
  take("--batch", &ModelConfig::batch);
  take("--epochs", &ModelConfig::epochs);
  take("--max-steps", &ModelConfig::max_steps);
  take("--keep-negative-p", &ModelConfig::keep_negative_p);
  take("--max-span-len", &ModelConfig::max_span_len);
  take("--seed", &ModelConfig::seed);
  take("--no-dual-attention", &ModelConfig::no_dual_attention);
  take("--no-question-self-attention", &ModelConfig::no_question_self_attention);
  take("--no-paragraph-self-attention", &ModelConfig::no_paragraph_self_attention);
  take("--no-paragraph-mask", &ModelConfig::no_paragraph_mask);
  take("--no-dynamic-mask", &ModelConfig::no_dynamic_mask);
  take("--no-multilevel", &ModelConfig::no_multilevel);
  take("--no-cascade", &ModelConfig::no_cascade);
  take("--s2l-cascade", &ModelConfig::s2l_cascade);
  take("--no-question-embedding", &ModelConfig::no_question_embedding);
  take("--prediction-layer", &ModelConfig::prediction_layer);
  take("--question-embed-post-self-attention", &ModelConfig::question_embed_post_self_attention);
  take("--short-answer-cross-span", &ModelConfig::short_answer_cross_span);
  take("--no-type-head-softmax", &ModelConfig::type_head_softmax);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale natural-questions reading model"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  SyntheticConfig corpus;
  std::string gen_out = "corpus.jsonl";
  gen->add_option("--out", gen_out, "dataset output path");
  gen->add_option("--pages", corpus.pages, "number of pages");
  gen->add_option("--paragraphs", corpus.paragraphs_per_page, "paragraphs per page");
  gen->add_option("--tokens", corpus.tokens_per_paragraph, "tokens per paragraph");
  gen->add_option("--vocab", corpus.vocab, "vocabulary size");
  gen->add_option("--null-fraction", corpus.null_fraction, "fraction of NULL pages");
  gen->add_option("--long-only-fraction", corpus.long_only_fraction,
                  "fraction of LONG-only pages");
  gen->add_option("--yes-no-fraction", corpus.yes_no_fraction, "fraction of YES/NO pages");
  gen->add_option("--seed", corpus.seed, "random seed");

  // train
  auto* train = app.add_subcommand("train", "train on a dataset");
  ModelConfig train_config;
  std::string train_config_path;
  std::string train_data, train_ckpt = "model.ckpt", train_metrics;
  train->add_option("--data", train_data, "dataset path")->required();
  train->add_option("--out", train_ckpt, "checkpoint output path");
  train->add_option("--metrics", train_metrics, "per-step metrics JSONL path");
  add_model_flags(train, train_config, train_config_path);

  // predict
  auto* predict = app.add_subcommand("predict", "write page-level predictions");
  std::string predict_data, predict_ckpt, predict_out = "predictions.jsonl";
  Thresholds thresholds;
  predict->add_option("--data", predict_data, "dataset path")->required();
  predict->add_option("--checkpoint", predict_ckpt, "checkpoint path")->required();
  predict->add_option("--out", predict_out, "predictions output path");
  predict->add_option("--theta-long", thresholds.long_threshold, "long answerability threshold");
  predict->add_option("--theta-short", thresholds.short_threshold,
                      "short answerability threshold");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold");
  std::string eval_preds, eval_data;
  bool calibrate = false;
  evaluate->add_option("--predictions", eval_preds, "predictions path")->required();
  evaluate->add_option("--data", eval_data, "gold dataset path")->required();
  evaluate->add_flag("--calibrate", calibrate, "also sweep the answerability thresholds");

  // grad-check
  auto* check_cmd = app.add_subcommand("grad-check", "verify gradients by finite differences");
  GradCheckConfig check = default_grad_check_config();
  check_cmd->add_option("--hidden", check.model.hidden, "hidden size");
  check_cmd->add_option("--blocks", check.model.blocks, "reader blocks");
  check_cmd->add_option("--topk", check.model.top_k, "dynamic-mask K");
  check_cmd->add_option("--heads", check.model.heads, "attention heads");
  check_cmd->add_option("--encoder-depth", check.model.encoder_depth, "encoder blocks");
  check_cmd->add_option("--n", check.question_len, "question length");
  check_cmd->add_option("--m", check.document_len, "document span length");
  check_cmd->add_option("--paragraphs", check.paragraphs, "paragraph count");
  check_cmd->add_option("--epsilon", check.epsilon, "finite-difference step");
  check_cmd->add_option("--tolerance", check.tolerance, "max relative error accepted");
  check_cmd->add_option("--seed", check.seed, "random seed");
  check_cmd->add_flag("--perturb-gradient", check.perturb_gradient,
                      "inject a deliberate backward bug (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      cmd_gen_data({corpus, gen_out});
      std::cout << "wrote " << gen_out << " and " << gen_out << ".manifest.json\n";
    } else if (train->parsed()) {
      TrainOptions options;
      options.data_path = train_data;
      options.config = finalize_config(train, train_config, train_config_path);
      options.checkpoint_out = train_ckpt;
      options.metrics_out = train_metrics;
      TrainSummary summary = cmd_train(options);
      std::cout << "trained " << summary.steps << " steps, final loss " << summary.final_loss
                << ", checkpoint " << train_ckpt << "\n";
    } else if (predict->parsed()) {
      cmd_predict({predict_data, predict_ckpt, predict_out, thresholds});
      std::cout << "wrote " << predict_out << "\n";
    } else if (evaluate->parsed()) {
      cmd_evaluate({eval_preds, eval_data, calibrate}, std::cout);
    } else if (check_cmd->parsed()) {
      GradCheckResult result = cmd_grad_check(check, std::cout);
      if (!result.pass) return kExitCheckFailed;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
