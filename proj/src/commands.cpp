#include "nqreader/commands.hpp"

#include <array>
#include <fstream>
#include <map>

#include <json.hpp>

namespace nqreader {

using nlohmann::json;

void cmd_gen_data(const GenDataOptions& options) {
  std::vector<Page> pages = generate_corpus(options.corpus);
  save_pages(pages, options.out_path);

  std::array<long, kAnswerTypeCount> counts{};
  for (const Page& page : pages) {
    int type = page.gold ? static_cast<int>(page.gold->type) : 0;
    ++counts[static_cast<std::size_t>(type)];
  }
  json manifest;
  manifest["pages"] = pages.size();
  manifest["seed"] = options.corpus.seed;
  manifest["counts"] = {{"null", counts[0]},
                        {"short", counts[1]},
                        {"long", counts[2]},
                        {"yes", counts[3]},
                        {"no", counts[4]}};
  std::ofstream out(options.out_path + ".manifest.json");
  if (!out) throw DataError("cannot write manifest for " + options.out_path);
  out << manifest.dump(2) << "\n";
}

TrainSummary cmd_train(const TrainOptions& options) {
  options.config.validate();
  std::vector<Page> pages = load_pages(options.data_path);
  if (pages.empty()) throw DataError("train: dataset " + options.data_path + " is empty");

  Rng rng(options.config.seed);
  ModelParams params = model_init(options.config, rng);
  AdamState optimizer = adam_init(parameters(params), options.config.learning_rate);

  std::ofstream metrics;
  std::ostream* metrics_out = nullptr;
  if (!options.metrics_out.empty()) {
    metrics.open(options.metrics_out);
    if (!metrics) throw DataError("cannot write metrics: " + options.metrics_out);
    metrics_out = &metrics;
  }

  TrainResult result = train_model(pages, options.config, params, optimizer, metrics_out);
  save_checkpoint(options.checkpoint_out, options.config, params);

  TrainSummary summary;
  summary.steps = result.steps;
  summary.final_loss = result.records.empty() ? 0.0 : result.records.back().total;
  return summary;
}

std::vector<GoldAnswer> gold_answers(const std::vector<Page>& pages) {
  std::vector<GoldAnswer> gold;
  gold.reserve(pages.size());
  for (const Page& page : pages) {
    GoldAnswer g;
    g.page_id = page.page_id;
    if (page.gold) {
      g.long_paragraph = page.gold->long_pid;
      if (page.gold->short_span)
        g.short_span = std::make_pair(page.gold->short_span->first,
                                      page.gold->short_span->second - 1);  // inclusive end
    }
    gold.push_back(std::move(g));
  }
  return gold;
}

std::vector<std::pair<std::string, PagePrediction>> predict_pages(
    const std::vector<Page>& pages, const ModelParams& params, const ModelConfig& config,
    const Thresholds& thresholds) {
  PipelineConfig pipeline{config.window, config.stride, 1.0, config.seed};
  SelectOptions options;
  options.max_span_len = config.max_span_len;
  options.thresholds = thresholds;
  options.cross_span_short = config.short_answer_cross_span;
  options.derive_long_from_short = config.no_multilevel;

  std::vector<std::pair<std::string, PagePrediction>> predictions;
  predictions.reserve(pages.size());
  for (const Page& page : pages) {
    std::vector<SpanPrediction> spans;
    for (const InstanceTuple& instance : build_instances(page, pipeline))
      spans.push_back(span_prediction(params, config, instance));
    predictions.emplace_back(page.page_id, select_answers(spans, options));
  }
  return predictions;
}

void save_predictions(const std::vector<std::pair<std::string, PagePrediction>>& predictions,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions: " + path);
  for (const auto& [page_id, pred] : predictions) {
    json j;
    j["page_id"] = page_id;
    if (pred.long_paragraph)
      j["long"] = *pred.long_paragraph;
    else
      j["long"] = nullptr;
    j["long_score"] = pred.long_score;
    if (pred.short_span)
      j["short"] = {pred.short_span->first, pred.short_span->second};
    else
      j["short"] = nullptr;
    j["short_score"] = pred.short_score;
    j["answer_type"] = static_cast<int>(pred.type);
    out << j.dump() << "\n";
  }
}

std::vector<std::pair<std::string, PagePrediction>> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions: " + path);
  std::vector<std::pair<std::string, PagePrediction>> predictions;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      PagePrediction pred;
      if (!j.at("long").is_null()) pred.long_paragraph = j.at("long").get<Index>();
      pred.long_score = j.at("long_score").get<Scalar>();
      if (!j.at("short").is_null()) {
        auto span = j.at("short").get<std::vector<Index>>();
        if (span.size() != 2) throw DataError("short span must be [s, e]");
        pred.short_span = std::make_pair(span[0], span[1]);
      }
      pred.short_score = j.at("short_score").get<Scalar>();
      pred.type = answer_type_from_int(j.at("answer_type").get<int>());
      predictions.emplace_back(j.at("page_id").get<std::string>(), std::move(pred));
    } catch (const json::exception& e) {
      throw DataError(path + " line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return predictions;
}

void cmd_predict(const PredictOptions& options) {
  Checkpoint ckpt = load_checkpoint(options.checkpoint_path);
  std::vector<Page> pages = load_pages(options.data_path);
  save_predictions(predict_pages(pages, ckpt.params, ckpt.config, options.thresholds),
                   options.out_path);
}

EvaluateSummary cmd_evaluate(const EvaluateOptions& options, std::ostream& out) {
  auto predictions = load_predictions(options.predictions_path);
  std::vector<GoldAnswer> gold = gold_answers(load_pages(options.data_path));

  EvaluateSummary summary;
  summary.report = page_f1(predictions, gold);
  const PrfStats& la = summary.report.long_answer;
  const PrfStats& sa = summary.report.short_answer;
  out << "long-answer  P " << la.precision << "  R " << la.recall << "  F1 " << la.f1 << "\n";
  out << "short-answer P " << sa.precision << "  R " << sa.recall << "  F1 " << sa.f1 << "\n";

  if (options.calibrate) {
    std::map<std::string, const GoldAnswer*> by_id;
    for (const GoldAnswer& g : gold) by_id[g.page_id] = &g;
    std::vector<DevExample> dev;
    for (const auto& [page_id, pred] : predictions) {
      auto it = by_id.find(page_id);
      if (it == by_id.end()) throw DataError("calibrate: no gold page " + page_id);
      dev.push_back({pred, *it->second});
    }
    summary.calibrated = calibrate_thresholds(dev);
    out << "calibrated theta_long " << summary.calibrated.long_threshold << "  theta_short "
        << summary.calibrated.short_threshold << "\n";
  }
  return summary;
}

GradCheckResult cmd_grad_check(const GradCheckConfig& check, std::ostream& out) {
  GradCheckResult result = grad_check_model(check);
  for (const GradCheckResult::Group& group : result.groups)
    out << group.name << "  max rel err " << group.max_relative_error << "\n";
  out << "overall max rel err " << result.max_relative_error << " (tolerance " << check.tolerance
      << ") -> " << (result.pass ? "PASS" : "FAIL") << "\n";
  return result;
}

}  // namespace nqreader
