#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "nqreader/checkpoint.hpp"
#include "nqreader/grad_check.hpp"
#include "nqreader/inference.hpp"
#include "nqreader/trainer.hpp"

namespace nqreader {

// Command-level drivers shared by the CLI and the test suites.

struct GenDataOptions {
  SyntheticConfig corpus;
  std::string out_path;
};

// Writes the dataset plus <out>.manifest.json with per-type counts and seed.
void cmd_gen_data(const GenDataOptions& options);

struct TrainOptions {
  std::string data_path;
  ModelConfig config;
  std::string checkpoint_out;
  std::string metrics_out;  // empty = no metrics file
};

struct TrainSummary {
  long steps = 0;
  Scalar final_loss = 0.0;
};

TrainSummary cmd_train(const TrainOptions& options);

struct PredictOptions {
  std::string data_path;
  std::string checkpoint_path;
  std::string out_path;
  Thresholds thresholds;  // defaults emit every candidate, which calibration needs
};

void cmd_predict(const PredictOptions& options);

struct EvaluateOptions {
  std::string predictions_path;
  std::string data_path;
  bool calibrate = false;
};

struct EvaluateSummary {
  F1Report report;
  Thresholds calibrated;
};

EvaluateSummary cmd_evaluate(const EvaluateOptions& options, std::ostream& out);

// Prints one line per parameter group plus the verdict.
GradCheckResult cmd_grad_check(const GradCheckConfig& check, std::ostream& out);

// Helpers shared with the acceptance suite.
std::vector<GoldAnswer> gold_answers(const std::vector<Page>& pages);
std::vector<std::pair<std::string, PagePrediction>> predict_pages(
    const std::vector<Page>& pages, const ModelParams& params, const ModelConfig& config,
    const Thresholds& thresholds);
std::vector<std::pair<std::string, PagePrediction>> load_predictions(const std::string& path);
void save_predictions(const std::vector<std::pair<std::string, PagePrediction>>& predictions,
                      const std::string& path);

}  // namespace nqreader
