#pragma once

#include <string>
#include <vector>

#include "nqreader/model.hpp"

namespace nqreader {

struct GradCheckConfig {
  ModelConfig model;       // tiny defaults filled in by default_grad_check_config()
  Index question_len = 8;  // n
  Index document_len = 24; // m
  Index paragraphs = 3;    // l
  Scalar epsilon = 1e-5;
  Scalar tolerance = 1e-4;
  bool perturb_gradient = false;  // corrupts analytic gradients; negative control
  std::uint64_t seed = 1;
};

GradCheckConfig default_grad_check_config();

struct GradCheckResult {
  struct Group {
    std::string name;
    Scalar max_relative_error = 0.0;
  };
  std::vector<Group> groups;  // one per named parameter
  Scalar max_relative_error = 0.0;
  bool pass = false;
};

// Builds one random instance, backpropagates the full loss, and compares every
// parameter gradient against central finite differences of the loss value.
GradCheckResult grad_check_model(const GradCheckConfig& check);

}  // namespace nqreader
