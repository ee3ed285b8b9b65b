#include "nqreader/grad_check.hpp"

#include <algorithm>

#include "nqreader/fdiff.hpp"

namespace nqreader {

GradCheckConfig default_grad_check_config() {
  GradCheckConfig check;
  check.model.hidden = 16;
  check.model.blocks = 2;
  check.model.top_k = 4;
  check.model.heads = 2;
  check.model.encoder_depth = 1;
  check.model.vocab = 32;
  check.model.window = 24;
  check.model.stride = 24;
  check.model.max_len = 40;
  return check;
}

namespace {

// Random instance with a SHORT target so all four loss terms are exercised.
InstanceTuple random_instance(const GradCheckConfig& check, Rng& rng) {
  const Index n = check.question_len;
  const Index m = check.document_len;
  const Index l = check.paragraphs;
  if (m < l) throw ConfigError("grad check: document shorter than paragraph count");

  InstanceTuple inst;
  inst.page_id = "grad-check";
  auto draw_id = [&] {
    return static_cast<TokenId>(2 + rng.integer(static_cast<std::uint64_t>(check.model.vocab - 2)));
  };
  inst.question.resize(static_cast<std::size_t>(n));
  for (TokenId& t : inst.question) t = draw_id();
  inst.document.resize(static_cast<std::size_t>(m));
  for (TokenId& t : inst.document) t = draw_id();

  // random contiguous paragraphs, each non-empty
  std::vector<Index> cuts;
  while (cuts.size() < static_cast<std::size_t>(l - 1)) {
    Index cut = 1 + static_cast<Index>(rng.integer(static_cast<std::uint64_t>(m - 1)));
    if (std::find(cuts.begin(), cuts.end(), cut) == cuts.end()) cuts.push_back(cut);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<Index> entries(static_cast<std::size_t>(m));
  Index para = 0;
  for (Index t = 0; t < m; ++t) {
    if (para < l - 1 && t >= cuts[static_cast<std::size_t>(para)]) ++para;
    entries[static_cast<std::size_t>(t)] = para;
  }
  inst.seg = ParagraphMap(entries);
  for (Index p = 0; p < l; ++p) inst.paragraph_ids.push_back(p);

  // a valid SHORT target inside a random paragraph
  Index target_para = static_cast<Index>(rng.integer(static_cast<std::uint64_t>(l)));
  Index first = 0;
  while (entries[static_cast<std::size_t>(first)] != target_para) ++first;
  Index last = first;
  while (last + 1 < m && entries[static_cast<std::size_t>(last + 1)] == target_para) ++last;
  Index start = first + static_cast<Index>(
                            rng.integer(static_cast<std::uint64_t>(last - first + 1)));
  Index end = start + static_cast<Index>(
                          rng.integer(static_cast<std::uint64_t>(last - start + 1)));
  inst.targets.type = AnswerType::kShort;
  inst.targets.paragraph = target_para;
  inst.targets.span_start = start;
  inst.targets.span_end = end;
  inst.targets.validate();
  return inst;
}

}  // namespace

GradCheckResult grad_check_model(const GradCheckConfig& check) {
  ModelConfig config = check.model;
  config.validate();
  Rng rng(check.seed);
  ModelParams params = model_init(config, rng);
  InstanceTuple instance = random_instance(check, rng);

  reset_gradients(params);
  backward(model_loss(params, config, instance).total);

  auto loss_value = [&] {
    NoGradGuard guard;
    return model_loss(params, config, instance).total.item();
  };

  GradCheckResult result;
  for (auto& [name, tensor] : named_parameters(params)) {
    Matrix analytic =
        tensor.has_grad() ? tensor.grad() : Matrix::Zero(tensor.rows(), tensor.cols());
    if (check.perturb_gradient) analytic = 1.01 * analytic.array() + 1e-3;
    Matrix fd = fd_gradient(loss_value, tensor.value(), check.epsilon);
    Scalar worst = 0.0;
    for (Index i = 0; i < fd.rows(); ++i)
      for (Index j = 0; j < fd.cols(); ++j)
        worst = std::max(worst, relative_error(analytic(i, j), fd(i, j)));
    result.groups.push_back({name, worst});
    result.max_relative_error = std::max(result.max_relative_error, worst);
  }
  result.pass = result.max_relative_error < check.tolerance;
  return result;
}

}  // namespace nqreader
