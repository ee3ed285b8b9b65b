#include <cmath>

#include <doctest.h>

#include "nqreader/predictor.hpp"
#include "helpers.hpp"

using namespace nqreader;
using nqreader::testing::check_op_gradients;
using nqreader::testing::random_matrix;

namespace {

ModelConfig predictor_config(Index hidden = 8, Index heads = 2) {
  ModelConfig config;
  config.hidden = hidden;
  config.heads = heads;
  config.vocab = 16;
  config.window = 16;
  config.stride = 16;
  config.max_len = 24;
  return config;
}

ReaderOutput fake_reader_output(Rng& rng, Index m, Index l, Index h, const ParagraphMap& seg,
                                bool requires_grad = false) {
  ReaderOutput out;
  out.document = Tensor::leaf(random_matrix(rng, m, h), requires_grad);
  out.paragraphs = segment_mean_pool(out.document, seg);
  out.question = Tensor::leaf(random_matrix(rng, 1, h), requires_grad);
  return out;
}

std::vector<Tensor> predictor_tensors(const PredictorParams& params) {
  std::vector<std::pair<std::string, Tensor>> named;
  params.collect("predictor", named);
  std::vector<Tensor> out;
  for (auto& [name, tensor] : named) out.push_back(tensor);
  return out;
}

}  // namespace

TEST_CASE("predict_long zero weights give equal logits plus the null slot") {
  const Index l = 3, h = 8;
  HeadLayer f_long;
  f_long.layer = DenseHead{Tensor::zeros(h, h, true), Tensor::zeros(1, h, true),
                           Activation::kTanh};
  Tensor w_long = Tensor::zeros(h, 1, true);
  Rng rng(1);
  auto [long_repr, long_logits] =
      predict_long(Tensor::leaf(random_matrix(rng, l, h)), f_long, w_long, 2);
  CHECK(long_repr.rows() == l);
  CHECK(long_repr.cols() == h);
  CHECK(long_logits.rows() == 1);
  CHECK(long_logits.cols() == l + 1);
  CHECK(long_logits.value() == Matrix::Zero(1, l + 1));
}

TEST_CASE("tile_by_paragraph repeats paragraph rows") {
  Rng rng(2);
  Matrix reps = random_matrix(rng, 2, 4);
  Tensor tiled = tile_by_paragraph(Tensor::leaf(reps), ParagraphMap({0, 0, 1}));
  CHECK(tiled.value().row(0) == reps.row(0));
  CHECK(tiled.value().row(1) == reps.row(0));
  CHECK(tiled.value().row(2) == reps.row(1));

  Tensor single = tile_by_paragraph(Tensor::leaf(reps.topRows(1)), ParagraphMap({0, 0, 0, 0}));
  for (Index i = 0; i < 4; ++i) CHECK(single.value().row(i) == reps.row(0));

  std::vector<Index> seg = {0, 0, 1, 1, 1, 2, 2, 3, 3, 3, 3, 3};
  Matrix many = random_matrix(rng, 4, 4);
  Tensor mapped = tile_by_paragraph(Tensor::leaf(many), ParagraphMap(seg));
  for (std::size_t i = 0; i < seg.size(); ++i)
    CHECK(mapped.value().row(static_cast<Index>(i)) == many.row(seg[i]));

  CHECK_THROWS_AS(tile_by_paragraph(Tensor::leaf(reps), ParagraphMap({0, 1, 2})), ShapeError);
}

TEST_CASE("predict_short shapes and cascade information flow") {
  const Index m = 6, h = 8;
  ModelConfig config = predictor_config(h);
  Rng rng(3);
  PredictorParams params = predictor_init(config, rng);
  ParagraphMap seg({0, 0, 0, 1, 1, 1});
  Tensor document = Tensor::leaf(random_matrix(rng, m, h));
  Matrix tiled_values = random_matrix(rng, m, h);

  ShortPrediction shorts = predict_short(Tensor::leaf(tiled_values), document, params.f_start,
                                         params.w_start, params.f_end, params.w_end, config.heads);
  CHECK(shorts.start_repr.rows() == m);
  CHECK(shorts.start_repr.cols() == h);
  CHECK(shorts.start_logits.cols() == m);
  CHECK(shorts.end_repr.rows() == m);
  CHECK(shorts.end_logits.cols() == m);

  // perturbing the tiled long representation must reach the end logits
  Matrix nudged = tiled_values;
  nudged(2, 3) += 0.25;
  ShortPrediction shifted = predict_short(Tensor::leaf(nudged), document, params.f_start,
                                          params.w_start, params.f_end, params.w_end, config.heads);
  CHECK(shorts.end_logits.value() != shifted.end_logits.value());
}

TEST_CASE("predict_type is a probability vector") {
  const Index m = 6, h = 8;
  ModelConfig config = predictor_config(h);
  Rng rng(4);
  PredictorParams params = predictor_init(config, rng);
  ParagraphMap seg({0, 0, 0, 1, 1, 1});
  ReaderOutput reader = fake_reader_output(rng, m, 2, h, seg);
  Tensor end_repr = Tensor::leaf(random_matrix(rng, m, h));

  Tensor probs = predict_type(reader.document, reader.question, end_repr, params.f_type,
                              params.w_type, config);
  CHECK(probs.rows() == 1);
  CHECK(probs.cols() == kAnswerTypeCount);
  CHECK(std::abs(probs.value().sum() - 1.0) < 1e-9);
  for (Index j = 0; j < kAnswerTypeCount; ++j) {
    CHECK(probs.value()(0, j) >= 0.0);
    CHECK(probs.value()(0, j) <= 1.0);
  }

  PredictorParams zero = params;
  zero.f_type.layer = DenseHead{Tensor::zeros(3 * h, h, true), Tensor::zeros(1, h, true),
                                Activation::kTanh};
  zero.w_type = Tensor::zeros(h, kAnswerTypeCount, true);
  Tensor uniform = predict_type(reader.document, reader.question, end_repr, zero.f_type,
                                zero.w_type, config);
  CHECK(uniform.value() == Matrix::Constant(1, kAnswerTypeCount, 0.2));
}

TEST_CASE("type-score identity holds to 1e-12") {
  const Index m = 6, h = 8;
  ModelConfig config = predictor_config(h);
  Rng rng(5);
  PredictorParams params = predictor_init(config, rng);
  ParagraphMap seg({0, 0, 1, 1, 2, 2});
  for (int round = 0; round < 25; ++round) {
    ReaderOutput reader = fake_reader_output(rng, m, 3, h, seg);
    PredictorOutput out = run_predictor(reader, seg, params, config);
    Scalar null_prob = out.type_output.value()(0, 0);
    Scalar non_null = 0.0;
    for (Index t = 1; t < kAnswerTypeCount; ++t) non_null += out.type_output.value()(0, t);
    CHECK(std::abs((non_null - null_prob) - (1.0 - 2.0 * null_prob)) < 1e-12);
  }
}

TEST_CASE("total_loss on uniform outputs is the sum of uniform cross-entropies") {
  const Index m = 6, l = 3;
  ModelConfig config = predictor_config();
  PredictorOutput out;
  out.long_logits = Tensor::zeros(1, l + 1);
  out.start_logits = Tensor::zeros(1, m);
  out.end_logits = Tensor::zeros(1, m);
  out.type_output = Tensor::leaf(Matrix::Constant(1, kAnswerTypeCount, 0.2));

  TargetLabels targets;
  targets.type = AnswerType::kShort;
  targets.paragraph = 1;
  targets.span_start = 2;
  targets.span_end = 4;

  LossTerms terms = total_loss(out, targets, config);
  Scalar want = std::log(static_cast<Scalar>(l + 1)) + 2.0 * std::log(static_cast<Scalar>(m)) +
                std::log(5.0);
  CHECK(terms.total.item() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("total_loss vanishes for confident correct outputs") {
  const Index m = 4, l = 2;
  ModelConfig config = predictor_config();
  Matrix long_logits = Matrix::Zero(1, l + 1);
  long_logits(0, 0) = 50.0;
  Matrix start = Matrix::Zero(1, m);
  start(0, 1) = 50.0;
  Matrix end = Matrix::Zero(1, m);
  end(0, 2) = 50.0;
  Matrix type = Matrix::Zero(1, kAnswerTypeCount);
  type(0, 1) = 1.0;

  PredictorOutput out;
  out.long_logits = Tensor::leaf(long_logits);
  out.start_logits = Tensor::leaf(start);
  out.end_logits = Tensor::leaf(end);
  out.type_output = Tensor::leaf(type);

  TargetLabels targets;
  targets.type = AnswerType::kShort;
  targets.paragraph = 0;
  targets.span_start = 1;
  targets.span_end = 2;

  CHECK(total_loss(out, targets, config).total.item() < 1e-12);
}

TEST_CASE("total_loss equals the four-term oracle") {
  const Index m = 7, l = 3;
  ModelConfig config = predictor_config();
  Rng rng(6);
  for (int round = 0; round < 10; ++round) {
    Matrix type_logits = random_matrix(rng, 1, kAnswerTypeCount);
    Matrix type_probs = (type_logits.array() - type_logits.maxCoeff()).exp();
    type_probs /= type_probs.sum();

    PredictorOutput out;
    out.long_logits = Tensor::leaf(random_matrix(rng, 1, l + 1));
    out.start_logits = Tensor::leaf(random_matrix(rng, 1, m));
    out.end_logits = Tensor::leaf(random_matrix(rng, 1, m));
    out.type_output = Tensor::leaf(type_probs);

    TargetLabels targets;
    targets.type = AnswerType::kLong;
    targets.paragraph = static_cast<Index>(rng.integer(l));

    auto ce_logits = [](const Matrix& z, Index t) {
      Scalar zmax = z.maxCoeff();
      return std::log((z.array() - zmax).exp().sum()) + zmax - z(0, t);
    };
    Scalar want = ce_logits(out.long_logits.value(), targets.paragraph) +
                  ce_logits(out.start_logits.value(), 0) + ce_logits(out.end_logits.value(), 0) +
                  (-std::log(type_probs(0, static_cast<Index>(targets.type))));

    LossTerms terms = total_loss(out, targets, config);
    CHECK(std::abs(terms.total.item() - want) < 1e-12);
    // the total is exactly the sum of its parts
    Scalar part_sum = ((terms.start_term.item() + terms.end_term.item()) +
                       terms.type_term.item()) +
                      terms.long_term.item();
    CHECK(terms.total.item() == part_sum);
  }
}

TEST_CASE("total_loss rejects invalid targets") {
  ModelConfig config = predictor_config();
  PredictorOutput out;
  out.long_logits = Tensor::zeros(1, 3);
  out.start_logits = Tensor::zeros(1, 4);
  out.end_logits = Tensor::zeros(1, 4);
  out.type_output = Tensor::leaf(Matrix::Constant(1, kAnswerTypeCount, 0.2));

  TargetLabels bad;
  bad.type = AnswerType::kShort;  // SHORT without a span
  CHECK_THROWS_AS(total_loss(out, bad, config), DataError);

  TargetLabels swapped;
  swapped.type = AnswerType::kShort;
  swapped.paragraph = 0;
  swapped.span_start = 3;
  swapped.span_end = 1;
  CHECK_THROWS_AS(total_loss(out, swapped, config), DataError);
}

TEST_CASE("cascade dependencies and their ablation") {
  const Index m = 6, h = 8;
  Rng rng(7);
  ParagraphMap seg({0, 0, 0, 1, 1, 1});

  ModelConfig cascade_config = predictor_config(h);
  PredictorParams params = predictor_init(cascade_config, rng);
  ReaderOutput reader = fake_reader_output(rng, m, 2, h, seg);

  PredictorOutput base = run_predictor(reader, seg, params, cascade_config);

  // o_S depends on the long head through the tiled representation
  PredictorParams long_shift = params;
  auto& long_dense = std::get<DenseHead>(long_shift.f_long->layer);
  Matrix shifted = long_dense.w.value();
  shifted(0, 0) += 0.5;
  long_shift.f_long->layer =
      DenseHead{Tensor::leaf(shifted, true), long_dense.b, long_dense.act};
  PredictorOutput moved = run_predictor(reader, seg, long_shift, cascade_config);
  CHECK(base.start_logits.value() != moved.start_logits.value());
  CHECK(base.end_logits.value() != moved.end_logits.value());
  // the shift also reaches the type head through max-pooled H_E
  CHECK(base.type_output.value() != moved.type_output.value());
}

TEST_CASE("no_cascade cuts the dependencies") {
  const Index m = 6, h = 8;
  Rng rng(8);
  ParagraphMap seg({0, 0, 0, 1, 1, 1});
  ModelConfig config = predictor_config(h);
  config.no_cascade = true;
  PredictorParams params = predictor_init(config, rng);
  ReaderOutput reader = fake_reader_output(rng, m, 2, h, seg);
  PredictorOutput base = run_predictor(reader, seg, params, config);

  PredictorParams long_shift = params;
  auto& long_dense = std::get<DenseHead>(long_shift.f_long->layer);
  Matrix shifted = long_dense.w.value();
  shifted(0, 0) += 0.5;
  long_shift.f_long->layer =
      DenseHead{Tensor::leaf(shifted, true), long_dense.b, long_dense.act};
  PredictorOutput moved = run_predictor(reader, seg, long_shift, config);
  CHECK(base.start_logits.value() == moved.start_logits.value());
  CHECK(base.end_logits.value() == moved.end_logits.value());
  CHECK(base.type_output.value() == moved.type_output.value());
}

TEST_CASE("predictor gradients match finite differences for every head kind") {
  const Index m = 5, h = 8;
  ParagraphMap seg({0, 0, 1, 1, 1});
  for (PredictionLayerKind kind :
       {PredictionLayerKind::kTanh, PredictionLayerKind::kGelu, PredictionLayerKind::kTransformer,
        PredictionLayerKind::kRecurrent}) {
    CAPTURE(to_string(kind));
    ModelConfig config = predictor_config(h);
    config.prediction_layer = kind;
    Rng rng(100 + static_cast<int>(kind));
    PredictorParams params = predictor_init(config, rng);
    ReaderOutput reader = fake_reader_output(rng, m, 2, h, seg, true);

    std::vector<Tensor> leaves = predictor_tensors(params);
    leaves.push_back(reader.document);
    leaves.push_back(reader.question);

    TargetLabels targets;
    targets.type = AnswerType::kShort;
    targets.paragraph = 1;
    targets.span_start = 2;
    targets.span_end = 3;

    check_op_gradients(
        [&] {
          ReaderOutput local;
          local.document = reader.document;
          local.paragraphs = segment_mean_pool(reader.document, seg);
          local.question = reader.question;
          PredictorOutput out = run_predictor(local, seg, params, config);
          return total_loss(out, targets, config).total;
        },
        leaves);
  }
}

TEST_CASE("predictor variants run and keep their shapes") {
  const Index m = 6, h = 8;
  ParagraphMap seg({0, 0, 0, 1, 1, 1});
  Rng rng(9);

  auto smoke = [&](ModelConfig config) {
    config.hidden = h;
    config.heads = 2;
    Rng local(11);
    PredictorParams params = predictor_init(config, local);
    ReaderOutput reader = fake_reader_output(rng, m, 2, h, seg);
    PredictorOutput out = run_predictor(reader, seg, params, config);
    CHECK(out.start_logits.cols() == m);
    CHECK(out.end_logits.cols() == m);
    CHECK(out.type_output.cols() == kAnswerTypeCount);
    if (!config.no_multilevel) CHECK(out.long_logits.cols() == 3);
    TargetLabels targets;
    targets.type = AnswerType::kShort;
    targets.paragraph = 0;
    targets.span_start = 0;
    targets.span_end = 1;
    CHECK(total_loss(out, targets, config).total.item() > 0.0);
    return out;
  };

  ModelConfig s2l = predictor_config(h);
  s2l.s2l_cascade = true;
  smoke(s2l);

  ModelConfig flat = predictor_config(h);
  flat.no_multilevel = true;
  PredictorOutput flat_out = smoke(flat);
  CHECK(!flat_out.long_logits.defined());

  ModelConfig no_question = predictor_config(h);
  no_question.no_question_embedding = true;
  smoke(no_question);

  ModelConfig raw_type = predictor_config(h);
  raw_type.type_head_softmax = false;
  PredictorOutput raw = smoke(raw_type);
  CHECK(std::abs(raw.type_output.value().sum() - 1.0) > 1e-6);  // logits, not probabilities
}
