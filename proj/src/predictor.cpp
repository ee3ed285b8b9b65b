#include "nqreader/predictor.hpp"

#include <cmath>

namespace nqreader {

namespace {

Tensor xavier(Index in, Index out, Rng& rng) {
  Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(in + out));
  return Tensor::leaf(rng.normal_matrix(in, out, stddev), true);
}

LstmCell lstm_init(Index input_width, Index hidden, Rng& rng) {
  LstmCell cell;
  cell.hidden = hidden;
  cell.w = xavier(input_width + hidden, 4 * hidden, rng);
  cell.b = Tensor::zeros(1, 4 * hidden, true);
  return cell;
}

// One direction of a recurrent scan over the rows of x.
Tensor lstm_scan(const LstmCell& cell, const Tensor& x, bool reverse) {
  const Index steps = x.rows();
  const Index hd = cell.hidden;
  Tensor h = Tensor::zeros(1, hd);
  Tensor c = Tensor::zeros(1, hd);
  Tensor stacked;
  for (Index t = 0; t < steps; ++t) {
    Index row = reverse ? steps - 1 - t : t;
    Tensor gates = add_row_bias(matmul(concat_cols(slice_rows(x, row, 1), h), cell.w), cell.b);
    Tensor input_gate = activate(slice_cols(gates, 0, hd), Activation::kSigmoid);
    Tensor forget_gate = activate(slice_cols(gates, hd, hd), Activation::kSigmoid);
    Tensor cell_input = activate(slice_cols(gates, 2 * hd, hd), Activation::kTanh);
    Tensor output_gate = activate(slice_cols(gates, 3 * hd, hd), Activation::kSigmoid);
    c = add(hadamard(forget_gate, c), hadamard(input_gate, cell_input));
    h = hadamard(output_gate, activate(c, Activation::kTanh));
    if (!stacked.defined())
      stacked = h;
    else
      stacked = reverse ? concat_rows(h, stacked) : concat_rows(stacked, h);
  }
  return stacked;
}

}  // namespace

void HeadLayer::collect(const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor>>& out) const {
  if (const auto* dense_head = std::get_if<DenseHead>(&layer)) {
    out.emplace_back(prefix + ".w", dense_head->w);
    out.emplace_back(prefix + ".b", dense_head->b);
  } else if (const auto* transformer_head = std::get_if<TransformerHead>(&layer)) {
    out.emplace_back(prefix + ".proj_w", transformer_head->proj_w);
    out.emplace_back(prefix + ".proj_b", transformer_head->proj_b);
    transformer_head->block.collect(prefix + ".block", out);
  } else if (const auto* recurrent_head = std::get_if<RecurrentHead>(&layer)) {
    out.emplace_back(prefix + ".fwd_w", recurrent_head->forward_cell.w);
    out.emplace_back(prefix + ".fwd_b", recurrent_head->forward_cell.b);
    out.emplace_back(prefix + ".bwd_w", recurrent_head->backward_cell.w);
    out.emplace_back(prefix + ".bwd_b", recurrent_head->backward_cell.b);
  }
}

HeadLayer head_init(Index input_width, Index hidden, PredictionLayerKind kind, Rng& rng) {
  HeadLayer head;
  switch (kind) {
    case PredictionLayerKind::kTanh:
      head.layer = DenseHead{xavier(input_width, hidden, rng), Tensor::zeros(1, hidden, true),
                             Activation::kTanh};
      break;
    case PredictionLayerKind::kGelu:
      head.layer = DenseHead{xavier(input_width, hidden, rng), Tensor::zeros(1, hidden, true),
                             Activation::kGelu};
      break;
    case PredictionLayerKind::kTransformer: {
      TransformerHead t;
      t.proj_w = xavier(input_width, hidden, rng);
      t.proj_b = Tensor::zeros(1, hidden, true);
      t.block = transformer_block_init(hidden, rng);
      head.layer = std::move(t);
      break;
    }
    case PredictionLayerKind::kRecurrent: {
      RecurrentHead r;
      r.forward_cell = lstm_init(input_width, hidden / 2, rng);
      r.backward_cell = lstm_init(input_width, hidden / 2, rng);
      head.layer = std::move(r);
      break;
    }
  }
  return head;
}

Tensor apply_head(const HeadLayer& head, const Tensor& x, Index heads) {
  if (const auto* dense_head = std::get_if<DenseHead>(&head.layer))
    return dense(x, dense_head->w, dense_head->b, dense_head->act);
  if (const auto* transformer_head = std::get_if<TransformerHead>(&head.layer)) {
    Tensor projected =
        dense(x, transformer_head->proj_w, transformer_head->proj_b, Activation::kLinear);
    return transformer_block(projected, transformer_head->block, heads).output;
  }
  const auto& recurrent_head = std::get<RecurrentHead>(head.layer);
  Tensor fwd = lstm_scan(recurrent_head.forward_cell, x, false);
  Tensor bwd = lstm_scan(recurrent_head.backward_cell, x, true);
  return concat_cols(fwd, bwd);
}

void PredictorParams::collect(const std::string& prefix,
                              std::vector<std::pair<std::string, Tensor>>& out) const {
  if (f_long) {
    f_long->collect(prefix + ".f_long", out);
    out.emplace_back(prefix + ".w_long", w_long);
  }
  f_start.collect(prefix + ".f_start", out);
  out.emplace_back(prefix + ".w_start", w_start);
  f_end.collect(prefix + ".f_end", out);
  out.emplace_back(prefix + ".w_end", w_end);
  f_type.collect(prefix + ".f_type", out);
  out.emplace_back(prefix + ".w_type", w_type);
}

PredictorParams predictor_init(const ModelConfig& config, Rng& rng) {
  const Index h = config.hidden;
  const bool multilevel = !config.no_multilevel;
  const bool cascade = !config.no_cascade;

  PredictorParams p;
  if (multilevel) {
    Index long_in = config.s2l_cascade ? 2 * h : h;
    p.f_long = head_init(long_in, h, config.prediction_layer, rng);
    p.w_long = xavier(h, 1, rng);
  }
  Index start_in = (multilevel && cascade && !config.s2l_cascade) ? 2 * h : h;
  p.f_start = head_init(start_in, h, config.prediction_layer, rng);
  p.w_start = xavier(h, 1, rng);
  Index end_in = cascade ? 2 * h : h;
  p.f_end = head_init(end_in, h, config.prediction_layer, rng);
  p.w_end = xavier(h, 1, rng);
  Index type_in = h + (config.no_question_embedding ? 0 : h) + (cascade ? h : 0);
  p.f_type = head_init(type_in, h, config.prediction_layer, rng);
  p.w_type = xavier(h, kAnswerTypeCount, rng);
  return p;
}

std::pair<Tensor, Tensor> predict_long(const Tensor& paragraphs, const HeadLayer& f_long,
                                       const Tensor& w_long, Index heads) {
  if (paragraphs.rows() < 1) throw ShapeError("predict_long: no paragraphs");
  Tensor long_repr = apply_head(f_long, paragraphs, heads);
  Tensor logits = transpose(matmul(long_repr, w_long));  // 1 x l
  // fixed-zero null slot trained as the target of NULL instances
  Tensor with_null = concat_cols(logits, Tensor::zeros(1, 1));
  return {long_repr, with_null};
}

Tensor tile_by_paragraph(const Tensor& long_repr, const ParagraphMap& seg) {
  for (Index p : seg.entries())
    if (p >= long_repr.rows())
      throw ShapeError("tile_by_paragraph: paragraph " + std::to_string(p) +
                       " outside representation of " + std::to_string(long_repr.rows()));
  return gather_rows(long_repr, seg.entries());
}

ShortPrediction predict_short(const Tensor& tiled_long, const Tensor& document,
                              const HeadLayer& f_start, const Tensor& w_start,
                              const HeadLayer& f_end, const Tensor& w_end, Index heads) {
  ShortPrediction out;
  out.start_repr = apply_head(f_start, concat_cols(tiled_long, document), heads);
  out.start_logits = transpose(matmul(out.start_repr, w_start));
  out.end_repr = apply_head(f_end, concat_cols(out.start_repr, document), heads);
  out.end_logits = transpose(matmul(out.end_repr, w_end));
  return out;
}

Tensor predict_type(const Tensor& document, const Tensor& question_embed, const Tensor& end_repr,
                    const HeadLayer& f_type, const Tensor& w_type, const ModelConfig& config) {
  Tensor features = mean_pool_rows(document);
  if (question_embed.defined()) features = concat_cols(features, question_embed);
  if (end_repr.defined()) features = concat_cols(features, max_pool_rows(end_repr));
  Tensor hidden = apply_head(f_type, features, config.heads);
  Tensor logits = matmul(hidden, w_type);
  return config.type_head_softmax ? softmax_rows(logits) : logits;
}

PredictorOutput run_predictor(const ReaderOutput& reader, const ParagraphMap& seg,
                              const PredictorParams& params, const ModelConfig& config) {
  const bool multilevel = !config.no_multilevel;
  const bool cascade = !config.no_cascade;
  PredictorOutput out;

  if (config.s2l_cascade) {
    // short heads first from the token representation alone, then the long
    // head consumes the paragraph-pooled end representation
    out.start_repr = apply_head(params.f_start, reader.document, config.heads);
    out.start_logits = transpose(matmul(out.start_repr, params.w_start));
    out.end_repr =
        apply_head(params.f_end, concat_cols(out.start_repr, reader.document), config.heads);
    out.end_logits = transpose(matmul(out.end_repr, params.w_end));
    Tensor pooled_end = segment_mean_pool(out.end_repr, seg);
    out.long_repr =
        apply_head(*params.f_long, concat_cols(reader.paragraphs, pooled_end), config.heads);
    out.long_logits =
        concat_cols(transpose(matmul(out.long_repr, params.w_long)), Tensor::zeros(1, 1));
  } else if (multilevel && cascade) {
    auto [long_repr, long_logits] =
        predict_long(reader.paragraphs, *params.f_long, params.w_long, config.heads);
    out.long_repr = long_repr;
    out.long_logits = long_logits;
    ShortPrediction shorts =
        predict_short(tile_by_paragraph(long_repr, seg), reader.document, params.f_start,
                      params.w_start, params.f_end, params.w_end, config.heads);
    out.start_repr = shorts.start_repr;
    out.start_logits = shorts.start_logits;
    out.end_repr = shorts.end_repr;
    out.end_logits = shorts.end_logits;
  } else {
    // heads fed from the token representation only (cascade or long head removed)
    if (multilevel) {
      auto [long_repr, long_logits] =
          predict_long(reader.paragraphs, *params.f_long, params.w_long, config.heads);
      out.long_repr = long_repr;
      out.long_logits = long_logits;
    }
    out.start_repr = apply_head(params.f_start, reader.document, config.heads);
    out.start_logits = transpose(matmul(out.start_repr, params.w_start));
    Tensor end_in =
        cascade ? concat_cols(out.start_repr, reader.document) : reader.document;
    out.end_repr = apply_head(params.f_end, end_in, config.heads);
    out.end_logits = transpose(matmul(out.end_repr, params.w_end));
  }

  out.type_output = predict_type(
      reader.document, config.no_question_embedding ? Tensor() : reader.question,
      cascade ? out.end_repr : Tensor(), params.f_type, params.w_type, config);
  return out;
}

LossTerms total_loss(const PredictorOutput& out, const TargetLabels& targets,
                     const ModelConfig& config) {
  targets.validate();
  LossTerms terms;

  if (out.long_logits.defined()) {
    const Index null_slot = out.long_logits.cols() - 1;
    Index target = targets.paragraph == kNullTarget ? null_slot : targets.paragraph;
    terms.long_term = cross_entropy(out.long_logits, target);
  }
  Index start_target = targets.span_start == kNullTarget ? 0 : targets.span_start;
  Index end_target = targets.span_end == kNullTarget ? 0 : targets.span_end;
  terms.start_term = cross_entropy(out.start_logits, start_target);
  terms.end_term = cross_entropy(out.end_logits, end_target);
  terms.type_term = cross_entropy(out.type_output, static_cast<Index>(targets.type),
                                  config.type_head_softmax);

  terms.total = add(terms.start_term, terms.end_term);
  terms.total = add(terms.total, terms.type_term);
  if (terms.long_term.defined()) terms.total = add(terms.total, terms.long_term);
  return terms;
}

}  // namespace nqreader
