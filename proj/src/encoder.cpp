#include "nqreader/encoder.hpp"

namespace nqreader {

PackedSequence pack_sequence(const std::vector<TokenId>& question,
                             const std::vector<TokenId>& document, Index max_len) {
  const Index n = static_cast<Index>(question.size());
  const Index m = static_cast<Index>(document.size());
  if (n < 1 || m < 1) throw DataError("pack_sequence: question and document must be non-empty");
  if (n + m + 3 > max_len)
    throw DataError("pack_sequence: question length " + std::to_string(n) +
                    " + document length " + std::to_string(m) +
                    " + 3 specials exceeds max_len " + std::to_string(max_len));

  PackedSequence seq;
  seq.ids.reserve(static_cast<std::size_t>(n + m + 3));
  seq.ids.push_back(kClsId);
  seq.ids.insert(seq.ids.end(), question.begin(), question.end());
  seq.ids.push_back(kSepId);
  seq.ids.insert(seq.ids.end(), document.begin(), document.end());
  seq.ids.push_back(kSepId);
  seq.question_begin = 1;
  seq.question_end = 1 + n;
  seq.document_begin = n + 2;
  seq.document_end = n + 2 + m;
  return seq;
}

void EncoderParams::collect(const std::string& prefix,
                            std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back(prefix + ".token_table", token_table);
  out.emplace_back(prefix + ".position_table", position_table);
  out.emplace_back(prefix + ".segment_table", segment_table);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
}

EncoderParams encoder_init(const ModelConfig& config, Rng& rng) {
  const Scalar emb_std = 0.1;
  EncoderParams p;
  p.token_table = Tensor::leaf(rng.normal_matrix(config.vocab, config.hidden, emb_std), true);
  p.position_table = Tensor::leaf(rng.normal_matrix(config.max_len, config.hidden, emb_std), true);
  p.segment_table = Tensor::leaf(rng.normal_matrix(2, config.hidden, emb_std), true);
  for (Index d = 0; d < config.encoder_depth; ++d)
    p.blocks.push_back(transformer_block_init(config.hidden, rng));
  return p;
}

EncoderOutput encode(const PackedSequence& sequence, const EncoderParams& params, Index heads) {
  const Index len = sequence.size();
  const Index vocab = params.token_table.rows();
  if (len > params.position_table.rows())
    throw DataError("encode: sequence length " + std::to_string(len) +
                    " exceeds position table of " + std::to_string(params.position_table.rows()));

  std::vector<Index> token_rows(static_cast<std::size_t>(len));
  std::vector<Index> position_rows(static_cast<std::size_t>(len));
  std::vector<Index> segment_rows(static_cast<std::size_t>(len));
  for (Index i = 0; i < len; ++i) {
    TokenId id = sequence.ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= vocab)
      throw DataError("encode: token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(vocab));
    token_rows[static_cast<std::size_t>(i)] = id;
    position_rows[static_cast<std::size_t>(i)] = i;
    // segment 0 covers [CLS] + question + first [SEP], segment 1 the rest
    segment_rows[static_cast<std::size_t>(i)] = i < sequence.document_begin ? 0 : 1;
  }

  Tensor hidden = add(add(gather_rows(params.token_table, token_rows),
                          gather_rows(params.position_table, position_rows)),
                      gather_rows(params.segment_table, segment_rows));
  for (const TransformerBlockParams& block : params.blocks)
    hidden = transformer_block(hidden, block, heads).output;

  EncoderOutput out;
  out.question = slice_rows(hidden, sequence.question_begin,
                            sequence.question_end - sequence.question_begin);
  out.document = slice_rows(hidden, sequence.document_begin,
                            sequence.document_end - sequence.document_begin);
  return out;
}

}  // namespace nqreader
