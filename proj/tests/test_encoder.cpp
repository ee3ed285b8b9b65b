#include <doctest.h>

#include "nqreader/encoder.hpp"
#include "helpers.hpp"

using namespace nqreader;
using nqreader::testing::check_op_gradients;

namespace {

ModelConfig tiny_config() {
  ModelConfig config;
  config.hidden = 8;
  config.heads = 2;
  config.encoder_depth = 1;
  config.vocab = 16;
  config.window = 16;
  config.stride = 16;
  config.max_len = 24;
  return config;
}

}  // namespace

TEST_CASE("pack_sequence layout and ranges") {
  PackedSequence seq = pack_sequence({7}, {9}, 16);
  CHECK(seq.ids == std::vector<TokenId>{kClsId, 7, kSepId, 9, kSepId});
  CHECK(seq.question_begin == 1);
  CHECK(seq.question_end == 2);
  CHECK(seq.document_begin == 3);
  CHECK(seq.document_end == 4);

  PackedSequence longer = pack_sequence(std::vector<TokenId>(4, 5), std::vector<TokenId>(10, 6), 32);
  CHECK(longer.size() == 17);
}

TEST_CASE("pack_sequence boundary overflow reports the sizes") {
  std::vector<TokenId> q(4, 2);
  std::vector<TokenId> d(10, 3);
  // n + m + 3 == 17, one over a 16-token budget
  try {
    pack_sequence(q, d, 16);
    FAIL("expected a length error");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find('4') != std::string::npos);
    CHECK(msg.find("10") != std::string::npos);
    CHECK(msg.find("16") != std::string::npos);
  }
  CHECK_NOTHROW(pack_sequence(q, d, 17));
}

TEST_CASE("encode with zero tables and no blocks gives zeros") {
  ModelConfig config = tiny_config();
  config.encoder_depth = 0;
  EncoderParams params;
  params.token_table = Tensor::zeros(config.vocab, config.hidden, true);
  params.position_table = Tensor::zeros(config.max_len, config.hidden, true);
  params.segment_table = Tensor::zeros(2, config.hidden, true);
  EncoderOutput out = encode(pack_sequence({2, 3}, {4, 5, 6}, config.max_len), params, config.heads);
  CHECK(out.question.value() == Matrix::Zero(2, config.hidden));
  CHECK(out.document.value() == Matrix::Zero(3, config.hidden));
}

TEST_CASE("positional embeddings split identical tokens") {
  ModelConfig config = tiny_config();
  config.encoder_depth = 0;
  Rng rng(3);
  EncoderParams params = encoder_init(config, rng);
  EncoderOutput out = encode(pack_sequence({2}, {5, 5}, config.max_len), params, config.heads);
  CHECK(out.document.value().row(0) != out.document.value().row(1));
}

TEST_CASE("encode shapes and bitwise determinism") {
  ModelConfig config = tiny_config();
  auto run = [&] {
    Rng rng(9);
    EncoderParams params = encoder_init(config, rng);
    return encode(pack_sequence({2, 3, 4}, {5, 6, 7, 8, 9}, config.max_len), params, config.heads);
  };
  EncoderOutput first = run();
  EncoderOutput second = run();
  CHECK(first.question.rows() == 3);
  CHECK(first.document.rows() == 5);
  CHECK(first.question.cols() == config.hidden);
  CHECK(first.question.value() == second.question.value());
  CHECK(first.document.value() == second.document.value());
}

TEST_CASE("encode rejects out-of-vocabulary ids") {
  ModelConfig config = tiny_config();
  Rng rng(4);
  EncoderParams params = encoder_init(config, rng);
  CHECK_THROWS_AS(
      encode(pack_sequence({2}, {static_cast<TokenId>(config.vocab)}, config.max_len), params,
             config.heads),
      DataError);
}

TEST_CASE("encoder gradients match finite differences") {
  ModelConfig config = tiny_config();
  Rng rng(5);
  EncoderParams params = encoder_init(config, rng);
  PackedSequence seq = pack_sequence({2, 3}, {4, 5, 6}, config.max_len);

  std::vector<std::pair<std::string, Tensor>> named;
  params.collect("encoder", named);
  std::vector<Tensor> leaves;
  for (auto& [name, tensor] : named) leaves.push_back(tensor);

  check_op_gradients(
      [&] {
        EncoderOutput out = encode(seq, params, config.heads);
        return concat_rows(out.question, out.document);
      },
      leaves);
}
