#include "xattn/model.h"

#include <cmath>

#include <gtest/gtest.h>

#include "support.h"

namespace xattn {
namespace {

using testing::random_doc;
using testing::small_dims;

TEST(PositionalEncoding, PositionZero) {
  const Vector p = positional_encoding(0, 8, 16);
  for (std::size_t i = 0; i < 8; i += 2) {
    EXPECT_EQ(p[i], 0.0);
    EXPECT_EQ(p[i + 1], 1.0);
  }
}

TEST(PositionalEncoding, SinglePair) {
  const Vector p = positional_encoding(1, 2, 4);
  EXPECT_DOUBLE_EQ(p[0], std::sin(0.25));
  EXPECT_DOUBLE_EQ(p[1], std::cos(0.25));
}

TEST(PositionalEncoding, TwoPairs) {
  // Pair 1: 3 / 16^(2/4) = 0.75. Pair 2: 3 / 16^(4/4) = 0.1875.
  const Vector p = positional_encoding(3, 4, 16);
  EXPECT_NEAR(p[0], 0.6816387600233341, 1e-15);
  EXPECT_NEAR(p[1], 0.7316888688738209, 1e-15);
  EXPECT_NEAR(p[2], 0.18640329676226988, 1e-15);
  EXPECT_NEAR(p[3], 0.9824733131012553, 1e-15);
}

TEST(PositionalEncoding, OddDimensionThrows) {
  EXPECT_THROW(positional_encoding(1, 3, 8), std::invalid_argument);
}

TEST(Document, DictionaryInFirstOccurrenceOrder) {
  const Document doc({7, 3, 7, 9, 3});
  EXPECT_EQ(doc.dictionary(), (std::vector<TokenId>{7, 3, 9}));
  EXPECT_EQ(doc.num_words(), 3u);
  EXPECT_EQ(doc.word_of(2), 0u);
  EXPECT_EQ(doc.word_of(4), 1u);
  const Document cut = doc.truncated(2);
  EXPECT_EQ(cut.ids(), (std::vector<TokenId>{7, 3}));
  EXPECT_EQ(cut.num_words(), 2u);
}

TEST(Embed, EmptyDocumentIsAllPadding) {
  const ModelParams params = random_params(small_dims(), 1);
  const EmbeddedDocument e = embed(Document(), params);
  EXPECT_EQ(e.length, 0u);
  for (std::size_t t = 0; t < params.dims.max_len; ++t) {
    const Vector p = positional_encoding(t + 1, params.dims.embed_dim, params.dims.max_len);
    for (std::size_t c = 0; c < params.dims.embed_dim; ++c) {
      EXPECT_DOUBLE_EQ(e.rows(t, c), params.unk_embedding[c] + p[c]);
    }
  }
}

TEST(Embed, PurePositionalWhenWeightsVanish) {
  ModelParams params = random_params(small_dims(), 2);
  testing::zero(params.embeddings);
  std::fill(params.unk_embedding.begin(), params.unk_embedding.end(), 0.0);
  const EmbeddedDocument e = embed(Document({1, 2}), params);
  for (std::size_t t = 0; t < params.dims.max_len; ++t) {
    const Vector p = positional_encoding(t + 1, params.dims.embed_dim, params.dims.max_len);
    for (std::size_t c = 0; c < params.dims.embed_dim; ++c) EXPECT_EQ(e.rows(t, c), p[c]);
  }
}

TEST(Embed, OneTokenDocument) {
  const ModelParams params = random_params(small_dims(), 3);
  const EmbeddedDocument e = embed(Document({5}), params);
  const Vector p1 = positional_encoding(1, params.dims.embed_dim, params.dims.max_len);
  const Vector p2 = positional_encoding(2, params.dims.embed_dim, params.dims.max_len);
  for (std::size_t c = 0; c < params.dims.embed_dim; ++c) {
    EXPECT_EQ(e.rows(0, c), params.embeddings(5, c) + p1[c]);
    EXPECT_EQ(e.rows(1, c), params.unk_embedding[c] + p2[c]);
  }
}

TEST(Embed, OutOfVocabularyIdThrows) {
  const ModelParams params = random_params(small_dims(), 4);
  EXPECT_THROW(embed(Document({40}), params), std::invalid_argument);
}

TEST(ModelParams, ValidateRejectsBadShapesAndNonFinite) {
  ModelParams params = random_params(small_dims(), 5);
  EXPECT_NO_THROW(params.validate());
  ModelParams wrong = params;
  wrong.heads[1].key = Matrix(3, 8);
  EXPECT_THROW(wrong.validate(), std::invalid_argument);
  wrong = params;
  wrong.cls_embedding.pop_back();
  EXPECT_THROW(wrong.validate(), std::invalid_argument);
  wrong = params;
  wrong.heads[0].readout[0] = NAN;
  EXPECT_THROW(wrong.validate(), std::invalid_argument);
  wrong = params;
  wrong.dims.embed_dim = 7;
  EXPECT_THROW(wrong.validate(), std::invalid_argument);
}

TEST(Forward, ZeroReadoutGivesZeroOutput) {
  ModelParams params = random_params(small_dims(), 6);
  for (auto& h : params.heads) std::fill(h.readout.begin(), h.readout.end(), 0.0);
  EXPECT_EQ(forward(random_doc(1, 40, 9), params).output, 0.0);
}

TEST(Forward, ZeroQueryGivesUniformAttention) {
  ModelParams params = random_params(small_dims(), 7);
  for (auto& h : params.heads) testing::zero(h.query);
  const AttentionRecord r = forward(random_doc(2, 40, 5), params);
  for (const auto& hr : r.heads) {
    Vector mean(params.dims.out_dim, 0.0);
    for (std::size_t t = 0; t < params.dims.max_len; ++t) {
      EXPECT_DOUBLE_EQ(hr.alpha[t], 1.0 / params.dims.max_len);
      axpy(1.0 / params.dims.max_len, hr.values.row(t), mean);
    }
    EXPECT_LT(testing::max_abs_diff(mean, hr.v_tilde), 1e-15);
  }
}

// Every intermediate spelled out by hand for K = 1, T_max = 3, d_e = 2.
TEST(Forward, HandComputation) {
  ModelParams params;
  params.dims = ModelDims{2, 3, 2, 2, 2, 1};
  params.embeddings = Matrix(2, 2, {1, 0, 0, 1});
  params.unk_embedding = {0.5, -0.5};
  params.cls_embedding = {1, 1};
  AttentionHead h;
  h.query = Matrix(2, 2, {1, 0, 0, 1});
  h.key = Matrix(2, 2, {1, 1, 0, 1});
  h.value = Matrix(2, 2, {2, 0, 1, 1});
  h.readout = {1, -1};
  params.heads = {h};

  // W_p(t) = [sin(t/3), cos(t/3)]; [CLS] at t = 0 adds [0, 1].
  const double q0 = 1.0, q1 = 2.0;
  double e[3][2];
  const double base[3][2] = {{0, 1}, {1, 0}, {0.5, -0.5}};  // doc [1, 0], then padding h
  for (int t = 0; t < 3; ++t) {
    e[t][0] = base[t][0] + std::sin((t + 1) / 3.0);
    e[t][1] = base[t][1] + std::cos((t + 1) / 3.0);
  }
  double g[3], y[3], total = 0.0;
  for (int t = 0; t < 3; ++t) {
    const double k0 = e[t][0] + e[t][1], k1 = e[t][1];
    g[t] = std::exp((q0 * k0 + q1 * k1) / std::sqrt(2.0));
    const double v0 = 2 * e[t][0], v1 = e[t][0] + e[t][1];
    y[t] = v0 - v1;
    total += g[t];
  }
  double expected = 0.0;
  for (int t = 0; t < 3; ++t) expected += g[t] / total * y[t];

  const AttentionRecord r = forward(Document({1, 0}), params);
  EXPECT_NEAR(r.heads[0].query[0], q0, 1e-15);
  EXPECT_NEAR(r.heads[0].query[1], q1, 1e-15);
  EXPECT_NEAR(r.output, expected, 1e-13);
  for (int t = 0; t < 3; ++t) EXPECT_NEAR(r.heads[0].alpha[t], g[t] / total, 1e-14);
}

TEST(Forward, DeterministicAcrossIdenticalModels) {
  const ModelParams a = random_params(small_dims(), 8), b = random_params(small_dims(), 8);
  ASSERT_EQ(a, b);
  const Document doc = random_doc(3, 40, 10);
  const AttentionRecord ra = forward(doc, a), rb = forward(doc, b);
  EXPECT_EQ(ra.output, rb.output);
  for (std::size_t i = 0; i < ra.heads.size(); ++i) {
    EXPECT_EQ(ra.heads[i].alpha, rb.heads[i].alpha);
    EXPECT_EQ(ra.heads[i].values, rb.heads[i].values);
  }
}

TEST(Forward, LongDocumentIsTruncated) {
  const ModelParams params = random_params(small_dims(8), 9);
  const Document doc = random_doc(4, 40, 20);
  EXPECT_EQ(forward(doc, params).output, forward(doc.truncated(8), params).output);
}

TEST(Forward, DecisionRule) {
  EXPECT_TRUE(classify_positive(1e-12));
  EXPECT_FALSE(classify_positive(0.0));
  EXPECT_FALSE(classify_positive(-0.3));
}

TEST(RandomParams, DeterministicPerSeedAndScaled) {
  const ModelDims dims{30, 16, 64, 32, 48, 2};
  EXPECT_EQ(random_params(dims, 1), random_params(dims, 1));
  EXPECT_NE(random_params(dims, 1), random_params(dims, 2));
  const ModelParams p = random_params(dims, 3);
  double sq = 0.0;
  for (double x : p.heads[0].key.data()) sq += x * x;
  // Entries have variance 1 / d_e.
  EXPECT_NEAR(sq / p.heads[0].key.data().size(), 1.0 / 64.0, 0.2 / 64.0);
}

}  // namespace
}  // namespace xattn
