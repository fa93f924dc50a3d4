#include "xattn/attention_explain.h"

#include <numeric>

#include <gtest/gtest.h>

#include "support.h"

namespace xattn {
namespace {

using testing::random_doc;
using testing::small_dims;

AttentionRecord two_head_record(double a1, double a2) {
  AttentionRecord r;
  r.heads.resize(2);
  r.heads[0].alpha = {a1, 0.5};
  r.heads[1].alpha = {a2, 0.5};
  return r;
}

TEST(AlphaAvg, ArithmeticMean) {
  EXPECT_DOUBLE_EQ(alpha_avg(two_head_record(0.1, 0.3), 2).weights[0], 0.2);
}

TEST(AlphaMax, Maximum) {
  EXPECT_DOUBLE_EQ(alpha_max(two_head_record(0.1, 0.3), 2).weights[0], 0.3);
}

TEST(AlphaAvg, SingleHeadIsThatHead) {
  ModelDims dims = small_dims();
  dims.num_heads = 1;
  const ModelParams params = random_params(dims, 1);
  const Document doc = random_doc(1, 40, 6);
  const AttentionRecord r = forward(doc, params);
  const Explanation avg = alpha_avg(r, 6), mx = alpha_max(r, 6);
  ASSERT_EQ(avg.weights.size(), 6u);
  for (std::size_t t = 0; t < 6; ++t) {
    EXPECT_DOUBLE_EQ(avg.weights[t], r.heads[0].alpha[t]);
    EXPECT_DOUBLE_EQ(mx.weights[t], r.heads[0].alpha[t]);
  }
  EXPECT_EQ(avg.method, Method::kAlphaAvg);
  EXPECT_EQ(mx.method, Method::kAlphaMax);
}

TEST(AlphaAvg, IdenticalHeadsEqualOneHead) {
  ModelParams params = random_params(small_dims(), 2);
  for (auto& h : params.heads) h = params.heads[0];
  const AttentionRecord r = forward(random_doc(2, 40, 7), params);
  const Explanation avg = alpha_avg(r, 7), mx = alpha_max(r, 7);
  for (std::size_t t = 0; t < 7; ++t) {
    EXPECT_NEAR(avg.weights[t], r.heads[0].alpha[t], 1e-16);
    EXPECT_EQ(mx.weights[t], r.heads[0].alpha[t]);
  }
}

TEST(AttentionMatrix, RowsSumToOne) {
  const ModelParams params = random_params(small_dims(), 3);
  const Document doc = random_doc(3, 40, 9);
  for (std::size_t head = 0; head < 3; ++head) {
    const Matrix a = attention_matrix(doc, params, head);
    ASSERT_EQ(a.rows(), 9u);
    ASSERT_EQ(a.cols(), 9u);
    for (std::size_t r = 0; r < 9; ++r) {
      const auto row = a.row(r);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-10);
    }
  }
}

TEST(AttentionMatrix, ZeroQueryGivesUniformRows) {
  ModelParams params = random_params(small_dims(), 4);
  testing::zero(params.heads[1].query);
  const Matrix a = attention_matrix(random_doc(4, 40, 5), params, 1);
  for (double x : a.data()) EXPECT_DOUBLE_EQ(x, 0.2);
}

TEST(AttentionMatrix, SingleToken) {
  const ModelParams params = random_params(ModelDims{40, 1, 8, 4, 4, 2}, 5);
  const Matrix a = attention_matrix(Document({3}), params, 0);
  ASSERT_EQ(a.rows(), 1u);
  EXPECT_EQ(a(0, 0), 1.0);
}

TEST(AttentionMatrix, BadHeadThrows) {
  const ModelParams params = random_params(small_dims(), 6);
  EXPECT_THROW(attention_matrix(Document({1}), params, 3), std::out_of_range);
}

}  // namespace
}  // namespace xattn
