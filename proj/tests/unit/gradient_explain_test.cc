#include "xattn/gradient_explain.h"

#include <cmath>

#include <gtest/gtest.h>

#include "support.h"

namespace xattn {
namespace {

using testing::random_doc;
using testing::small_dims;

double relative_row_error(const GradientField& a, const GradientField& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.grads.rows(); ++t) {
    double diff = 0.0;
    for (std::size_t c = 0; c < a.grads.cols(); ++c) {
      diff += std::pow(a.grads(t, c) - b.grads(t, c), 2);
    }
    worst = std::max(worst, std::sqrt(diff) / norm2(b.grads.row(t)));
  }
  return worst;
}

TEST(GradientClosedForm, ZeroReadoutGivesZeroField) {
  ModelParams params = random_params(small_dims(), 1);
  for (auto& h : params.heads) std::fill(h.readout.begin(), h.readout.end(), 0.0);
  const GradientField field = gradient_closed_form(random_doc(1, 40, 6), params);
  for (double g : field.grads.data()) {
    EXPECT_EQ(g, 0.0);
  }
}

TEST(GradientClosedForm, ZeroQueryLeavesValueTerm) {
  ModelParams params = random_params(small_dims(), 2);
  for (auto& h : params.heads) testing::zero(h.query);
  const Document doc = random_doc(2, 40, 5);
  const GradientField field = gradient_closed_form(doc, params);
  const double k = static_cast<double>(params.dims.num_heads);
  const double alpha = 1.0 / params.dims.max_len;
  for (std::size_t t = 0; t < 5; ++t) {
    Vector expected(params.dims.embed_dim, 0.0);
    for (const auto& h : params.heads) {
      axpy(alpha / k, transpose_matvec(h.value, h.readout), expected);
    }
    EXPECT_LT(testing::max_abs_diff(field.grads.row(t), expected), 1e-16);
  }
}

TEST(GradientClosedForm, MatchesFiniteDifferences) {
  const ModelDims dims{100, 32, 16, 8, 8, 4};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ModelParams params = random_params(dims, seed);
    const Document doc = random_doc(seed, 100, 12);
    EXPECT_LT(relative_row_error(gradient_closed_form(doc, params),
                                 finite_diff_gradient(doc, params)),
              1e-6);
  }
}

TEST(FiniteDiff, FrozenAttentionIsLinear) {
  ModelDims dims = small_dims();
  dims.num_heads = 1;
  ModelParams params = random_params(dims, 3);
  testing::zero(params.heads[0].query);
  const Document doc = random_doc(3, 40, 6);
  const GradientField a = gradient_closed_form(doc, params), b = finite_diff_gradient(doc, params);
  EXPECT_LT(testing::max_abs_diff(a.grads.data(), b.grads.data()), 1e-9);
}

TEST(FiniteDiff, StepSweep) {
  const ModelParams params = random_params(ModelDims{100, 32, 16, 8, 8, 4}, 4);
  const Document doc = random_doc(4, 100, 12);
  const GradientField exact = gradient_closed_form(doc, params);
  const double coarse = relative_row_error(finite_diff_gradient(doc, params, 1e-3), exact);
  const double fine = relative_row_error(finite_diff_gradient(doc, params, 1e-5), exact);
  EXPECT_LT(fine, coarse);
  EXPECT_LT(fine, 1e-6);
}

TEST(FiniteDiff, NonPositiveStepThrows) {
  const ModelParams params = random_params(small_dims(), 5);
  EXPECT_THROW(finite_diff_gradient(Document({1}), params, 0.0), std::invalid_argument);
}

TEST(GradientSummaries, HandArithmetic) {
  const GradientField field{Matrix(1, 2, {3, -4})};
  EXPECT_DOUBLE_EQ(g_l1(field).weights[0], 7.0);
  EXPECT_DOUBLE_EQ(g_l2(field).weights[0], 5.0);
  EXPECT_DOUBLE_EQ(g_avg(field).weights[0], -0.5);
}

TEST(GradientSummaries, ZeroField) {
  const GradientField field{Matrix(3, 4)};
  for (const Explanation& e : {g_avg(field), g_l1(field), g_l2(field)}) {
    for (double w : e.weights) EXPECT_EQ(w, 0.0);
  }
}

TEST(GradientSummaries, NormsNonNegative) {
  const ModelParams params = random_params(small_dims(), 6);
  const GradientField field = gradient_closed_form(random_doc(6, 40, 10), params);
  for (double w : g_l1(field).weights) EXPECT_GE(w, 0.0);
  for (double w : g_l2(field).weights) EXPECT_GE(w, 0.0);
}

TEST(GradTimesInput, ZeroFieldAndSelfDot) {
  const ModelParams params = random_params(small_dims(), 7);
  const Document doc = random_doc(7, 40, 4);
  const EmbeddedDocument e = embed(doc, params);
  for (double w : g_times_input(GradientField{Matrix(4, 8)}, e).weights) EXPECT_EQ(w, 0.0);
  GradientField self{Matrix(4, 8)};
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t c = 0; c < 8; ++c) self.grads(t, c) = e.rows(t, c);
  }
  const Explanation g = g_times_input(self, e);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(g.weights[t], dot(e.rows.row(t), e.rows.row(t)));
}

TEST(GradTimesInput, RecomputedFromRawArrays) {
  const ModelParams params = random_params(small_dims(), 8);
  const Document doc = random_doc(8, 40, 7);
  const GradientField field = gradient_closed_form(doc, params);
  const Explanation full = g_times_input(field, embed(doc, params));
  const Explanation word = g_times_word(field, doc, params);
  for (std::size_t t = 0; t < 7; ++t) {
    double with_pos = 0.0, word_only = 0.0;
    const Vector p = positional_encoding(t + 1, 8, 16);
    for (std::size_t c = 0; c < 8; ++c) {
      with_pos += field.grads(t, c) * (params.embeddings(doc[t], c) + p[c]);
      word_only += field.grads(t, c) * params.embeddings(doc[t], c);
    }
    EXPECT_NEAR(full.weights[t], with_pos, 1e-15);
    EXPECT_NEAR(word.weights[t], word_only, 1e-15);
  }
}

TEST(GradTimesInput, ShapeMismatchThrows) {
  const ModelParams params = random_params(small_dims(), 9);
  const EmbeddedDocument e = embed(Document({1, 2}), params);
  EXPECT_THROW(g_times_input(GradientField{Matrix(2, 6)}, e), std::invalid_argument);
}

}  // namespace
}  // namespace xattn
