#include "xattn/lime.h"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <gtest/gtest.h>

#include "support.h"

namespace xattn {
namespace {

using testing::brute_force_removed;
using testing::random_doc;
using testing::small_dims;

double binomial(std::size_t n, std::size_t k) {
  double acc = 1.0;
  for (std::size_t i = 1; i <= k; ++i) acc = acc * (n - k + i) / i;
  return acc;
}

// Limit coefficients from full forward passes and explicit Bayes
// conditioning on "word j kept".
Vector brute_force_limit(const Document& doc, const ModelParams& params) {
  const std::size_t d = doc.num_words();
  Vector num(d, 0.0), den(d, 0.0);
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << d); ++mask) {
    const std::size_t s = std::popcount(mask);
    const double p = 1.0 / (d * binomial(d, s));
    const double f = brute_force_removed(doc, params, mask);
    for (std::size_t j = 0; j < d; ++j) {
      if ((mask >> j) & 1U) continue;
      num[j] += p * f;
      den[j] += p;
    }
  }
  Vector cond(d);
  for (std::size_t j = 0; j < d; ++j) cond[j] = num[j] / den[j];
  const double sum = std::accumulate(cond.begin(), cond.end(), 0.0);
  Vector beta(d);
  for (std::size_t j = 0; j < d; ++j) beta[j] = 3.0 * cond[j] - 3.0 / d * sum;
  return beta;
}

TEST(ProximityWeight, Endpoints) {
  EXPECT_EQ(cosine_distance_to_ones(5, 5), 0.0);
  EXPECT_EQ(proximity_weight(5, 5, 0.25), 1.0);
  EXPECT_EQ(cosine_distance_to_ones(0, 5), 1.0);
  EXPECT_DOUBLE_EQ(proximity_weight(0, 5, 25.0), std::exp(-1.0 / (2.0 * 625.0)));
}

TEST(ProximityWeight, HandValue) {
  const double dist = 1.0 - std::sqrt(0.5);
  EXPECT_DOUBLE_EQ(proximity_weight(2, 4, 0.25), std::exp(-dist * dist / 0.125));
}

TEST(LimeConfig, Validation) {
  LimeConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.samples = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = LimeConfig{};
  cfg.bandwidth = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = LimeConfig{};
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(PerturbationEvaluator, MatchesFullForwardPasses) {
  const ModelParams params = random_params(small_dims(), 1);
  const Document doc({3, 7, 3, 11, 7, 20});  // repeated words
  const PerturbationEvaluator evaluator(doc, params);
  ASSERT_EQ(evaluator.num_words(), 4u);
  for (std::uint64_t mask = 0; mask < 16; ++mask) {
    EXPECT_NEAR(evaluator.evaluate_mask(mask), brute_force_removed(doc, params, mask), 1e-14);
  }
  EXPECT_NEAR(evaluator.evaluate_mask(0), forward(doc, params).output, 1e-14);
}

TEST(SamplePerturbations, RowsAreConsistent) {
  const ModelParams params = random_params(small_dims(), 2);
  const Document doc = random_doc(2, 40, 8);
  LimeConfig cfg;
  cfg.samples = 300;
  cfg.bandwidth = 0.25;
  const PerturbationBatch batch = sample_perturbations(doc, params, cfg);
  const std::size_t d = doc.num_words();
  ASSERT_EQ(batch.presence.rows(), 300u);
  ASSERT_EQ(batch.presence.cols(), d);
  for (std::size_t i = 0; i < batch.n; ++i) {
    std::uint64_t removed = 0;
    std::size_t kept = 0;
    for (std::size_t j = 0; j < d; ++j) {
      if (batch.presence(i, j) == 0.0) removed |= std::uint64_t{1} << j;
      else ++kept;
    }
    EXPECT_LT(kept, d);  // at least one word removed
    EXPECT_GT(batch.pi[i], 0.0);
    EXPECT_LE(batch.pi[i], 1.0);
    EXPECT_DOUBLE_EQ(batch.pi[i], proximity_weight(kept, d, 0.25));
    EXPECT_NEAR(batch.y[i], brute_force_removed(doc, params, removed), 1e-14);
  }
}

TEST(SamplePerturbations, DeterministicAcrossThreadCounts) {
  const ModelParams params = random_params(small_dims(), 3);
  const Document doc = random_doc(3, 40, 10);
  LimeConfig cfg;
  cfg.samples = 2000;
  cfg.seed = 99;
  ::setenv("XATTN_THREADS", "1", 1);
  const PerturbationBatch one = sample_perturbations(doc, params, cfg);
  const LimeResult fit_one = empirical_lime(doc, params, cfg);
  ::setenv("XATTN_THREADS", "4", 1);
  const PerturbationBatch four = sample_perturbations(doc, params, cfg);
  const LimeResult fit_four = empirical_lime(doc, params, cfg);
  ::unsetenv("XATTN_THREADS");
  EXPECT_EQ(one.presence, four.presence);
  EXPECT_EQ(one.pi, four.pi);
  EXPECT_EQ(one.y, four.y);
  EXPECT_EQ(fit_one.word_coefficients, fit_four.word_coefficients);
  EXPECT_EQ(fit_one.intercept, fit_four.intercept);
  cfg.seed = 100;
  EXPECT_NE(sample_perturbations(doc, params, cfg).presence, one.presence);
}

TEST(SamplePerturbations, EmptyDocumentThrows) {
  const ModelParams params = random_params(small_dims(), 4);
  EXPECT_THROW(sample_perturbations(Document(), params, LimeConfig{}), std::invalid_argument);
}

TEST(EmpiricalLime, ConstantModelHasZeroCoefficients) {
  ModelParams params = random_params(small_dims(), 5);
  for (auto& h : params.heads) std::fill(h.readout.begin(), h.readout.end(), 0.0);
  const LimeResult r = empirical_lime(random_doc(5, 40, 6), params, LimeConfig{});
  for (double b : r.word_coefficients) EXPECT_NEAR(b, 0.0, 1e-8);
  EXPECT_NEAR(r.intercept, 0.0, 1e-8);
}

TEST(EmpiricalLime, WordEmbeddedAsUnkIsIgnored) {
  ModelParams params = random_params(small_dims(), 6);
  const Document doc = random_doc(6, 40, 6, true);
  std::copy(params.unk_embedding.begin(), params.unk_embedding.end(),
            params.embeddings.row(doc[2]).begin());
  LimeConfig cfg;
  cfg.samples = 50000;
  const LimeResult r = empirical_lime(doc, params, cfg);
  EXPECT_LT(std::abs(r.word_coefficients[doc.word_of(2)]), 0.02);
}

TEST(EmpiricalLime, CoefficientsSpreadToEveryOccurrence) {
  const ModelParams params = random_params(small_dims(), 7);
  const Document doc({4, 9, 4, 4, 9});
  LimeConfig cfg;
  cfg.samples = 500;
  const LimeResult r = empirical_lime(doc, params, cfg);
  ASSERT_EQ(r.explanation.weights.size(), 5u);
  EXPECT_EQ(r.explanation.weights[0], r.word_coefficients[0]);
  EXPECT_EQ(r.explanation.weights[3], r.word_coefficients[0]);
  EXPECT_EQ(r.explanation.weights[4], r.word_coefficients[1]);
}

TEST(ExactLimit, MatchesBruteForceOracle) {
  const ModelParams params = random_params(small_dims(), 8);
  const Document doc({5, 1, 5, 30, 2, 1, 17});  // d = 5 with repeats
  const LimeResult r = exact_limit_coefficients(doc, params);
  const Vector oracle = brute_force_limit(doc, params);
  EXPECT_LT(testing::max_abs_diff(r.word_coefficients, oracle), 1e-14);
}

TEST(ExactLimit, SingleWordIsZero) {
  const ModelParams params = random_params(small_dims(), 9);
  EXPECT_EQ(exact_limit_coefficients(Document({3, 3}), params).word_coefficients, Vector{0.0});
}

TEST(ExactLimit, TwoWordsByHand) {
  const ModelParams params = random_params(small_dims(), 10);
  const Document doc({6, 8, 6});
  // Word 1 survives only when S = {2}, and the other way round.
  const double keep_first = brute_force_removed(doc, params, 0b10);
  const double keep_second = brute_force_removed(doc, params, 0b01);
  const Vector beta = exact_limit_coefficients(doc, params).word_coefficients;
  EXPECT_NEAR(beta[0], 1.5 * (keep_first - keep_second), 1e-15);
  EXPECT_NEAR(beta[1], -beta[0], 1e-15);
}

TEST(ExactLimit, ConstantModelIsZero) {
  ModelParams params = random_params(small_dims(), 11);
  for (auto& h : params.heads) std::fill(h.readout.begin(), h.readout.end(), 0.0);
  for (double b : exact_limit_coefficients(random_doc(11, 40, 7), params).word_coefficients) {
    EXPECT_EQ(b, 0.0);
  }
}

TEST(ExactLimit, GuardSuggestsMonteCarlo) {
  const ModelParams params = random_params(ModelDims{64, 32, 8, 4, 4, 2}, 12);
  const Document doc = random_doc(12, 64, 21, true);
  try {
    exact_limit_coefficients(doc, params);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("Monte Carlo"), std::string::npos);
  }
}

TEST(SampledLimit, ConvergesToExact) {
  const ModelParams params = random_params(small_dims(), 13);
  const Document doc = random_doc(13, 40, 6, true);
  const Vector exact = exact_limit_coefficients(doc, params).word_coefficients;
  const Vector sampled = sampled_limit_coefficients(doc, params, 20000, 5).word_coefficients;
  double scale = 0.0;
  for (double b : exact) scale = std::max(scale, std::abs(b));
  EXPECT_LT(testing::max_abs_diff(exact, sampled), 0.05 * scale);
  EXPECT_EQ(sampled, sampled_limit_coefficients(doc, params, 20000, 5).word_coefficients);
}

TEST(UnkQuantities, MatchAllUnkForwardPass) {
  const ModelParams params = random_params(small_dims(), 14);
  const Document doc = random_doc(14, 40, 5);
  const UnkQuantities unk = unk_quantities(doc, params);
  const AttentionRecord all_unk =
      forward_from_embeddings(EmbeddedDocument{unk_rows(params), 0}, params);
  const AttentionRecord plain = forward(doc, params);
  for (std::size_t i = 0; i < params.dims.num_heads; ++i) {
    const auto& uq = unk.heads[i];
    EXPECT_NEAR(std::accumulate(uq.alpha_unk.begin(), uq.alpha_unk.end(), 0.0), 1.0, 1e-10);
    EXPECT_LT(testing::max_abs_diff(uq.alpha_unk, all_unk.heads[i].alpha), 1e-15);
    EXPECT_LT(testing::max_abs_diff(uq.values_unk.data(), all_unk.heads[i].values.data()), 1e-15);
    const double g_sum = std::accumulate(uq.g.begin(), uq.g.end(), 0.0);
    for (std::size_t t = 0; t < params.dims.max_len; ++t) {
      EXPECT_GT(uq.g[t], 0.0);
      EXPECT_GT(uq.g_unk[t], 0.0);
      EXPECT_NEAR(uq.g[t] / g_sum, plain.heads[i].alpha[t], 1e-15);
    }
  }
}

TEST(ApproxLimit, MatchesIndependentRecomputation) {
  const ModelParams params = random_params(small_dims(), 15);
  const Document doc({2, 9, 2, 31});
  const AttentionRecord plain = forward(doc, params);
  const AttentionRecord all_unk =
      forward_from_embeddings(EmbeddedDocument{unk_rows(params), 0}, params);
  Vector expected(3, 0.0);
  const double k = params.dims.num_heads;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& w = params.heads[i].readout;
    for (std::size_t t = 0; t < 4; ++t) {
      expected[doc.word_of(t)] +=
          1.5 / k *
          (plain.heads[i].alpha[t] * dot(w, plain.heads[i].values.row(t)) -
           all_unk.heads[i].alpha[t] * dot(w, all_unk.heads[i].values.row(t)));
    }
  }
  EXPECT_LT(testing::max_abs_diff(approx_limit_coefficients(doc, params).word_coefficients,
                                  expected),
            1e-16);
}

TEST(ApproxLimit, WordsEmbeddedAsUnkGiveZero) {
  ModelParams params = random_params(small_dims(), 16);
  for (std::size_t r = 0; r < params.dims.vocab_size; ++r) {
    std::copy(params.unk_embedding.begin(), params.unk_embedding.end(),
              params.embeddings.row(r).begin());
  }
  for (double b : approx_limit_coefficients(random_doc(16, 40, 8), params).word_coefficients) {
    EXPECT_NEAR(b, 0.0, 1e-17);
  }
}

TEST(ApproxLimit, ZeroReadoutGivesZero) {
  ModelDims dims = small_dims();
  dims.num_heads = 1;
  ModelParams params = random_params(dims, 17);
  std::fill(params.heads[0].readout.begin(), params.heads[0].readout.end(), 0.0);
  for (double b : approx_limit_coefficients(random_doc(17, 40, 8), params).word_coefficients) {
    EXPECT_EQ(b, 0.0);
  }
}

TEST(VocabularyCoefficients, AbsentWordsAreZero) {
  const ModelParams params = random_params(small_dims(), 18);
  const Document doc({12, 4, 12});
  const LimeResult exact = exact_limit_coefficients(doc, params);
  const Vector vocab = vocabulary_coefficients(doc, exact.word_coefficients, 40);
  for (std::size_t id = 0; id < 40; ++id) {
    if (id == 12) EXPECT_EQ(vocab[id], exact.word_coefficients[0]);
    else if (id == 4) EXPECT_EQ(vocab[id], exact.word_coefficients[1]);
    else EXPECT_EQ(vocab[id], 0.0);
  }
  EXPECT_THROW(vocabulary_coefficients(doc, Vector{1.0}, 40), std::invalid_argument);
}

}  // namespace
}  // namespace xattn
