#include "xattn/lime.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "xattn/parallel.h"
#include "xattn/random.h"

namespace xattn {

void LimeConfig::validate() const {
  if (samples == 0) throw std::invalid_argument("LIME needs at least one sample");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("LIME bandwidth must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("LIME lambda must be >= 0");
}

UnkQuantities unk_quantities(const Document& doc, const ModelParams& params) {
  const auto& d = params.dims;
  const AttentionRecord record = forward(doc, params);
  const Matrix unk = unk_rows(params);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d.att_dim));

  UnkQuantities out;
  out.heads.reserve(d.num_heads);
  for (std::size_t i = 0; i < d.num_heads; ++i) {
    const auto& head = params.heads[i];
    const auto& hr = record.heads[i];
    UnkHeadQuantities q;
    q.keys_unk = Matrix(d.max_len, d.att_dim);
    q.values_unk = Matrix(d.max_len, d.out_dim);
    Vector unk_logits(d.max_len);
    for (std::size_t t = 0; t < d.max_len; ++t) {
      const Vector key = matvec(head.key, unk.row(t));
      const Vector value = matvec(head.value, unk.row(t));
      std::copy(key.begin(), key.end(), q.keys_unk.row(t).begin());
      std::copy(value.begin(), value.end(), q.values_unk.row(t).begin());
      unk_logits[t] = dot(hr.query, key) * inv_scale;
    }
    const double shift = std::max(*std::max_element(hr.logits.begin(), hr.logits.end()),
                                  *std::max_element(unk_logits.begin(), unk_logits.end()));
    q.g.resize(d.max_len);
    q.g_unk.resize(d.max_len);
    for (std::size_t t = 0; t < d.max_len; ++t) {
      q.g[t] = std::exp(hr.logits[t] - shift);
      q.g_unk[t] = std::exp(unk_logits[t] - shift);
    }
    const double total = std::accumulate(q.g_unk.begin(), q.g_unk.end(), 0.0);
    q.alpha_unk.resize(d.max_len);
    for (std::size_t t = 0; t < d.max_len; ++t) q.alpha_unk[t] = q.g_unk[t] / total;
    out.heads.push_back(std::move(q));
  }
  return out;
}

PerturbationEvaluator::PerturbationEvaluator(const Document& doc, const ModelParams& params) {
  const auto& d = params.dims;
  const Document kept = doc.truncated(d.max_len);
  length_ = kept.size();
  num_words_ = kept.num_words();
  word_of_.resize(length_);
  for (std::size_t t = 0; t < length_; ++t) word_of_[t] = kept.word_of(t);

  const AttentionRecord record = forward(kept, params);
  const UnkQuantities unk = unk_quantities(kept, params);
  heads_.resize(d.num_heads);
  for (std::size_t i = 0; i < d.num_heads; ++i) {
    const auto& readout = params.heads[i].readout;
    const auto& hr = record.heads[i];
    const auto& uq = unk.heads[i];
    Head& h = heads_[i];
    for (std::size_t t = 0; t < d.max_len; ++t) {
      const double y = dot(readout, hr.values.row(t));
      if (t < length_) {
        h.g.push_back(uq.g[t]);
        h.y.push_back(y);
        h.g_unk.push_back(uq.g_unk[t]);
        h.y_unk.push_back(dot(readout, uq.values_unk.row(t)));
      } else {
        h.pad_weight += uq.g[t];
        h.pad_numerator += uq.g[t] * y;
      }
    }
  }
}

template <typename IsRemoved>
double PerturbationEvaluator::evaluate_impl(IsRemoved is_removed) const {
  double total = 0.0;
  for (const Head& h : heads_) {
    double num = h.pad_numerator;
    double den = h.pad_weight;
    for (std::size_t t = 0; t < length_; ++t) {
      if (is_removed(word_of_[t])) {
        num += h.g_unk[t] * h.y_unk[t];
        den += h.g_unk[t];
      } else {
        num += h.g[t] * h.y[t];
        den += h.g[t];
      }
    }
    total += num / den;
  }
  return total / static_cast<double>(heads_.size());
}

double PerturbationEvaluator::evaluate(std::span<const std::uint8_t> removed) const {
  if (removed.size() != num_words_) {
    throw std::invalid_argument("removal mask length must equal dictionary size");
  }
  return evaluate_impl([&](std::size_t j) { return removed[j] != 0; });
}

double PerturbationEvaluator::evaluate_mask(std::uint64_t removed) const {
  return evaluate_impl([&](std::size_t j) { return ((removed >> j) & 1U) != 0; });
}

double cosine_distance_to_ones(std::size_t kept, std::size_t d) {
  if (kept == 0 || d == 0) return 1.0;
  return 1.0 - std::sqrt(static_cast<double>(kept) / static_cast<double>(d));
}

double proximity_weight(std::size_t kept, std::size_t d, double bandwidth) {
  const double dist = cosine_distance_to_ones(kept, d);
  return std::exp(-dist * dist / (2.0 * bandwidth * bandwidth));
}

namespace {

// Uniform subset of size s from [0, d) via a partial Fisher-Yates shuffle.
void draw_subset(std::mt19937_64& rng, std::size_t d, std::size_t s,
                 std::vector<std::size_t>& scratch, std::vector<std::uint8_t>& removed) {
  scratch.resize(d);
  std::iota(scratch.begin(), scratch.end(), std::size_t{0});
  std::fill(removed.begin(), removed.end(), std::uint8_t{0});
  for (std::size_t k = 0; k < s; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, d - 1);
    std::swap(scratch[k], scratch[pick(rng)]);
    removed[scratch[k]] = 1;
  }
}

}  // namespace

PerturbationBatch sample_perturbations(const Document& doc, const ModelParams& params,
                                       const LimeConfig& cfg) {
  cfg.validate();
  const PerturbationEvaluator evaluator(doc, params);
  const std::size_t d = evaluator.num_words();
  if (d == 0) throw std::invalid_argument("cannot perturb an empty document");

  PerturbationBatch batch;
  batch.n = cfg.samples;
  batch.seed = cfg.seed;
  batch.presence = Matrix(cfg.samples, d);
  batch.pi.resize(cfg.samples);
  batch.y.resize(cfg.samples);
  parallel_for(cfg.samples, [&](std::size_t i) {
    std::mt19937_64 rng = stream_for(cfg.seed, i);
    std::uniform_int_distribution<std::size_t> size_dist(1, d);
    const std::size_t s = size_dist(rng);
    std::vector<std::size_t> scratch;
    std::vector<std::uint8_t> removed(d);
    draw_subset(rng, d, s, scratch, removed);
    auto row = batch.presence.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] = removed[j] ? 0.0 : 1.0;
    batch.pi[i] = proximity_weight(d - s, d, cfg.bandwidth);
    batch.y[i] = evaluator.evaluate(removed);
  });
  return batch;
}

Explanation words_to_positions(const Document& doc, std::span<const double> per_word,
                               Method method) {
  Explanation out{method, Vector(doc.size()), std::nullopt};
  for (std::size_t t = 0; t < doc.size(); ++t) out.weights[t] = per_word[doc.word_of(t)];
  return out;
}

Vector vocabulary_coefficients(const Document& doc, std::span<const double> per_word,
                               std::size_t vocab_size) {
  if (per_word.size() != doc.num_words()) {
    throw std::invalid_argument("one coefficient per dictionary word expected");
  }
  Vector out(vocab_size, 0.0);
  for (std::size_t j = 0; j < per_word.size(); ++j) out.at(doc.dictionary()[j]) = per_word[j];
  return out;
}

LimeResult empirical_lime(const Document& doc, const PerturbationBatch& batch, double lambda) {
  const std::size_t d = batch.presence.cols();
  Matrix z_aug(batch.n, d + 1);
  for (std::size_t i = 0; i < batch.n; ++i) {
    z_aug(i, 0) = 1.0;
    auto src = batch.presence.row(i);
    std::copy(src.begin(), src.end(), z_aug.row(i).begin() + 1);
  }
  const Vector beta = weighted_ridge(z_aug, batch.y, batch.pi, lambda);
  LimeResult out;
  out.intercept = beta[0];
  out.word_coefficients.assign(beta.begin() + 1, beta.end());
  out.explanation = words_to_positions(doc, out.word_coefficients, Method::kLimeEmpirical);
  return out;
}

LimeResult empirical_lime(const Document& doc, const ModelParams& params,
                          const LimeConfig& cfg) {
  const Document kept = doc.truncated(params.dims.max_len);
  return empirical_lime(kept, sample_perturbations(kept, params, cfg), cfg.lambda);
}

namespace {

LimeResult limit_from_conditionals(const Document& doc, const Vector& cond_means,
                                   Method method) {
  const std::size_t d = cond_means.size();
  LimeResult out;
  out.word_coefficients.assign(d, 0.0);
  if (d >= 2) {
    const double mean_sum = std::accumulate(cond_means.begin(), cond_means.end(), 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      out.word_coefficients[j] = 3.0 * cond_means[j] - 3.0 / static_cast<double>(d) * mean_sum;
    }
  }
  out.explanation = words_to_positions(doc, out.word_coefficients, method);
  return out;
}

double binomial(std::size_t n, std::size_t k) {
  double acc = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return acc;
}

}  // namespace

LimeResult exact_limit_coefficients(const Document& doc, const ModelParams& params) {
  const Document kept = doc.truncated(params.dims.max_len);
  const std::size_t d = kept.num_words();
  if (d > kExactLimitMaxWords) {
    throw std::invalid_argument("exact limit coefficients need d <= " +
                                std::to_string(kExactLimitMaxWords) + " (got " +
                                std::to_string(d) + "); use the Monte Carlo mode");
  }
  if (d < 2) return limit_from_conditionals(kept, Vector(d, 0.0), Method::kLimeLimitExact);

  const PerturbationEvaluator evaluator(kept, params);
  Vector size_weight(d + 1, 0.0);  // P(s) P(S | s)
  for (std::size_t s = 1; s <= d; ++s) {
    size_weight[s] = 1.0 / (static_cast<double>(d) * binomial(d, s));
  }

  // Fixed-size blocks summed in block order keep the result independent of
  // the worker count.
  const std::uint64_t num_masks = std::uint64_t{1} << d;
  constexpr std::uint64_t kBlock = 4096;
  const std::size_t num_blocks = static_cast<std::size_t>((num_masks + kBlock - 1) / kBlock);
  std::vector<Vector> partial(num_blocks, Vector(d, 0.0));
  parallel_for(num_blocks, [&](std::size_t b) {
    Vector& acc = partial[b];
    const std::uint64_t begin = std::max<std::uint64_t>(1, b * kBlock);
    const std::uint64_t end = std::min(num_masks, (b + 1) * kBlock);
    for (std::uint64_t mask = begin; mask < end; ++mask) {
      const double weighted = size_weight[std::popcount(mask)] * evaluator.evaluate_mask(mask);
      for (std::size_t j = 0; j < d; ++j) {
        if (((mask >> j) & 1U) == 0) acc[j] += weighted;
      }
    }
  });
  Vector cond(d, 0.0);
  for (const Vector& block : partial) axpy(1.0, block, cond);
  // P(j not removed) = sum_s (1/d) (d - s) / d = (d - 1) / (2d).
  const double p_kept = static_cast<double>(d - 1) / (2.0 * static_cast<double>(d));
  for (double& c : cond) c /= p_kept;
  return limit_from_conditionals(kept, cond, Method::kLimeLimitExact);
}

LimeResult sampled_limit_coefficients(const Document& doc, const ModelParams& params,
                                      std::size_t per_size, std::uint64_t seed) {
  if (per_size == 0) throw std::invalid_argument("per_size must be positive");
  const Document kept = doc.truncated(params.dims.max_len);
  const std::size_t d = kept.num_words();
  if (d < 2) return limit_from_conditionals(kept, Vector(d, 0.0), Method::kLimeLimitExact);

  const PerturbationEvaluator evaluator(kept, params);
  struct Stratum {
    Vector sum;
    std::vector<std::size_t> count;
  };
  std::vector<Stratum> strata(d);  // index s - 1
  parallel_for(d, [&](std::size_t idx) {
    const std::size_t s = idx + 1;
    Stratum& st = strata[idx];
    st.sum.assign(d, 0.0);
    st.count.assign(d, 0);
    std::mt19937_64 rng = stream_for(seed, s);
    std::vector<std::size_t> scratch;
    std::vector<std::uint8_t> removed(d);
    for (std::size_t m = 0; m < per_size; ++m) {
      draw_subset(rng, d, s, scratch, removed);
      const double f = evaluator.evaluate(removed);
      for (std::size_t j = 0; j < d; ++j) {
        if (!removed[j]) {
          st.sum[j] += f;
          ++st.count[j];
        }
      }
    }
  });

  // E[f | j kept] = sum_s P(s | j kept) E[f | s, j kept], P(s | j kept) ~ (d - s).
  Vector cond(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double num = 0.0, den = 0.0;
    for (std::size_t idx = 0; idx < d; ++idx) {
      const std::size_t s = idx + 1;
      if (strata[idx].count[j] == 0) continue;
      const double w = static_cast<double>(d - s);
      num += w * strata[idx].sum[j] / static_cast<double>(strata[idx].count[j]);
      den += w;
    }
    cond[j] = den > 0.0 ? num / den : 0.0;
  }
  return limit_from_conditionals(kept, cond, Method::kLimeLimitExact);
}

LimeResult approx_limit_coefficients(const Document& doc, const ModelParams& params) {
  const Document kept = doc.truncated(params.dims.max_len);
  const std::size_t d = kept.num_words();
  const std::size_t k = params.dims.num_heads;
  const AttentionRecord record = forward(kept, params);
  const UnkQuantities unk = unk_quantities(kept, params);

  LimeResult out;
  out.word_coefficients.assign(d, 0.0);
  const double factor = 3.0 / (2.0 * static_cast<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const auto& readout = params.heads[i].readout;
    const auto& hr = record.heads[i];
    const auto& uq = unk.heads[i];
    for (std::size_t t = 0; t < kept.size(); ++t) {
      const double doc_term = hr.alpha[t] * dot(readout, hr.values.row(t));
      const double unk_term = uq.alpha_unk[t] * dot(readout, uq.values_unk.row(t));
      out.word_coefficients[kept.word_of(t)] += factor * (doc_term - unk_term);
    }
  }
  out.explanation = words_to_positions(kept, out.word_coefficients, Method::kLimeLimitApprox);
  return out;
}

}  // namespace xattn
