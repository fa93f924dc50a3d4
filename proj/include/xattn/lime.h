// LIME for text on the attention classifier.
//
// Perturbations remove a uniformly random number s in [1, d] of distinct
// words, replacing every occurrence with the UNK embedding while positional
// encodings stay in place. A weighted ridge surrogate on the presence vectors
// gives the empirical explanation. For large sample counts and bandwidths the
// coefficients approach
//
//   beta_j = 3 E[f(X) | j not removed] - (3/d) sum_k E[f(X) | k not removed],
//
// computed here exactly by subset enumeration, or by a stratified Monte Carlo
// estimate when the dictionary is too large, plus the attention-based
// closed-form approximation.

#ifndef XATTN_LIME_H_
#define XATTN_LIME_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xattn/explanation.h"
#include "xattn/model.h"

namespace xattn {

struct LimeConfig {
  std::size_t samples = 5000;  // n
  double bandwidth = 25.0;     // nu
  double lambda = 1.0;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on n == 0, nu <= 0 or lambda < 0.
  void validate() const;
};

struct PerturbationBatch {
  std::size_t n = 0;
  Matrix presence;  // n x d, 1 iff the word survives in sample i
  Vector pi;        // proximity weights
  Vector y;         // model responses
  std::uint64_t seed = 0;
};

// Quantities attached to the UNK token at every slot, per head. The g values
// share the forward pass's max-subtraction: g_t = exp(logit_t - shift) with
// one shift per head, so ratios are exact and all values are positive.
struct UnkHeadQuantities {
  Vector g;          // document slots, T_max
  Vector g_unk;      // g_{h,t}, T_max
  Vector alpha_unk;  // g_{h,t} / sum_u g_{h,u}
  Matrix values_unk;  // v_{h,t} = W_v (h + W_p(t)), T_max x d_out
  Matrix keys_unk;    // k_{h,t} = W_k (h + W_p(t)), T_max x d_att
};

struct UnkQuantities {
  std::vector<UnkHeadQuantities> heads;
};

UnkQuantities unk_quantities(const Document& doc, const ModelParams& params);

// Exact f(X_S) for any set of removed dictionary words in O(K T), from one
// forward pass over the document and one over the all-UNK document. Padding
// slots are folded into per-head constants.
class PerturbationEvaluator {
 public:
  PerturbationEvaluator(const Document& doc, const ModelParams& params);

  std::size_t num_words() const { return num_words_; }
  std::size_t length() const { return length_; }

  // removed[j] != 0 iff dictionary word j is replaced with UNK.
  double evaluate(std::span<const std::uint8_t> removed) const;
  // Same, with removed words given as a bitmask (d <= 64).
  double evaluate_mask(std::uint64_t removed) const;

 private:
  template <typename IsRemoved>
  double evaluate_impl(IsRemoved is_removed) const;

  struct Head {
    Vector g, y, g_unk, y_unk;  // first `length_` slots
    double pad_weight = 0.0;
    double pad_numerator = 0.0;
  };
  std::size_t length_ = 0;
  std::size_t num_words_ = 0;
  std::vector<std::size_t> word_of_;
  std::vector<Head> heads_;
};

// Cosine distance between the all-ones vector of length d and a 0/1 vector
// with `kept` ones: 1 - sqrt(kept / d), and 1 for the zero vector.
double cosine_distance_to_ones(std::size_t kept, std::size_t d);
// exp(-dist^2 / (2 nu^2)).
double proximity_weight(std::size_t kept, std::size_t d, double bandwidth);

PerturbationBatch sample_perturbations(const Document& doc, const ModelParams& params,
                                       const LimeConfig& cfg);

struct LimeResult {
  Explanation explanation;   // per position; every occurrence of word j gets beta_j
  Vector word_coefficients;  // per dictionary word
  double intercept = 0.0;    // empirical fit only
};

Explanation words_to_positions(const Document& doc, std::span<const double> per_word,
                               Method method);

LimeResult empirical_lime(const Document& doc, const ModelParams& params,
                          const LimeConfig& cfg);
LimeResult empirical_lime(const Document& doc, const PerturbationBatch& batch, double lambda);

// Per-vocabulary view of per-word coefficients: entry id holds the
// coefficient of that token when it occurs in the document, 0 otherwise.
Vector vocabulary_coefficients(const Document& doc, std::span<const double> per_word,
                               std::size_t vocab_size);

inline constexpr std::size_t kExactLimitMaxWords = 20;

// Exhaustive enumeration of all 2^d removal sets. Throws std::invalid_argument
// when d exceeds kExactLimitMaxWords or d == 0.
LimeResult exact_limit_coefficients(const Document& doc, const ModelParams& params);

// Stratified Monte Carlo estimate of the same limit: every size s in [1, d]
// is visited and `per_size` subsets of that size are drawn.
LimeResult sampled_limit_coefficients(const Document& doc, const ModelParams& params,
                                      std::size_t per_size, std::uint64_t seed);

// beta_j ~ (3 / 2K) sum_i sum_t W_l (alpha_t v_t - alpha_{h,t} v_{h,t}) 1{xi_t = j}.
LimeResult approx_limit_coefficients(const Document& doc, const ModelParams& params);

}  // namespace xattn

#endif  // XATTN_LIME_H_
