// Gradient-based explanations. The gradient of f with respect to each token
// embedding e_t has a closed form in terms of one forward pass:
//
//   grad_t = (1/K) sum_i [ alpha_t W_v^T W_l^T
//                          + (alpha_t / sqrt(d_att)) W_l (v_t - v_tilde) W_k^T q ]
//
// A central finite-difference probe of forward_from_embeddings serves as the
// independent check.

#ifndef XATTN_GRADIENT_EXPLAIN_H_
#define XATTN_GRADIENT_EXPLAIN_H_

#include <functional>

#include "xattn/explanation.h"
#include "xattn/model.h"

namespace xattn {

struct GradientField {
  Matrix grads;  // T x d_e, row t is the gradient w.r.t. e_t
};

using GradientFn = std::function<GradientField(const Document&, const ModelParams&)>;

GradientField gradient_closed_form(const Document& doc, const ModelParams& params);
// Same formula reusing an existing forward pass over `length` tokens.
GradientField gradient_closed_form(const AttentionRecord& record, std::size_t length,
                                   const ModelParams& params);

inline constexpr double kDefaultFiniteDiffStep = 1e-5;

// Central differences over every component of rows t < T. Throws
// std::invalid_argument unless step > 0.
GradientField finite_diff_gradient(const Document& doc, const ModelParams& params,
                                   double step = kDefaultFiniteDiffStep);

Explanation g_avg(const GradientField& field);
Explanation g_l1(const GradientField& field);
Explanation g_l2(const GradientField& field);

// weight_t = e_t . grad_t with the full (word + positional) embedding.
Explanation g_times_input(const GradientField& field, const EmbeddedDocument& embedded);
// Variant dotting against the word embedding W_e[xi_t] only.
Explanation g_times_word(const GradientField& field, const Document& doc,
                         const ModelParams& params);

}  // namespace xattn

#endif  // XATTN_GRADIENT_EXPLAIN_H_
