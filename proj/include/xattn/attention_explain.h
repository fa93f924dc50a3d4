// Attention-based explanations: the [CLS] attention row of every head,
// aggregated per document token.

#ifndef XATTN_ATTENTION_EXPLAIN_H_
#define XATTN_ATTENTION_EXPLAIN_H_

#include <cstddef>

#include "xattn/explanation.h"
#include "xattn/model.h"

namespace xattn {

// weight_t = (1/K) sum_i alpha_t^(i), t < length.
Explanation alpha_avg(const AttentionRecord& record, std::size_t length);
// weight_t = max_i alpha_t^(i).
Explanation alpha_max(const AttentionRecord& record, std::size_t length);

// T x T matrix whose row s is the softmax over document positions of
// q_s^T k_t / sqrt(d_att), with q_s = W_q e_s. Heatmap use only.
Matrix attention_matrix(const Document& doc, const ModelParams& params, std::size_t head);

}  // namespace xattn

#endif  // XATTN_ATTENTION_EXPLAIN_H_
