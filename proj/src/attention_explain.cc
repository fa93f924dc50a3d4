#include "xattn/attention_explain.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace xattn {

Explanation alpha_avg(const AttentionRecord& record, std::size_t length) {
  Explanation out{Method::kAlphaAvg, Vector(length, 0.0), std::nullopt};
  for (const auto& head : record.heads) {
    for (std::size_t t = 0; t < length; ++t) out.weights[t] += head.alpha[t];
  }
  const double k = static_cast<double>(record.heads.size());
  for (double& w : out.weights) w /= k;
  return out;
}

Explanation alpha_max(const AttentionRecord& record, std::size_t length) {
  Explanation out{Method::kAlphaMax, Vector(length, 0.0), std::nullopt};
  for (std::size_t t = 0; t < length; ++t) {
    double best = 0.0;
    for (const auto& head : record.heads) best = std::max(best, head.alpha[t]);
    out.weights[t] = best;
  }
  return out;
}

Matrix attention_matrix(const Document& doc, const ModelParams& params, std::size_t head) {
  if (head >= params.heads.size()) {
    throw std::out_of_range("head " + std::to_string(head) + " out of range (K=" +
                            std::to_string(params.heads.size()) + ")");
  }
  const auto& h = params.heads[head];
  const EmbeddedDocument embedded = embed(doc, params);
  const std::size_t len = embedded.length;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.dims.att_dim));

  std::vector<Vector> keys(len);
  for (std::size_t t = 0; t < len; ++t) keys[t] = matvec(h.key, embedded.rows.row(t));

  Matrix out(len, len);
  Vector logits(len);
  for (std::size_t s = 0; s < len; ++s) {
    const Vector q = matvec(h.query, embedded.rows.row(s));
    for (std::size_t t = 0; t < len; ++t) logits[t] = dot(q, keys[t]) * inv_scale;
    const Vector row = softmax(logits);
    std::copy(row.begin(), row.end(), out.row(s).begin());
  }
  return out;
}

}  // namespace xattn
