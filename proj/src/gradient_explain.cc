#include "xattn/gradient_explain.h"

#include <cmath>
#include <stdexcept>

namespace xattn {

GradientField gradient_closed_form(const AttentionRecord& record, std::size_t length,
                                   const ModelParams& params) {
  const auto& d = params.dims;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d.att_dim));
  const double inv_k = 1.0 / static_cast<double>(d.num_heads);

  GradientField field{Matrix(length, d.embed_dim)};
  for (std::size_t i = 0; i < d.num_heads; ++i) {
    const auto& head = params.heads[i];
    const auto& hr = record.heads[i];
    const Vector value_dir = transpose_matvec(head.value, head.readout);  // W_v^T W_l^T
    const Vector key_dir = transpose_matvec(head.key, hr.query);          // W_k^T q
    const double readout_mean = dot(head.readout, hr.v_tilde);
    for (std::size_t t = 0; t < length; ++t) {
      const double alpha = hr.alpha[t];
      const double centered = dot(head.readout, hr.values.row(t)) - readout_mean;
      auto row = field.grads.row(t);
      axpy(inv_k * alpha, value_dir, row);
      axpy(inv_k * alpha * inv_scale * centered, key_dir, row);
    }
  }
  return field;
}

GradientField gradient_closed_form(const Document& doc, const ModelParams& params) {
  const EmbeddedDocument embedded = embed(doc, params);
  return gradient_closed_form(forward_from_embeddings(embedded, params), embedded.length,
                              params);
}

GradientField finite_diff_gradient(const Document& doc, const ModelParams& params,
                                   double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite difference step must be > 0");
  EmbeddedDocument probe = embed(doc, params);
  const std::size_t len = probe.length;
  const std::size_t de = params.dims.embed_dim;
  GradientField field{Matrix(len, de)};
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < de; ++c) {
      double& slot = probe.rows(t, c);
      const double saved = slot;
      slot = saved + step;
      const double up = forward_from_embeddings(probe, params).output;
      slot = saved - step;
      const double down = forward_from_embeddings(probe, params).output;
      slot = saved;
      field.grads(t, c) = (up - down) / (2.0 * step);
    }
  }
  return field;
}

namespace {

template <typename RowFn>
Explanation per_row(const GradientField& field, Method method, RowFn fn) {
  Explanation out{method, Vector(field.grads.rows()), std::nullopt};
  for (std::size_t t = 0; t < field.grads.rows(); ++t) out.weights[t] = fn(field.grads.row(t));
  return out;
}

}  // namespace

Explanation g_avg(const GradientField& field) {
  return per_row(field, Method::kGradAvg, [](std::span<const double> row) {
    double acc = 0.0;
    for (double x : row) acc += x;
    return row.empty() ? 0.0 : acc / static_cast<double>(row.size());
  });
}

Explanation g_l1(const GradientField& field) {
  return per_row(field, Method::kGradL1, [](std::span<const double> row) {
    double acc = 0.0;
    for (double x : row) acc += std::abs(x);
    return acc;
  });
}

Explanation g_l2(const GradientField& field) {
  return per_row(field, Method::kGradL2, [](std::span<const double> row) { return norm2(row); });
}

Explanation g_times_input(const GradientField& field, const EmbeddedDocument& embedded) {
  if (embedded.rows.cols() != field.grads.cols() || embedded.rows.rows() < field.grads.rows()) {
    throw std::invalid_argument("g_times_input: gradient and embedding shapes disagree");
  }
  Explanation out{Method::kGradTimesInput, Vector(field.grads.rows()), std::nullopt};
  for (std::size_t t = 0; t < field.grads.rows(); ++t) {
    out.weights[t] = dot(field.grads.row(t), embedded.rows.row(t));
  }
  return out;
}

Explanation g_times_word(const GradientField& field, const Document& doc,
                         const ModelParams& params) {
  if (params.dims.embed_dim != field.grads.cols() || doc.size() < field.grads.rows()) {
    throw std::invalid_argument("g_times_word: gradient and document shapes disagree");
  }
  Explanation out{Method::kGradTimesInput, Vector(field.grads.rows()), std::nullopt};
  for (std::size_t t = 0; t < field.grads.rows(); ++t) {
    out.weights[t] = dot(field.grads.row(t), params.embeddings.row(doc[t]));
  }
  return out;
}

}  // namespace xattn
