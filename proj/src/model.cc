#include "xattn/model.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace xattn {
namespace {

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                                "x" + std::to_string(m.cols()));
  }
  if (!m.all_finite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

void check_vector(const Vector& v, std::size_t len, const char* what) {
  if (v.size() != len) {
    throw std::invalid_argument(std::string(what) + ": expected length " +
                                std::to_string(len) + ", got " + std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

}  // namespace

void ModelParams::validate() const {
  const auto& d = dims;
  if (d.vocab_size == 0 || d.max_len == 0 || d.embed_dim == 0 || d.att_dim == 0 ||
      d.out_dim == 0 || d.num_heads == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (d.embed_dim % 2 != 0) throw std::invalid_argument("embedding dimension must be even");
  check_shape(embeddings, d.vocab_size, d.embed_dim, "embeddings");
  check_vector(unk_embedding, d.embed_dim, "unk_embedding");
  check_vector(cls_embedding, d.embed_dim, "cls_embedding");
  if (heads.size() != d.num_heads) {
    throw std::invalid_argument("expected " + std::to_string(d.num_heads) + " heads, got " +
                                std::to_string(heads.size()));
  }
  for (const auto& h : heads) {
    check_shape(h.key, d.att_dim, d.embed_dim, "W_k");
    check_shape(h.query, d.att_dim, d.embed_dim, "W_q");
    check_shape(h.value, d.out_dim, d.embed_dim, "W_v");
    check_vector(h.readout, d.out_dim, "W_l");
  }
}

Document::Document(std::vector<TokenId> ids) : ids_(std::move(ids)) {
  std::unordered_map<TokenId, std::size_t> seen;
  word_index_.reserve(ids_.size());
  for (TokenId id : ids_) {
    auto [it, inserted] = seen.emplace(id, dictionary_.size());
    if (inserted) dictionary_.push_back(id);
    word_index_.push_back(it->second);
  }
}

Document Document::truncated(std::size_t max_len) const {
  if (ids_.size() <= max_len) return *this;
  return Document(std::vector<TokenId>(ids_.begin(), ids_.begin() + max_len));
}

Vector positional_encoding(std::size_t t, std::size_t embed_dim, std::size_t max_len) {
  if (embed_dim % 2 != 0) throw std::invalid_argument("positional encoding needs even d_e");
  Vector out(embed_dim);
  const double td = static_cast<double>(t);
  const double base = static_cast<double>(max_len);
  for (std::size_t i = 1; i <= embed_dim / 2; ++i) {
    const double angle = td / std::pow(base, 2.0 * static_cast<double>(i) / embed_dim);
    out[2 * i - 2] = std::sin(angle);
    out[2 * i - 1] = std::cos(angle);
  }
  return out;
}

EmbeddedDocument embed(const Document& doc, const ModelParams& params) {
  const auto& d = params.dims;
  const std::size_t len = std::min(doc.size(), d.max_len);
  EmbeddedDocument out{Matrix(d.max_len, d.embed_dim), len};
  for (std::size_t t = 0; t < d.max_len; ++t) {
    auto row = out.rows.row(t);
    const Vector pos = positional_encoding(t + 1, d.embed_dim, d.max_len);
    std::span<const double> word;
    if (t < len) {
      const TokenId id = doc[t];
      if (id >= d.vocab_size) {
        throw std::invalid_argument("token id " + std::to_string(id) +
                                    " out of vocabulary of size " + std::to_string(d.vocab_size));
      }
      word = params.embeddings.row(id);
    } else {
      word = params.unk_embedding;
    }
    for (std::size_t c = 0; c < d.embed_dim; ++c) row[c] = word[c] + pos[c];
  }
  return out;
}

Matrix unk_rows(const ModelParams& params) {
  const auto& d = params.dims;
  Matrix out(d.max_len, d.embed_dim);
  for (std::size_t t = 0; t < d.max_len; ++t) {
    const Vector pos = positional_encoding(t + 1, d.embed_dim, d.max_len);
    auto row = out.row(t);
    for (std::size_t c = 0; c < d.embed_dim; ++c) row[c] = params.unk_embedding[c] + pos[c];
  }
  return out;
}

Vector cls_query(const ModelParams& params, const AttentionHead& head) {
  Vector x = positional_encoding(0, params.dims.embed_dim, params.dims.max_len);
  axpy(1.0, params.cls_embedding, x);
  return matvec(head.query, x);
}

AttentionRecord forward_from_embeddings(const EmbeddedDocument& embedded,
                                        const ModelParams& params) {
  const auto& d = params.dims;
  const Matrix& e = embedded.rows;
  if (e.rows() != d.max_len || e.cols() != d.embed_dim) {
    throw std::invalid_argument("embedded document has wrong shape");
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d.att_dim));

  AttentionRecord record;
  record.heads.reserve(d.num_heads);
  double total = 0.0;
  for (const auto& head : params.heads) {
    HeadRecord hr;
    hr.query = cls_query(params, head);
    hr.logits.resize(d.max_len);
    hr.values = Matrix(d.max_len, d.out_dim);
    for (std::size_t t = 0; t < d.max_len; ++t) {
      const Vector key = matvec(head.key, e.row(t));
      hr.logits[t] = dot(hr.query, key) * inv_scale;
      const Vector value = matvec(head.value, e.row(t));
      std::copy(value.begin(), value.end(), hr.values.row(t).begin());
    }
    hr.alpha = softmax(hr.logits);
    hr.v_tilde.assign(d.out_dim, 0.0);
    for (std::size_t t = 0; t < d.max_len; ++t) axpy(hr.alpha[t], hr.values.row(t), hr.v_tilde);
    hr.output = dot(head.readout, hr.v_tilde);
    total += hr.output;
    record.heads.push_back(std::move(hr));
  }
  record.output = total / static_cast<double>(d.num_heads);
  return record;
}

AttentionRecord forward(const Document& doc, const ModelParams& params) {
  return forward_from_embeddings(embed(doc, params), params);
}

}  // namespace xattn
