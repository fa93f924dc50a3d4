#ifndef XATTN_TESTS_SUPPORT_H_
#define XATTN_TESTS_SUPPORT_H_

#include <cmath>
#include <random>
#include <vector>

#include "xattn/init.h"
#include "xattn/model.h"

namespace xattn::testing {

inline ModelDims small_dims(std::size_t max_len = 16) { return ModelDims{40, max_len, 8, 4, 4, 3}; }

inline Document random_doc(std::uint64_t seed, std::size_t vocab, std::size_t length,
                           bool distinct = false) {
  std::mt19937_64 rng(seed);
  return Document(random_tokens(rng, vocab, length, distinct));
}

inline void zero(Matrix& m) {
  for (double& x : m.data()) x = 0.0;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// f(X_S) by a full forward pass over the embedding matrix with every
// occurrence of the removed words replaced by h.
inline double brute_force_removed(const Document& doc, const ModelParams& params,
                                  std::uint64_t removed_mask) {
  EmbeddedDocument e = embed(doc, params);
  for (std::size_t t = 0; t < e.length; ++t) {
    if ((removed_mask >> doc.word_of(t)) & 1U) {
      const Vector p = positional_encoding(t + 1, params.dims.embed_dim, params.dims.max_len);
      for (std::size_t c = 0; c < params.dims.embed_dim; ++c) {
        e.rows(t, c) = params.unk_embedding[c] + p[c];
      }
    }
  }
  return forward_from_embeddings(e, params).output;
}

}  // namespace xattn::testing

#endif  // XATTN_TESTS_SUPPORT_H_
