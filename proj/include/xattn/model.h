// Single-layer multi-head attention classifier.
//
// Every document slot t in [1, T_max] carries an embedding e_t: the word
// embedding plus the sinusoidal positional encoding for real tokens, and the
// UNK embedding h plus the positional encoding for padding slots. A
// dedicated [CLS] vector at position 0 provides the query of each head; it is
// never a key or a value, so attention normalizes over exactly T_max slots.
// Each head outputs W_l * sum_t alpha_t v_t and the model averages the heads.

#ifndef XATTN_MODEL_H_
#define XATTN_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xattn/linalg.h"

namespace xattn {

using TokenId = std::uint32_t;

struct ModelDims {
  std::size_t vocab_size = 0;  // D
  std::size_t max_len = 0;     // T_max
  std::size_t embed_dim = 0;   // d_e, must be even
  std::size_t att_dim = 0;     // d_att
  std::size_t out_dim = 0;     // d_out
  std::size_t num_heads = 0;   // K

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct AttentionHead {
  Matrix key;      // d_att x d_e
  Matrix query;    // d_att x d_e
  Matrix value;    // d_out x d_e
  Vector readout;  // d_out, the 1 x d_out output row

  friend bool operator==(const AttentionHead&, const AttentionHead&) = default;
};

// Learned parameters. Biases are identically zero and therefore absent.
struct ModelParams {
  ModelDims dims;
  Matrix embeddings;     // D x d_e, row j embeds token j
  Vector unk_embedding;  // h, used for padding and removed words
  Vector cls_embedding;
  std::vector<AttentionHead> heads;

  // Throws std::invalid_argument on any inconsistent shape or non-finite entry.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// An ordered token sequence plus its local dictionary (distinct ids in order
// of first occurrence).
class Document {
 public:
  Document() = default;
  explicit Document(std::vector<TokenId> ids);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<TokenId>& ids() const { return ids_; }
  TokenId operator[](std::size_t t) const { return ids_[t]; }

  const std::vector<TokenId>& dictionary() const { return dictionary_; }
  std::size_t num_words() const { return dictionary_.size(); }
  // Index into dictionary() of the word at position t.
  std::size_t word_of(std::size_t t) const { return word_index_[t]; }

  // Drops everything past the first max_len tokens.
  Document truncated(std::size_t max_len) const;

 private:
  std::vector<TokenId> ids_;
  std::vector<TokenId> dictionary_;
  std::vector<std::size_t> word_index_;
};

// W_p(t) with 1-based pair index i in [1, d_e/2]:
//   W_p(t)[2i-1] = sin(t / T_max^(2i/d_e)), W_p(t)[2i] = cos(...)
// stored 0-based. Throws std::invalid_argument for odd d_e.
Vector positional_encoding(std::size_t t, std::size_t embed_dim, std::size_t max_len);

struct EmbeddedDocument {
  Matrix rows;             // T_max x d_e; row t-1 holds e_t
  std::size_t length = 0;  // T after truncation
};

EmbeddedDocument embed(const Document& doc, const ModelParams& params);

// Embedding rows h + W_p(t) for every slot, i.e. a fully removed document.
Matrix unk_rows(const ModelParams& params);

struct HeadRecord {
  Vector query;    // q from the [CLS] slot
  Vector logits;   // q^T k_t / sqrt(d_att), t in [T_max]
  Vector alpha;    // softmax(logits)
  Matrix values;   // T_max x d_out
  Vector v_tilde;  // sum_t alpha_t v_t
  double output = 0.0;
};

struct AttentionRecord {
  std::vector<HeadRecord> heads;
  double output = 0.0;  // f(x)
};

// q = W_q (cls + W_p(0)) for one head.
Vector cls_query(const ModelParams& params, const AttentionHead& head);

AttentionRecord forward_from_embeddings(const EmbeddedDocument& embedded,
                                        const ModelParams& params);
AttentionRecord forward(const Document& doc, const ModelParams& params);

// Positive-class decision rule.
inline bool classify_positive(double output) { return output > 0.0; }

}  // namespace xattn

#endif  // XATTN_MODEL_H_
