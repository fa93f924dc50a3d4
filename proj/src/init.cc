#include "xattn/init.h"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace xattn {
namespace {

Matrix gaussian_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
  Matrix m(rows, cols);
  for (double& x : m.data()) x = dist(rng);
  return m;
}

Vector gaussian_vector(std::mt19937_64& rng, std::size_t len, std::size_t fan_in) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  Vector v(len);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

ModelParams random_params(const ModelDims& dims, std::uint64_t seed) {
  if (dims.embed_dim % 2 != 0) throw std::invalid_argument("embedding dimension must be even");
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.dims = dims;
  p.embeddings = gaussian_matrix(rng, dims.vocab_size, dims.embed_dim);
  p.unk_embedding = gaussian_vector(rng, dims.embed_dim, dims.embed_dim);
  p.cls_embedding = gaussian_vector(rng, dims.embed_dim, dims.embed_dim);
  p.heads.reserve(dims.num_heads);
  for (std::size_t i = 0; i < dims.num_heads; ++i) {
    AttentionHead h;
    h.key = gaussian_matrix(rng, dims.att_dim, dims.embed_dim);
    h.query = gaussian_matrix(rng, dims.att_dim, dims.embed_dim);
    h.value = gaussian_matrix(rng, dims.out_dim, dims.embed_dim);
    h.readout = gaussian_vector(rng, dims.out_dim, dims.out_dim);
    p.heads.push_back(std::move(h));
  }
  p.validate();
  return p;
}

std::vector<TokenId> random_tokens(std::mt19937_64& rng, std::size_t vocab_size,
                                   std::size_t length, bool distinct) {
  std::vector<TokenId> out(length);
  if (!distinct) {
    std::uniform_int_distribution<std::size_t> pick(0, vocab_size - 1);
    for (auto& id : out) id = static_cast<TokenId>(pick(rng));
    return out;
  }
  if (length > vocab_size) throw std::invalid_argument("not enough distinct tokens");
  std::vector<TokenId> pool(vocab_size);
  std::iota(pool.begin(), pool.end(), TokenId{0});
  for (std::size_t k = 0; k < length; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, vocab_size - 1);
    std::swap(pool[k], pool[pick(rng)]);
    out[k] = pool[k];
  }
  return out;
}

}  // namespace xattn
