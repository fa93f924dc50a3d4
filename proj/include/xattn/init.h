#ifndef XATTN_INIT_H_
#define XATTN_INIT_H_

#include <cstdint>
#include <random>
#include <vector>

#include "xattn/model.h"

namespace xattn {

// I.i.d. zero-mean Gaussian weights with standard deviation 1/sqrt(fan_in),
// fan_in being the column count of each stored matrix (d_e for W_e, h, the
// [CLS] vector, W_k, W_q, W_v; d_out for W_l). Deterministic per seed.
ModelParams random_params(const ModelDims& dims, std::uint64_t seed);

// `length` token ids drawn uniformly from [0, vocab_size); distinct when
// `distinct` is set (requires length <= vocab_size).
std::vector<TokenId> random_tokens(std::mt19937_64& rng, std::size_t vocab_size,
                                   std::size_t length, bool distinct);

}  // namespace xattn

#endif  // XATTN_INIT_H_
