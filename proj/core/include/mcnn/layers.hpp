#pragma once

#include <cstddef>
#include <vector>

#include "mcnn/rng.hpp"
#include "mcnn/tensor.hpp"

namespace mcnn {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

// Weight matrix initialized uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)).
Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng);

/// Token embedding. Row kPadId stays all-zero and receives no gradient.
struct EmbeddingTable {
    std::size_t vocab_size = 0;
    std::size_t dim = 0;
    Tensor weights;  // [vocab_size x dim]

    static EmbeddingTable create(std::size_t vocab_size, std::size_t dim, Rng& rng);
};

Tensor embed(const std::vector<int>& ids, const EmbeddingTable& table);

// Valid (no padding) cross-correlation along the length axis.
// kernels has shape [k x dim x filters], bias [1 x filters].
Tensor conv1d_valid(const Tensor& x, const Tensor& kernels, const Tensor& bias);

struct GruCell {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Tensor wz, uz, bz;  // update gate
    Tensor wr, ur, br;  // reset gate
    Tensor wh, uh, bh;  // candidate state

    static GruCell create(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
};

// z = s(Wz x + Uz h + bz); r = s(Wr x + Ur h + br)
// h~ = tanh(Wh x + Uh (r*h) + bh); h' = (1-z)*h + z*h~
Tensor gru_step(const GruCell& cell, const Tensor& x_t, const Tensor& h_prev);

// Concatenation of the final forward and backward states. Padding positions
// (mask false) are skipped; state carries through unchanged.
Tensor bigru_encode(const Tensor& xs, const std::vector<bool>& mask,
                    const GruCell& fwd, const GruCell& bwd);

// Sinusoidal position table, constant (no gradient).
Tensor positional_encoding(std::size_t len, std::size_t dim);

struct AttentionParams {
    std::size_t dim = 0;
    std::size_t heads = 0;
    Tensor wq, wk, wv, wo;  // each [dim x dim]

    static AttentionParams create(std::size_t dim, std::size_t heads, Rng& rng);
};

Tensor multi_head_self_attention(const Tensor& x, const AttentionParams& p,
                                 const std::vector<bool>& mask);

struct LayerNormParams {
    Tensor gain, bias;  // [1 x dim]

    static LayerNormParams create(std::size_t dim);
};

// Row-wise (x - mean) / sqrt(var + eps), no affine part.
Tensor layer_norm_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

struct FeedForwardParams {
    Tensor w1, b1, w2, b2;  // dense -> relu -> dense

    static FeedForwardParams create(std::size_t dim, std::size_t ff_dim, Rng& rng);
};

struct TransformerBlock {
    AttentionParams attn;
    LayerNormParams ln1, ln2;
    FeedForwardParams ff;

    static TransformerBlock create(std::size_t dim, std::size_t heads,
                                   std::size_t ff_dim, Rng& rng);
};

// Post-norm residual order: ln(x + attn(x)), then ln(. + ff(.)).
Tensor transformer_block(const Tensor& x, const TransformerBlock& blk,
                         const std::vector<bool>& mask);

// Mean over valid rows only.
Tensor pool_mean(const Tensor& x, const std::vector<bool>& mask);

struct Dense {
    Tensor w, b;  // [in x out], [1 x out]

    static Dense create(std::size_t in, std::size_t out, Rng& rng);
};

Tensor dense(const Tensor& x, const Dense& d);

}  // namespace mcnn
