#include "mcnn/layers.hpp"

#include <cmath>
#include <string>

namespace mcnn {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (auto d : shape) p *= d;
    return p;
}

void ensure_grad(Tensor::Node& n) {
    if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
}

Tensor make_op(std::vector<std::size_t> shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(Tensor::Node&)> backprop) {
    auto n = std::make_shared<Tensor::Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    bool needs = false;
    for (auto& p : parents) {
        n->parents.push_back(p.node_);
        needs = needs || p.node_->requires_grad || p.node_->backprop;
    }
    if (needs) {
        n->requires_grad = true;
        n->backprop = std::move(backprop);
    }
    return Tensor::wrap(std::move(n));
}

}  // namespace

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> data(product(shape));
    for (auto& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from(std::move(data), std::move(shape), /*requires_grad=*/true);
}

EmbeddingTable EmbeddingTable::create(std::size_t vocab_size, std::size_t dim, Rng& rng) {
    EmbeddingTable t;
    t.vocab_size = vocab_size;
    t.dim = dim;
    t.weights = uniform_init({vocab_size, dim}, dim, rng);
    for (std::size_t j = 0; j < dim; ++j)
        t.weights.values()[static_cast<std::size_t>(kPadId) * dim + j] = 0.0;
    return t;
}

Tensor embed(const std::vector<int>& ids, const EmbeddingTable& table) {
    const std::size_t len = ids.size(), dim = table.dim;
    for (std::size_t i = 0; i < len; ++i)
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.vocab_size)
            throw VocabError("token id " + std::to_string(ids[i]) +
                             " out of range at position " + std::to_string(i));
    std::vector<double> out(len * dim);
    for (std::size_t i = 0; i < len; ++i) {
        const std::size_t r = static_cast<std::size_t>(ids[i]);
        for (std::size_t j = 0; j < dim; ++j)
            out[i * dim + j] = table.weights.values()[r * dim + j];
    }
    return make_op({len, dim}, std::move(out), {table.weights},
                   [ids, dim](Tensor::Node& node) {
                       auto& w = *node.parents[0];
                       ensure_grad(w);
                       for (std::size_t i = 0; i < ids.size(); ++i) {
                           if (ids[i] == kPadId) continue;  // padding row is frozen
                           const std::size_t r = static_cast<std::size_t>(ids[i]);
                           for (std::size_t j = 0; j < dim; ++j)
                               w.grad[r * dim + j] += node.grad[i * dim + j];
                       }
                   });
}

Tensor conv1d_valid(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
    if (kernels.shape().size() != 3)
        throw DimensionError("conv1d_valid: kernels must have shape [k x dim x filters]");
    const std::size_t len = x.rows(), dim = x.cols();
    const std::size_t k = kernels.shape()[0];
    const std::size_t kdim = kernels.shape()[1];
    const std::size_t filters = kernels.shape()[2];
    if (kdim != dim)
        throw DimensionError("conv1d_valid: kernel dim " + std::to_string(kdim) +
                             " vs input dim " + std::to_string(dim));
    if (len < k)
        throw SequenceTooShortError("conv1d_valid: sequence length " +
                                    std::to_string(len) + " shorter than kernel " +
                                    std::to_string(k));
    const std::size_t out_len = len - k + 1;
    std::vector<double> out(out_len * filters);
    const auto& xv = x.values();
    const auto& kv = kernels.values();
    for (std::size_t t = 0; t < out_len; ++t)
        for (std::size_t f = 0; f < filters; ++f) {
            double s = bias.values()[f];
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < dim; ++j)
                    s += xv[(t + i) * dim + j] * kv[(i * dim + j) * filters + f];
            out[t * filters + f] = s;
        }
    return make_op({out_len, filters}, std::move(out), {x, kernels, bias},
                   [out_len, filters, k, dim](Tensor::Node& node) {
                       auto& px = *node.parents[0];
                       auto& pk = *node.parents[1];
                       auto& pb = *node.parents[2];
                       ensure_grad(px);
                       ensure_grad(pk);
                       ensure_grad(pb);
                       for (std::size_t t = 0; t < out_len; ++t)
                           for (std::size_t f = 0; f < filters; ++f) {
                               const double g = node.grad[t * filters + f];
                               if (g == 0.0) continue;
                               pb.grad[f] += g;
                               for (std::size_t i = 0; i < k; ++i)
                                   for (std::size_t j = 0; j < dim; ++j) {
                                       px.grad[(t + i) * dim + j] +=
                                           g * pk.data[(i * dim + j) * filters + f];
                                       pk.grad[(i * dim + j) * filters + f] +=
                                           g * px.data[(t + i) * dim + j];
                                   }
                           }
                   });
}

GruCell GruCell::create(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    GruCell c;
    c.input_dim = input_dim;
    c.hidden_dim = hidden_dim;
    c.wz = uniform_init({input_dim, hidden_dim}, input_dim, rng);
    c.uz = uniform_init({hidden_dim, hidden_dim}, hidden_dim, rng);
    c.bz = Tensor::zeros({1, hidden_dim}, true);
    c.wr = uniform_init({input_dim, hidden_dim}, input_dim, rng);
    c.ur = uniform_init({hidden_dim, hidden_dim}, hidden_dim, rng);
    c.br = Tensor::zeros({1, hidden_dim}, true);
    c.wh = uniform_init({input_dim, hidden_dim}, input_dim, rng);
    c.uh = uniform_init({hidden_dim, hidden_dim}, hidden_dim, rng);
    c.bh = Tensor::zeros({1, hidden_dim}, true);
    return c;
}

Tensor gru_step(const GruCell& cell, const Tensor& x_t, const Tensor& h_prev) {
    if (x_t.cols() != cell.input_dim || h_prev.cols() != cell.hidden_dim)
        throw ContractError("gru_step: input " + std::to_string(x_t.cols()) +
                            "/state " + std::to_string(h_prev.cols()) +
                            " do not match cell " + std::to_string(cell.input_dim) +
                            "/" + std::to_string(cell.hidden_dim));
    Tensor z = sigmoid(add(add(matmul(x_t, cell.wz), matmul(h_prev, cell.uz)), cell.bz));
    Tensor r = sigmoid(add(add(matmul(x_t, cell.wr), matmul(h_prev, cell.ur)), cell.br));
    Tensor cand = tanh(add(add(matmul(x_t, cell.wh),
                               matmul(mul(r, h_prev), cell.uh)),
                           cell.bh));
    return add(sub(h_prev, mul(z, h_prev)), mul(z, cand));
}

Tensor bigru_encode(const Tensor& xs, const std::vector<bool>& mask,
                    const GruCell& fwd, const GruCell& bwd) {
    const std::size_t len = xs.rows();
    if (mask.size() != len)
        throw ContractError("bigru_encode: mask length mismatch");
    bool any = false;
    for (bool m : mask) any = any || m;
    if (!any) throw EmptySequenceError("bigru_encode: all positions are padding");

    Tensor hf = Tensor::zeros({1, fwd.hidden_dim});
    for (std::size_t t = 0; t < len; ++t)
        if (mask[t]) hf = gru_step(fwd, row(xs, t), hf);

    Tensor hb = Tensor::zeros({1, bwd.hidden_dim});
    for (std::size_t t = len; t-- > 0;)
        if (mask[t]) hb = gru_step(bwd, row(xs, t), hb);

    return concat_cols({hf, hb});
}

Tensor positional_encoding(std::size_t len, std::size_t dim) {
    if (dim % 2 != 0)
        throw ConfigError("positional_encoding: dim must be even, got " +
                          std::to_string(dim));
    std::vector<double> out(len * dim);
    for (std::size_t p = 0; p < len; ++p)
        for (std::size_t i = 0; i < dim / 2; ++i) {
            const double angle =
                static_cast<double>(p) /
                std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(dim));
            out[p * dim + 2 * i] = std::sin(angle);
            out[p * dim + 2 * i + 1] = std::cos(angle);
        }
    return Tensor::from(std::move(out), {len, dim});
}

AttentionParams AttentionParams::create(std::size_t dim, std::size_t heads, Rng& rng) {
    if (heads == 0 || dim % heads != 0)
        throw ConfigError("attention: dim " + std::to_string(dim) +
                          " not divisible by heads " + std::to_string(heads));
    AttentionParams p;
    p.dim = dim;
    p.heads = heads;
    p.wq = uniform_init({dim, dim}, dim, rng);
    p.wk = uniform_init({dim, dim}, dim, rng);
    p.wv = uniform_init({dim, dim}, dim, rng);
    p.wo = uniform_init({dim, dim}, dim, rng);
    return p;
}

Tensor multi_head_self_attention(const Tensor& x, const AttentionParams& p,
                                 const std::vector<bool>& mask) {
    if (x.cols() != p.dim)
        throw DimensionError("attention: input dim " + std::to_string(x.cols()) +
                             " vs params dim " + std::to_string(p.dim));
    if (mask.size() != x.rows())
        throw ContractError("attention: mask length mismatch");
    const std::size_t head_dim = p.dim / p.heads;
    Tensor q = matmul(x, p.wq);
    Tensor k = matmul(x, p.wk);
    Tensor v = matmul(x, p.wv);
    std::vector<Tensor> heads_out;
    heads_out.reserve(p.heads);
    for (std::size_t h = 0; h < p.heads; ++h) {
        Tensor qh = col_slice(q, h * head_dim, head_dim);
        Tensor kh = col_slice(k, h * head_dim, head_dim);
        Tensor vh = col_slice(v, h * head_dim, head_dim);
        Tensor scores = scale(matmul(qh, transpose(kh)),
                              1.0 / std::sqrt(static_cast<double>(head_dim)));
        Tensor weights = softmax_rows(scores, mask);
        heads_out.push_back(matmul(weights, vh));
    }
    return matmul(concat_cols(heads_out), p.wo);
}

LayerNormParams LayerNormParams::create(std::size_t dim) {
    LayerNormParams p;
    p.gain = Tensor::from(std::vector<double>(dim, 1.0), {1, dim}, true);
    p.bias = Tensor::zeros({1, dim}, true);
    return p;
}

Tensor layer_norm_rows(const Tensor& x) {
    constexpr double kEps = 1e-5;
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * c);
    std::vector<double> inv_sigma(r);
    for (std::size_t i = 0; i < r; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += x.values()[i * c + j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = x.values()[i * c + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        inv_sigma[i] = 1.0 / std::sqrt(var + kEps);
        for (std::size_t j = 0; j < c; ++j)
            out[i * c + j] = (x.values()[i * c + j] - mean) * inv_sigma[i];
    }
    auto xhat = out;
    return make_op({r, c}, std::move(out), {x},
                   [xhat = std::move(xhat), inv_sigma = std::move(inv_sigma), r,
                    c](Tensor::Node& node) {
                       auto& px = *node.parents[0];
                       ensure_grad(px);
                       for (std::size_t i = 0; i < r; ++i) {
                           double mean_dy = 0.0, mean_dy_xhat = 0.0;
                           for (std::size_t j = 0; j < c; ++j) {
                               mean_dy += node.grad[i * c + j];
                               mean_dy_xhat += node.grad[i * c + j] * xhat[i * c + j];
                           }
                           mean_dy /= static_cast<double>(c);
                           mean_dy_xhat /= static_cast<double>(c);
                           for (std::size_t j = 0; j < c; ++j)
                               px.grad[i * c + j] +=
                                   inv_sigma[i] * (node.grad[i * c + j] - mean_dy -
                                                   xhat[i * c + j] * mean_dy_xhat);
                       }
                   });
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
    return add(mul(layer_norm_rows(x), p.gain), p.bias);
}

FeedForwardParams FeedForwardParams::create(std::size_t dim, std::size_t ff_dim,
                                            Rng& rng) {
    FeedForwardParams p;
    p.w1 = uniform_init({dim, ff_dim}, dim, rng);
    p.b1 = Tensor::zeros({1, ff_dim}, true);
    p.w2 = uniform_init({ff_dim, dim}, ff_dim, rng);
    p.b2 = Tensor::zeros({1, dim}, true);
    return p;
}

TransformerBlock TransformerBlock::create(std::size_t dim, std::size_t heads,
                                          std::size_t ff_dim, Rng& rng) {
    TransformerBlock blk;
    blk.attn = AttentionParams::create(dim, heads, rng);
    blk.ln1 = LayerNormParams::create(dim);
    blk.ln2 = LayerNormParams::create(dim);
    blk.ff = FeedForwardParams::create(dim, ff_dim, rng);
    return blk;
}

Tensor transformer_block(const Tensor& x, const TransformerBlock& blk,
                         const std::vector<bool>& mask) {
    Tensor a = layer_norm(add(x, multi_head_self_attention(x, blk.attn, mask)), blk.ln1);
    Tensor ff = add(matmul(relu(add(matmul(a, blk.ff.w1), blk.ff.b1)), blk.ff.w2),
                    blk.ff.b2);
    return layer_norm(add(a, ff), blk.ln2);
}

Tensor pool_mean(const Tensor& x, const std::vector<bool>& mask) {
    const std::size_t len = x.rows(), dim = x.cols();
    if (mask.size() != len) throw ContractError("pool_mean: mask length mismatch");
    std::size_t count = 0;
    for (bool m : mask) count += m ? 1 : 0;
    if (count == 0) throw EmptySequenceError("pool_mean: no valid positions");
    std::vector<double> out(dim, 0.0);
    for (std::size_t i = 0; i < len; ++i)
        if (mask[i])
            for (std::size_t j = 0; j < dim; ++j) out[j] += x.values()[i * dim + j];
    for (auto& v : out) v /= static_cast<double>(count);
    return make_op({1, dim}, std::move(out), {x},
                   [mask, count, len, dim](Tensor::Node& node) {
                       auto& px = *node.parents[0];
                       ensure_grad(px);
                       const double inv = 1.0 / static_cast<double>(count);
                       for (std::size_t i = 0; i < len; ++i)
                           if (mask[i])
                               for (std::size_t j = 0; j < dim; ++j)
                                   px.grad[i * dim + j] += node.grad[j] * inv;
                   });
}

Dense Dense::create(std::size_t in, std::size_t out, Rng& rng) {
    Dense d;
    d.w = uniform_init({in, out}, in, rng);
    d.b = Tensor::zeros({1, out}, true);
    return d;
}

Tensor dense(const Tensor& x, const Dense& d) { return add(matmul(x, d.w), d.b); }

}  // namespace mcnn
