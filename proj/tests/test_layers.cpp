#include <cmath>

#include "doctest.h"
#include "mcnn/layers.hpp"
#include "mcnn/rng.hpp"
#include "support/gradcheck.hpp"

using namespace mcnn;
using mcnn::testing::max_grad_rel_error;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, bool grad = true) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> data(n);
    for (auto& v : data) v = rng.uniform(-2.0, 2.0);
    return Tensor::from(std::move(data), std::move(shape), grad);
}

std::vector<Tensor> gru_params(GruCell& c) {
    return {c.wz, c.uz, c.bz, c.wr, c.ur, c.br, c.wh, c.uh, c.bh};
}

}  // namespace

TEST_CASE("embedding lookup, padding rows and touched-row gradients") {
    Rng rng(1);
    auto table = EmbeddingTable::create(5, 3, rng);
    Tensor pads = embed({kPadId, kPadId}, table);
    for (double v : pads.values()) CHECK(v == 0.0);

    Tensor one = embed({3}, table);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(one.values()[j] == table.weights.values()[3 * 3 + j]);

    CHECK_THROWS_WITH_AS(embed({9}, table), doctest::Contains("position 0"), VocabError);

    std::vector<int> ids{2, 4, kPadId};
    CHECK(max_grad_rel_error([&] { return sum(mul(embed(ids, table), embed(ids, table))); },
                             {table.weights}) < 1e-4);
    backward(sum(embed(ids, table)));
    auto& g = table.weights.grad();
    for (std::size_t r = 0; r < 5; ++r) {
        const bool touched = (r == 2 || r == 4);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK((g[r * 3 + j] != 0.0) == touched);
    }
}

TEST_CASE("conv1d sliding-window oracle and zero kernel") {
    Tensor x = Tensor::from({1, 2, 3, 4}, {4, 1});
    Tensor k = Tensor::from({1, 0, -1}, {3, 1, 1});
    Tensor b = Tensor::zeros({1, 1});
    Tensor y = conv1d_valid(x, k, b);
    CHECK(y.shape() == std::vector<std::size_t>{2, 1});
    CHECK(y.values()[0] == doctest::Approx(-2.0));
    CHECK(y.values()[1] == doctest::Approx(-2.0));

    Tensor zk = Tensor::zeros({3, 1, 2});
    Tensor zb = Tensor::from({0.5, -1.5}, {1, 2});
    for (std::size_t t = 0; t < 2; ++t) {
        Tensor z = conv1d_valid(x, zk, zb);
        CHECK(z.at(t, 0) == 0.5);
        CHECK(z.at(t, 1) == -1.5);
    }
}

TEST_CASE("conv1d too-short error carries both lengths") {
    Tensor x = Tensor::from({1, 2}, {2, 1});
    Tensor k = Tensor::zeros({3, 1, 1});
    CHECK_THROWS_WITH_AS(conv1d_valid(x, k, Tensor::zeros({1, 1})),
                         doctest::Contains("length 2"), SequenceTooShortError);
}

TEST_CASE("conv1d gradient vs finite differences") {
    Rng rng(5);
    Tensor x = random_tensor({6, 2}, rng);
    Tensor k = random_tensor({3, 2, 2}, rng);
    Tensor b = random_tensor({1, 2}, rng);
    CHECK(max_grad_rel_error([&] { return sum(relu(conv1d_valid(x, k, b))); },
                             {x, k, b}) < 1e-4);
}

TEST_CASE("conv output length law for k in 3..5") {
    Rng rng(9);
    Tensor x = random_tensor({12, 2}, rng, false);
    for (std::size_t k : {3u, 4u, 5u}) {
        Tensor kern = Tensor::zeros({k, 2, 3});
        Tensor y = conv1d_valid(x, kern, Tensor::zeros({1, 3}));
        CHECK(y.rows() == 12 - k + 1);
    }
}

TEST_CASE("gru gates closed and open") {
    Rng rng(2);
    GruCell cell = GruCell::create(2, 3, rng);
    for (auto& t : gru_params(cell))
        for (auto& v : t.values()) v = 0.0;
    Tensor x = Tensor::from({0.5, -0.5}, {1, 2});
    Tensor h = Tensor::from({0.1, 0.2, 0.3}, {1, 3});

    for (std::size_t j = 0; j < 3; ++j) cell.bz.values()[j] = -1e6;  // z -> 0
    CHECK(gru_step(cell, x, h).values() == h.values());

    for (std::size_t j = 0; j < 3; ++j) cell.bz.values()[j] = 1e6;  // z -> 1
    Tensor out = gru_step(cell, x, h);
    // candidate is tanh(0) = 0 with all-zero weights
    for (double v : out.values()) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gru matches an independent scalar recurrence oracle") {
    Rng rng(13);
    const std::size_t in = 2, hid = 3, steps = 3;
    GruCell cell = GruCell::create(in, hid, rng);
    std::vector<Tensor> xs;
    for (std::size_t t = 0; t < steps; ++t) xs.push_back(random_tensor({1, in}, rng, false));

    // plain-double recurrence, written independently of the tensor ops
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> h(hid, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> z(hid), r(hid), cand(hid);
        for (std::size_t j = 0; j < hid; ++j) {
            double az = cell.bz.values()[j], ar = cell.br.values()[j];
            for (std::size_t i = 0; i < in; ++i) {
                az += xs[t].values()[i] * cell.wz.values()[i * hid + j];
                ar += xs[t].values()[i] * cell.wr.values()[i * hid + j];
            }
            for (std::size_t i = 0; i < hid; ++i) {
                az += h[i] * cell.uz.values()[i * hid + j];
                ar += h[i] * cell.ur.values()[i * hid + j];
            }
            z[j] = sig(az);
            r[j] = sig(ar);
        }
        for (std::size_t j = 0; j < hid; ++j) {
            double ah = cell.bh.values()[j];
            for (std::size_t i = 0; i < in; ++i)
                ah += xs[t].values()[i] * cell.wh.values()[i * hid + j];
            for (std::size_t i = 0; i < hid; ++i)
                ah += r[i] * h[i] * cell.uh.values()[i * hid + j];
            cand[j] = std::tanh(ah);
        }
        for (std::size_t j = 0; j < hid; ++j) h[j] = (1.0 - z[j]) * h[j] + z[j] * cand[j];
    }

    Tensor ht = Tensor::zeros({1, hid});
    for (std::size_t t = 0; t < steps; ++t) ht = gru_step(cell, xs[t], ht);
    for (std::size_t j = 0; j < hid; ++j)
        CHECK(ht.values()[j] == doctest::Approx(h[j]).epsilon(1e-12));
}

TEST_CASE("bigru single step, palindrome symmetry and recurrence oracle") {
    Rng rng(17);
    GruCell fwd = GruCell::create(2, 3, rng);
    GruCell bwd = GruCell::create(2, 3, rng);

    Tensor x1 = random_tensor({1, 2}, rng, false);
    Tensor enc1 = bigru_encode(x1, {true}, fwd, bwd);
    Tensor zf = Tensor::zeros({1, 3});
    Tensor sf = gru_step(fwd, x1, zf);
    Tensor sb = gru_step(bwd, x1, zf);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(enc1.values()[j] == doctest::Approx(sf.values()[j]));
        CHECK(enc1.values()[3 + j] == doctest::Approx(sb.values()[j]));
    }

    // palindromic input with shared cell: both halves equal
    Tensor pal = Tensor::from({1, 2, 3, 4, 1, 2}, {3, 2});
    Tensor enc = bigru_encode(pal, {true, true, true}, fwd, fwd);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(enc.values()[j] == doctest::Approx(enc.values()[3 + j]).epsilon(1e-12));

    // brute-force two-pass recurrence on len 4
    Tensor xs = random_tensor({4, 2}, rng, false);
    Tensor h = Tensor::zeros({1, 3});
    for (std::size_t t = 0; t < 4; ++t) h = gru_step(fwd, row(xs, t), h);
    Tensor hb = Tensor::zeros({1, 3});
    for (std::size_t t = 4; t-- > 0;) hb = gru_step(bwd, row(xs, t), hb);
    Tensor got = bigru_encode(xs, {true, true, true, true}, fwd, bwd);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(got.values()[j] == doctest::Approx(h.values()[j]).epsilon(1e-12));
        CHECK(got.values()[3 + j] == doctest::Approx(hb.values()[j]).epsilon(1e-12));
    }

    CHECK_THROWS_AS(bigru_encode(xs, {false, false, false, false}, fwd, bwd),
                    EmptySequenceError);
}

TEST_CASE("positional encoding values and range") {
    Tensor pe = positional_encoding(3, 4);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(pe.at(0, 2 * i) == doctest::Approx(0.0));
        CHECK(pe.at(0, 2 * i + 1) == doctest::Approx(1.0));
    }
    CHECK(pe.at(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
    for (double v : pe.values()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(positional_encoding(3, 5), ConfigError);
}

TEST_CASE("attention on a single position and identical positions") {
    Rng rng(23);
    auto p = AttentionParams::create(4, 2, rng);
    Tensor x1 = random_tensor({1, 4}, rng, false);
    Tensor y1 = multi_head_self_attention(x1, p, {true});
    // single position: weights are exactly 1, output is V then output-projected
    Tensor expect = matmul(matmul(x1, p.wv), p.wo);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(y1.values()[j] == doctest::Approx(expect.values()[j]).epsilon(1e-12));

    Tensor xr = random_tensor({1, 4}, rng, false);
    Tensor two = stack_rows({xr, xr});
    Tensor y2 = multi_head_self_attention(two, p, {true, true});
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(y2.at(0, j) == doctest::Approx(y2.at(1, j)).epsilon(1e-12));
}

TEST_CASE("attention matches a dense brute-force oracle") {
    Rng rng(29);
    auto p = AttentionParams::create(4, 2, rng);
    Tensor x = random_tensor({3, 4}, rng, false);
    Tensor got = multi_head_self_attention(x, p, {true, true, true});

    // direct re-implementation with plain loops
    const std::size_t len = 3, dim = 4, heads = 2, hd = dim / heads;
    auto project = [&](const Tensor& w) {
        std::vector<double> out(len * dim, 0.0);
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                for (std::size_t kk = 0; kk < dim; ++kk)
                    out[i * dim + j] += x.values()[i * dim + kk] * w.values()[kk * dim + j];
        return out;
    };
    auto q = project(p.wq), k = project(p.wk), v = project(p.wv);
    std::vector<double> concat(len * dim, 0.0);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < len; ++i) {
            std::vector<double> s(len, 0.0);
            for (std::size_t j = 0; j < len; ++j)
                for (std::size_t d = 0; d < hd; ++d)
                    s[j] += q[i * dim + h * hd + d] * k[j * dim + h * hd + d];
            double mx = s[0];
            for (double sv : s) mx = std::max(mx, sv);
            double z = 0;
            for (auto& sv : s) {
                sv = std::exp(sv / std::sqrt(double(hd)) - mx / std::sqrt(double(hd)));
                z += sv;
            }
            for (auto& sv : s) sv /= z;
            for (std::size_t d = 0; d < hd; ++d)
                for (std::size_t j = 0; j < len; ++j)
                    concat[i * dim + h * hd + d] += s[j] * v[j * dim + h * hd + d];
        }
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            double o = 0;
            for (std::size_t kk = 0; kk < dim; ++kk)
                o += concat[i * dim + kk] * p.wo.values()[kk * dim + j];
            CHECK(got.at(i, j) == doctest::Approx(o).epsilon(1e-10));
        }
}

TEST_CASE("attention rows over valid positions sum to one") {
    Rng rng(31);
    Tensor scores = random_tensor({4, 4}, rng, false);
    std::vector<bool> mask{true, false, true, true};
    Tensor w = softmax_rows(scores, mask);
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 4; ++j) s += w.at(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("layer norm of a constant row is the bias") {
    auto ln = LayerNormParams::create(3);
    ln.bias.values() = {0.7, -0.2, 0.1};
    Tensor x = Tensor::from({5, 5, 5}, {1, 3});
    Tensor y = layer_norm(x, ln);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(y.values()[j] == doctest::Approx(ln.bias.values()[j]).epsilon(1e-12));
}

TEST_CASE("transformer block with zero attention and ff weights") {
    Rng rng(37);
    auto blk = TransformerBlock::create(4, 2, 8, rng);
    for (Tensor* t : {&blk.attn.wq, &blk.attn.wk, &blk.attn.wv, &blk.attn.wo,
                      &blk.ff.w1, &blk.ff.w2})
        for (auto& v : t->values()) v = 0.0;
    Tensor x = random_tensor({2, 4}, rng, false);
    Tensor got = transformer_block(x, blk, {true, true});
    Tensor expect = layer_norm(layer_norm(x, blk.ln1), blk.ln2);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got.values()[i] == doctest::Approx(expect.values()[i]).epsilon(1e-12));
}

TEST_CASE("transformer block gradient vs finite differences") {
    Rng rng(41);
    auto blk = TransformerBlock::create(8, 2, 6, rng);
    Tensor x = random_tensor({4, 8}, rng);
    std::vector<bool> mask{true, true, true, false};
    std::vector<Tensor> leaves{x,           blk.attn.wq, blk.attn.wk, blk.attn.wv,
                               blk.attn.wo, blk.ln1.gain, blk.ln1.bias, blk.ff.w1,
                               blk.ff.b1,   blk.ff.w2,   blk.ff.b2,   blk.ln2.gain,
                               blk.ln2.bias};
    CHECK(max_grad_rel_error(
              [&] { return sum(mul(transformer_block(x, blk, mask),
                                   transformer_block(x, blk, mask))); },
              leaves) < 1e-4);
}

TEST_CASE("pool_mean basics") {
    Tensor x = Tensor::from({1, 3}, {2, 1});
    CHECK(pool_mean(x, {true, true}).item() == doctest::Approx(2.0));
    CHECK(pool_mean(x, {true, false}).item() == doctest::Approx(1.0));
    Tensor same = Tensor::from({2, 5, 2, 5}, {2, 2});
    Tensor m = pool_mean(same, {true, true});
    CHECK(m.values() == std::vector<double>{2, 5});
    CHECK_THROWS_AS(pool_mean(x, {false, false}), EmptySequenceError);
}

TEST_CASE("appending padding never changes masked encoders") {
    Rng rng(43);
    const std::size_t dim = 4;
    GruCell fwd = GruCell::create(dim, 3, rng);
    GruCell bwd = GruCell::create(dim, 3, rng);
    auto attn = AttentionParams::create(dim, 2, rng);
    Tensor x = random_tensor({3, dim}, rng, false);
    std::vector<double> padded_vals = x.values();
    padded_vals.insert(padded_vals.end(), 2 * dim, 0.0);
    Tensor xp = Tensor::from(padded_vals, {5, dim});
    std::vector<bool> m3{true, true, true};
    std::vector<bool> m5{true, true, true, false, false};

    Tensor g1 = bigru_encode(x, m3, fwd, bwd);
    Tensor g2 = bigru_encode(xp, m5, fwd, bwd);
    for (std::size_t j = 0; j < g1.size(); ++j)
        CHECK(g1.values()[j] == doctest::Approx(g2.values()[j]).epsilon(1e-10));

    Tensor a1 = multi_head_self_attention(x, attn, m3);
    Tensor a2 = multi_head_self_attention(xp, attn, m5);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            CHECK(a1.at(i, j) == doctest::Approx(a2.at(i, j)).epsilon(1e-10));

    Tensor p1 = pool_mean(x, m3);
    Tensor p2 = pool_mean(xp, m5);
    for (std::size_t j = 0; j < dim; ++j)
        CHECK(p1.values()[j] == doctest::Approx(p2.values()[j]).epsilon(1e-10));
}

TEST_CASE("per-layer gradient sweep over random seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        GruCell cell = GruCell::create(3, 4, rng);
        Tensor x = random_tensor({1, 3}, rng);
        Tensor h = random_tensor({1, 4}, rng);
        auto leaves = gru_params(cell);
        leaves.push_back(x);
        leaves.push_back(h);
        CHECK(max_grad_rel_error([&] { return sum(gru_step(cell, x, h)); }, leaves) <
              1e-4);

        auto attn = AttentionParams::create(4, 2, rng);
        Tensor xs = random_tensor({3, 4}, rng);
        CHECK(max_grad_rel_error(
                  [&] {
                      return sum(multi_head_self_attention(xs, attn,
                                                           {true, true, true}));
                  },
                  {xs, attn.wq, attn.wk, attn.wv, attn.wo}) < 1e-4);
    }
}
