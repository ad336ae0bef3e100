#include "mcnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace mcnn {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (auto d : shape) p *= d;
    return p;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

std::shared_ptr<Tensor::Node> make_node(std::vector<std::size_t> shape,
                                        std::vector<double> data) {
    auto n = std::make_shared<Tensor::Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    return n;
}

void ensure_grad(Tensor::Node& n) {
    if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto n = make_node(shape, std::vector<double>(product(shape), 0.0));
    n->requires_grad = requires_grad;
    return wrap(std::move(n));
}

Tensor Tensor::from(std::vector<double> data, std::vector<std::size_t> shape,
                    bool requires_grad) {
    if (product(shape) != data.size())
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    auto n = make_node(std::move(shape), std::move(data));
    n->requires_grad = requires_grad;
    return wrap(std::move(n));
}

Tensor Tensor::scalar(double value) { return from({value}, {1}); }

std::size_t Tensor::rows() const {
    return node_->shape.size() >= 2 ? node_->shape[0] : 1;
}

std::size_t Tensor::cols() const {
    return node_->shape.empty() ? 1 : node_->shape.back();
}

std::vector<double>& Tensor::grad() {
    ensure_grad(*node_);
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    ensure_grad(*node_);
    return node_->grad;
}

double Tensor::item() const {
    if (node_->data.size() != 1)
        throw ContractError("item() on non-scalar tensor " + shape_str(node_->shape));
    return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return node_->data[r * cols() + c];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return node_->data[r * cols() + c];
}

namespace {

Tensor make_op(std::vector<std::size_t> shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(Tensor::Node&)> backprop) {
    auto n = make_node(std::move(shape), std::move(data));
    bool needs = false;
    for (auto& p : parents) {
        n->parents.push_back(p.node_);
        needs = needs || p.node_->requires_grad || p.node_->backprop;
    }
    if (needs) {
        n->requires_grad = true;  // gradient flows through this node
        n->backprop = std::move(backprop);
    }
    return Tensor::wrap(std::move(n));
}

// Second operand of a binary op: either same shape or a row vector
// broadcast over the first operand's rows.
bool broadcasts(const Tensor& a, const Tensor& b) {
    return b.rows() == 1 && b.cols() == a.cols() && a.rows() > 1;
}

void check_binary(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return;
    if (broadcasts(a, b)) return;
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " are not compatible");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2)
        throw DimensionError("matmul: inner dimensions disagree, " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
        }
    return make_op({m, n}, std::move(out), {a, b},
                   [m, k, n](Tensor::Node& node) {
                       auto& pa = *node.parents[0];
                       auto& pb = *node.parents[1];
                       ensure_grad(pa);
                       ensure_grad(pb);
                       // dA += dY * B^T ; dB += A^T * dY
                       for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) {
                               const double g = node.grad[i * n + j];
                               if (g == 0.0) continue;
                               for (std::size_t p = 0; p < k; ++p) {
                                   pa.grad[i * k + p] += g * pb.data[p * n + j];
                                   pb.grad[p * n + j] += g * pa.data[i * k + p];
                               }
                           }
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_binary("add", a, b);
    const bool bc = broadcasts(a, b);
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out[i * c + j] += b.values()[bc ? j : i * c + j];
    return make_op(a.shape(), std::move(out), {a, b},
                   [bc, r, c](Tensor::Node& node) {
                       auto& pa = *node.parents[0];
                       auto& pb = *node.parents[1];
                       ensure_grad(pa);
                       ensure_grad(pb);
                       for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < c; ++j) {
                               const double g = node.grad[i * c + j];
                               pa.grad[i * c + j] += g;
                               pb.grad[bc ? j : i * c + j] += g;
                           }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_binary("sub", a, b);
    const bool bc = broadcasts(a, b);
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out[i * c + j] -= b.values()[bc ? j : i * c + j];
    return make_op(a.shape(), std::move(out), {a, b},
                   [bc, r, c](Tensor::Node& node) {
                       auto& pa = *node.parents[0];
                       auto& pb = *node.parents[1];
                       ensure_grad(pa);
                       ensure_grad(pb);
                       for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < c; ++j) {
                               const double g = node.grad[i * c + j];
                               pa.grad[i * c + j] += g;
                               pb.grad[bc ? j : i * c + j] -= g;
                           }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_binary("mul", a, b);
    const bool bc = broadcasts(a, b);
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out[i * c + j] *= b.values()[bc ? j : i * c + j];
    return make_op(a.shape(), std::move(out), {a, b},
                   [bc, r, c](Tensor::Node& node) {
                       auto& pa = *node.parents[0];
                       auto& pb = *node.parents[1];
                       ensure_grad(pa);
                       ensure_grad(pb);
                       for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < c; ++j) {
                               const double g = node.grad[i * c + j];
                               const std::size_t jb = bc ? j : i * c + j;
                               pa.grad[i * c + j] += g * pb.data[jb];
                               pb.grad[jb] += g * pa.data[i * c + j];
                           }
                   });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.values());
    for (auto& v : out) v *= c;
    return make_op(a.shape(), std::move(out), {a},
                   [c](Tensor::Node& node) {
                       auto& p = *node.parents[0];
                       ensure_grad(p);
                       for (std::size_t i = 0; i < node.grad.size(); ++i)
                           p.grad[i] += c * node.grad[i];
                   });
}

namespace {

Tensor unary(const Tensor& a, double (*fwd)(double),
             double (*dydx_from_y_x)(double y, double x)) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.values()[i]);
    auto yv = out;  // captured for the backward rule
    return make_op(a.shape(), std::move(out), {a},
                   [yv = std::move(yv), dydx_from_y_x](Tensor::Node& node) {
                       auto& p = *node.parents[0];
                       ensure_grad(p);
                       for (std::size_t i = 0; i < node.grad.size(); ++i)
                           p.grad[i] += node.grad[i] * dydx_from_y_x(yv[i], p.data[i]);
                   });
}

}  // namespace

Tensor tanh(const Tensor& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double y, double) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double y, double) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_op({1}, {s}, {a}, [](Tensor::Node& node) {
        auto& p = *node.parents[0];
        ensure_grad(p);
        for (auto& g : p.grad) g += node.grad[0];
    });
}

Tensor transpose(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.values()[i * c + j];
    return make_op({c, r}, std::move(out), {a},
                   [r, c](Tensor::Node& node) {
                       auto& p = *node.parents[0];
                       ensure_grad(p);
                       for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < c; ++j)
                               p.grad[i * c + j] += node.grad[j * r + i];
                   });
}

Tensor row(const Tensor& a, std::size_t i) {
    const std::size_t c = a.cols();
    if (i >= a.rows())
        throw DimensionError("row " + std::to_string(i) + " out of range for " +
                             shape_str(a.shape()));
    std::vector<double> out(a.values().begin() + i * c, a.values().begin() + (i + 1) * c);
    return make_op({1, c}, std::move(out), {a},
                   [i, c](Tensor::Node& node) {
                       auto& p = *node.parents[0];
                       ensure_grad(p);
                       for (std::size_t j = 0; j < c; ++j)
                           p.grad[i * c + j] += node.grad[j];
                   });
}

Tensor col_slice(const Tensor& a, std::size_t start, std::size_t count) {
    const std::size_t r = a.rows(), c = a.cols();
    if (start + count > c)
        throw DimensionError("col_slice [" + std::to_string(start) + "," +
                             std::to_string(start + count) + ") out of range for " +
                             shape_str(a.shape()));
    std::vector<double> out(r * count);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j)
            out[i * count + j] = a.values()[i * c + start + j];
    return make_op({r, count}, std::move(out), {a},
                   [start, count, r, c](Tensor::Node& node) {
                       auto& p = *node.parents[0];
                       ensure_grad(p);
                       for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < count; ++j)
                               p.grad[i * c + start + j] += node.grad[i * count + j];
                   });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no operands");
    const std::size_t r = parts[0].rows();
    std::size_t total = 0;
    for (auto& p : parts) {
        if (p.rows() != r)
            throw DimensionError("concat_cols: row counts differ");
        total += p.cols();
    }
    std::vector<double> out(r * total);
    std::vector<std::size_t> widths;
    std::size_t off = 0;
    for (auto& p : parts) {
        const std::size_t c = p.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                out[i * total + off + j] = p.values()[i * c + j];
        widths.push_back(c);
        off += c;
    }
    return make_op({r, total}, std::move(out), parts,
                   [widths, r, total](Tensor::Node& node) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                           auto& p = *node.parents[k];
                           ensure_grad(p);
                           const std::size_t c = widths[k];
                           for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j)
                                   p.grad[i * c + j] += node.grad[i * total + off + j];
                           off += c;
                       }
                   });
}

Tensor stack_rows(const std::vector<Tensor>& rows_in) {
    if (rows_in.empty()) throw ContractError("stack_rows: no operands");
    const std::size_t c = rows_in[0].cols();
    for (auto& rT : rows_in)
        if (rT.rows() != 1 || rT.cols() != c)
            throw DimensionError("stack_rows: every operand must be a row of width " +
                                 std::to_string(c));
    const std::size_t n = rows_in.size();
    std::vector<double> out(n * c);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(rows_in[i].values().begin(), rows_in[i].values().end(),
                  out.begin() + i * c);
    return make_op({n, c}, std::move(out), rows_in,
                   [n, c](Tensor::Node& node) {
                       for (std::size_t i = 0; i < n; ++i) {
                           auto& p = *node.parents[i];
                           ensure_grad(p);
                           for (std::size_t j = 0; j < c; ++j)
                               p.grad[j] += node.grad[i * c + j];
                       }
                   });
}

Tensor softmax_rows(const Tensor& a, const std::vector<bool>& valid_cols) {
    const std::size_t r = a.rows(), c = a.cols();
    if (valid_cols.size() != c)
        throw DimensionError("softmax_rows: mask length " +
                             std::to_string(valid_cols.size()) + " vs " +
                             std::to_string(c) + " columns");
    bool any = false;
    for (bool v : valid_cols) any = any || v;
    if (!any) throw EmptySequenceError("softmax_rows: no valid columns");
    std::vector<double> out(r * c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -1e308;
        for (std::size_t j = 0; j < c; ++j)
            if (valid_cols[j]) mx = std::max(mx, a.values()[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j)
            if (valid_cols[j]) {
                out[i * c + j] = std::exp(a.values()[i * c + j] - mx);
                z += out[i * c + j];
            }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
    }
    auto yv = out;
    return make_op({r, c}, std::move(out), {a},
                   [yv = std::move(yv), r, c](Tensor::Node& node) {
                       auto& p = *node.parents[0];
                       ensure_grad(p);
                       for (std::size_t i = 0; i < r; ++i) {
                           double dot = 0.0;
                           for (std::size_t j = 0; j < c; ++j)
                               dot += node.grad[i * c + j] * yv[i * c + j];
                           for (std::size_t j = 0; j < c; ++j)
                               p.grad[i * c + j] +=
                                   yv[i * c + j] * (node.grad[i * c + j] - dot);
                       }
                   });
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    const std::size_t b = logits.rows(), c = logits.cols();
    if (targets.size() != b)
        throw ContractError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                            " targets for " + std::to_string(b) + " rows");
    for (std::size_t i = 0; i < b; ++i)
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c)
            throw LabelError("target " + std::to_string(targets[i]) +
                             " out of range at row " + std::to_string(i));
    std::vector<double> probs(b * c);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double mx = logits.values()[i * c];
        for (std::size_t j = 1; j < c; ++j)
            mx = std::max(mx, logits.values()[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            probs[i * c + j] = std::exp(logits.values()[i * c + j] - mx);
            z += probs[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
        const std::size_t t = static_cast<std::size_t>(targets[i]);
        // log-sum-exp form keeps the loss exact even when probs[t] rounds to 1
        loss += std::log(z) - (logits.values()[i * c + t] - mx);
    }
    loss /= static_cast<double>(b);
    return make_op({1}, {loss}, {logits},
                   [probs = std::move(probs), targets, b, c](Tensor::Node& node) {
                       auto& p = *node.parents[0];
                       ensure_grad(p);
                       const double g = node.grad[0] / static_cast<double>(b);
                       for (std::size_t i = 0; i < b; ++i)
                           for (std::size_t j = 0; j < c; ++j) {
                               double d = probs[i * c + j];
                               if (static_cast<std::size_t>(targets[i]) == j) d -= 1.0;
                               p.grad[i * c + j] += g * d;
                           }
                   });
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward: loss must be a defined scalar tensor");
    // iterative post-order DFS for a topological order
    std::vector<Tensor::Node*> order;
    std::unordered_set<Tensor::Node*> seen;
    std::vector<std::pair<Tensor::Node*, std::size_t>> stack;
    stack.emplace_back(loss.node_.get(), 0);
    seen.insert(loss.node_.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Tensor::Node* parent = node->parents[idx++].get();
            if (seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    ensure_grad(*loss.node_);
    loss.node_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace mcnn
