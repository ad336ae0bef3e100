#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "mcnn/errors.hpp"

namespace mcnn {

/// Dense row-major float64 tensor participating in a reverse-mode gradient
/// tape. Tensors are cheap shared handles; the tape is the implicit graph of
/// parent links recorded by each operation. A graph is confined to one thread;
/// independent graphs may live on different threads.
class Tensor {
public:
    struct Node {
        std::vector<std::size_t> shape;
        std::vector<double> data;
        bool requires_grad = false;
        std::vector<double> grad;  // sized lazily during backward
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backprop;  // pushes this->grad into parents
    };

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor from(std::vector<double> data, std::vector<std::size_t> shape,
                       bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t size() const { return node_->data.size(); }

    // 2-D view: rank-1 tensors are treated as a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    std::vector<double>& values() { return node_->data; }
    const std::vector<double>& values() const { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }

    // Gradient accumulated by the last backward(); sized like data.
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    bool has_grad() const { return !node_->grad.empty(); }
    void clear_grad() { node_->grad.clear(); }

    double item() const;
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);

    std::shared_ptr<Node> node_;

    static Tensor wrap(std::shared_ptr<Node> n) {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }
};

// --- tape ops ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

// b may equal a's shape or be a row vector broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor transpose(const Tensor& a);
Tensor row(const Tensor& a, std::size_t i);
Tensor col_slice(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor stack_rows(const std::vector<Tensor>& rows);

// Row-wise softmax over the columns flagged valid; invalid columns get
// weight exactly 0 and each row sums to 1 over the valid set.
Tensor softmax_rows(const Tensor& a, const std::vector<bool>& valid_cols);

// Mean over batch of -log softmax(logits)[target], max-subtraction stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets);

// Reverse sweep from a scalar loss. Populates grad on every tensor in the
// graph; leaves with requires_grad keep theirs for the optimizer to read.
void backward(const Tensor& loss);

}  // namespace mcnn
