#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rgan/tensor.hpp"

namespace rgan {

template <typename S>
class TapeT;

// Handle to a node on the tape. Cheap to copy; valid while the tape lives.
template <typename S>
struct VarT {
    TapeT<S>* tape = nullptr;
    int id = -1;

    const TensorT<S>& val() const { return tape->value(id); }
    const TensorT<S>& grad() const { return tape->grad_of(id); }
    bool requires_grad() const { return tape->requires_grad(id); }
};

// Reverse-mode tape. Nodes are appended in topological order; backward walks
// ids in reverse, so each node is visited exactly once.
template <typename S>
class TapeT {
public:
    using Var = VarT<S>;
    using BackwardFn = std::function<void(TapeT&, int)>;

    Var leaf(TensorT<S> value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, nullptr);
    }

    Var constant(TensorT<S> value) { return leaf(std::move(value), false); }

    Var push(TensorT<S> value, bool requires_grad, BackwardFn backward) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        if (requires_grad) n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return Var{this, static_cast<int>(nodes_.size()) - 1};
    }

    const TensorT<S>& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    TensorT<S>& value(int id) { return nodes_[static_cast<size_t>(id)].value; }

    bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    // Gradient buffer, zero-initialized on first touch.
    TensorT<S>& grad_of(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.empty()) n.grad = TensorT<S>(n.value.shape());
        return n.grad;
    }

    bool has_grad(int id) const { return !nodes_[static_cast<size_t>(id)].grad.empty(); }

    // Accumulates `delta` into the gradient of `id` if that node wants one.
    void accumulate(int id, const TensorT<S>& delta) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad) return;
        TensorT<S>& g = grad_of(id);
        RGAN_REQUIRE(g.same_shape(delta), "accumulate: gradient shape mismatch");
        const S* src = delta.data();
        S* dst = g.data();
        const int64_t n_elems = delta.size();
        for (int64_t i = 0; i < n_elems; ++i) dst[i] += src[i];
    }

    // Backpropagates from a scalar root. Seeds d(root)/d(root) = 1.
    void backward(Var root) {
        RGAN_REQUIRE(root.tape == this, "backward: var belongs to another tape");
        RGAN_REQUIRE(value(root.id).size() == 1, "backward: root must be scalar");
        RGAN_REQUIRE(requires_grad(root.id),
                     "backward: root does not depend on any differentiable leaf");
        grad_of(root.id).fill(S(1));
        for (int id = root.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.grad.empty() || !n.backward) continue;
            n.backward(*this, id);
        }
    }

    size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        TensorT<S> value;
        TensorT<S> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
};

using Tape = TapeT<float>;
using Var = VarT<float>;
using DTape = TapeT<double>;
using DVar = VarT<double>;

}  // namespace rgan
