#pragma once

#include <deque>
#include <functional>
#include <utility>

#include "hst/tensor.hpp"

namespace hst::ad {

// One recorded value in a forward pass. Gradient buffers are allocated
// lazily during the backward sweep; `back` accumulates into the parents'
// grads and is a no-op for leaves.
struct Node {
    Tensor val;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> back;
};

// Append-only arena of nodes. Creation order is a topological order of the
// DAG, so the backward sweep is a single reverse iteration. std::deque keeps
// node addresses stable for the closures.
class Tape {
  public:
    Node* alloc(Tensor val, bool needs_grad) {
        nodes_.emplace_back();
        Node& n = nodes_.back();
        n.val = std::move(val);
        n.needs_grad = needs_grad;
        return &n;
    }

    Node* leaf(Tensor val, bool needs_grad) { return alloc(std::move(val), needs_grad); }

    // Seeds d(root)/d(root) = 1 and accumulates into every grad-requiring
    // node reachable from it. `root` must be scalar.
    void backward(Node* root) {
        require(root->val.numel() == 1, errc::invalid_argument, "backward root must be scalar");
        root->grad = Tensor({1});
        root->grad.v[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->needs_grad && it->back && !it->grad.v.empty()) it->back();
        }
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    std::deque<Node> nodes_;
};

// Accumulation target for a parent: allocate on first touch, skip parents
// that do not require grad.
inline Tensor* grad_buf(Node* n) {
    if (!n->needs_grad) return nullptr;
    if (n->grad.v.empty()) n->grad = Tensor(n->val.shape);
    return &n->grad;
}

}  // namespace hst::ad
