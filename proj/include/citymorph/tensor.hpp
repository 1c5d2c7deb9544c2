#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "citymorph/errors.hpp"

namespace citymorph {

// (batch, channels, height, width) for activations;
// (out-ch, in-ch, kh, kw) for convolution kernels.
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    int64_t numel() const {
        return static_cast<int64_t>(n) * c * h * w;
    }
    bool operator==(const Shape& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

// One node of the dynamic reverse-mode graph. Ops allocate a fresh node per
// result; backward_fn pulls this node's grad into its parents' grad buffers.
template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> val;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(TensorNode<T>&)> backward_fn;

    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
    T scalar() const {
        if (shape.numel() != 1) throw ShapeError("tensor is not a scalar: " + shape.str());
        return val[0];
    }
};

template <typename T>
using TensorPtr = std::shared_ptr<TensorNode<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape shape, bool requires_grad = false) {
    auto t = std::make_shared<TensorNode<T>>();
    t->shape = shape;
    t->val.assign(static_cast<size_t>(shape.numel()), T(0));
    t->grad.assign(static_cast<size_t>(shape.numel()), T(0));
    t->requires_grad = requires_grad;
    return t;
}

template <typename T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (static_cast<int64_t>(values.size()) != shape.numel())
        throw ShapeError("value count does not match shape " + shape.str());
    auto t = std::make_shared<TensorNode<T>>();
    t->shape = shape;
    t->val = std::move(values);
    t->grad.assign(t->val.size(), T(0));
    t->requires_grad = requires_grad;
    return t;
}

// Leaf copy: same values, no graph history.
template <typename T>
TensorPtr<T> detach(const TensorPtr<T>& t) {
    return make_tensor<T>(t->shape, t->val, false);
}

// Reverse-mode sweep from root. Seeds the root grad with ones, then runs
// every backward_fn in reverse topological order. The graph is a DAG owned
// by a single thread.
template <typename T>
void backward(const TensorPtr<T>& root) {
    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> seen;
    std::vector<std::pair<TensorNode<T>*, size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode<T>* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    std::fill(root->grad.begin(), root->grad.end(), T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

} // namespace citymorph
