#pragma once

#include <functional>
#include <vector>

#include "hamp/hypergraph.hpp"
#include "hamp/tensor.hpp"

namespace hamp {

// Reverse-mode tape. A Graph instance records one forward pass; backward()
// walks the tape once in reverse creation order (creation order is already
// topological) and accumulates into leaf gradients. The tape is cleared
// afterwards; parameters live outside and keep their grad buffers.
class Graph {
public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Wraps an external tensor. Gradients accumulate into t.grad when
    // t.requires_grad; the tensor must outlive the graph.
    Var leaf(Tensor& t);

    // Graph-owned value with no gradient.
    Var constant(Tensor t);

    // The reference is invalidated by the next op call (the node store may
    // reallocate); copy the tensor if you need it past that.
    const Tensor& value(Var v) const;
    std::size_t num_nodes() const { return nodes_.size(); }

    // ---- ops ----
    Var matmul(Var a, Var b);
    Var add(Var a, Var b);        // same shape
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);        // elementwise, same shape
    Var scale(Var a, double k);   // k * a
    Var affine(Var a, double k, double c); // k * a + c elementwise
    Var add_rowvec(Var a, Var b); // a (m x n) + broadcast b (n)
    Var mul_rowvec(Var a, Var b); // a (m x n) * broadcast b (n)
    Var add_scalar(Var a, Var b); // a + broadcast b (1)
    Var relu(Var a);
    Var tanh_act(Var a);
    Var sigmoid(Var a);
    // (1 - p^2) p, the bistable well force without its strength factor.
    Var allen_cahn(Var a);
    Var row_softmax(Var a);
    // Mean over rows in idx of -log softmax(logits_row)[label]. Empty idx
    // means all rows.
    Var cross_entropy(Var logits, const std::vector<int>& labels,
                      const std::vector<int>& idx);
    Var sum_all(Var a);

    // Hypergraph-structured ops. The hypergraph must outlive the graph.
    // z_e = (1/|e|) sum_{j in e} x_j, optionally prescaling x_j by node_scale.
    Var edge_mean(Var x, const Hypergraph& h,
                  const std::vector<double>* node_scale = nullptr);
    // out_i = sum_{e in E(i)} coeff_{i,e} * z_e with coeff laid out in the
    // hypergraph's node-major incidence order (shape = num_incidences).
    Var incidence_gather(Var z, Var coeff, const Hypergraph& h);
    // s_{i,e} = <x_i, z_e> per incidence, node-major order.
    Var incidence_dot(Var x, Var z, const Hypergraph& h);
    // y = P x through the factored operator; backward uses symmetry of P.
    Var propagate(Var x, const PropagationOperator& p);

    // Seeds d(loss)=1 and accumulates leaf gradients. loss must be scalar.
    // Clears the tape when done.
    void backward(Var loss);

private:
    using BackFn = std::function<void(Graph&, int self)>;

    struct Node {
        Tensor owned;
        Tensor* external = nullptr; // set for leaves
        bool requires_grad = false;
        BackFn back;
    };

    Tensor& data(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.external ? *n.external : n.owned;
    }
    const Tensor& data(int id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.external ? *n.external : n.owned;
    }
    bool needs_grad(Var v) const {
        return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
    }
    // Returns the grad buffer of node id, allocating it on first touch.
    std::vector<double>& grad_of(int id) {
        Tensor& t = data(id);
        t.ensure_grad();
        return t.grad;
    }
    Var make(Tensor value, bool requires_grad, BackFn back);
    void check(Var v) const;

    std::vector<Node> nodes_;
};

using Var = Graph::Var;

} // namespace hamp
