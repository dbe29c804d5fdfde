#include "hamp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace hamp {

namespace {

void check_2d(const Tensor& t, const char* where) {
    if (t.rank() != 2)
        throw ShapeError(std::string(where) + ": expected rank-2 tensor, got " +
                         t.shape_string());
}

void check_same(const Tensor& a, const Tensor& b, const char* where) {
    if (a.shape != b.shape)
        throw ShapeError(std::string(where) + ": shape mismatch " +
                         a.shape_string() + " vs " + b.shape_string());
}

} // namespace

void Graph::check(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw ShapeError("invalid graph variable");
}

Var Graph::make(Tensor value, bool requires_grad, BackFn back) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::leaf(Tensor& t) {
    Node n;
    n.external = &t;
    n.requires_grad = t.requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor t) { return make(std::move(t), false, nullptr); }

const Tensor& Graph::value(Var v) const {
    check(v);
    return data(v.id);
}

Var Graph::matmul(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = data(a.id);
    const Tensor& tb = data(b.id);
    check_2d(ta, "matmul");
    check_2d(tb, "matmul");
    if (ta.shape[1] != tb.shape[0])
        throw ShapeError("matmul: inner dims differ, " + ta.shape_string() +
                         " vs " + tb.shape_string());
    const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out = Tensor::zeros({m, n});
    {
        const double* A = ta.value.data();
        const double* B = tb.value.data();
        double* C = out.value.data();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = A[i * k + p];
                const double* Bp = B + p * n;
                double* Ci = C + i * n;
                for (std::size_t j = 0; j < n; ++j) Ci[j] += aip * Bp[j];
            }
    }
    const bool rg = needs_grad(a) || needs_grad(b);
    const int ia = a.id, ib = b.id;
    return make(std::move(out), rg, [ia, ib, m, k, n](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        const std::vector<double>& A = g.data(ia).value;
        const std::vector<double>& B = g.data(ib).value;
        if (g.nodes_[static_cast<std::size_t>(ia)].requires_grad) {
            std::vector<double>& dA = g.grad_of(ia); // dA += gout * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* gi = gout.data() + i * n;
                    const double* Bp = B.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) acc += gi[j] * Bp[j];
                    dA[i * k + p] += acc;
                }
        }
        if (g.nodes_[static_cast<std::size_t>(ib)].requires_grad) {
            std::vector<double>& dB = g.grad_of(ib); // dB += A^T * gout
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t i = 0; i < m; ++i) {
                    const double aip = A[i * k + p];
                    if (aip == 0.0) continue;
                    const double* gi = gout.data() + i * n;
                    double* dBp = dB.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) dBp[j] += aip * gi[j];
                }
        }
    });
}

Var Graph::add(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = data(a.id);
    const Tensor& tb = data(b.id);
    check_same(ta, tb, "add");
    Tensor out = ta;
    out.grad.clear();
    out.requires_grad = false;
    for (std::size_t i = 0; i < out.value.size(); ++i) out.value[i] += tb.value[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    const int ia = a.id, ib = b.id;
    return make(std::move(out), rg, [ia, ib](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        for (int src : {ia, ib}) {
            if (!g.nodes_[static_cast<std::size_t>(src)].requires_grad) continue;
            std::vector<double>& d = g.grad_of(src);
            for (std::size_t i = 0; i < gout.size(); ++i) d[i] += gout[i];
        }
    });
}

Var Graph::sub(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = data(a.id);
    const Tensor& tb = data(b.id);
    check_same(ta, tb, "sub");
    Tensor out = ta;
    out.grad.clear();
    out.requires_grad = false;
    for (std::size_t i = 0; i < out.value.size(); ++i) out.value[i] -= tb.value[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    const int ia = a.id, ib = b.id;
    return make(std::move(out), rg, [ia, ib](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        if (g.nodes_[static_cast<std::size_t>(ia)].requires_grad) {
            std::vector<double>& d = g.grad_of(ia);
            for (std::size_t i = 0; i < gout.size(); ++i) d[i] += gout[i];
        }
        if (g.nodes_[static_cast<std::size_t>(ib)].requires_grad) {
            std::vector<double>& d = g.grad_of(ib);
            for (std::size_t i = 0; i < gout.size(); ++i) d[i] -= gout[i];
        }
    });
}

Var Graph::mul(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = data(a.id);
    const Tensor& tb = data(b.id);
    check_same(ta, tb, "mul");
    Tensor out = ta;
    out.grad.clear();
    out.requires_grad = false;
    for (std::size_t i = 0; i < out.value.size(); ++i) out.value[i] *= tb.value[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    const int ia = a.id, ib = b.id;
    return make(std::move(out), rg, [ia, ib](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        const std::vector<double>& av = g.data(ia).value;
        const std::vector<double>& bv = g.data(ib).value;
        if (g.nodes_[static_cast<std::size_t>(ia)].requires_grad) {
            std::vector<double>& d = g.grad_of(ia);
            for (std::size_t i = 0; i < gout.size(); ++i) d[i] += gout[i] * bv[i];
        }
        if (g.nodes_[static_cast<std::size_t>(ib)].requires_grad) {
            std::vector<double>& d = g.grad_of(ib);
            for (std::size_t i = 0; i < gout.size(); ++i) d[i] += gout[i] * av[i];
        }
    });
}

Var Graph::scale(Var a, double k) { return affine(a, k, 0.0); }

Var Graph::affine(Var a, double k, double c) {
    check(a);
    Tensor out = data(a.id);
    out.grad.clear();
    out.requires_grad = false;
    for (double& x : out.value) x = k * x + c;
    const bool rg = needs_grad(a);
    const int ia = a.id;
    return make(std::move(out), rg, [ia, k](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        std::vector<double>& d = g.grad_of(ia);
        for (std::size_t i = 0; i < gout.size(); ++i) d[i] += k * gout[i];
    });
}

Var Graph::add_rowvec(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = data(a.id);
    const Tensor& tb = data(b.id);
    check_2d(ta, "add_rowvec");
    if (tb.rank() != 1 || tb.shape[0] != ta.shape[1])
        throw ShapeError("add_rowvec: vector " + tb.shape_string() +
                         " does not match row width of " + ta.shape_string());
    Tensor out = ta;
    out.grad.clear();
    out.requires_grad = false;
    const std::size_t m = ta.shape[0], n = ta.shape[1];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.value[i * n + j] += tb.value[j];
    const bool rg = needs_grad(a) || needs_grad(b);
    const int ia = a.id, ib = b.id;
    return make(std::move(out), rg, [ia, ib, m, n](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        if (g.nodes_[static_cast<std::size_t>(ia)].requires_grad) {
            std::vector<double>& d = g.grad_of(ia);
            for (std::size_t i = 0; i < gout.size(); ++i) d[i] += gout[i];
        }
        if (g.nodes_[static_cast<std::size_t>(ib)].requires_grad) {
            std::vector<double>& d = g.grad_of(ib);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) d[j] += gout[i * n + j];
        }
    });
}

Var Graph::mul_rowvec(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = data(a.id);
    const Tensor& tb = data(b.id);
    check_2d(ta, "mul_rowvec");
    if (tb.rank() != 1 || tb.shape[0] != ta.shape[1])
        throw ShapeError("mul_rowvec: vector " + tb.shape_string() +
                         " does not match row width of " + ta.shape_string());
    Tensor out = ta;
    out.grad.clear();
    out.requires_grad = false;
    const std::size_t m = ta.shape[0], n = ta.shape[1];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.value[i * n + j] *= tb.value[j];
    const bool rg = needs_grad(a) || needs_grad(b);
    const int ia = a.id, ib = b.id;
    return make(std::move(out), rg, [ia, ib, m, n](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        const std::vector<double>& av = g.data(ia).value;
        const std::vector<double>& bv = g.data(ib).value;
        if (g.nodes_[static_cast<std::size_t>(ia)].requires_grad) {
            std::vector<double>& d = g.grad_of(ia);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    d[i * n + j] += gout[i * n + j] * bv[j];
        }
        if (g.nodes_[static_cast<std::size_t>(ib)].requires_grad) {
            std::vector<double>& d = g.grad_of(ib);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    d[j] += gout[i * n + j] * av[i * n + j];
        }
    });
}

Var Graph::add_scalar(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = data(a.id);
    const Tensor& tb = data(b.id);
    if (tb.numel() != 1)
        throw ShapeError("add_scalar: expected 1-element tensor, got " +
                         tb.shape_string());
    Tensor out = ta;
    out.grad.clear();
    out.requires_grad = false;
    const double bv = tb.value[0];
    for (double& x : out.value) x += bv;
    const bool rg = needs_grad(a) || needs_grad(b);
    const int ia = a.id, ib = b.id;
    return make(std::move(out), rg, [ia, ib](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        if (g.nodes_[static_cast<std::size_t>(ia)].requires_grad) {
            std::vector<double>& d = g.grad_of(ia);
            for (std::size_t i = 0; i < gout.size(); ++i) d[i] += gout[i];
        }
        if (g.nodes_[static_cast<std::size_t>(ib)].requires_grad) {
            std::vector<double>& d = g.grad_of(ib);
            double acc = 0.0;
            for (double gv : gout) acc += gv;
            d[0] += acc;
        }
    });
}

Var Graph::relu(Var a) {
    check(a);
    Tensor out = data(a.id);
    out.grad.clear();
    out.requires_grad = false;
    for (double& x : out.value) x = x > 0.0 ? x : 0.0;
    const bool rg = needs_grad(a);
    const int ia = a.id;
    return make(std::move(out), rg, [ia](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        const std::vector<double>& av = g.data(ia).value;
        std::vector<double>& d = g.grad_of(ia);
        for (std::size_t i = 0; i < gout.size(); ++i)
            if (av[i] > 0.0) d[i] += gout[i];
    });
}

Var Graph::tanh_act(Var a) {
    check(a);
    Tensor out = data(a.id);
    out.grad.clear();
    out.requires_grad = false;
    for (double& x : out.value) x = std::tanh(x);
    const bool rg = needs_grad(a);
    const int ia = a.id;
    return make(std::move(out), rg, [ia](Graph& g, int self) {
        const Tensor& t = g.data(self);
        const std::vector<double>& gout = t.grad;
        std::vector<double>& d = g.grad_of(ia);
        for (std::size_t i = 0; i < gout.size(); ++i)
            d[i] += gout[i] * (1.0 - t.value[i] * t.value[i]);
    });
}

Var Graph::sigmoid(Var a) {
    check(a);
    Tensor out = data(a.id);
    out.grad.clear();
    out.requires_grad = false;
    for (double& x : out.value) x = 1.0 / (1.0 + std::exp(-x));
    const bool rg = needs_grad(a);
    const int ia = a.id;
    return make(std::move(out), rg, [ia](Graph& g, int self) {
        const Tensor& t = g.data(self);
        const std::vector<double>& gout = t.grad;
        std::vector<double>& d = g.grad_of(ia);
        for (std::size_t i = 0; i < gout.size(); ++i)
            d[i] += gout[i] * t.value[i] * (1.0 - t.value[i]);
    });
}

Var Graph::allen_cahn(Var a) {
    check(a);
    Tensor out = data(a.id);
    out.grad.clear();
    out.requires_grad = false;
    for (double& x : out.value) x = (1.0 - x * x) * x;
    const bool rg = needs_grad(a);
    const int ia = a.id;
    return make(std::move(out), rg, [ia](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        const std::vector<double>& av = g.data(ia).value;
        std::vector<double>& d = g.grad_of(ia);
        for (std::size_t i = 0; i < gout.size(); ++i)
            d[i] += gout[i] * (1.0 - 3.0 * av[i] * av[i]);
    });
}

Var Graph::row_softmax(Var a) {
    check(a);
    const Tensor& ta = data(a.id);
    check_2d(ta, "row_softmax");
    Tensor out = ta;
    out.grad.clear();
    out.requires_grad = false;
    const std::size_t m = ta.shape[0], n = ta.shape[1];
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.value.data() + i * n;
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
    }
    const bool rg = needs_grad(a);
    const int ia = a.id;
    return make(std::move(out), rg, [ia, m, n](Graph& g, int self) {
        const Tensor& t = g.data(self);
        const std::vector<double>& gout = t.grad;
        std::vector<double>& d = g.grad_of(ia);
        for (std::size_t i = 0; i < m; ++i) {
            const double* s = t.value.data() + i * n;
            const double* go = gout.data() + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += go[j] * s[j];
            double* di = d.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) di[j] += s[j] * (go[j] - dot);
        }
    });
}

Var Graph::cross_entropy(Var logits, const std::vector<int>& labels,
                         const std::vector<int>& idx) {
    check(logits);
    const Tensor& tl = data(logits.id);
    check_2d(tl, "cross_entropy");
    const std::size_t m = tl.shape[0], n = tl.shape[1];
    if (labels.size() != m)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(m) + " rows");
    std::vector<int> rows = idx;
    if (rows.empty()) {
        rows.resize(m);
        for (std::size_t i = 0; i < m; ++i) rows[i] = static_cast<int>(i);
    }
    for (int r : rows)
        if (r < 0 || static_cast<std::size_t>(r) >= m)
            throw ShapeError("cross_entropy: row index " + std::to_string(r) +
                             " out of range");

    // Keep softmax probabilities of the selected rows for backward.
    auto probs = std::make_shared<std::vector<double>>(rows.size() * n);
    double loss = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t r = static_cast<std::size_t>(rows[k]);
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= n)
            throw ShapeError("cross_entropy: label " + std::to_string(y) +
                             " outside [0, " + std::to_string(n) + ")");
        const double* row = tl.value.data() + r * n;
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        double* pk = probs->data() + k * n;
        for (std::size_t j = 0; j < n; ++j) {
            pk[j] = std::exp(row[j] - mx);
            sum += pk[j];
        }
        for (std::size_t j = 0; j < n; ++j) pk[j] /= sum;
        loss += -(row[static_cast<std::size_t>(y)] - mx - std::log(sum));
    }
    loss /= static_cast<double>(rows.size());

    const bool rg = needs_grad(logits);
    const int il = logits.id;
    auto sel = std::make_shared<std::vector<int>>(std::move(rows));
    auto labs = std::make_shared<std::vector<int>>(labels);
    return make(Tensor::scalar(loss), rg,
                [il, n, probs, sel, labs](Graph& g, int self) {
                    const double go = g.data(self).grad[0];
                    std::vector<double>& d = g.grad_of(il);
                    const double invm = 1.0 / static_cast<double>(sel->size());
                    for (std::size_t k = 0; k < sel->size(); ++k) {
                        const std::size_t r = static_cast<std::size_t>((*sel)[k]);
                        const int y = (*labs)[r];
                        const double* pk = probs->data() + k * n;
                        double* dr = d.data() + r * n;
                        for (std::size_t j = 0; j < n; ++j) {
                            double delta = pk[j];
                            if (j == static_cast<std::size_t>(y)) delta -= 1.0;
                            dr[j] += go * invm * delta;
                        }
                    }
                });
}

Var Graph::sum_all(Var a) {
    check(a);
    const Tensor& ta = data(a.id);
    double s = 0.0;
    for (double x : ta.value) s += x;
    const bool rg = needs_grad(a);
    const int ia = a.id;
    return make(Tensor::scalar(s), rg, [ia](Graph& g, int self) {
        const double go = g.data(self).grad[0];
        std::vector<double>& d = g.grad_of(ia);
        for (double& x : d) x += go;
    });
}

Var Graph::edge_mean(Var x, const Hypergraph& h,
                     const std::vector<double>* node_scale) {
    check(x);
    const Tensor& tx = data(x.id);
    check_2d(tx, "edge_mean");
    if (tx.shape[0] != h.num_nodes())
        throw ShapeError("edge_mean: x rows " + tx.shape_string() +
                         " != num nodes (" + std::to_string(h.num_nodes()) + ")");
    if (node_scale && node_scale->size() != h.num_nodes())
        throw ShapeError("edge_mean: node_scale size mismatch");
    const std::size_t d = tx.shape[1];
    Tensor out = Tensor::zeros({h.num_edges(), d});
    for (std::size_t e = 0; e < h.num_edges(); ++e) {
        double* ze = out.value.data() + e * d;
        const auto& members = h.edge_members()[e];
        for (int j : members) {
            const double s = node_scale ? (*node_scale)[static_cast<std::size_t>(j)] : 1.0;
            const double* xr = tx.value.data() + static_cast<std::size_t>(j) * d;
            for (std::size_t c = 0; c < d; ++c) ze[c] += s * xr[c];
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        for (std::size_t c = 0; c < d; ++c) ze[c] *= inv;
    }
    const bool rg = needs_grad(x);
    const int ix = x.id;
    const Hypergraph* hp = &h;
    auto scale_copy = node_scale
                          ? std::make_shared<std::vector<double>>(*node_scale)
                          : std::shared_ptr<std::vector<double>>();
    return make(std::move(out), rg, [ix, hp, d, scale_copy](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        std::vector<double>& dx = g.grad_of(ix);
        for (std::size_t e = 0; e < hp->num_edges(); ++e) {
            const auto& members = hp->edge_members()[e];
            const double inv = 1.0 / static_cast<double>(members.size());
            const double* ge = gout.data() + e * d;
            for (int j : members) {
                const double s =
                    scale_copy ? (*scale_copy)[static_cast<std::size_t>(j)] : 1.0;
                double* dj = dx.data() + static_cast<std::size_t>(j) * d;
                for (std::size_t c = 0; c < d; ++c) dj[c] += s * inv * ge[c];
            }
        }
    });
}

Var Graph::incidence_gather(Var z, Var coeff, const Hypergraph& h) {
    check(z);
    check(coeff);
    const Tensor& tz = data(z.id);
    const Tensor& tc = data(coeff.id);
    check_2d(tz, "incidence_gather");
    if (tz.shape[0] != h.num_edges())
        throw ShapeError("incidence_gather: z rows " + tz.shape_string() +
                         " != num edges (" + std::to_string(h.num_edges()) + ")");
    if (tc.numel() != h.num_incidences())
        throw ShapeError("incidence_gather: coeff " + tc.shape_string() +
                         " != num incidences (" +
                         std::to_string(h.num_incidences()) + ")");
    const std::size_t d = tz.shape[1];
    const auto& off = h.incidence_offsets();
    const auto& inc = h.incidence_edges();
    Tensor out = Tensor::zeros({h.num_nodes(), d});
    for (std::size_t i = 0; i < h.num_nodes(); ++i) {
        double* yi = out.value.data() + i * d;
        for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
            const double c = tc.value[k];
            const double* ze = tz.value.data() + static_cast<std::size_t>(inc[k]) * d;
            for (std::size_t cc = 0; cc < d; ++cc) yi[cc] += c * ze[cc];
        }
    }
    const bool rg = needs_grad(z) || needs_grad(coeff);
    const int iz = z.id, ic = coeff.id;
    const Hypergraph* hp = &h;
    return make(std::move(out), rg, [iz, ic, hp, d](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        const std::vector<double>& zv = g.data(iz).value;
        const std::vector<double>& cv = g.data(ic).value;
        const auto& off = hp->incidence_offsets();
        const auto& inc = hp->incidence_edges();
        const bool need_z = g.nodes_[static_cast<std::size_t>(iz)].requires_grad;
        const bool need_c = g.nodes_[static_cast<std::size_t>(ic)].requires_grad;
        std::vector<double>* dz = need_z ? &g.grad_of(iz) : nullptr;
        std::vector<double>* dc = need_c ? &g.grad_of(ic) : nullptr;
        for (std::size_t i = 0; i < hp->num_nodes(); ++i) {
            const double* gi = gout.data() + i * d;
            for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
                const std::size_t e = static_cast<std::size_t>(inc[k]);
                if (dz) {
                    double* dze = dz->data() + e * d;
                    const double c = cv[k];
                    for (std::size_t cc = 0; cc < d; ++cc) dze[cc] += c * gi[cc];
                }
                if (dc) {
                    const double* ze = zv.data() + e * d;
                    double acc = 0.0;
                    for (std::size_t cc = 0; cc < d; ++cc) acc += ze[cc] * gi[cc];
                    (*dc)[k] += acc;
                }
            }
        }
    });
}

Var Graph::incidence_dot(Var x, Var z, const Hypergraph& h) {
    check(x);
    check(z);
    const Tensor& tx = data(x.id);
    const Tensor& tz = data(z.id);
    check_2d(tx, "incidence_dot");
    check_2d(tz, "incidence_dot");
    if (tx.shape[0] != h.num_nodes() || tz.shape[0] != h.num_edges() ||
        tx.shape[1] != tz.shape[1])
        throw ShapeError("incidence_dot: incompatible " + tx.shape_string() +
                         " and " + tz.shape_string());
    const std::size_t d = tx.shape[1];
    const auto& off = h.incidence_offsets();
    const auto& inc = h.incidence_edges();
    Tensor out = Tensor::zeros({h.num_incidences()});
    for (std::size_t i = 0; i < h.num_nodes(); ++i) {
        const double* xi = tx.value.data() + i * d;
        for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
            const double* ze = tz.value.data() + static_cast<std::size_t>(inc[k]) * d;
            double acc = 0.0;
            for (std::size_t cc = 0; cc < d; ++cc) acc += xi[cc] * ze[cc];
            out.value[k] = acc;
        }
    }
    const bool rg = needs_grad(x) || needs_grad(z);
    const int ix = x.id, iz = z.id;
    const Hypergraph* hp = &h;
    return make(std::move(out), rg, [ix, iz, hp, d](Graph& g, int self) {
        const std::vector<double>& gout = g.data(self).grad;
        const std::vector<double>& xv = g.data(ix).value;
        const std::vector<double>& zv = g.data(iz).value;
        const auto& off = hp->incidence_offsets();
        const auto& inc = hp->incidence_edges();
        const bool need_x = g.nodes_[static_cast<std::size_t>(ix)].requires_grad;
        const bool need_z = g.nodes_[static_cast<std::size_t>(iz)].requires_grad;
        std::vector<double>* dx = need_x ? &g.grad_of(ix) : nullptr;
        std::vector<double>* dz = need_z ? &g.grad_of(iz) : nullptr;
        for (std::size_t i = 0; i < hp->num_nodes(); ++i) {
            for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
                const double gk = gout[k];
                if (gk == 0.0) continue;
                const std::size_t e = static_cast<std::size_t>(inc[k]);
                if (dx) {
                    double* dxi = dx->data() + i * d;
                    const double* ze = zv.data() + e * d;
                    for (std::size_t cc = 0; cc < d; ++cc) dxi[cc] += gk * ze[cc];
                }
                if (dz) {
                    double* dze = dz->data() + e * d;
                    const double* xi = xv.data() + i * d;
                    for (std::size_t cc = 0; cc < d; ++cc) dze[cc] += gk * xi[cc];
                }
            }
        }
    });
}

Var Graph::propagate(Var x, const PropagationOperator& p) {
    check(x);
    const Tensor& tx = data(x.id);
    check_2d(tx, "propagate");
    Matrix y = p.apply(MatView(tx.value.data(), tx.shape[0], tx.shape[1]));
    Tensor out;
    out.shape = {y.rows, y.cols};
    out.value = std::move(y.v);
    const bool rg = needs_grad(x);
    const int ix = x.id;
    const PropagationOperator* pp = &p;
    return make(std::move(out), rg, [ix, pp](Graph& g, int self) {
        const Tensor& t = g.data(self);
        Matrix gy = pp->apply(MatView(t.grad.data(), t.shape[0], t.shape[1]));
        std::vector<double>& dx = g.grad_of(ix);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gy.v[i];
    });
}

void Graph::backward(Var loss) {
    check(loss);
    Tensor& lt = data(loss.id);
    if (lt.numel() != 1)
        throw ShapeError("backward: loss must be scalar, got " + lt.shape_string());
    if (!nodes_[static_cast<std::size_t>(loss.id)].requires_grad)
        throw ShapeError("backward: loss does not depend on any parameter");
    lt.ensure_grad();
    std::fill(lt.grad.begin(), lt.grad.end(), 0.0);
    lt.grad[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || !n.back) continue;
        Tensor& t = n.external ? *n.external : n.owned;
        if (t.grad.empty()) continue; // nothing flowed into this node
        n.back(*this, id);
    }
    nodes_.clear();
}

} // namespace hamp
