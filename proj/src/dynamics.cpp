#include "hamp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hamp/errors.hpp"

namespace hamp {

long DynamicsParams::steps() const {
    if (tau <= 0.0) throw ConfigError("tau must be positive");
    // ceil(T / tau) with a guard against 0.3/0.1 = 2.9999... artifacts.
    const double raw = total_time / tau;
    return std::max<long>(1, static_cast<long>(std::ceil(raw - 1e-9)));
}

void DynamicsParams::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau))
        throw ConfigError("tau must be positive and finite");
    if (!(total_time >= tau - 1e-12) || !std::isfinite(total_time))
        throw ConfigError("total_time must be >= tau and finite");
    if (delta < 0.0) throw ConfigError("delta must be >= 0");
    if (epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
    if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (!std::isfinite(delta) || !std::isfinite(epsilon) || !std::isfinite(beta) ||
        !std::isfinite(omega) || !std::isfinite(gamma))
        throw ConfigError("dynamics parameters must be finite");
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "' (want identity|tanh|relu)");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        default: return "relu";
    }
}

Mode mode_from_string(const std::string& s) {
    if (s == "hamp1") return Mode::hamp1;
    if (s == "hamp2") return Mode::hamp2;
    if (s == "diffusion") return Mode::diffusion;
    throw ConfigError("unknown mode '" + s + "' (want hamp1|hamp2|diffusion)");
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::hamp1: return "hamp1";
        case Mode::hamp2: return "hamp2";
        default: return "diffusion";
    }
}

double allen_cahn_force(double p, double delta) {
    return delta * (1.0 - p * p) * p;
}

void allen_cahn_force(const MatView& x, double delta, Matrix& out) {
    if (out.rows != x.rows || out.cols != x.cols) out = Matrix(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows * x.cols; ++i) {
        const double p = x.data[i];
        out.v[i] = delta * (1.0 - p * p) * p;
    }
}

Matrix brownian_increment(std::size_t rows, std::size_t cols, double tau,
                          Rng& rng) {
    if (tau <= 0.0) throw ConfigError("brownian_increment: tau must be positive");
    Matrix b(rows, cols);
    const double sd = std::sqrt(tau);
    for (double& x : b.v) x = sd * rng.normal();
    return b;
}

void ZeroInteraction::apply(const MatView& x, Matrix& out) const {
    if (out.rows != x.rows || out.cols != x.cols) out = Matrix(x.rows, x.cols);
    std::fill(out.v.begin(), out.v.end(), 0.0);
}

void PropagationClampInteraction::apply(const MatView& x, Matrix& out) const {
    p_->apply_into(x, out);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= x.data[i];
}

GroupSignInteraction::GroupSignInteraction(const PropagationOperator& p,
                                           std::vector<int> groups, double gamma)
    : p_(&p), groups_(std::move(groups)), gamma_(gamma) {
    const Hypergraph& h = p.graph();
    if (groups_.size() != h.num_nodes())
        throw ValidationError("group labels != num nodes");
    for (int g : groups_)
        if (g != 0 && g != 1)
            throw ValidationError("GroupSignInteraction expects groups in {0,1}");
    // d_minus = gamma * max_{i,e} sum_{j in e, cross} h^e_ij
    const auto& inv_sqrt = p.inv_sqrt_degree();
    double worst = 0.0;
    for (std::size_t e = 0; e < h.num_edges(); ++e) {
        const auto& members = h.edge_members()[e];
        const double we = h.edge_weights()[e];
        const double base = we / static_cast<double>(members.size());
        double mass[2] = {0.0, 0.0}; // sum of 1/sqrt(d_j) per group
        for (int j : members)
            mass[groups_[static_cast<std::size_t>(j)]] +=
                inv_sqrt[static_cast<std::size_t>(j)];
        for (int i : members) {
            const int gi = groups_[static_cast<std::size_t>(i)];
            const double cross = base * inv_sqrt[static_cast<std::size_t>(i)] *
                                 mass[1 - gi];
            worst = std::max(worst, cross);
        }
    }
    d_minus_ = gamma_ * worst;
}

void GroupSignInteraction::apply(const MatView& x, Matrix& out) const {
    const Hypergraph& h = p_->graph();
    if (x.rows != h.num_nodes())
        throw ShapeError("GroupSignInteraction: row count mismatch");
    const std::size_t d = x.cols;
    if (out.rows != x.rows || out.cols != d) out = Matrix(x.rows, d);
    std::fill(out.v.begin(), out.v.end(), 0.0);

    const auto& inv_sqrt = p_->inv_sqrt_degree();
    // Per edge, with s_j = x_j / sqrt(d_j) and q_g = sum_{j in group g} 1/sqrt(d_j):
    //   out_i += base/sqrt(d_i) * [ (S_same - q_same x_i)
    //                               - gamma (S_cross - q_cross x_i) ]
    std::vector<double> s0(d), s1(d);
    for (std::size_t e = 0; e < h.num_edges(); ++e) {
        const auto& members = h.edge_members()[e];
        const double we = h.edge_weights()[e];
        const double base = we / static_cast<double>(members.size());
        std::fill(s0.begin(), s0.end(), 0.0);
        std::fill(s1.begin(), s1.end(), 0.0);
        double q[2] = {0.0, 0.0};
        for (int j : members) {
            const std::size_t ju = static_cast<std::size_t>(j);
            const double w = inv_sqrt[ju];
            q[groups_[ju]] += w;
            const double* xr = x.row(ju);
            double* s = groups_[ju] == 0 ? s0.data() : s1.data();
            for (std::size_t c = 0; c < d; ++c) s[c] += w * xr[c];
        }
        for (int i : members) {
            const std::size_t iu = static_cast<std::size_t>(i);
            const int gi = groups_[iu];
            const double scale = base * inv_sqrt[iu];
            const double* same = gi == 0 ? s0.data() : s1.data();
            const double* cross = gi == 0 ? s1.data() : s0.data();
            const double q_same = q[gi], q_cross = q[1 - gi];
            const double* xr = x.row(iu);
            double* o = out.row(iu);
            for (std::size_t c = 0; c < d; ++c) {
                const double attract = same[c] - q_same * xr[c];
                const double repulse = cross[c] - q_cross * xr[c];
                o[c] += scale * (attract - gamma_ * repulse);
            }
        }
    }
}

void FixedInteraction::apply(const MatView& x, Matrix& out) const {
    if (m_.rows != x.rows || m_.cols != x.cols)
        throw ShapeError("FixedInteraction: stored " + shape_str(m_.rows, m_.cols) +
                         " vs state " + shape_str(x.rows, x.cols));
    out = m_;
}

NodeState make_first_order_state(Matrix x0) {
    NodeState s;
    s.x = x0;
    s.x0 = std::move(x0);
    return s;
}

NodeState make_second_order_state(Matrix x0, Matrix v0) {
    if (x0.rows != v0.rows || x0.cols != v0.cols)
        throw ShapeError("second-order state: x0 " + shape_str(x0.rows, x0.cols) +
                         " vs v0 " + shape_str(v0.rows, v0.cols));
    NodeState s;
    s.x = x0;
    s.x0 = std::move(x0);
    s.v = v0;
    s.v0 = std::move(v0);
    s.second_order = true;
    return s;
}

namespace {

void check_finite(const Matrix& m, long step, const char* what) {
    if (!m.all_finite())
        throw DivergenceError(step, std::string(what) + " became non-finite");
}

// force = I(y) - omega y + delta f(y) + (epsilon/tau) dB + beta y0
// target <- target_prev + tau * act(force), written into y for first order
// (y == target) or v for second order.
void integrate(Matrix& y, const Matrix& y0, const Interaction& inter,
               const DynamicsParams& dp, Rng* rng, long step_index) {
    static thread_local Matrix force;
    inter.apply(MatView(y), force);
    const std::size_t n = y.v.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double p = y.v[i];
        force.v[i] += -dp.omega * p + dp.delta * (1.0 - p * p) * p +
                      dp.beta * y0.v[i];
    }
    if (dp.epsilon > 0.0) {
        if (!rng)
            throw ConfigError("epsilon > 0 requires a noise source");
        const double scale = dp.epsilon / dp.tau;
        Matrix db = brownian_increment(y.rows, y.cols, dp.tau, *rng);
        for (std::size_t i = 0; i < n; ++i) force.v[i] += scale * db.v[i];
    }
    if (dp.activation == Activation::tanh) {
        for (std::size_t i = 0; i < n; ++i)
            y.v[i] += dp.tau * std::tanh(force.v[i]);
    } else if (dp.activation == Activation::relu) {
        for (std::size_t i = 0; i < n; ++i)
            y.v[i] += dp.tau * std::max(0.0, force.v[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) y.v[i] += dp.tau * force.v[i];
    }
    check_finite(y, step_index, "state");
}

} // namespace

void hamp1_step(NodeState& s, const Interaction& inter, const DynamicsParams& dp,
                Rng* rng, long step_index) {
    if (s.second_order)
        throw ConfigError("hamp1_step on a second-order state");
    integrate(s.x, s.x0, inter, dp, rng, step_index);
}

void hamp2_step(NodeState& s, const Interaction& inter, const DynamicsParams& dp,
                Rng* rng, long step_index) {
    if (!s.second_order)
        throw ConfigError("hamp2_step on a first-order state");
    integrate(s.v, s.v0, inter, dp, rng, step_index);
    for (std::size_t i = 0; i < s.x.v.size(); ++i)
        s.x.v[i] += dp.tau * s.v.v[i];
    check_finite(s.x, step_index, "position");
}

void diffusion_step(Matrix& x, const PropagationOperator& p, double tau,
                    long step_index) {
    static thread_local Matrix px;
    p.apply_into(MatView(x), px);
    for (std::size_t i = 0; i < x.v.size(); ++i)
        x.v[i] = (1.0 - tau) * x.v[i] + tau * px.v[i];
    check_finite(x, step_index, "state");
}

SimulateResult simulate(const Hypergraph& h, const Matrix& x0,
                        const Interaction* inter, const PropagationOperator* p,
                        const DynamicsParams& dp, const SimulateOptions& options) {
    dp.validate();
    if (x0.rows != h.num_nodes())
        throw ShapeError("simulate: x0 rows != num nodes");
    SimulateResult res;
    Rng rng(options.seed);

    NodeState state;
    if (options.mode == Mode::hamp2) {
        Matrix v0(x0.rows, x0.cols); // zero initial velocity in the plain path
        state = make_second_order_state(x0, std::move(v0));
    } else {
        state = make_first_order_state(x0);
    }

    auto snap = [&](long step) {
        if (options.snapshot_every > 0 && step % options.snapshot_every == 0)
            res.snapshots.push_back({step, state.x});
    };

    res.trace.record(0, MatView(state.x), h, options.groups);
    snap(0);
    for (long t = 1; t <= options.steps; ++t) {
        switch (options.mode) {
            case Mode::hamp1:
                if (!inter) throw ConfigError("hamp1 simulation needs an interaction");
                hamp1_step(state, *inter, dp, &rng, t);
                break;
            case Mode::hamp2:
                if (!inter) throw ConfigError("hamp2 simulation needs an interaction");
                hamp2_step(state, *inter, dp, &rng, t);
                break;
            case Mode::diffusion:
                if (!p) throw ConfigError("diffusion simulation needs the operator");
                diffusion_step(state.x, *p, dp.tau, t);
                break;
        }
        res.trace.record(t, MatView(state.x), h, options.groups);
        snap(t);
    }
    res.x_final = std::move(state.x);
    return res;
}

std::string snapshots_csv(const std::vector<std::pair<long, Matrix>>& snaps) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "step,node";
    const std::size_t d = snaps.empty() ? 0 : snaps.front().second.cols;
    for (std::size_t c = 0; c < d; ++c) ss << ",f" << c;
    ss << '\n';
    for (const auto& [step, m] : snaps) {
        for (std::size_t i = 0; i < m.rows; ++i) {
            ss << step << ',' << i;
            for (std::size_t c = 0; c < m.cols; ++c) ss << ',' << m.at(i, c);
            ss << '\n';
        }
    }
    return ss.str();
}

} // namespace hamp
