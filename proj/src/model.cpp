#include "hamp/model.hpp"

#include <cmath>

#include "hamp/errors.hpp"

namespace hamp {

void ModelConfig::validate() const {
    dynamics.validate();
    if (in_dim == 0) throw ConfigError("in_dim must be >= 1");
    if (hidden_dim == 0) throw ConfigError("hidden_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (classifier_layers < 0) throw ConfigError("classifier_layers must be >= 0");
    if (classifier_layers > 0 && classifier_hidden_dim == 0)
        throw ConfigError("classifier_hidden_dim must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ConfigError("dropout must be in [0, 1)");
}

namespace {

Tensor vector_init(std::size_t n, std::uint64_t seed, const std::string& name) {
    Tensor t = Tensor::zeros({n});
    Rng rng(substream_seed(seed, name));
    const double bound = std::sqrt(3.0 / static_cast<double>(n));
    for (double& x : t.value) x = rng.uniform(-bound, bound);
    return t;
}

Tensor identity_matrix(std::size_t n) {
    Tensor t = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.value[i * n + i] = 1.0;
    return t;
}

// A blown-up state would otherwise slip through downstream relu layers (NaN
// compares false, so relu maps it to 0) and yield a finite loss; check each
// unrolled step like the plain integrators do.
void check_state_finite(const Tensor& t, long step) {
    for (double v : t.value)
        if (!std::isfinite(v))
            throw DivergenceError(step, "non-finite state in the unroll");
}

} // namespace

Model::Model(const ModelConfig& cfg, const Hypergraph& graph, std::uint64_t seed)
    : cfg_(cfg), graph_(&graph) {
    cfg_.validate();
    if (cfg_.mode == Mode::diffusion) prop_.emplace(graph);

    const std::size_t h = cfg_.hidden_dim;
    params_.add("map.W", xavier_init(cfg_.in_dim, h, seed, "map.W"));
    params_.add("map.b", zeros_init(h));

    if (cfg_.mode != Mode::diffusion) {
        params_.add("phi1.W", xavier_init(h, h, seed, "phi1.W"));
        params_.add("phi1.b", zeros_init(h));
        params_.add("phi2.W", xavier_init(h, h, seed, "phi2.W"));
        params_.add("phi2.b", zeros_init(h));
        if (!cfg_.identity_psi) {
            params_.add("psi.Wx", xavier_init(h, h, seed, "psi.Wx"));
            params_.add("psi.Wm", xavier_init(h, h, seed, "psi.Wm"));
            params_.add("psi.b", zeros_init(h));
        }
        params_.add("gate.a", vector_init(h, seed, "gate.a"));
        // Positive bias starts the gate mostly attractive.
        Tensor gb = Tensor::scalar(2.0);
        params_.add("gate.b", std::move(gb));
        if (cfg_.mode == Mode::hamp2) {
            if (cfg_.identity_vel) {
                Tensor id = identity_matrix(h);
                Tensor& ref = params_.add("vel.W", std::move(id));
                ref.requires_grad = false; // pinned: keeps V(0) exactly zero
            } else {
                params_.add("vel.W", xavier_init(h, h, seed, "vel.W"));
            }
        }
    }

    std::size_t prev = h;
    for (int l = 0; l < cfg_.classifier_layers; ++l) {
        const std::string wl = "cls.W" + std::to_string(l);
        const std::string bl = "cls.b" + std::to_string(l);
        params_.add(wl, xavier_init(prev, cfg_.classifier_hidden_dim, seed, wl));
        params_.add(bl, zeros_init(cfg_.classifier_hidden_dim));
        prev = cfg_.classifier_hidden_dim;
    }
    params_.add("cls.out.W", xavier_init(prev, cfg_.num_classes, seed, "cls.out.W"));
    params_.add("cls.out.b", zeros_init(cfg_.num_classes));
}

Var Model::dropout_mask(Graph& g, Var h, Rng* mask_rng) {
    if (cfg_.dropout <= 0.0) return h;
    if (!mask_rng) throw ConfigError("dropout requires a mask rng in training");
    const Tensor& t = g.value(h);
    Tensor mask = Tensor::zeros(t.shape);
    const double keep = 1.0 - cfg_.dropout;
    for (double& x : mask.value)
        x = mask_rng->uniform() < keep ? 1.0 / keep : 0.0;
    return g.mul(h, g.constant(std::move(mask)));
}

Var Model::pipeline(Graph& g, Var state, bool training, Rng* mask_rng) {
    ParamSet& ps = params_;
    Var w1 = g.leaf(ps.at("phi1.W"));
    Var b1 = g.leaf(ps.at("phi1.b"));
    Var w2 = g.leaf(ps.at("phi2.W"));
    Var b2 = g.leaf(ps.at("phi2.b"));
    Var ga = g.leaf(ps.at("gate.a"));
    Var gb = g.leaf(ps.at("gate.b"));

    Var t1 = g.add_rowvec(g.matmul(state, w1), b1);
    if (training) t1 = dropout_mask(g, t1, mask_rng);
    Var z = g.edge_mean(t1, *graph_);

    // Signed per-incidence gate from the (node state, edge message) pair.
    Var score = g.incidence_dot(g.mul_rowvec(state, ga), z, *graph_);
    Var squashed = g.sigmoid(g.add_scalar(score, gb));
    const double gamma = cfg_.repulsion_on ? cfg_.dynamics.gamma : 0.0;
    Var coeff = g.affine(squashed, 1.0 + gamma, -gamma);

    Var t2 = g.add_rowvec(g.matmul(z, w2), b2);
    if (training) t2 = dropout_mask(g, t2, mask_rng);
    Var agg = g.incidence_gather(t2, coeff, *graph_);
    if (cfg_.identity_psi) return agg;

    Var wx = g.leaf(ps.at("psi.Wx"));
    Var wm = g.leaf(ps.at("psi.Wm"));
    Var bp = g.leaf(ps.at("psi.b"));
    return g.add_rowvec(g.add(g.matmul(state, wx), g.matmul(agg, wm)), bp);
}

Var Model::particle_force(Graph& g, Var state, Var anchor, bool training,
                          Rng* mask_rng, Rng* noise_rng) {
    const DynamicsParams& dp = cfg_.dynamics;
    Var force = pipeline(g, state, training, mask_rng);
    if (dp.omega != 0.0) force = g.sub(force, g.scale(state, dp.omega));
    if (cfg_.allen_cahn_on && dp.delta > 0.0)
        force = g.add(force, g.scale(g.allen_cahn(state), dp.delta));
    if (dp.beta != 0.0) force = g.add(force, g.scale(anchor, dp.beta));
    if (training && cfg_.noise_on && dp.epsilon > 0.0) {
        if (!noise_rng) throw ConfigError("stochastic training needs a noise rng");
        const Tensor& t = g.value(state);
        Tensor noise = Tensor::zeros(t.shape);
        // Scaled so the realized increment is epsilon * dB under identity
        // activation (Euler-Maruyama).
        const double sd = std::sqrt(dp.tau) * dp.epsilon / dp.tau;
        for (double& x : noise.value) x = sd * noise_rng->normal();
        force = g.add(force, g.constant(std::move(noise)));
    }
    if (dp.activation == Activation::tanh) force = g.tanh_act(force);
    else if (dp.activation == Activation::relu) force = g.relu(force);
    return force;
}

Var Model::forward(Graph& g, const Tensor& x_raw, bool training, Rng* mask_rng,
                   Rng* noise_rng, std::vector<Matrix>* step_states) {
    ParamSet& ps = params_;
    if (x_raw.rank() != 2 || x_raw.shape[0] != graph_->num_nodes())
        throw ShapeError("forward: features " + x_raw.shape_string() +
                         " do not match node count " +
                         std::to_string(graph_->num_nodes()));

    Var raw = g.constant(x_raw);
    Var x = g.add_rowvec(g.matmul(raw, g.leaf(ps.at("map.W"))),
                         g.leaf(ps.at("map.b")));
    Var x0 = x;
    const long steps = cfg_.dynamics.steps();
    const double tau = cfg_.dynamics.tau;

    auto record = [&](Var v) {
        if (step_states) step_states->push_back(g.value(v).to_matrix());
    };
    check_state_finite(g.value(x), 0);
    record(x);

    if (cfg_.mode == Mode::diffusion) {
        for (long t = 0; t < steps; ++t) {
            x = g.add(g.scale(x, 1.0 - tau), g.scale(g.propagate(x, *prop_), tau));
            check_state_finite(g.value(x), t + 1);
            record(x);
        }
    } else if (cfg_.mode == Mode::hamp1) {
        for (long t = 0; t < steps; ++t) {
            Var force = particle_force(g, x, x0, training, mask_rng, noise_rng);
            x = g.add(x, g.scale(force, tau));
            check_state_finite(g.value(x), t + 1);
            record(x);
        }
    } else {
        Var v = g.sub(g.matmul(x0, g.leaf(ps.at("vel.W"))), x0);
        Var v0 = v;
        for (long t = 0; t < steps; ++t) {
            Var force = particle_force(g, v, v0, training, mask_rng, noise_rng);
            v = g.add(v, g.scale(force, tau));
            x = g.add(x, g.scale(v, tau));
            check_state_finite(g.value(v), t + 1);
            check_state_finite(g.value(x), t + 1);
            record(x);
        }
    }
    return classifier(g, x, training, mask_rng);
}

Var Model::classifier(Graph& g, Var h, bool training, Rng* mask_rng) {
    ParamSet& ps = params_;
    Var cur = h;
    for (int l = 0; l < cfg_.classifier_layers; ++l) {
        Var w = g.leaf(ps.at("cls.W" + std::to_string(l)));
        Var b = g.leaf(ps.at("cls.b" + std::to_string(l)));
        cur = g.relu(g.add_rowvec(g.matmul(cur, w), b));
        if (training) cur = dropout_mask(g, cur, mask_rng);
    }
    Var w = g.leaf(ps.at("cls.out.W"));
    Var b = g.leaf(ps.at("cls.out.b"));
    return g.add_rowvec(g.matmul(cur, w), b);
}

} // namespace hamp
