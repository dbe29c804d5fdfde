#pragma once

#include <optional>
#include <vector>

#include "hamp/autodiff.hpp"
#include "hamp/dynamics.hpp"
#include "hamp/optim.hpp"

namespace hamp {

// Learnable message-passing network around the particle update.
//
// Per step, the hyperedge pipeline computes
//   z_e   = mean_{j in e} T1(x_j)                 (node -> edge)
//   c_ie  = squash(<x_i * a, z_e> + b)            (signed gate, [-gamma, 1])
//   agg_i = sum_{e in E(i)} c_ie T2(z_e)          (edge -> node)
//   msg_i = Wx x_i + Wm agg_i + b                 (combiner)
// and the state update follows the first- or second-order particle rule.
// Diffusion mode replaces the pipeline with the propagation operator.
struct ModelConfig {
    Mode mode = Mode::hamp1;
    DynamicsParams dynamics;
    std::size_t in_dim = 0;
    std::size_t hidden_dim = 32;
    std::size_t num_classes = 2;
    std::size_t classifier_hidden_dim = 32;
    int classifier_layers = 1; // hidden layers; 0 = linear readout
    double dropout = 0.0;

    // Ablation toggles. repulsion off narrows the gate range to [0, 1];
    // allen_cahn off zeroes the well force; noise off skips sampling.
    bool repulsion_on = true;
    bool allen_cahn_on = true;
    bool noise_on = true;

    // Test hooks: identity combiner (msg = agg) and identity velocity map
    // (makes the second-order initial velocity exactly zero).
    bool identity_psi = false;
    bool identity_vel = false;

    void validate() const;
};

class Model {
public:
    Model(const ModelConfig& cfg, const Hypergraph& graph, std::uint64_t seed);

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }

    // Builds one forward pass on g and returns the logits var. training
    // enables dropout masks (drawn from mask_rng) and, in stochastic
    // configurations, the per-step noise (drawn from noise_rng). step_states,
    // when given, receives the node state after step 0..S.
    Var forward(Graph& g, const Tensor& x_raw, bool training, Rng* mask_rng,
                Rng* noise_rng, std::vector<Matrix>* step_states = nullptr);

private:
    Var pipeline(Graph& g, Var state, bool training, Rng* mask_rng);
    Var particle_force(Graph& g, Var state, Var anchor, bool training,
                       Rng* mask_rng, Rng* noise_rng);
    Var classifier(Graph& g, Var h, bool training, Rng* mask_rng);
    Var dropout_mask(Graph& g, Var h, Rng* mask_rng);

    ModelConfig cfg_;
    const Hypergraph* graph_;
    std::optional<PropagationOperator> prop_; // diffusion mode only
    ParamSet params_;
};

} // namespace hamp
