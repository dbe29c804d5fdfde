#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hamp/hypergraph.hpp"
#include "hamp/matrix.hpp"
#include "hamp/metrics.hpp"
#include "hamp/rng.hpp"

namespace hamp {

enum class Activation { identity, tanh, relu };

// Scalar knobs shared by the first- and second-order integrators.
//   tau      step size
//   delta    bistable well strength
//   epsilon  noise gain (0 disables sampling entirely)
//   beta     pull toward the initial state
//   omega    self-decay against the aggregated message
//   gamma    repulsion cap: gate output range is [-gamma, 1]
struct DynamicsParams {
    double tau = 0.1;
    double total_time = 1.0;
    double delta = 0.0;
    double epsilon = 0.0;
    double beta = 0.0;
    double omega = 1.0;
    double gamma = 0.1;
    Activation activation = Activation::identity;

    long steps() const;
    void validate() const;
};

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// delta * (1 - p^2) * p, elementwise.
void allen_cahn_force(const MatView& x, double delta, Matrix& out);
double allen_cahn_force(double p, double delta);

// i.i.d. Gaussian entries, mean 0, stddev sqrt(tau): the discretized
// Brownian increment over one step.
Matrix brownian_increment(std::size_t rows, std::size_t cols, double tau,
                          Rng& rng);

// Aggregated interaction term: out = contribution of the hyperedge
// neighborhood, playing the role of the message pipeline in the plain
// (non-learned) simulation path.
class Interaction {
public:
    virtual ~Interaction() = default;
    virtual void apply(const MatView& x, Matrix& out) const = 0;
};

// No neighborhood term at all (pure local dynamics).
class ZeroInteraction : public Interaction {
public:
    void apply(const MatView& x, Matrix& out) const override;
};

// Gate clamped to the normalized propagation coefficients with unit
// self-mass: out = P x - x. One step of the first-order update with
// delta = epsilon = beta = omega = 0 and identity activation then equals a
// diffusion step, and with tau = 1 reproduces x <- P x.
class PropagationClampInteraction : public Interaction {
public:
    explicit PropagationClampInteraction(const PropagationOperator& p) : p_(&p) {}
    void apply(const MatView& x, Matrix& out) const override;

private:
    const PropagationOperator* p_;
};

// Pairwise signed coefficients from two-group structure: within hyperedge e,
// a same-group ordered pair (i, j) contributes +h^e_ij (x_j - x_i) and a
// cross-group pair contributes -gamma h^e_ij (x_j - x_i), where h^e_ij are
// the normalized propagation coefficients. Symmetric by construction and
// exactly the sign pattern the separation/second-moment analysis assumes.
class GroupSignInteraction : public Interaction {
public:
    GroupSignInteraction(const PropagationOperator& p, std::vector<int> groups,
                         double gamma);
    void apply(const MatView& x, Matrix& out) const override;

    // Largest per-(node, edge) repulsive coefficient mass, the d_minus that
    // enters the second-moment ceiling. Never exceeds gamma.
    double repulsive_mass() const { return d_minus_; }

private:
    const PropagationOperator* p_;
    std::vector<int> groups_;
    double gamma_;
    double d_minus_ = 0.0;
};

// Fixed precomputed aggregate, for step-fidelity tests.
class FixedInteraction : public Interaction {
public:
    explicit FixedInteraction(Matrix m) : m_(std::move(m)) {}
    void apply(const MatView& x, Matrix& out) const override;

private:
    Matrix m_;
};

struct NodeState {
    Matrix x;  // current features
    Matrix x0; // initial features (beta anchor)
    Matrix v;  // velocity, second-order mode only (empty otherwise)
    Matrix v0; // initial velocity
    bool second_order = false;
};

NodeState make_first_order_state(Matrix x0);
NodeState make_second_order_state(Matrix x0, Matrix v0);

// One explicit-Euler step of the first-order update:
//   X <- X + tau * act(I(X) - omega X + delta f(X) + (epsilon/tau) dB + beta X0)
// The noise enters so that with identity activation the realized increment
// is exactly epsilon * dB (Euler-Maruyama). epsilon = 0 draws nothing, so
// the deterministic and stochastic paths are bitwise identical.
// Throws DivergenceError (with the step index) on non-finite values.
void hamp1_step(NodeState& s, const Interaction& inter, const DynamicsParams& dp,
                Rng* rng, long step_index);

// Second-order variant: the pipeline consumes V,
//   V <- V + tau * act(I(V) - omega V + delta f(V) + (epsilon/tau) dB + beta V0)
//   X <- X + tau * V
void hamp2_step(NodeState& s, const Interaction& inter, const DynamicsParams& dp,
                Rng* rng, long step_index);

// Forward-Euler diffusion x <- x - tau (I - P) x; tau = 1 gives x <- P x.
void diffusion_step(Matrix& x, const PropagationOperator& p, double tau,
                    long step_index);

enum class Mode { hamp1, hamp2, diffusion };
Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct SimulateOptions {
    Mode mode = Mode::hamp1;
    long steps = 100;
    std::uint64_t seed = 0;
    const std::vector<int>* groups = nullptr; // enables two-group trace columns
    long snapshot_every = 0;                  // 0 disables snapshots
};

struct SimulateResult {
    Matrix x_final;
    EnergyTrace trace;               // steps + 1 records, step 0 first
    std::vector<std::pair<long, Matrix>> snapshots;
};

// Runs the chosen stepper for options.steps steps, recording the trace at
// step 0 and after every step. The interaction is ignored in diffusion mode.
SimulateResult simulate(const Hypergraph& h, const Matrix& x0,
                        const Interaction* inter, const PropagationOperator* p,
                        const DynamicsParams& dp, const SimulateOptions& options);

// Snapshot CSV: header step,node,f0..f{d-1}, one row per node per snapshot.
std::string snapshots_csv(const std::vector<std::pair<long, Matrix>>& snaps);

} // namespace hamp
