#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hamp/hypergraph.hpp"
#include "hamp/matrix.hpp"

namespace hamp {

// Dirichlet energy as the unnormalized clique-expansion double sum
//   E(x) = sum_e sum_{i,j in e} ||x_i - x_j||^2
// over ordered member pairs (i = j terms vanish). Computed per edge in
// O(|e| d) via 2(|e| sum ||x_i||^2 - ||sum x_i||^2).
double dirichlet_energy(const MatView& x, const Hypergraph& h);

// Diagnostic trace form tr(x^T (I - P) x); differs from dirichlet_energy by
// degree weighting and matches the propagation operator's spectrum instead.
double laplacian_energy(const MatView& x, const PropagationOperator& p);

struct GroupMoments {
    std::vector<std::vector<double>> group_means; // one d-vector per group
    std::vector<double> m2_sum;                   // sum_i ||x_i||^2 per group
    std::vector<double> m2_mean;                  // m2_sum / group size
    std::vector<std::size_t> group_sizes;
    // Centered second moments, summed over groups.
    double mhat2_sum = 0.0;  // sum_g sum_i ||x_i - mean_g||^2
    double mhat2_mean = 0.0; // sum_g (1/N_g) sum_i ||x_i - mean_g||^2
};

// groups[i] in [0, num_groups); every group must be non-empty.
GroupMoments second_moments(const MatView& x, const std::vector<int>& groups,
                            int num_groups);

// lambda = Mhat2 / ||mean_1 - mean_2||^2 with Mhat2 in the mean-form
// convention (the one whose decay bound closes). Requires exactly two
// groups; throws DegeneracyError when the mean gap is below 1e-12.
double separation_ratio(const MatView& x, const std::vector<int>& groups);

struct DecayFit {
    double rate = 0.0;      // slope of ln E per step (negative = decay)
    double r_squared = 1.0; // of the log-linear fit
    std::size_t used = 0;   // points entering the fit
    bool truncated = false; // hit a non-positive value inside the window
};

// Least-squares fit of ln(values) against step index over the trailing
// window_frac of the series. Non-positive entries end the usable window.
DecayFit decay_fit(const std::vector<double>& values, double window_frac = 0.8);

double accuracy(const MatView& logits, const std::vector<int>& labels,
                const std::vector<int>& idx);

// Lemma-style ceiling for the mean-form second moment under the two-group
// sign structure:  max{ (5 d_minus k + 2 delta) / delta * N''/N', M2(0) }.
// d_minus is the largest per-(node, edge) repulsive coefficient mass;
// delta must be positive (the bound is vacuous otherwise and this returns
// +infinity). m2_zero is the mean-form M2 of the initial state.
double m2_bound(const Hypergraph& h, double delta, double d_minus,
                std::size_t n_small, std::size_t n_large, double m2_zero);

struct TraceRecord {
    long step = 0;
    double energy = 0.0;
    double m2_sum = 0.0;
    double m2_mean = 0.0;
    double mhat2 = 0.0;  // mean form
    double lambda = 0.0; // NaN when undefined (gap collapse or no groups)
    double max_abs = 0.0;
};

// Per-step scalar observables of a trajectory. CSV header is fixed:
// step,E,M2_sum,M2_mean,Mhat2,lambda,max_abs
class EnergyTrace {
public:
    void record(long step, const MatView& x, const Hypergraph& h,
                const std::vector<int>* groups);
    void push(TraceRecord r) { records_.push_back(r); }

    const std::vector<TraceRecord>& records() const { return records_; }
    std::vector<double> energies() const;
    std::vector<double> lambdas() const;
    std::string csv() const;

private:
    std::vector<TraceRecord> records_;
};

} // namespace hamp
