#include "hamp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hamp/errors.hpp"

namespace hamp {

double dirichlet_energy(const MatView& x, const Hypergraph& h) {
    if (x.rows != h.num_nodes())
        throw ShapeError("dirichlet_energy: x rows " + std::to_string(x.rows) +
                         " != num nodes " + std::to_string(h.num_nodes()));
    const std::size_t d = x.cols;
    double total = 0.0;
    std::vector<double> colsum(d);
    for (const auto& members : h.edge_members()) {
        std::fill(colsum.begin(), colsum.end(), 0.0);
        double sq = 0.0;
        for (int j : members) {
            const double* r = x.row(static_cast<std::size_t>(j));
            for (std::size_t c = 0; c < d; ++c) {
                colsum[c] += r[c];
                sq += r[c] * r[c];
            }
        }
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += colsum[c] * colsum[c];
        total += 2.0 * (static_cast<double>(members.size()) * sq - dot);
    }
    return total;
}

double laplacian_energy(const MatView& x, const PropagationOperator& p) {
    Matrix px = p.apply(x);
    double total = 0.0;
    for (std::size_t i = 0; i < px.v.size(); ++i)
        total += x.data[i] * (x.data[i] - px.v[i]);
    return total;
}

GroupMoments second_moments(const MatView& x, const std::vector<int>& groups,
                            int num_groups) {
    if (groups.size() != x.rows)
        throw ShapeError("second_moments: group labels " +
                         std::to_string(groups.size()) + " != rows " +
                         std::to_string(x.rows));
    if (num_groups <= 0) throw ValidationError("second_moments: no groups");
    const std::size_t d = x.cols;
    GroupMoments gm;
    gm.group_means.assign(static_cast<std::size_t>(num_groups),
                          std::vector<double>(d, 0.0));
    gm.m2_sum.assign(static_cast<std::size_t>(num_groups), 0.0);
    gm.m2_mean.assign(static_cast<std::size_t>(num_groups), 0.0);
    gm.group_sizes.assign(static_cast<std::size_t>(num_groups), 0);

    for (std::size_t i = 0; i < x.rows; ++i) {
        const int g = groups[i];
        if (g < 0 || g >= num_groups)
            throw ValidationError("second_moments: group id " + std::to_string(g) +
                                  " outside [0, " + std::to_string(num_groups) + ")");
        gm.group_sizes[static_cast<std::size_t>(g)]++;
        const double* r = x.row(i);
        auto& mean = gm.group_means[static_cast<std::size_t>(g)];
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            mean[c] += r[c];
            sq += r[c] * r[c];
        }
        gm.m2_sum[static_cast<std::size_t>(g)] += sq;
    }
    for (int g = 0; g < num_groups; ++g) {
        const std::size_t n = gm.group_sizes[static_cast<std::size_t>(g)];
        if (n == 0)
            throw ValidationError("second_moments: group " + std::to_string(g) +
                                  " is empty");
        for (double& c : gm.group_means[static_cast<std::size_t>(g)])
            c /= static_cast<double>(n);
        gm.m2_mean[static_cast<std::size_t>(g)] =
            gm.m2_sum[static_cast<std::size_t>(g)] / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < x.rows; ++i) {
        const std::size_t g = static_cast<std::size_t>(groups[i]);
        const double* r = x.row(i);
        const auto& mean = gm.group_means[g];
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double v = r[c] - mean[c];
            sq += v * v;
        }
        gm.mhat2_sum += sq;
        gm.mhat2_mean += sq / static_cast<double>(gm.group_sizes[g]);
    }
    return gm;
}

double separation_ratio(const MatView& x, const std::vector<int>& groups) {
    GroupMoments gm = second_moments(x, groups, 2);
    double gap = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) {
        const double v = gm.group_means[0][c] - gm.group_means[1][c];
        gap += v * v;
    }
    if (gap < 1e-12)
        throw DegeneracyError("separation_ratio: group means coincide (gap " +
                              std::to_string(gap) + ")");
    return gm.mhat2_mean / gap;
}

DecayFit decay_fit(const std::vector<double>& values, double window_frac) {
    DecayFit fit;
    if (values.empty()) return fit;
    window_frac = std::clamp(window_frac, 0.0, 1.0);
    const std::size_t n = values.size();
    std::size_t start = n - static_cast<std::size_t>(
                                std::ceil(window_frac * static_cast<double>(n)));
    if (start >= n) start = n - 1;

    std::vector<std::pair<double, double>> pts; // (step, ln E)
    for (std::size_t i = start; i < n; ++i) {
        if (!(values[i] > 0.0)) {
            fit.truncated = true;
            break;
        }
        pts.push_back({static_cast<double>(i), std::log(values[i])});
    }
    fit.used = pts.size();
    if (pts.size() < 2) return fit;

    double sx = 0.0, sy = 0.0;
    for (const auto& [px, py] : pts) {
        sx += px;
        sy += py;
    }
    const double mx = sx / static_cast<double>(pts.size());
    const double my = sy / static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [px, py] : pts) {
        sxx += (px - mx) * (px - mx);
        sxy += (px - mx) * (py - my);
        syy += (py - my) * (py - my);
    }
    fit.rate = sxy / sxx;
    // Constant series up to accumulation dust: a zero slope explains it all.
    const double dust = static_cast<double>(pts.size()) *
                        (1e-12 * (1.0 + std::abs(my))) *
                        (1e-12 * (1.0 + std::abs(my)));
    if (syy <= dust) {
        fit.r_squared = 1.0;
    } else {
        const double ss_res = syy - sxy * sxy / sxx;
        fit.r_squared = 1.0 - ss_res / syy;
    }
    return fit;
}

double accuracy(const MatView& logits, const std::vector<int>& labels,
                const std::vector<int>& idx) {
    if (labels.size() != logits.rows)
        throw ShapeError("accuracy: label count mismatch");
    if (idx.empty()) throw ValidationError("accuracy: empty index set");
    std::size_t hit = 0;
    for (int r : idx) {
        if (r < 0 || static_cast<std::size_t>(r) >= logits.rows)
            throw ValidationError("accuracy: index out of range");
        const double* row = logits.row(static_cast<std::size_t>(r));
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols; ++j)
            if (row[j] > row[best]) best = j;
        if (static_cast<int>(best) == labels[static_cast<std::size_t>(r)]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(idx.size());
}

double m2_bound(const Hypergraph& h, double delta, double d_minus,
                std::size_t n_small, std::size_t n_large, double m2_zero) {
    if (delta <= 0.0) return std::numeric_limits<double>::infinity();
    if (n_small == 0) throw ValidationError("m2_bound: empty group");
    const double k = static_cast<double>(h.degrees().max_node_degree);
    const double term = (5.0 * d_minus * k + 2.0 * delta) / delta *
                        (static_cast<double>(n_large) / static_cast<double>(n_small));
    return std::max(term, m2_zero);
}

void EnergyTrace::record(long step, const MatView& x, const Hypergraph& h,
                         const std::vector<int>* groups) {
    TraceRecord r;
    r.step = step;
    r.energy = dirichlet_energy(x, h);
    r.max_abs = 0.0;
    for (std::size_t i = 0; i < x.rows * x.cols; ++i)
        r.max_abs = std::max(r.max_abs, std::fabs(x.data[i]));
    if (groups) {
        GroupMoments gm = second_moments(x, *groups, 2);
        r.m2_sum = gm.m2_sum[0] + gm.m2_sum[1];
        r.m2_mean = gm.m2_mean[0] + gm.m2_mean[1];
        r.mhat2 = gm.mhat2_mean;
        double gap = 0.0;
        for (std::size_t c = 0; c < x.cols; ++c) {
            const double v = gm.group_means[0][c] - gm.group_means[1][c];
            gap += v * v;
        }
        r.lambda = gap < 1e-12 ? std::numeric_limits<double>::quiet_NaN()
                               : gm.mhat2_mean / gap;
    } else {
        double m2 = 0.0;
        for (std::size_t i = 0; i < x.rows * x.cols; ++i)
            m2 += x.data[i] * x.data[i];
        r.m2_sum = m2;
        r.m2_mean = x.rows ? m2 / static_cast<double>(x.rows) : 0.0;
        r.mhat2 = std::numeric_limits<double>::quiet_NaN();
        r.lambda = std::numeric_limits<double>::quiet_NaN();
    }
    records_.push_back(r);
}

std::vector<double> EnergyTrace::energies() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.energy);
    return out;
}

std::vector<double> EnergyTrace::lambdas() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.lambda);
    return out;
}

std::string EnergyTrace::csv() const {
    std::ostringstream ss;
    ss.precision(17);
    ss << "step,E,M2_sum,M2_mean,Mhat2,lambda,max_abs\n";
    for (const auto& r : records_) {
        ss << r.step << ',' << r.energy << ',' << r.m2_sum << ',' << r.m2_mean
           << ',' << r.mhat2 << ',' << r.lambda << ',' << r.max_abs << '\n';
    }
    return ss.str();
}

} // namespace hamp
