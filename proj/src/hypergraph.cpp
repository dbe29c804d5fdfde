#include "hamp/hypergraph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "hamp/errors.hpp"
#include "hamp/io.hpp"

namespace hamp {

Hypergraph Hypergraph::from_edges(std::size_t num_nodes,
                                  std::vector<std::vector<int>> edge_members,
                                  std::vector<double> edge_weights) {
    Hypergraph h;
    h.num_nodes_ = num_nodes;
    h.edge_members_ = std::move(edge_members);
    if (edge_weights.empty()) {
        h.edge_weights_.assign(h.edge_members_.size(), 1.0);
    } else {
        if (edge_weights.size() != h.edge_members_.size())
            throw ValidationError("edge weight count " +
                                  std::to_string(edge_weights.size()) +
                                  " != edge count " +
                                  std::to_string(h.edge_members_.size()));
        h.edge_weights_ = std::move(edge_weights);
    }

    h.node_memberships_.assign(num_nodes, {});
    for (std::size_t e = 0; e < h.edge_members_.size(); ++e) {
        const auto& members = h.edge_members_[e];
        if (members.empty())
            throw ValidationError("hyperedge " + std::to_string(e) + " is empty");
        std::set<int> seen;
        for (int i : members) {
            if (i < 0 || static_cast<std::size_t>(i) >= num_nodes)
                throw ValidationError("hyperedge " + std::to_string(e) +
                                      " references node " + std::to_string(i) +
                                      " outside [0, " + std::to_string(num_nodes) + ")");
            if (!seen.insert(i).second)
                throw ValidationError("hyperedge " + std::to_string(e) +
                                      " lists node " + std::to_string(i) + " twice");
            h.node_memberships_[i].push_back(static_cast<int>(e));
        }
        if (h.edge_weights_[e] <= 0.0 || !std::isfinite(h.edge_weights_[e]))
            throw ValidationError("hyperedge " + std::to_string(e) +
                                  " has non-positive weight");
    }

    h.degrees_.node_degrees.resize(num_nodes);
    h.degrees_.edge_sizes.resize(h.edge_members_.size());
    for (std::size_t i = 0; i < num_nodes; ++i)
        h.degrees_.node_degrees[i] = static_cast<int>(h.node_memberships_[i].size());
    for (std::size_t e = 0; e < h.edge_members_.size(); ++e)
        h.degrees_.edge_sizes[e] = static_cast<int>(h.edge_members_[e].size());
    h.degrees_.max_node_degree = 0;
    for (int d : h.degrees_.node_degrees)
        h.degrees_.max_node_degree = std::max(h.degrees_.max_node_degree, d);

    h.incidence_offsets_.resize(num_nodes + 1, 0);
    for (std::size_t i = 0; i < num_nodes; ++i)
        h.incidence_offsets_[i + 1] =
            h.incidence_offsets_[i] + h.node_memberships_[i].size();
    h.incidence_edges_.reserve(h.incidence_offsets_.back());
    for (std::size_t i = 0; i < num_nodes; ++i)
        for (int e : h.node_memberships_[i]) h.incidence_edges_.push_back(e);

    return h;
}

void Hypergraph::validate() const {
    if (node_memberships_.size() != num_nodes_)
        throw ValidationError("membership table size mismatch");
    // Transpose consistency both ways.
    for (std::size_t e = 0; e < edge_members_.size(); ++e) {
        for (int i : edge_members_[e]) {
            if (i < 0 || static_cast<std::size_t>(i) >= num_nodes_)
                throw ValidationError("node index out of range");
            const auto& ms = node_memberships_[static_cast<std::size_t>(i)];
            if (std::find(ms.begin(), ms.end(), static_cast<int>(e)) == ms.end())
                throw ValidationError("transpose missing (" + std::to_string(i) +
                                      ", " + std::to_string(e) + ")");
        }
    }
    for (std::size_t i = 0; i < num_nodes_; ++i) {
        for (int e : node_memberships_[i]) {
            const auto& ms = edge_members_[static_cast<std::size_t>(e)];
            if (std::find(ms.begin(), ms.end(), static_cast<int>(i)) == ms.end())
                throw ValidationError("transpose extra (" + std::to_string(i) +
                                      ", " + std::to_string(e) + ")");
        }
    }
}

bool Hypergraph::is_connected() const {
    if (num_nodes_ == 0) return true;
    std::vector<char> node_seen(num_nodes_, 0), edge_seen(num_edges(), 0);
    std::queue<int> q;
    q.push(0);
    node_seen[0] = 1;
    std::size_t visited = 1;
    while (!q.empty()) {
        int i = q.front();
        q.pop();
        for (int e : node_memberships_[static_cast<std::size_t>(i)]) {
            if (edge_seen[static_cast<std::size_t>(e)]) continue;
            edge_seen[static_cast<std::size_t>(e)] = 1;
            for (int j : edge_members_[static_cast<std::size_t>(e)]) {
                if (!node_seen[static_cast<std::size_t>(j)]) {
                    node_seen[static_cast<std::size_t>(j)] = 1;
                    ++visited;
                    q.push(j);
                }
            }
        }
    }
    return visited == num_nodes_;
}

void LabeledDataset::validate() const {
    graph.validate();
    if (has_features() && features.rows != graph.num_nodes())
        throw ValidationError("feature rows " + std::to_string(features.rows) +
                              " != num nodes " + std::to_string(graph.num_nodes()));
    if (has_labels()) {
        if (labels.size() != graph.num_nodes())
            throw ValidationError("label count " + std::to_string(labels.size()) +
                                  " != num nodes " + std::to_string(graph.num_nodes()));
        for (int y : labels)
            if (y < 0 || y >= num_classes)
                throw ValidationError("label " + std::to_string(y) +
                                      " outside [0, " + std::to_string(num_classes) + ")");
    }
    auto check_split = [&](const std::vector<int>& idx, const char* name) {
        for (int i : idx)
            if (i < 0 || static_cast<std::size_t>(i) >= graph.num_nodes())
                throw ValidationError(std::string(name) + " split index " +
                                      std::to_string(i) + " out of range");
    };
    check_split(split.train, "train");
    check_split(split.val, "val");
    check_split(split.test, "test");
}

Hypergraph load_hypergraph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    long lineno = 0;

    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };

    if (!next_line()) throw ParseError(path.string(), 1, "missing header line");
    std::istringstream head(line);
    long n = -1, m = -1;
    if (!(head >> n >> m) || n < 0 || m < 0)
        throw ParseError(path.string(), lineno, "header must be 'N M'");
    std::string extra;
    if (head >> extra)
        throw ParseError(path.string(), lineno, "trailing content in header");

    std::vector<std::vector<int>> edges(static_cast<std::size_t>(m));
    for (long e = 0; e < m; ++e) {
        if (!next_line())
            throw ParseError(path.string(), lineno + 1,
                             "expected " + std::to_string(m) + " hyperedge lines, got " +
                                 std::to_string(e));
        std::size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw ParseError(path.string(), lineno, "missing ':' in hyperedge line");
        std::istringstream id_part(line.substr(0, colon));
        long eid = -1;
        if (!(id_part >> eid) || (id_part >> extra) || eid != e)
            throw ParseError(path.string(), lineno,
                             "hyperedge id must be " + std::to_string(e));
        std::istringstream members(line.substr(colon + 1));
        long v = 0;
        while (members >> v) {
            if (v < 0 || v >= n)
                throw ParseError(path.string(), lineno,
                                 "node id " + std::to_string(v) + " outside [0, " +
                                     std::to_string(n) + ")");
            edges[static_cast<std::size_t>(e)].push_back(static_cast<int>(v));
        }
        if (!members.eof())
            throw ParseError(path.string(), lineno, "bad node id token");
        if (edges[static_cast<std::size_t>(e)].empty())
            throw ParseError(path.string(), lineno, "hyperedge has no members");
    }
    if (next_line())
        throw ParseError(path.string(), lineno, "unexpected content after last hyperedge");

    try {
        return Hypergraph::from_edges(static_cast<std::size_t>(n), std::move(edges));
    } catch (const ValidationError& err) {
        throw ParseError(path.string(), lineno, err.what());
    }
}

std::string hypergraph_text(const Hypergraph& h) {
    std::ostringstream ss;
    ss << h.num_nodes() << ' ' << h.num_edges() << '\n';
    for (std::size_t e = 0; e < h.num_edges(); ++e) {
        ss << e << ':';
        for (int i : h.edge_members()[e]) ss << ' ' << i;
        ss << '\n';
    }
    return ss.str();
}

LabeledDataset load_dataset(const DatasetPaths& paths) {
    LabeledDataset ds;
    ds.graph = load_hypergraph(paths.hypergraph);
    if (paths.features) ds.features = io::read_csv_matrix(*paths.features);
    if (paths.labels) {
        ds.labels = io::read_int_lines(*paths.labels);
        int max_label = -1;
        for (int y : ds.labels) max_label = std::max(max_label, y);
        ds.num_classes = max_label + 1;
    }
    if (paths.train_split) ds.split.train = io::read_int_lines(*paths.train_split);
    if (paths.val_split) ds.split.val = io::read_int_lines(*paths.val_split);
    if (paths.test_split) ds.split.test = io::read_int_lines(*paths.test_split);
    ds.validate();
    return ds;
}

PropagationOperator::PropagationOperator(const Hypergraph& h, IsolatedPolicy policy)
    : h_(&h), policy_(policy) {
    const auto& deg = h.degrees();
    inv_sqrt_deg_.resize(h.num_nodes());
    isolated_.resize(h.num_nodes(), false);
    for (std::size_t i = 0; i < h.num_nodes(); ++i) {
        double d = 0.0;
        // Weighted degree: sum of weights of incident edges.
        for (int e : h.node_memberships()[i])
            d += h.edge_weights()[static_cast<std::size_t>(e)];
        if (deg.node_degrees[i] == 0) {
            if (policy == IsolatedPolicy::reject)
                throw DegeneracyError("node " + std::to_string(i) +
                                      " is isolated; propagation operator undefined");
            isolated_[i] = true;
            inv_sqrt_deg_[i] = 1.0; // behaves like a singleton self-edge
        } else {
            inv_sqrt_deg_[i] = 1.0 / std::sqrt(d);
        }
    }
}

void PropagationOperator::apply_into(const MatView& x, Matrix& out) const {
    const Hypergraph& h = *h_;
    if (x.rows != h.num_nodes())
        throw ShapeError("propagation apply: x rows " + std::to_string(x.rows) +
                         " != num nodes " + std::to_string(h.num_nodes()));
    const std::size_t d = x.cols;
    if (out.rows != x.rows || out.cols != d) out = Matrix(x.rows, d);
    std::fill(out.v.begin(), out.v.end(), 0.0);

    // Pass 1, nodes to edges: z_e = (1/|e|) sum_j x_j / sqrt(deg_j).
    // Pass 2, edges to nodes: y_i = (1/sqrt(deg_i)) sum_{e in E(i)} w_e z_e.
    static thread_local std::vector<double> edge_buf;
    edge_buf.assign(h.num_edges() * d, 0.0);
    for (std::size_t e = 0; e < h.num_edges(); ++e) {
        const auto& members = h.edge_members()[e];
        double* ze = edge_buf.data() + e * d;
        for (int j : members) {
            const double s = inv_sqrt_deg_[static_cast<std::size_t>(j)];
            const double* xr = x.row(static_cast<std::size_t>(j));
            for (std::size_t c = 0; c < d; ++c) ze[c] += s * xr[c];
        }
        const double inv_size = 1.0 / static_cast<double>(members.size());
        for (std::size_t c = 0; c < d; ++c) ze[c] *= inv_size;
    }
    for (std::size_t i = 0; i < h.num_nodes(); ++i) {
        double* yr = out.row(i);
        if (isolated_[i]) {
            // Singleton self-edge: identity row.
            const double* xr = x.row(i);
            for (std::size_t c = 0; c < d; ++c) yr[c] = xr[c];
            continue;
        }
        const double s = inv_sqrt_deg_[i];
        for (int e : h.node_memberships()[i]) {
            const double we = h.edge_weights()[static_cast<std::size_t>(e)];
            const double* ze = edge_buf.data() + static_cast<std::size_t>(e) * d;
            for (std::size_t c = 0; c < d; ++c) yr[c] += s * we * ze[c];
        }
    }
}

Matrix PropagationOperator::apply(const MatView& x) const {
    Matrix out;
    apply_into(x, out);
    return out;
}

Matrix PropagationOperator::to_dense() const {
    const Hypergraph& h = *h_;
    const std::size_t n = h.num_nodes();
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i)
        if (isolated_[i]) p.at(i, i) = 1.0;
    for (std::size_t e = 0; e < h.num_edges(); ++e) {
        const auto& members = h.edge_members()[e];
        const double scale =
            h.edge_weights()[e] / static_cast<double>(members.size());
        for (int i : members)
            for (int j : members) {
                const std::size_t iu = static_cast<std::size_t>(i);
                const std::size_t ju = static_cast<std::size_t>(j);
                // (s_i * s_j) first: multiplication commutes bitwise, so the
                // assembled matrix is exactly symmetric.
                p.at(iu, ju) += scale * (inv_sqrt_deg_[iu] * inv_sqrt_deg_[ju]);
            }
    }
    return p;
}

double ce_homophily(const Hypergraph& h, const std::vector<int>& labels,
                    bool dedupe) {
    if (labels.size() != h.num_nodes())
        throw ValidationError("label count mismatch in ce_homophily");
    long double same = 0.0, total = 0.0;
    if (!dedupe) {
        for (const auto& members : h.edge_members()) {
            if (members.size() < 2) continue;
            std::map<int, long> counts;
            for (int i : members) counts[labels[static_cast<std::size_t>(i)]]++;
            const long s = static_cast<long>(members.size());
            total += static_cast<long double>(s) * (s - 1) / 2.0L;
            for (const auto& [lab, c] : counts)
                same += static_cast<long double>(c) * (c - 1) / 2.0L;
        }
    } else {
        std::set<std::pair<int, int>> pairs;
        for (const auto& members : h.edge_members())
            for (std::size_t a = 0; a < members.size(); ++a)
                for (std::size_t b = a + 1; b < members.size(); ++b)
                    pairs.insert({std::min(members[a], members[b]),
                                  std::max(members[a], members[b])});
        total = static_cast<long double>(pairs.size());
        for (const auto& [i, j] : pairs)
            if (labels[static_cast<std::size_t>(i)] ==
                labels[static_cast<std::size_t>(j)])
                same += 1.0L;
    }
    if (total == 0.0L) return 1.0; // no co-hyperedge pairs at all
    return static_cast<double>(same / total);
}

} // namespace hamp
