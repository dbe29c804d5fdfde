#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hamp/matrix.hpp"

namespace hamp {

struct DegreeInfo {
    std::vector<int> node_degrees; // |E(i)| per node
    std::vector<int> edge_sizes;   // |e| per hyperedge
    int max_node_degree = 0;       // k in the second-moment bound
};

// Immutable hypergraph. Construct through from_edges(), which validates
// member indices, forbids empty hyperedges and duplicate members, and builds
// the node->edge transpose plus a flattened CSR layout over incidences used
// by the message-passing kernels.
class Hypergraph {
public:
    Hypergraph() = default; // empty graph; populate through from_edges()

    static Hypergraph from_edges(std::size_t num_nodes,
                                 std::vector<std::vector<int>> edge_members,
                                 std::vector<double> edge_weights = {});

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t num_edges() const { return edge_members_.size(); }

    const std::vector<std::vector<int>>& edge_members() const { return edge_members_; }
    const std::vector<std::vector<int>>& node_memberships() const { return node_memberships_; }
    const std::vector<double>& edge_weights() const { return edge_weights_; }

    const DegreeInfo& degrees() const { return degrees_; }

    // Incidences in node-major CSR order: for node i, the edges containing it
    // occupy [incidence_offsets[i], incidence_offsets[i+1]) of incidence_edges.
    const std::vector<std::size_t>& incidence_offsets() const { return incidence_offsets_; }
    const std::vector<int>& incidence_edges() const { return incidence_edges_; }
    std::size_t num_incidences() const { return incidence_edges_.size(); }

    bool is_connected() const;

    // Re-checks every construction invariant; throws ValidationError.
    void validate() const;

private:

    std::size_t num_nodes_ = 0;
    std::vector<std::vector<int>> edge_members_;
    std::vector<std::vector<int>> node_memberships_;
    std::vector<double> edge_weights_;
    DegreeInfo degrees_;
    std::vector<std::size_t> incidence_offsets_;
    std::vector<int> incidence_edges_;
};

struct Split {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

struct LabeledDataset {
    Hypergraph graph;
    Matrix features;              // num_nodes x d, may be empty (0x0)
    std::vector<int> labels;      // empty when unlabeled
    Split split;                  // empty vectors when no split supplied
    int num_classes = 0;

    bool has_features() const { return features.rows > 0; }
    bool has_labels() const { return !labels.empty(); }
    void validate() const;
};

// Text format: first line "N M", then M lines "e: i1 i2 ... ik" with
// zero-based node ids and e the zero-based hyperedge id.
Hypergraph load_hypergraph(const std::filesystem::path& path);
std::string hypergraph_text(const Hypergraph& h);

struct DatasetPaths {
    std::filesystem::path hypergraph;
    std::optional<std::filesystem::path> features;
    std::optional<std::filesystem::path> labels;
    std::optional<std::filesystem::path> train_split;
    std::optional<std::filesystem::path> val_split;
    std::optional<std::filesystem::path> test_split;
};

LabeledDataset load_dataset(const DatasetPaths& paths);

enum class IsolatedPolicy { reject, self_loop };

// Symmetric normalized propagation operator held in factored form; apply()
// runs the two sparse incidence passes instead of materializing an N x N
// matrix. to_dense() is for small-instance inspection and test oracles.
class PropagationOperator {
public:
    PropagationOperator(const Hypergraph& h,
                        IsolatedPolicy policy = IsolatedPolicy::reject);

    // y = P x for row-major x (num_nodes x d).
    Matrix apply(const MatView& x) const;
    void apply_into(const MatView& x, Matrix& out) const;

    Matrix to_dense() const;

    std::size_t num_nodes() const { return h_->num_nodes(); }
    const Hypergraph& graph() const { return *h_; }

    // 1/sqrt(degree) per node; isolated nodes under self_loop get 1.
    const std::vector<double>& inv_sqrt_degree() const { return inv_sqrt_deg_; }

private:
    const Hypergraph* h_;
    IsolatedPolicy policy_;
    std::vector<double> inv_sqrt_deg_;
    std::vector<bool> isolated_;
};

// Fraction of same-label pairs among all co-hyperedge pairs. Pairs are
// counted once per hyperedge that contains them (multiplicity), or once
// globally with dedupe=true. Vacuous when no hyperedge has >= 2 members;
// returns 1.0 in that case since every existing pair (none) is pure.
double ce_homophily(const Hypergraph& h, const std::vector<int>& labels,
                    bool dedupe = false);

} // namespace hamp
