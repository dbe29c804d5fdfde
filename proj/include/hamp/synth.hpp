#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hamp/hypergraph.hpp"

namespace hamp {

enum class EdgeTag { attract, repulse };

// Planted two-group instance. Intra hyperedges draw members from one group
// (tagged attract), cross hyperedges mix both groups (tagged repulse); the
// tags feed the sign-structured interaction used by the theory checks.
struct SynthSpec {
    // Defaults are dense enough that uniform sampling covers every node with
    // good probability, so the connectivity retry loop converges quickly.
    std::size_t n1 = 50;
    std::size_t n2 = 50;
    std::size_t intra_edges = 50; // per group
    std::size_t intra_size = 4;
    std::size_t cross_edges = 15;
    std::size_t cross_size = 4;
    std::size_t dim = 4;
    double gap = 2.0;   // distance between the two group means along each axis
    double noise = 0.2; // per-coordinate feature stddev
    std::uint64_t seed = 0;
    bool ensure_connected = true;

    // When set, membership is built from whole-group partition rounds and
    // cross matchings instead of uniform sampling, making every node degree
    // equal (intra_rounds + cross_rounds). Group sizes must then be equal
    // and divisible by the respective edge share.
    bool regular = false;
    std::size_t intra_rounds = 2;
    std::size_t cross_rounds = 1;

    void validate() const;
};

struct SynthResult {
    LabeledDataset data;
    std::vector<int> groups;       // == labels, kept for clarity at call sites
    std::vector<EdgeTag> edge_tags;
};

SynthResult generate(const SynthSpec& spec);

// Writes hypergraph.txt, features.csv, labels.txt, train/val/test.txt,
// tags.txt and spec.json into dir (atomically, one file at a time).
void write_dataset(const std::filesystem::path& dir, const SynthResult& r,
                   const SynthSpec& spec);

// Loads what write_dataset produced; tags are optional.
SynthResult load_synth_dir(const std::filesystem::path& dir);

std::string tag_lines(const std::vector<EdgeTag>& tags);
std::vector<EdgeTag> read_tag_lines(const std::filesystem::path& path);

} // namespace hamp
