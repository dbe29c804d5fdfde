#include "hamp/synth.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hamp/errors.hpp"
#include "hamp/io.hpp"
#include "hamp/rng.hpp"

namespace hamp {

void SynthSpec::validate() const {
    if (n1 < 2 || n2 < 2) throw ConfigError("groups need at least 2 nodes each");
    if (dim == 0) throw ConfigError("dim must be >= 1");
    if (noise < 0.0) throw ConfigError("noise must be >= 0");
    if (!regular) {
        if (intra_size < 2)
            throw ConfigError("intra_size must be >= 2");
        if (intra_size > std::min(n1, n2))
            throw ConfigError("intra_size exceeds a group size");
        if (cross_edges > 0 && cross_size < 2)
            throw ConfigError("cross_size must be >= 2");
        if (cross_size > n1 + n2) throw ConfigError("cross_size exceeds node count");
    } else {
        if (n1 != n2)
            throw ConfigError("regular construction needs equal group sizes");
        if (intra_size < 2 || n1 % intra_size != 0)
            throw ConfigError("regular construction needs group size divisible "
                              "by intra_size");
        if (cross_rounds > 0) {
            if (cross_size < 2 || cross_size % 2 != 0)
                throw ConfigError("regular construction needs even cross_size");
            if (n1 % (cross_size / 2) != 0)
                throw ConfigError("regular construction needs group size divisible "
                                  "by cross_size/2");
        }
    }
}

namespace {

// First k entries of a partial Fisher-Yates shuffle over pool.
std::vector<int> sample_without_replacement(std::vector<int>& pool, std::size_t k,
                                            Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    return std::vector<int>(pool.begin(), pool.begin() + static_cast<long>(k));
}

void shuffle_all(std::vector<int>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.index(i)]);
}

struct Built {
    std::vector<std::vector<int>> edges;
    std::vector<EdgeTag> tags;
};

Built build_uniform(const SynthSpec& spec, Rng& rng) {
    Built b;
    std::vector<int> g0(spec.n1), g1(spec.n2), all(spec.n1 + spec.n2);
    std::iota(g0.begin(), g0.end(), 0);
    std::iota(g1.begin(), g1.end(), static_cast<int>(spec.n1));
    std::iota(all.begin(), all.end(), 0);

    for (std::size_t e = 0; e < spec.intra_edges; ++e) {
        b.edges.push_back(sample_without_replacement(g0, spec.intra_size, rng));
        b.tags.push_back(EdgeTag::attract);
    }
    for (std::size_t e = 0; e < spec.intra_edges; ++e) {
        b.edges.push_back(sample_without_replacement(g1, spec.intra_size, rng));
        b.tags.push_back(EdgeTag::attract);
    }
    for (std::size_t e = 0; e < spec.cross_edges; ++e) {
        // Balanced mix; an odd size gives the extra member to a random side.
        std::size_t a = spec.cross_size / 2;
        std::size_t bb = spec.cross_size - a;
        if (rng.uniform() < 0.5) std::swap(a, bb);
        a = std::min(a, spec.n1);
        bb = std::min(bb, spec.n2);
        if (a == 0) a = 1;
        if (bb == 0) bb = 1;
        std::vector<int> members = sample_without_replacement(g0, a, rng);
        std::vector<int> other = sample_without_replacement(g1, bb, rng);
        members.insert(members.end(), other.begin(), other.end());
        b.edges.push_back(std::move(members));
        b.tags.push_back(EdgeTag::repulse);
    }
    return b;
}

Built build_regular(const SynthSpec& spec, Rng& rng) {
    Built b;
    std::vector<int> g0(spec.n1), g1(spec.n2);
    std::iota(g0.begin(), g0.end(), 0);
    std::iota(g1.begin(), g1.end(), static_cast<int>(spec.n1));

    // Each intra round partitions a group into edges of intra_size, so every
    // node gains exactly one membership per round.
    for (std::size_t round = 0; round < spec.intra_rounds; ++round) {
        for (std::vector<int>* grp : {&g0, &g1}) {
            shuffle_all(*grp, rng);
            for (std::size_t s = 0; s < grp->size(); s += spec.intra_size) {
                b.edges.emplace_back(grp->begin() + static_cast<long>(s),
                                     grp->begin() + static_cast<long>(s + spec.intra_size));
                b.tags.push_back(EdgeTag::attract);
            }
        }
    }
    // Each cross round pairs equal shares of both groups.
    const std::size_t half = spec.cross_size / 2;
    for (std::size_t round = 0; round < spec.cross_rounds; ++round) {
        shuffle_all(g0, rng);
        shuffle_all(g1, rng);
        for (std::size_t s = 0; s < spec.n1; s += half) {
            std::vector<int> members(g0.begin() + static_cast<long>(s),
                                     g0.begin() + static_cast<long>(s + half));
            members.insert(members.end(), g1.begin() + static_cast<long>(s),
                           g1.begin() + static_cast<long>(s + half));
            b.edges.push_back(std::move(members));
            b.tags.push_back(EdgeTag::repulse);
        }
    }
    return b;
}

} // namespace

SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n1 + spec.n2;

    Built built;
    Hypergraph graph;
    bool connected = false;
    const int max_attempts = spec.ensure_connected ? 64 : 1;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Rng rng(substream_seed(spec.seed, "structure." + std::to_string(attempt)));
        built = spec.regular ? build_regular(spec, rng) : build_uniform(spec, rng);
        graph = Hypergraph::from_edges(n, built.edges);
        connected = graph.is_connected();
        if (connected || !spec.ensure_connected) break;
    }
    if (spec.ensure_connected && !connected)
        throw DegeneracyError("could not draw a connected instance in 64 attempts; "
                              "add hyperedges or relax connectivity");

    SynthResult r;
    r.data.graph = std::move(graph);
    r.edge_tags = std::move(built.tags);

    r.groups.resize(n);
    r.data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int g = i < spec.n1 ? 0 : 1;
        r.groups[i] = g;
        r.data.labels[i] = g;
    }
    r.data.num_classes = 2;

    Rng frng(substream_seed(spec.seed, "features"));
    r.data.features = Matrix(n, spec.dim);
    const double half_gap = spec.gap / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = r.groups[i] == 0 ? half_gap : -half_gap;
        double* row = r.data.features.row(i);
        for (std::size_t c = 0; c < spec.dim; ++c)
            row[c] = mean + spec.noise * frng.normal();
    }

    // 50/25/25 split on a seeded permutation.
    Rng srng(substream_seed(spec.seed, "split"));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle_all(perm, srng);
    const std::size_t n_train = n / 2;
    const std::size_t n_val = n / 4;
    r.data.split.train.assign(perm.begin(), perm.begin() + static_cast<long>(n_train));
    r.data.split.val.assign(perm.begin() + static_cast<long>(n_train),
                            perm.begin() + static_cast<long>(n_train + n_val));
    r.data.split.test.assign(perm.begin() + static_cast<long>(n_train + n_val),
                             perm.end());
    std::sort(r.data.split.train.begin(), r.data.split.train.end());
    std::sort(r.data.split.val.begin(), r.data.split.val.end());
    std::sort(r.data.split.test.begin(), r.data.split.test.end());

    r.data.validate();
    return r;
}

std::string tag_lines(const std::vector<EdgeTag>& tags) {
    std::ostringstream ss;
    for (EdgeTag t : tags)
        ss << (t == EdgeTag::attract ? "attract" : "repulse") << '\n';
    return ss.str();
}

std::vector<EdgeTag> read_tag_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<EdgeTag> tags;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        const std::string tok = line.substr(a, b - a + 1);
        if (tok == "attract") tags.push_back(EdgeTag::attract);
        else if (tok == "repulse") tags.push_back(EdgeTag::repulse);
        else throw ParseError(path.string(), lineno, "bad tag '" + tok + "'");
    }
    return tags;
}

void write_dataset(const std::filesystem::path& dir, const SynthResult& r,
                   const SynthSpec& spec) {
    io::ensure_dir(dir);
    io::atomic_write(dir / "hypergraph.txt", hypergraph_text(r.data.graph));
    io::atomic_write(dir / "features.csv",
                     io::csv_from_matrix(MatView(r.data.features)));
    io::atomic_write(dir / "labels.txt", io::int_lines(r.data.labels));
    io::atomic_write(dir / "train.txt", io::int_lines(r.data.split.train));
    io::atomic_write(dir / "val.txt", io::int_lines(r.data.split.val));
    io::atomic_write(dir / "test.txt", io::int_lines(r.data.split.test));
    io::atomic_write(dir / "tags.txt", tag_lines(r.edge_tags));

    nlohmann::json j;
    j["n1"] = spec.n1;
    j["n2"] = spec.n2;
    j["intra_edges"] = spec.intra_edges;
    j["intra_size"] = spec.intra_size;
    j["cross_edges"] = spec.cross_edges;
    j["cross_size"] = spec.cross_size;
    j["dim"] = spec.dim;
    j["gap"] = spec.gap;
    j["noise"] = spec.noise;
    j["seed"] = spec.seed;
    j["ensure_connected"] = spec.ensure_connected;
    j["regular"] = spec.regular;
    j["intra_rounds"] = spec.intra_rounds;
    j["cross_rounds"] = spec.cross_rounds;
    io::atomic_write(dir / "spec.json", j.dump(2) + "\n");
}

SynthResult load_synth_dir(const std::filesystem::path& dir) {
    DatasetPaths paths;
    paths.hypergraph = dir / "hypergraph.txt";
    paths.features = dir / "features.csv";
    paths.labels = dir / "labels.txt";
    paths.train_split = dir / "train.txt";
    paths.val_split = dir / "val.txt";
    paths.test_split = dir / "test.txt";
    SynthResult r;
    r.data = load_dataset(paths);
    r.groups = r.data.labels;
    const auto tag_path = dir / "tags.txt";
    if (std::filesystem::exists(tag_path)) {
        r.edge_tags = read_tag_lines(tag_path);
        if (r.edge_tags.size() != r.data.graph.num_edges())
            throw ValidationError("tag count != edge count in " + dir.string());
    }
    return r;
}

} // namespace hamp
