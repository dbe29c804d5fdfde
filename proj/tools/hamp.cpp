// Command-line front end: dataset generation, plain dynamics simulation,
// training, sweeps, and diagnostics. Exit codes: 0 success, 1 runtime
// failure, 2 usage error.

#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hamp/dynamics.hpp"
#include "hamp/errors.hpp"
#include "hamp/hypergraph.hpp"
#include "hamp/io.hpp"
#include "hamp/log.hpp"
#include "hamp/metrics.hpp"
#include "hamp/model.hpp"
#include "hamp/synth.hpp"
#include "hamp/trainer.hpp"

namespace {

using namespace hamp;
using namespace hamp::io;

DatasetPaths dir_paths(const std::filesystem::path& dir) {
    DatasetPaths p;
    p.hypergraph = dir / "hypergraph.txt";
    p.features = dir / "features.csv";
    p.labels = dir / "labels.txt";
    p.train_split = dir / "train.txt";
    p.val_split = dir / "val.txt";
    p.test_split = dir / "test.txt";
    return p;
}

// Labels double as groups for the two-group diagnostics when binary.
const std::vector<int>* group_view(const LabeledDataset& data) {
    return data.num_classes == 2 ? &data.labels : nullptr;
}

struct GenOpts {
    SynthSpec spec;
    std::string out;
};

int run_gen(const GenOpts& o) {
    SynthResult r = generate(o.spec);
    write_dataset(o.out, r, o.spec);
    const Hypergraph& h = r.data.graph;
    std::printf("gen-synth: %zu nodes, %zu hyperedges, homophily %.3f, %s -> %s\n",
                h.num_nodes(), h.num_edges(), ce_homophily(h, r.data.labels),
                h.is_connected() ? "connected" : "disconnected", o.out.c_str());
    return 0;
}

struct SimOpts {
    std::string data;
    std::string out;
    std::string mode = "hamp1";
    std::string interaction = "propagation";
    long steps = 100;
    long snapshot_every = 0;
    std::uint64_t seed = 0;
    DynamicsParams dp;
};

int run_simulate(const SimOpts& o) {
    o.dp.validate();
    LabeledDataset data;
    std::vector<int> groups;
    if (o.data.empty()) {
        // Degree-regular built-in instance: reliably connected at this size.
        SynthSpec spec;
        spec.n1 = spec.n2 = 48;
        spec.regular = true;
        spec.seed = o.seed;
        SynthResult r = generate(spec);
        data = std::move(r.data);
        groups = std::move(r.groups);
    } else {
        data = load_dataset(dir_paths(o.data));
        if (data.num_classes == 2) groups = data.labels;
    }
    if (!data.has_features())
        throw ValidationError("simulate needs node features");

    const Mode mode = mode_from_string(o.mode);
    std::optional<PropagationOperator> prop;
    std::unique_ptr<Interaction> inter;
    if (mode == Mode::diffusion) {
        prop.emplace(data.graph);
    } else if (o.interaction == "zero") {
        inter = std::make_unique<ZeroInteraction>();
    } else {
        prop.emplace(data.graph);
        if (o.interaction == "propagation") {
            inter = std::make_unique<PropagationClampInteraction>(*prop);
        } else {
            if (groups.empty())
                throw ValidationError(
                    "group-sign interaction needs two-group labels");
            inter = std::make_unique<GroupSignInteraction>(*prop, groups,
                                                           o.dp.gamma);
        }
    }

    SimulateOptions opts;
    opts.mode = mode;
    opts.steps = o.steps;
    opts.seed = o.seed;
    opts.groups = groups.empty() ? nullptr : &groups;
    opts.snapshot_every = o.snapshot_every;

    SimulateResult r = simulate(data.graph, data.features, inter.get(),
                                prop ? &*prop : nullptr, o.dp, opts);

    ensure_dir(o.out);
    nlohmann::json cfg;
    cfg["mode"] = o.mode;
    cfg["interaction"] = mode == Mode::diffusion ? "propagation" : o.interaction;
    cfg["steps"] = o.steps;
    cfg["seed"] = o.seed;
    cfg["snapshot_every"] = o.snapshot_every;
    cfg["data"] = o.data.empty() ? "builtin-synth" : o.data;
    cfg["dynamics"] = {{"tau", o.dp.tau},       {"delta", o.dp.delta},
                       {"epsilon", o.dp.epsilon}, {"beta", o.dp.beta},
                       {"omega", o.dp.omega},   {"gamma", o.dp.gamma},
                       {"activation", to_string(o.dp.activation)}};
    atomic_write(std::filesystem::path(o.out) / "config.json", cfg.dump(2) + "\n");
    atomic_write(std::filesystem::path(o.out) / "trace.csv", r.trace.csv());
    atomic_write(std::filesystem::path(o.out) / "final.csv",
                 csv_from_matrix(MatView(r.x_final)));
    if (!r.snapshots.empty())
        atomic_write(std::filesystem::path(o.out) / "snapshots.csv",
                     snapshots_csv(r.snapshots));

    const auto& recs = r.trace.records();
    std::printf("simulate: mode=%s steps=%ld E(0)=%.6g E(final)=%.6g -> %s\n",
                o.mode.c_str(), o.steps, recs.front().energy,
                recs.back().energy, o.out.c_str());
    return 0;
}

struct TrainOpts {
    std::string config;
    std::string data;
    std::string out;
    std::string mode;
    long steps = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    bool single_thread = false;
    std::vector<long> depths = {4, 16, 64};
    std::vector<std::string> toggles = {"repulsion", "allen_cahn", "noise"};
};

TrainConfig effective_config(const TrainOpts& o) {
    const std::filesystem::path path(o.config);
    TrainConfig cfg = train_config_from_json(read_file(path), path.parent_path());
    if (!o.data.empty()) cfg.dataset = dir_paths(o.data);
    if (!o.mode.empty()) cfg.mode = mode_from_string(o.mode);
    if (o.steps >= 0)
        cfg.dynamics.total_time = static_cast<double>(o.steps) * cfg.dynamics.tau;
    if (o.seed_set) cfg.seeds = {o.seed};
    if (o.jobs > 0) cfg.jobs = o.jobs;
    if (o.single_thread) cfg.jobs = 1;
    cfg.validate();
    return cfg;
}

int run_train(const TrainOpts& o) {
    TrainConfig cfg = effective_config(o);
    LabeledDataset data = load_dataset(cfg.dataset);
    RunResult r = train(cfg, data);

    ensure_dir(o.out);
    const std::filesystem::path out(o.out);
    atomic_write(out / "config.json", train_config_to_json(cfg));
    atomic_write(out / "result.json", run_result_json(cfg, r));
    atomic_write(out / "trace.csv", r.final_trace.csv());
    std::string curves = "seed,epoch,train_loss,val_accuracy\n";
    for (const auto& s : r.seeds)
        for (std::size_t e = 0; e < s.train_loss.size(); ++e)
            curves += std::to_string(s.seed) + "," + std::to_string(e + 1) + "," +
                      std::to_string(s.train_loss[e]) + "," +
                      std::to_string(s.val_accuracy[e]) + "\n";
    atomic_write(out / "curves.csv", curves);

    std::printf("train: test acc %.4f +/- %.4f over %zu seeds (%zu failed) -> %s\n",
                r.mean_test_accuracy, r.std_test_accuracy, cfg.seeds.size(),
                r.failed_count, o.out.c_str());
    return r.failed_count == 0 ? 0 : 1;
}

int run_depth_sweep(const TrainOpts& o) {
    TrainConfig cfg = effective_config(o);
    LabeledDataset data = load_dataset(cfg.dataset);
    auto rows = depth_sweep(cfg, data, o.depths);

    ensure_dir(o.out);
    atomic_write(std::filesystem::path(o.out) / "config.json",
                 train_config_to_json(cfg));
    atomic_write(std::filesystem::path(o.out) / "depth_sweep.csv",
                 depth_sweep_csv(rows));
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.failed;
    std::printf("depth-sweep: %zu depths, acc(first)=%.4f acc(last)=%.4f -> %s\n",
                rows.size(), rows.front().mean_accuracy,
                rows.back().mean_accuracy, o.out.c_str());
    return failed == 0 ? 0 : 1;
}

int run_ablate(const TrainOpts& o) {
    TrainConfig cfg = effective_config(o);
    LabeledDataset data = load_dataset(cfg.dataset);
    auto rows = ablate(cfg, data, o.toggles);

    ensure_dir(o.out);
    atomic_write(std::filesystem::path(o.out) / "config.json",
                 train_config_to_json(cfg));
    atomic_write(std::filesystem::path(o.out) / "ablation.csv",
                 ablation_csv(rows));
    std::size_t failed = 0;
    double best = 0.0;
    for (const auto& r : rows) {
        failed += r.failed;
        best = std::max(best, r.mean_accuracy);
    }
    std::printf("ablate: %zu configurations, best mean acc %.4f -> %s\n",
                rows.size(), best, o.out.c_str());
    return failed == 0 ? 0 : 1;
}

struct TraceOpts {
    std::string data;
    std::string out;
};

int run_energy_trace(const TraceOpts& o) {
    LabeledDataset data = load_dataset(dir_paths(o.data));
    if (!data.has_features())
        throw ValidationError("energy-trace needs node features");
    EnergyTrace trace;
    trace.record(0, MatView(data.features), data.graph, group_view(data));
    if (!o.out.empty()) {
        ensure_dir(o.out);
        atomic_write(std::filesystem::path(o.out) / "trace.csv", trace.csv());
    }
    const TraceRecord& rec = trace.records().front();
    const double hom =
        data.has_labels() ? ce_homophily(data.graph, data.labels) : std::nan("");
    std::printf(
        "energy-trace: E=%.6g M2_mean=%.6g lambda=%.6g homophily=%.3f %s\n",
        rec.energy, rec.m2_mean, rec.lambda, hom,
        data.graph.is_connected() ? "connected" : "disconnected");
    return 0;
}

struct GradOpts {
    std::string mode = "hamp1";
    long steps = 4;
    std::uint64_t seed = 7;
    double tol = 1e-4;
};

int run_gradcheck(const GradOpts& o) {
    SynthSpec spec;
    spec.n1 = spec.n2 = 6;
    spec.intra_edges = 3;
    spec.intra_size = 3;
    spec.cross_edges = 2;
    spec.cross_size = 2;
    spec.dim = 3;
    spec.gap = 1.0;
    spec.noise = 0.5;
    spec.seed = o.seed;
    SynthResult sr = generate(spec);

    ModelConfig mc;
    mc.mode = mode_from_string(o.mode);
    if (mc.mode == Mode::diffusion)
        throw ConfigError("gradcheck covers the particle modes only");
    mc.dynamics.tau = 0.2;
    mc.dynamics.total_time = static_cast<double>(o.steps) * 0.2;
    mc.dynamics.delta = 0.5;
    mc.dynamics.beta = 0.3;
    mc.dynamics.gamma = 0.2;
    mc.dynamics.activation = Activation::tanh;
    mc.in_dim = spec.dim;
    mc.hidden_dim = 5;
    mc.num_classes = 2;
    mc.classifier_layers = 0; // keep the loss smooth for finite differences
    Model model(mc, sr.data.graph, o.seed);
    Tensor x_raw = Tensor::from_matrix(MatView(sr.data.features));

    auto loss_at = [&]() {
        Graph g;
        Var logits = model.forward(g, x_raw, false, nullptr, nullptr);
        Var loss = g.cross_entropy(logits, sr.data.labels, sr.data.split.train);
        return g.value(loss).value[0];
    };

    // Analytic gradients once, then central differences per coordinate.
    for (const auto& name : model.params().names())
        model.params().at(name).zero_grad();
    {
        Graph g;
        Var logits = model.forward(g, x_raw, false, nullptr, nullptr);
        Var loss = g.cross_entropy(logits, sr.data.labels, sr.data.split.train);
        g.backward(loss);
    }

    const double h = 1e-5;
    double max_rel = 0.0;
    for (const auto& name : model.params().names()) {
        Tensor& t = model.params().at(name);
        for (std::size_t k = 0; k < t.numel(); ++k) {
            const double orig = t.value[k];
            t.value[k] = orig + h;
            const double fp = loss_at();
            t.value[k] = orig - h;
            const double fm = loss_at();
            t.value[k] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = t.grad.empty() ? 0.0 : t.grad[k];
            const double rel = std::abs(fd - an) /
                               std::max({std::abs(fd), std::abs(an), 1.0});
            max_rel = std::max(max_rel, rel);
        }
    }
    std::printf("gradcheck: max relative error = %.3e (tolerance %.1e)\n",
                max_rel, o.tol);
    return max_rel < o.tol ? 0 : 1;
}

struct ProbeOpts {
    std::vector<std::size_t> sizes = {150, 300, 600, 1500};
    ProbeOptions opt;
    std::string out;
};

int run_probe(const ProbeOpts& o) {
    std::vector<SynthSpec> specs;
    for (std::size_t s : o.sizes) {
        SynthSpec spec;
        spec.n1 = spec.n2 = s;
        spec.intra_edges = s;
        spec.intra_size = 4;
        spec.cross_edges = std::max<std::size_t>(1, s / 2);
        spec.cross_size = 4;
        spec.dim = 8;
        spec.seed = o.opt.seed;
        spec.ensure_connected = false; // timing does not need connectivity
        specs.push_back(spec);
    }
    auto rows = complexity_probe(specs, o.opt);
    if (!o.out.empty()) {
        ensure_dir(o.out);
        atomic_write(std::filesystem::path(o.out) / "probe.csv", probe_csv(rows));
    }
    if (rows.size() >= 2) {
        std::printf("complexity-probe: %zu sizes, log-log slope = %.3f\n",
                    rows.size(), probe_loglog_slope(rows));
    } else {
        std::printf("complexity-probe: single size, %.6g s/step at %zu incidences\n",
                    rows.front().seconds_per_step, rows.front().incidences);
    }
    return 0;
}

void add_dynamics_flags(CLI::App* cmd, DynamicsParams& dp, std::string& activation) {
    cmd->add_option("--tau", dp.tau, "step size");
    cmd->add_option("--delta", dp.delta, "bistable well strength");
    cmd->add_option("--epsilon", dp.epsilon, "noise gain");
    cmd->add_option("--beta", dp.beta, "initial-state anchor strength");
    cmd->add_option("--omega", dp.omega, "self-decay coefficient");
    cmd->add_option("--gamma", dp.gamma, "repulsion cap");
    cmd->add_option("--activation", activation, "step activation")
        ->check(CLI::IsMember({"identity", "tanh", "relu"}));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypergraph particle message passing toolkit"};
    app.require_subcommand(1);

    GenOpts gen;
    auto* cgen = app.add_subcommand("gen-synth",
                                    "generate a planted two-group dataset");
    cgen->add_option("--n1", gen.spec.n1, "first group size");
    cgen->add_option("--n2", gen.spec.n2, "second group size");
    cgen->add_option("--intra-edges", gen.spec.intra_edges, "intra edges per group");
    cgen->add_option("--intra-size", gen.spec.intra_size, "intra hyperedge size");
    cgen->add_option("--cross-edges", gen.spec.cross_edges, "cross edges");
    cgen->add_option("--cross-size", gen.spec.cross_size, "cross hyperedge size");
    cgen->add_option("--dim", gen.spec.dim, "feature dimension");
    cgen->add_option("--gap", gen.spec.gap, "group mean separation");
    cgen->add_option("--noise", gen.spec.noise, "feature noise stddev");
    cgen->add_flag("--regular", gen.spec.regular, "equalize node degrees");
    cgen->add_option("--intra-rounds", gen.spec.intra_rounds,
                     "partition rounds per group (regular mode)");
    cgen->add_option("--cross-rounds", gen.spec.cross_rounds,
                     "cross matching rounds (regular mode)");
    cgen->add_option("--seed", gen.spec.seed, "rng seed");
    cgen->add_option("--out", gen.out, "output directory")->required();

    SimOpts sim;
    std::string sim_activation = "identity";
    auto* csim = app.add_subcommand("simulate", "run the plain dynamics");
    csim->add_option("--data", sim.data,
                     "dataset directory (defaults to a built-in instance)");
    csim->add_option("--mode", sim.mode, "dynamics mode")
        ->check(CLI::IsMember({"hamp1", "hamp2", "diffusion"}));
    csim->add_option("--interaction", sim.interaction, "neighborhood term")
        ->check(CLI::IsMember({"zero", "propagation", "group-sign"}));
    csim->add_option("--steps", sim.steps, "number of steps");
    csim->add_option("--snapshot-every", sim.snapshot_every,
                     "state dump interval (0 = off)");
    csim->add_option("--seed", sim.seed, "rng seed");
    add_dynamics_flags(csim, sim.dp, sim_activation);
    csim->add_option("--out", sim.out, "output directory")->required();

    TrainOpts tr;
    auto add_train_flags = [&tr](CLI::App* cmd) {
        cmd->add_option("--config", tr.config, "JSON config path")->required();
        cmd->add_option("--data", tr.data, "dataset directory override");
        cmd->add_option("--mode", tr.mode, "dynamics mode override")
            ->check(CLI::IsMember({"hamp1", "hamp2", "diffusion"}));
        cmd->add_option("--steps", tr.steps, "unroll length override");
        cmd->add_option("--seed", tr.seed, "single seed override");
        cmd->add_option("--jobs", tr.jobs, "worker threads");
        cmd->add_flag("--single-thread", tr.single_thread, "force jobs=1");
        cmd->add_option("--out", tr.out, "output directory")->required();
    };
    auto* ctrain = app.add_subcommand("train", "train and evaluate");
    add_train_flags(ctrain);
    auto* cdepth = app.add_subcommand("depth-sweep", "train across unroll depths");
    add_train_flags(cdepth);
    cdepth->add_option("--depths", tr.depths, "depth list")->delimiter(',');
    auto* cablate = app.add_subcommand("ablate", "train toggle combinations");
    add_train_flags(cablate);
    cablate->add_option("--toggles", tr.toggles, "toggles to vary")
        ->delimiter(',')
        ->check(CLI::IsMember({"repulsion", "allen_cahn", "noise"}));

    TraceOpts tro;
    auto* ctrace = app.add_subcommand("energy-trace", "dataset energy diagnostics");
    ctrace->add_option("--data", tro.data, "dataset directory")->required();
    ctrace->add_option("--out", tro.out, "output directory");

    GradOpts gr;
    auto* cgrad = app.add_subcommand("gradcheck",
                                     "finite-difference gradient verification");
    cgrad->add_option("--mode", gr.mode, "dynamics mode")
        ->check(CLI::IsMember({"hamp1", "hamp2"}));
    cgrad->add_option("--steps", gr.steps, "unroll length");
    cgrad->add_option("--seed", gr.seed, "rng seed");
    cgrad->add_option("--tol", gr.tol, "pass threshold");

    ProbeOpts pr;
    auto* cprobe = app.add_subcommand("complexity-probe",
                                      "per-step timing across instance sizes");
    cprobe->add_option("--sizes", pr.sizes, "group sizes to probe")->delimiter(',');
    cprobe->add_option("--hidden", pr.opt.hidden_dim, "pipeline width");
    cprobe->add_option("--steps", pr.opt.steps, "timed unroll length");
    cprobe->add_option("--repeats", pr.opt.repeats, "timing repeats (median)");
    cprobe->add_option("--seed", pr.opt.seed, "rng seed");
    cprobe->add_option("--out", pr.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // help/version exit 0, usage errors exit 2
    }

    try {
        tr.seed_set = (ctrain->count("--seed") + cdepth->count("--seed") +
                       cablate->count("--seed")) > 0;
        sim.dp.activation = activation_from_string(sim_activation);
        if (cgen->parsed()) return run_gen(gen);
        if (csim->parsed()) return run_simulate(sim);
        if (ctrain->parsed()) return run_train(tr);
        if (cdepth->parsed()) return run_depth_sweep(tr);
        if (cablate->parsed()) return run_ablate(tr);
        if (ctrace->parsed()) return run_energy_trace(tro);
        if (cgrad->parsed()) return run_gradcheck(gr);
        if (cprobe->parsed()) return run_probe(pr);
    } catch (const Error& e) {
        log::error(e.what());
        return 1;
    } catch (const std::exception& e) {
        log::error(e.what());
        return 1;
    }
    return 0;
}
