#include "hamp/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hamp/errors.hpp"
#include "hamp/log.hpp"

namespace hamp {

using nlohmann::json;

void TrainConfig::validate() const {
    dynamics.validate();
    if (hidden_dim == 0) throw ConfigError("hidden_dim must be >= 1");
    if (classifier_layers < 0) throw ConfigError("classifier_layers must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (epochs <= 0) throw ConfigError("epochs must be >= 1");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (patience > epochs) throw ConfigError("patience must not exceed epochs");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (seeds.empty()) throw ConfigError("at least one seed required");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute() || base.empty()) return path;
    return base / path;
}

} // namespace

TrainConfig train_config_from_json(const std::string& text,
                                   const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");
    reject_unknown(j,
                   {"mode", "dynamics", "hidden_dim", "classifier_hidden_dim",
                    "classifier_layers", "dropout", "epochs", "patience",
                    "learning_rate", "seeds", "jobs", "toggles", "dataset"},
                   "config");
    TrainConfig cfg;
    try {
        if (j.contains("mode")) cfg.mode = mode_from_string(j["mode"].get<std::string>());
        if (j.contains("dynamics")) {
            const json& d = j["dynamics"];
            reject_unknown(d,
                           {"tau", "total_time", "delta", "epsilon", "beta",
                            "omega", "gamma", "activation"},
                           "dynamics");
            if (d.contains("tau")) cfg.dynamics.tau = d["tau"].get<double>();
            if (d.contains("total_time"))
                cfg.dynamics.total_time = d["total_time"].get<double>();
            if (d.contains("delta")) cfg.dynamics.delta = d["delta"].get<double>();
            if (d.contains("epsilon")) cfg.dynamics.epsilon = d["epsilon"].get<double>();
            if (d.contains("beta")) cfg.dynamics.beta = d["beta"].get<double>();
            if (d.contains("omega")) cfg.dynamics.omega = d["omega"].get<double>();
            if (d.contains("gamma")) cfg.dynamics.gamma = d["gamma"].get<double>();
            if (d.contains("activation"))
                cfg.dynamics.activation =
                    activation_from_string(d["activation"].get<std::string>());
        }
        if (j.contains("hidden_dim")) cfg.hidden_dim = j["hidden_dim"].get<std::size_t>();
        if (j.contains("classifier_hidden_dim"))
            cfg.classifier_hidden_dim = j["classifier_hidden_dim"].get<std::size_t>();
        if (j.contains("classifier_layers"))
            cfg.classifier_layers = j["classifier_layers"].get<int>();
        if (j.contains("dropout")) cfg.dropout = j["dropout"].get<double>();
        if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
        if (j.contains("patience")) cfg.patience = j["patience"].get<int>();
        if (j.contains("learning_rate"))
            cfg.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("seeds"))
            cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
        if (j.contains("toggles")) {
            const json& t = j["toggles"];
            reject_unknown(t, {"repulsion", "allen_cahn", "noise"}, "toggles");
            if (t.contains("repulsion")) cfg.repulsion_on = t["repulsion"].get<bool>();
            if (t.contains("allen_cahn")) cfg.allen_cahn_on = t["allen_cahn"].get<bool>();
            if (t.contains("noise")) cfg.noise_on = t["noise"].get<bool>();
        }
        if (j.contains("dataset")) {
            const json& d = j["dataset"];
            reject_unknown(d,
                           {"dir", "hypergraph", "features", "labels",
                            "train_split", "val_split", "test_split"},
                           "dataset");
            if (d.contains("dir")) {
                const auto dir = resolve(base_dir, d["dir"].get<std::string>());
                cfg.dataset.hypergraph = dir / "hypergraph.txt";
                cfg.dataset.features = dir / "features.csv";
                cfg.dataset.labels = dir / "labels.txt";
                cfg.dataset.train_split = dir / "train.txt";
                cfg.dataset.val_split = dir / "val.txt";
                cfg.dataset.test_split = dir / "test.txt";
            }
            if (d.contains("hypergraph"))
                cfg.dataset.hypergraph = resolve(base_dir, d["hypergraph"].get<std::string>());
            if (d.contains("features"))
                cfg.dataset.features = resolve(base_dir, d["features"].get<std::string>());
            if (d.contains("labels"))
                cfg.dataset.labels = resolve(base_dir, d["labels"].get<std::string>());
            if (d.contains("train_split"))
                cfg.dataset.train_split = resolve(base_dir, d["train_split"].get<std::string>());
            if (d.contains("val_split"))
                cfg.dataset.val_split = resolve(base_dir, d["val_split"].get<std::string>());
            if (d.contains("test_split"))
                cfg.dataset.test_split = resolve(base_dir, d["test_split"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["dynamics"] = {{"tau", cfg.dynamics.tau},
                     {"total_time", cfg.dynamics.total_time},
                     {"delta", cfg.dynamics.delta},
                     {"epsilon", cfg.dynamics.epsilon},
                     {"beta", cfg.dynamics.beta},
                     {"omega", cfg.dynamics.omega},
                     {"gamma", cfg.dynamics.gamma},
                     {"activation", to_string(cfg.dynamics.activation)}};
    j["hidden_dim"] = cfg.hidden_dim;
    j["classifier_hidden_dim"] = cfg.classifier_hidden_dim;
    j["classifier_layers"] = cfg.classifier_layers;
    j["dropout"] = cfg.dropout;
    j["epochs"] = cfg.epochs;
    j["patience"] = cfg.patience;
    j["learning_rate"] = cfg.learning_rate;
    j["seeds"] = cfg.seeds;
    j["jobs"] = cfg.jobs;
    j["toggles"] = {{"repulsion", cfg.repulsion_on},
                    {"allen_cahn", cfg.allen_cahn_on},
                    {"noise", cfg.noise_on}};
    json d;
    d["hypergraph"] = cfg.dataset.hypergraph.string();
    if (cfg.dataset.features) d["features"] = cfg.dataset.features->string();
    if (cfg.dataset.labels) d["labels"] = cfg.dataset.labels->string();
    if (cfg.dataset.train_split) d["train_split"] = cfg.dataset.train_split->string();
    if (cfg.dataset.val_split) d["val_split"] = cfg.dataset.val_split->string();
    if (cfg.dataset.test_split) d["test_split"] = cfg.dataset.test_split->string();
    j["dataset"] = d;
    return j.dump(2) + "\n";
}

namespace {

ModelConfig model_config(const TrainConfig& cfg, const LabeledDataset& data) {
    ModelConfig mc;
    mc.mode = cfg.mode;
    mc.dynamics = cfg.dynamics;
    mc.in_dim = data.features.cols;
    mc.hidden_dim = cfg.hidden_dim;
    mc.num_classes = static_cast<std::size_t>(data.num_classes);
    mc.classifier_hidden_dim = cfg.classifier_hidden_dim;
    mc.classifier_layers = cfg.classifier_layers;
    mc.dropout = cfg.dropout;
    mc.repulsion_on = cfg.repulsion_on;
    mc.allen_cahn_on = cfg.allen_cahn_on;
    mc.noise_on = cfg.noise_on;
    return mc;
}

} // namespace

SeedRun train_single(const TrainConfig& cfg, const LabeledDataset& data,
                     std::uint64_t seed, Model* out_model, EnergyTrace* out_trace) {
    cfg.validate();
    if (!data.has_features() || !data.has_labels())
        throw ValidationError("training needs features and labels");
    if (data.split.train.empty() || data.split.val.empty() || data.split.test.empty())
        throw ValidationError("training needs train/val/test splits");

    SeedRun run;
    run.seed = seed;

    Model model(model_config(cfg, data), data.graph, seed);
    Adam opt({cfg.learning_rate});
    Rng mask_rng(substream_seed(seed, "dropout"));
    Rng noise_rng(substream_seed(seed, "noise"));

    Tensor x_raw = Tensor::from_matrix(MatView(data.features));
    auto best_snapshot = model.params().snapshot_values();
    double best_val = -1.0;
    int since_best = 0;
    double total_seconds = 0.0;

    try {
        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            Graph g;
            Var logits = model.forward(g, x_raw, true, &mask_rng, &noise_rng);
            Var loss = g.cross_entropy(logits, data.labels, data.split.train);
            const double loss_val = g.value(loss).value[0];
            if (!std::isfinite(loss_val))
                throw DivergenceError(epoch, "training loss is non-finite");
            g.backward(loss);
            opt.step(model.params());

            Graph ge;
            Var eval_logits = model.forward(ge, x_raw, false, nullptr, nullptr);
            const Tensor& lt = ge.value(eval_logits);
            const double val_acc =
                accuracy(lt.view(), data.labels, data.split.val);

            run.train_loss.push_back(loss_val);
            run.val_accuracy.push_back(val_acc);
            run.epochs_run = epoch;
            total_seconds += std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();

            if (val_acc > best_val + 1e-12) {
                best_val = val_acc;
                run.best_epoch = epoch;
                best_snapshot = model.params().snapshot_values();
                since_best = 0;
            } else if (++since_best >= cfg.patience && cfg.patience > 0) {
                break;
            }
        }
    } catch (const DivergenceError& e) {
        run.failed = true;
        run.failure = e.what();
        return run;
    }

    model.params().restore_values(best_snapshot);
    run.best_val_accuracy = best_val;
    run.mean_epoch_seconds =
        run.epochs_run ? total_seconds / run.epochs_run : 0.0;

    std::vector<Matrix> states;
    Graph gf;
    Var logits = model.forward(gf, x_raw, false, nullptr, nullptr,
                               out_trace ? &states : nullptr);
    const Tensor& lt = gf.value(logits);
    run.test_accuracy = accuracy(lt.view(), data.labels, data.split.test);

    if (out_trace) {
        const std::vector<int>* groups =
            data.num_classes == 2 ? &data.labels : nullptr;
        for (std::size_t s = 0; s < states.size(); ++s)
            out_trace->record(static_cast<long>(s), MatView(states[s]),
                              data.graph, groups);
    }
    if (out_model) *out_model = std::move(model);
    return run;
}

RunResult train(const TrainConfig& cfg, const LabeledDataset& data) {
    cfg.validate();
    RunResult result;
    const std::size_t n = cfg.seeds.size();
    result.seeds.resize(n);
    std::vector<EnergyTrace> traces(n);

    const int workers = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i)
            result.seeds[i] =
                train_single(cfg, data, cfg.seeds[i], nullptr, &traces[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= n) break;
                        result.seeds[i] = train_single(cfg, data, cfg.seeds[i],
                                                       nullptr, &traces[i]);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    std::vector<double> accs;
    for (std::size_t i = 0; i < n; ++i) {
        if (result.seeds[i].failed) {
            ++result.failed_count;
            log::info("seed " + std::to_string(cfg.seeds[i]) +
                      " excluded: " + result.seeds[i].failure);
            continue;
        }
        if (accs.empty()) result.final_trace = traces[i];
        accs.push_back(result.seeds[i].test_accuracy);
    }
    if (!accs.empty()) {
        const double mean =
            std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size();
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        result.mean_test_accuracy = mean;
        result.std_test_accuracy =
            accs.size() > 1 ? std::sqrt(var / (accs.size() - 1)) : 0.0;
    }
    return result;
}

std::vector<DepthRow> depth_sweep(const TrainConfig& cfg,
                                  const LabeledDataset& data,
                                  const std::vector<long>& depths) {
    std::vector<DepthRow> rows;
    for (long depth : depths) {
        if (depth < 0) throw ConfigError("depth must be >= 0");
        TrainConfig c = cfg;
        c.dynamics.total_time = static_cast<double>(depth) * c.dynamics.tau;
        RunResult r = train(c, data);
        rows.push_back({depth, r.mean_test_accuracy, r.std_test_accuracy,
                        r.failed_count});
        log::info("depth " + std::to_string(depth) + ": mean acc " +
                  std::to_string(r.mean_test_accuracy));
    }
    return rows;
}

std::string depth_sweep_csv(const std::vector<DepthRow>& rows) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "depth,mean_accuracy,std_accuracy,failed\n";
    for (const auto& r : rows)
        ss << r.depth << ',' << r.mean_accuracy << ',' << r.std_accuracy << ','
           << r.failed << '\n';
    return ss.str();
}

std::vector<AblationRow> ablate(const TrainConfig& cfg, const LabeledDataset& data,
                                const std::vector<std::string>& toggles) {
    for (const auto& t : toggles)
        if (t != "repulsion" && t != "allen_cahn" && t != "noise")
            throw ConfigError("unknown toggle '" + t +
                              "' (want repulsion|allen_cahn|noise)");
    const std::size_t k = toggles.size();  // k == 0 yields the single baseline run
    std::vector<AblationRow> rows;
    for (std::size_t mask = 0; mask < (1u << k); ++mask) {
        TrainConfig c = cfg;
        for (std::size_t b = 0; b < k; ++b) {
            const bool on = (mask >> b) & 1u;
            if (toggles[b] == "repulsion") c.repulsion_on = on;
            else if (toggles[b] == "allen_cahn") c.allen_cahn_on = on;
            else c.noise_on = on;
        }
        RunResult r = train(c, data);
        rows.push_back({c.repulsion_on, c.allen_cahn_on, c.noise_on,
                        r.mean_test_accuracy, r.std_test_accuracy,
                        r.failed_count});
        log::info("ablation repulsion=" + std::to_string(c.repulsion_on) +
                  " allen_cahn=" + std::to_string(c.allen_cahn_on) +
                  " noise=" + std::to_string(c.noise_on) + ": mean acc " +
                  std::to_string(r.mean_test_accuracy));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "repulsion,allen_cahn,noise,mean_accuracy,std_accuracy,failed\n";
    for (const auto& r : rows)
        ss << (r.repulsion ? 1 : 0) << ',' << (r.allen_cahn ? 1 : 0) << ','
           << (r.noise ? 1 : 0) << ',' << r.mean_accuracy << ','
           << r.std_accuracy << ',' << r.failed << '\n';
    return ss.str();
}

std::vector<ProbeRow> complexity_probe(const std::vector<SynthSpec>& sizes,
                                       const ProbeOptions& opt) {
    if (sizes.empty()) throw ConfigError("complexity probe needs >= 1 size");
    std::vector<ProbeRow> rows;
    const long hi_steps = std::max<long>(8, opt.steps);
    const long lo_steps = std::max<long>(2, hi_steps / 4);
    for (const SynthSpec& spec : sizes) {
        SynthResult sr = generate(spec);
        const Hypergraph& h = sr.data.graph;

        ModelConfig mc;
        mc.mode = Mode::hamp1;
        mc.dynamics.tau = 0.1;
        mc.dynamics.delta = 1.0;
        mc.dynamics.gamma = 0.1;
        // Bounded increments keep an untrained model finite over any unroll
        // length, so the timed passes measure arithmetic rather than throwing.
        mc.dynamics.activation = Activation::tanh;
        mc.in_dim = sr.data.features.cols;
        mc.hidden_dim = opt.hidden_dim;
        mc.num_classes = 2;
        mc.classifier_layers = 0;
        Tensor x_raw = Tensor::from_matrix(MatView(sr.data.features));

        auto time_unroll = [&](long steps) {
            ModelConfig m2 = mc;
            m2.dynamics.total_time = static_cast<double>(steps) * m2.dynamics.tau;
            Model model(m2, h, opt.seed);
            // Warm-up pass to touch all buffers.
            {
                Graph g;
                model.forward(g, x_raw, false, nullptr, nullptr);
            }
            std::vector<double> samples;
            for (int r = 0; r < opt.repeats; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                Graph g;
                model.forward(g, x_raw, false, nullptr, nullptr);
                samples.push_back(std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count());
            }
            std::sort(samples.begin(), samples.end());
            return samples[samples.size() / 2];
        };

        const double t_hi = time_unroll(hi_steps);
        const double t_lo = time_unroll(lo_steps);
        ProbeRow row;
        row.nodes = h.num_nodes();
        row.edges = h.num_edges();
        std::size_t inc = 0;
        for (int dgr : h.degrees().node_degrees) inc += static_cast<std::size_t>(dgr);
        for (int sz : h.degrees().edge_sizes) inc += static_cast<std::size_t>(sz);
        row.incidences = inc;
        row.seconds_per_step =
            std::max(0.0, (t_hi - t_lo) / static_cast<double>(hi_steps - lo_steps));
        if (row.seconds_per_step < 1e-3)
            log::info("probe at " + std::to_string(row.incidences) +
                      " incidences is below the 1 ms timing floor");
        rows.push_back(row);
    }
    return rows;
}

std::string probe_csv(const std::vector<ProbeRow>& rows) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "nodes,edges,incidences,seconds_per_step\n";
    for (const auto& r : rows)
        ss << r.nodes << ',' << r.edges << ',' << r.incidences << ','
           << r.seconds_per_step << '\n';
    return ss.str();
}

double probe_loglog_slope(const std::vector<ProbeRow>& rows) {
    if (rows.size() < 2) throw ConfigError("slope needs >= 2 probe rows");
    double sx = 0.0, sy = 0.0;
    for (const auto& r : rows) {
        if (r.seconds_per_step <= 0.0)
            throw DegeneracyError("non-positive probe timing; instance too small");
        sx += std::log(static_cast<double>(r.incidences));
        sy += std::log(r.seconds_per_step);
    }
    const double mx = sx / rows.size(), my = sy / rows.size();
    double sxx = 0.0, sxy = 0.0;
    for (const auto& r : rows) {
        const double dx = std::log(static_cast<double>(r.incidences)) - mx;
        const double dy = std::log(r.seconds_per_step) - my;
        sxx += dx * dx;
        sxy += dx * dy;
    }
    return sxy / sxx;
}

std::string run_result_json(const TrainConfig& cfg, const RunResult& r) {
    json j;
    j["config"] = json::parse(train_config_to_json(cfg));
    j["mean_test_accuracy"] = r.mean_test_accuracy;
    j["std_test_accuracy"] = r.std_test_accuracy;
    j["failed_count"] = r.failed_count;
    j["seeds"] = json::array();
    for (const auto& s : r.seeds) {
        json e;
        e["seed"] = s.seed;
        e["failed"] = s.failed;
        if (s.failed) {
            e["failure"] = s.failure;
        } else {
            e["test_accuracy"] = s.test_accuracy;
            e["best_val_accuracy"] = s.best_val_accuracy;
            e["best_epoch"] = s.best_epoch;
            e["epochs_run"] = s.epochs_run;
            e["mean_epoch_seconds"] = s.mean_epoch_seconds;
        }
        j["seeds"].push_back(e);
    }
    return j.dump(2) + "\n";
}

} // namespace hamp
