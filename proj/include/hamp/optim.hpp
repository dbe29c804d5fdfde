#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hamp/rng.hpp"
#include "hamp/tensor.hpp"

namespace hamp {

// Named parameter collection. Iteration follows insertion order; tensor
// addresses are stable (node-based map) so graph leaves can point at them
// for the duration of a forward/backward pass.
class ParamSet {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

    void zero_grad();

    // Deep copy of values only (grads dropped), for best-epoch snapshots.
    std::map<std::string, std::vector<double>> snapshot_values() const;
    void restore_values(const std::map<std::string, std::vector<double>>& snap);

private:
    std::vector<std::string> names_;
    std::map<std::string, Tensor> params_;
};

// Xavier-uniform initialized weight; each parameter draws from a substream
// seeded by (seed, name) so init is independent of registration order.
Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed,
                   const std::string& name);
Tensor zeros_init(std::size_t n);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam over a ParamSet. Consumed gradients are
// zeroed by step().
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamSet& params);
    long iterations() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

// Flat binary of row-major doubles in parameter order plus a JSON manifest
// mapping each name to its shape and byte offset.
void save_checkpoint(const ParamSet& params,
                     const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path);
void load_checkpoint(ParamSet& params, const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path);

} // namespace hamp
