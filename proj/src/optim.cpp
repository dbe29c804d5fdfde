#include "hamp/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "hamp/errors.hpp"
#include "hamp/io.hpp"

namespace hamp {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
    if (params_.count(name))
        throw ConfigError("duplicate parameter name '" + name + "'");
    names_.push_back(name);
    t.requires_grad = true;
    auto [it, ok] = params_.emplace(name, std::move(t));
    (void)ok;
    return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end())
        throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
        throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
}

void ParamSet::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

std::map<std::string, std::vector<double>> ParamSet::snapshot_values() const {
    std::map<std::string, std::vector<double>> snap;
    for (const auto& [name, t] : params_) snap[name] = t.value;
    return snap;
}

void ParamSet::restore_values(
    const std::map<std::string, std::vector<double>>& snap) {
    for (auto& [name, t] : params_) {
        auto it = snap.find(name);
        if (it == snap.end())
            throw ConfigError("snapshot missing parameter '" + name + "'");
        if (it->second.size() != t.value.size())
            throw ShapeError("snapshot size mismatch for '" + name + "'");
        t.value = it->second;
    }
}

Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed,
                   const std::string& name) {
    Tensor t = Tensor::zeros({fan_in, fan_out});
    Rng rng(substream_seed(seed, name));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& x : t.value) x = rng.uniform(-bound, bound);
    return t;
}

Tensor zeros_init(std::size_t n) { return Tensor::zeros({n}); }

void Adam::step(ParamSet& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const std::string& name : params.names()) {
        Tensor& p = params.at(name);
        if (!p.requires_grad || p.grad.empty()) continue;
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.size() != p.value.size()) m.assign(p.value.size(), 0.0);
        if (v.size() != p.value.size()) v.assign(p.value.size(), 0.0);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p.zero_grad();
    }
}

void save_checkpoint(const ParamSet& params,
                     const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path) {
    std::string blob;
    nlohmann::json manifest;
    manifest["params"] = nlohmann::json::array();
    for (const std::string& name : params.names()) {
        const Tensor& t = params.at(name);
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = t.shape;
        entry["offset"] = blob.size();
        entry["count"] = t.value.size();
        manifest["params"].push_back(entry);
        const char* raw = reinterpret_cast<const char*>(t.value.data());
        blob.append(raw, t.value.size() * sizeof(double));
    }
    manifest["total_bytes"] = blob.size();
    io::atomic_write(bin_path, blob);
    io::atomic_write(manifest_path, manifest.dump(2) + "\n");
}

void load_checkpoint(ParamSet& params, const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(io::read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path.string(), 0, e.what());
    }
    const std::string blob = io::read_file(bin_path);
    if (!manifest.contains("params") || !manifest["params"].is_array())
        throw ParseError(manifest_path.string(), 0, "manifest missing 'params'");
    for (const auto& entry : manifest["params"]) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<std::size_t> shape =
            entry.at("shape").get<std::vector<std::size_t>>();
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        const std::size_t count = entry.at("count").get<std::size_t>();
        if (!params.contains(name))
            throw ConfigError("checkpoint has unknown parameter '" + name + "'");
        Tensor& t = params.at(name);
        if (t.shape != shape)
            throw ShapeError("checkpoint shape mismatch for '" + name + "'");
        if (offset + count * sizeof(double) > blob.size())
            throw ParseError(bin_path.string(), 0,
                             "checkpoint truncated at '" + name + "'");
        std::memcpy(t.value.data(), blob.data() + offset, count * sizeof(double));
    }
}

} // namespace hamp
