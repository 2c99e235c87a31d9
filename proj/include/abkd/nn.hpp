#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "abkd/error.hpp"
#include "abkd/prob.hpp"
#include "abkd/rng.hpp"

namespace abkd {

enum class Activation { ReLU, Tanh };

inline const char* to_string(Activation a) { return a == Activation::ReLU ? "relu" : "tanh"; }

inline Activation activation_from_string(std::string_view s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    throw ParameterError("unknown activation: " + std::string(s));
}

// Architecture: sizes run input -> hidden... -> output (class count).
struct MlpSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::ReLU;
    std::uint64_t init_seed = 0;

    void validate() const {
        if (layer_sizes.size() < 2) throw ConfigError("mlp needs at least 2 layer sizes");
        for (std::size_t s : layer_sizes) {
            if (s == 0) throw ConfigError("mlp layer sizes must be positive");
        }
    }

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
};

// One affine layer, weights row-major (out x in).
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> bias;
};

struct MlpParams {
    MlpSpec spec;
    std::vector<DenseLayer> layers;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.bias.size();
        return n;
    }
};

// Gradients mirror the parameter layout.
struct MlpGrads {
    std::vector<DenseLayer> layers;

    void scale(double s) {
        for (auto& l : layers) {
            for (auto& w : l.weights) w *= s;
            for (auto& b : l.bias) b *= s;
        }
    }

    void accumulate(const MlpGrads& other) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            for (std::size_t j = 0; j < layers[i].weights.size(); ++j) {
                layers[i].weights[j] += other.layers[i].weights[j];
            }
            for (std::size_t j = 0; j < layers[i].bias.size(); ++j) {
                layers[i].bias[j] += other.layers[i].bias[j];
            }
        }
    }
};

inline MlpGrads zero_grads(const MlpParams& params) {
    MlpGrads g;
    g.layers.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        g.layers.push_back(DenseLayer{l.in, l.out, std::vector<double>(l.weights.size(), 0.0),
                                      std::vector<double>(l.bias.size(), 0.0)});
    }
    return g;
}

// Uniform [-s, s] weights with s = sqrt(6 / (fan_in + fan_out)); zero biases.
// Fully determined by spec.init_seed.
inline MlpParams init(const MlpSpec& spec) {
    spec.validate();
    Rng rng(spec.init_seed);
    MlpParams params;
    params.spec = spec;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        DenseLayer layer;
        layer.in = spec.layer_sizes[l];
        layer.out = spec.layer_sizes[l + 1];
        const double s = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        layer.weights.resize(layer.in * layer.out);
        for (auto& w : layer.weights) w = rng.uniform(-s, s);
        layer.bias.assign(layer.out, 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace detail {

inline double activate(double x, Activation a) {
    return a == Activation::ReLU ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed through the activation output.
inline double activate_grad_from_output(double y, Activation a) {
    return a == Activation::ReLU ? (y > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

} // namespace detail

// Post-activation outputs per layer (last entry = logits).
struct ForwardTrace {
    std::vector<std::vector<double>> outputs;
};

inline std::vector<double> forward_raw(const MlpParams& params, std::span<const double> x,
                                       ForwardTrace* trace = nullptr) {
    if (x.size() != params.spec.input_dim()) {
        throw InputError("input dimension mismatch: expected " +
                         std::to_string(params.spec.input_dim()) + ", got " +
                         std::to_string(x.size()));
    }
    std::vector<double> cur(x.begin(), x.end());
    if (trace) {
        trace->outputs.clear();
        trace->outputs.reserve(params.layers.size());
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        std::vector<double> next(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double acc = layer.bias[o];
            const double* w = layer.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * cur[i];
            next[o] = acc;
        }
        const bool last = (l + 1 == params.layers.size());
        if (!last) {
            for (auto& v : next) v = detail::activate(v, params.spec.activation);
        }
        if (trace) trace->outputs.push_back(next);
        cur = std::move(next);
    }
    return cur;
}

inline Logits forward(const MlpParams& params, std::span<const double> x, int step = 0) {
    return Logits(forward_raw(params, x), step);
}

// Exact reverse-mode gradients of dL_dlogits composed with the network.
inline MlpGrads backward(const MlpParams& params, std::span<const double> x,
                         const std::vector<double>& dl_dlogits) {
    if (dl_dlogits.size() != params.spec.output_dim()) {
        throw InputError("logit-gradient dimension mismatch");
    }
    for (double g : dl_dlogits) {
        if (!std::isfinite(g)) throw InputError("logit gradient must be finite");
    }
    ForwardTrace trace;
    forward_raw(params, x, &trace);

    MlpGrads grads = zero_grads(params);
    const std::vector<double> x_copy(x.begin(), x.end());
    std::vector<double> delta = dl_dlogits;
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const auto& layer = params.layers[li];
        auto& glayer = grads.layers[li];
        const std::vector<double>& input = (li == 0) ? x_copy : trace.outputs[li - 1];

        for (std::size_t o = 0; o < layer.out; ++o) {
            glayer.bias[o] = delta[o];
            double* gw = glayer.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) gw[i] = delta[o] * input[i];
        }
        if (li == 0) break;

        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* w = layer.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[i] * delta[o];
        }
        // Chain through the activation of the layer below.
        const auto& below = trace.outputs[li - 1];
        for (std::size_t i = 0; i < prev.size(); ++i) {
            prev[i] *= detail::activate_grad_from_output(below[i], params.spec.activation);
        }
        delta = std::move(prev);
    }
    return grads;
}

// Plain SGD: params <- params - eta * grads.
inline void sgd_update(MlpParams& params, const MlpGrads& grads, double eta) {
    if (!(eta >= 0.0)) throw ParameterError("learning rate must be non-negative");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        const auto& g = grads.layers[l];
        for (std::size_t j = 0; j < layer.weights.size(); ++j) layer.weights[j] -= eta * g.weights[j];
        for (std::size_t j = 0; j < layer.bias.size(); ++j) layer.bias[j] -= eta * g.bias[j];
    }
}

// JSON checkpoint; doubles serialize shortest-round-trip, so save/load is
// lossless at 64-bit.
inline void save_checkpoint(const MlpParams& params, const std::string& path) {
    nlohmann::json j;
    j["format"] = "abkd-mlp-checkpoint";
    j["version"] = 1;
    j["spec"]["layer_sizes"] = params.spec.layer_sizes;
    j["spec"]["activation"] = to_string(params.spec.activation);
    j["spec"]["init_seed"] = params.spec.init_seed;
    auto& layers = j["layers"];
    layers = nlohmann::json::array();
    for (const auto& l : params.layers) {
        layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out << j.dump();
}

inline MlpParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("malformed checkpoint " + path + ": " + e.what());
    }
    if (j.value("format", "") != "abkd-mlp-checkpoint") {
        throw DataError("not an mlp checkpoint: " + path);
    }
    MlpParams params;
    params.spec.layer_sizes = j.at("spec").at("layer_sizes").get<std::vector<std::size_t>>();
    params.spec.activation = activation_from_string(j.at("spec").at("activation").get<std::string>());
    params.spec.init_seed = j.at("spec").at("init_seed").get<std::uint64_t>();
    params.spec.validate();
    for (const auto& lj : j.at("layers")) {
        DenseLayer l;
        l.in = lj.at("in").get<std::size_t>();
        l.out = lj.at("out").get<std::size_t>();
        l.weights = lj.at("weights").get<std::vector<double>>();
        l.bias = lj.at("bias").get<std::vector<double>>();
        if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
            throw DataError("inconsistent layer shapes in checkpoint: " + path);
        }
        params.layers.push_back(std::move(l));
    }
    if (params.layers.size() + 1 != params.spec.layer_sizes.size()) {
        throw DataError("layer count does not match spec in checkpoint: " + path);
    }
    return params;
}

} // namespace abkd
