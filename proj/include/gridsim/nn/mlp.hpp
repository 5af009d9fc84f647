#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gridsim/core/errors.hpp"
#include "gridsim/core/random.hpp"

namespace gridsim::nn {

enum class Activation { tanh, relu };

inline const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "'");
}

struct Layer {
    Eigen::MatrixXd w;  // out x in
    Eigen::VectorXd b;
};

// Parameter-shaped gradient container (also used for optimizer moments).
struct Gradients {
    std::vector<Layer> layers;
    Eigen::VectorXd d_input;

    Gradients& operator+=(const Gradients& o) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].w += o.layers[i].w;
            layers[i].b += o.layers[i].b;
        }
        return *this;
    }

    Gradients& operator*=(double s) {
        for (auto& l : layers) {
            l.w *= s;
            l.b *= s;
        }
        return *this;
    }

    double squared_norm() const {
        double s = 0.0;
        for (const auto& l : layers) s += l.w.squaredNorm() + l.b.squaredNorm();
        return s;
    }
};

// Fully connected network: hidden layers use the activation, output is linear.
class Mlp {
  public:
    Mlp() = default;

    // Glorot-uniform weights, zero biases.
    Mlp(std::vector<int> sizes, Activation act, Rng& rng) : sizes_(std::move(sizes)), act_(act) {
        check_sizes();
        for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
            const int in = sizes_[i], out = sizes_[i + 1];
            const double lim = std::sqrt(6.0 / (in + out));
            Layer l{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
            for (int r = 0; r < out; ++r)
                for (int c = 0; c < in; ++c) l.w(r, c) = rng.uniform(-lim, lim);
            layers_.push_back(std::move(l));
        }
    }

    static Mlp zeros(std::vector<int> sizes, Activation act) {
        Mlp m;
        m.sizes_ = std::move(sizes);
        m.act_ = act;
        m.check_sizes();
        for (std::size_t i = 0; i + 1 < m.sizes_.size(); ++i)
            m.layers_.push_back({Eigen::MatrixXd::Zero(m.sizes_[i + 1], m.sizes_[i]),
                                 Eigen::VectorXd::Zero(m.sizes_[i + 1])});
        return m;
    }

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }
    Activation activation() const { return act_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        check_input(x);
        Eigen::VectorXd h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            h = layers_[i].w * h + layers_[i].b;
            if (i + 1 < layers_.size()) activate(h);
        }
        return h;
    }

    // Gradients of dot(forward(x), upstream) with respect to every parameter
    // and to the input.
    Gradients backward(const Eigen::VectorXd& x, const Eigen::VectorXd& upstream) const {
        check_input(x);
        if (upstream.size() != output_size()) throw DimensionError("upstream gradient has wrong length");
        std::vector<Eigen::VectorXd> inputs;  // input to each layer
        inputs.reserve(layers_.size());
        Eigen::VectorXd h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            inputs.push_back(h);
            h = layers_[i].w * h + layers_[i].b;
            if (i + 1 < layers_.size()) activate(h);
        }
        Gradients g;
        g.layers.resize(layers_.size());
        Eigen::VectorXd delta = upstream;
        for (std::size_t k = layers_.size(); k-- > 0;) {
            g.layers[k].w = delta * inputs[k].transpose();
            g.layers[k].b = delta;
            delta = layers_[k].w.transpose() * delta;
            if (k > 0) {
                const auto& a = inputs[k];  // activated output of layer k-1
                if (act_ == Activation::tanh)
                    delta.array() *= 1.0 - a.array().square();
                else
                    delta.array() *= (a.array() > 0.0).cast<double>();
            }
        }
        g.d_input = delta;
        return g;
    }

    // Column-batched forward: x is input_size x N.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
        if (layers_.empty() || x.rows() != input_size()) throw DimensionError("batch input rows do not match");
        Eigen::MatrixXd h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            h = (layers_[i].w * h).colwise() + layers_[i].b;
            if (i + 1 < layers_.size()) activate(h);
        }
        return h;
    }

    // Sum over columns of backward(x.col(j), upstream.col(j)); d_input is left empty.
    Gradients backward_batch(const Eigen::MatrixXd& x, const Eigen::MatrixXd& upstream) const {
        if (layers_.empty() || x.rows() != input_size()) throw DimensionError("batch input rows do not match");
        if (upstream.rows() != output_size() || upstream.cols() != x.cols())
            throw DimensionError("batch upstream shape does not match");
        std::vector<Eigen::MatrixXd> inputs;
        inputs.reserve(layers_.size());
        Eigen::MatrixXd h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            inputs.push_back(h);
            h = (layers_[i].w * h).colwise() + layers_[i].b;
            if (i + 1 < layers_.size()) activate(h);
        }
        Gradients g;
        g.layers.resize(layers_.size());
        Eigen::MatrixXd delta = upstream;
        for (std::size_t k = layers_.size(); k-- > 0;) {
            g.layers[k].w = delta * inputs[k].transpose();
            g.layers[k].b = delta.rowwise().sum();
            if (k == 0) break;
            delta = layers_[k].w.transpose() * delta;
            const auto& a = inputs[k];
            if (act_ == Activation::tanh)
                delta.array() *= 1.0 - a.array().square();
            else
                delta.array() *= (a.array() > 0.0).cast<double>();
        }
        return g;
    }

    Gradients zero_gradients() const {
        Gradients g;
        for (const auto& l : layers_)
            g.layers.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()), Eigen::VectorXd::Zero(l.b.size())});
        g.d_input = Eigen::VectorXd::Zero(input_size());
        return g;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
        return n;
    }

    // Flat parameter view: per layer, weights column-major then biases.
    Eigen::VectorXd parameters() const {
        Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
        Eigen::Index k = 0;
        for (const auto& l : layers_) {
            p.segment(k, l.w.size()) = Eigen::Map<const Eigen::VectorXd>(l.w.data(), l.w.size());
            k += l.w.size();
            p.segment(k, l.b.size()) = l.b;
            k += l.b.size();
        }
        return p;
    }

    void set_parameters(const Eigen::VectorXd& p) {
        if (p.size() != static_cast<Eigen::Index>(parameter_count())) throw DimensionError("parameter vector length");
        Eigen::Index k = 0;
        for (auto& l : layers_) {
            Eigen::Map<Eigen::VectorXd>(l.w.data(), l.w.size()) = p.segment(k, l.w.size());
            k += l.w.size();
            l.b = p.segment(k, l.b.size());
            k += l.b.size();
        }
    }

    static Eigen::VectorXd flatten(const Gradients& g) {
        Eigen::Index n = 0;
        for (const auto& l : g.layers) n += l.w.size() + l.b.size();
        Eigen::VectorXd p(n);
        Eigen::Index k = 0;
        for (const auto& l : g.layers) {
            p.segment(k, l.w.size()) = Eigen::Map<const Eigen::VectorXd>(l.w.data(), l.w.size());
            k += l.w.size();
            p.segment(k, l.b.size()) = l.b;
            k += l.b.size();
        }
        return p;
    }

    bool all_finite() const {
        for (const auto& l : layers_)
            if (!l.w.allFinite() || !l.b.allFinite()) return false;
        return true;
    }

    bool operator==(const Mlp& o) const {
        if (sizes_ != o.sizes_ || act_ != o.act_) return false;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            if (layers_[i].w != o.layers_[i].w || layers_[i].b != o.layers_[i].b) return false;
        return true;
    }

  private:
    void check_sizes() const {
        if (sizes_.size() < 2) throw DimensionError("an MLP needs at least input and output widths");
        for (int s : sizes_)
            if (s < 1) throw DimensionError("layer widths must be positive");
    }

    void check_input(const Eigen::VectorXd& x) const {
        if (layers_.empty()) throw DimensionError("empty network");
        if (x.size() != input_size()) throw DimensionError("input length does not match the first layer");
    }

    template <class M>
    void activate(M& h) const {
        if (act_ == Activation::tanh)
            h = h.array().tanh();
        else
            h = h.cwiseMax(0.0);
    }

    std::vector<int> sizes_;
    Activation act_ = Activation::tanh;
    std::vector<Layer> layers_;
};

// Checkpoint format, version 1:
//   {"format": "gridsim-mlp", "version": 1, "layer_sizes": [..],
//    "activation": "tanh" | "relu",
//    "layers": [{"weights": [[row], ...], "bias": [..]}, ...]}
// Doubles are written with full round-trip precision.
inline nlohmann::json to_json(const Mlp& m) {
    nlohmann::json j;
    j["format"] = "gridsim-mlp";
    j["version"] = 1;
    j["layer_sizes"] = m.sizes();
    j["activation"] = to_string(m.activation());
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& l : m.layers()) {
        nlohmann::json w = nlohmann::json::array();
        for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(l.w.cols()));
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) row[static_cast<std::size_t>(c)] = l.w(r, c);
            w.push_back(row);
        }
        layers.push_back({{"weights", w}, {"bias", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
    }
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "gridsim-mlp") throw ConfigError("not an MLP checkpoint");
        if (j.at("version").get<int>() != 1) throw ConfigError("unsupported checkpoint version");
        auto m = Mlp::zeros(j.at("layer_sizes").get<std::vector<int>>(),
                            activation_from_string(j.at("activation").get<std::string>()));
        const auto& layers = j.at("layers");
        if (layers.size() != m.layers().size()) throw ConfigError("checkpoint layer count mismatch");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto& l = m.layers()[i];
            const auto w = layers[i].at("weights").get<std::vector<std::vector<double>>>();
            const auto b = layers[i].at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != l.w.rows() || static_cast<Eigen::Index>(b.size()) != l.b.size())
                throw ConfigError("checkpoint layer shape mismatch");
            for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
                if (static_cast<Eigen::Index>(w[static_cast<std::size_t>(r)].size()) != l.w.cols())
                    throw ConfigError("checkpoint layer shape mismatch");
                for (Eigen::Index c = 0; c < l.w.cols(); ++c)
                    l.w(r, c) = w[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            }
            for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b[r] = b[static_cast<std::size_t>(r)];
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const Mlp& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << to_json(m).dump() << '\n';
}

inline Mlp load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return mlp_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace gridsim::nn
