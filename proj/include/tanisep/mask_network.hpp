#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace tanisep {

inline constexpr double kMaskFloor = 1e-8;

struct MaskPair {
    Eigen::MatrixXd mask_m;  // frames x bins
    Eigen::MatrixXd mask_g;
};

struct NetworkShape {
    int input_dim = 513;
    std::vector<int> hidden = {500, 500, 500};
};

// Stacked ReLU RNN with two ReLU output heads normalised into a soft mask
// pair: mask_m = (a + eps) / (a + b + 2 eps), mask_g = (b + eps) / (a + b + 2 eps).
//
// Parameters are kept as a flat list of matrices:
//   layer l: W (h_l x in), U (h_l x h_l), b (h_l x 1) at 3l, 3l+1, 3l+2
//   then head_m W, head_m b, head_g W, head_g b.
class MaskNetwork {
public:
    MaskNetwork() = default;
    MaskNetwork(const NetworkShape& shape, std::uint64_t seed);

    const NetworkShape& shape() const { return shape_; }
    int input_dim() const { return shape_.input_dim; }
    int layers() const { return static_cast<int>(shape_.hidden.size()); }

    std::vector<Eigen::MatrixXd>& params() { return params_; }
    const std::vector<Eigen::MatrixXd>& params() const { return params_; }
    std::vector<std::string> param_names() const;
    std::size_t parameter_count() const;

    Eigen::MatrixXd& input_weights(int layer) { return params_[static_cast<std::size_t>(3 * layer)]; }
    Eigen::MatrixXd& recurrent_weights(int layer) { return params_[static_cast<std::size_t>(3 * layer + 1)]; }
    Eigen::MatrixXd& hidden_bias(int layer) { return params_[static_cast<std::size_t>(3 * layer + 2)]; }
    Eigen::MatrixXd& head_weights(int head) { return params_[static_cast<std::size_t>(3 * layers() + 2 * head)]; }
    Eigen::MatrixXd& head_bias(int head) { return params_[static_cast<std::size_t>(3 * layers() + 2 * head + 1)]; }

    void validate() const;

private:
    NetworkShape shape_;
    std::vector<Eigen::MatrixXd> params_;
};

// Per-utterance mean/variance normalisation of the magnitude input.
Eigen::MatrixXd normalize_input(const Eigen::MatrixXd& magnitudes);

// Activations kept for backpropagation.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer (dim x frames)
    std::vector<Eigen::MatrixXd> pre;     // pre-activations per layer
    std::vector<Eigen::MatrixXd> hidden;  // post-ReLU per layer
    Eigen::MatrixXd head_pre[2];
    Eigen::MatrixXd head_out[2];
    MaskPair masks;
};

// Runs the network on already normalised input, recurrent state starting at zero.
ForwardCache forward_cached(const MaskNetwork& net, const Eigen::MatrixXd& normalized);

// Masks for a raw mixture magnitude matrix (frames x input_dim).
MaskPair forward(const MaskNetwork& net, const Eigen::MatrixXd& mixture_mag);

// Backpropagation through time. d_mask_* are dL/dmask; returns one gradient per parameter.
std::vector<Eigen::MatrixXd> backward(const MaskNetwork& net, const ForwardCache& cache,
                                      const Eigen::MatrixXd& d_mask_m, const Eigen::MatrixXd& d_mask_g);

// Discriminative objective with every squared norm averaged over elements:
//   |ym^ - ym|^2 + |yg^ - yg|^2 - gamma (|ym^ - yg|^2 + |yg^ - ym|^2).
double discriminative_loss(const Eigen::MatrixXd& y_hat_m, const Eigen::MatrixXd& y_hat_g,
                           const Eigen::MatrixXd& y_m, const Eigen::MatrixXd& y_g, double gamma);

// Loss and its gradient with respect to the two masks, for estimates mask * mixture.
struct LossGrad {
    double loss = 0.0;
    Eigen::MatrixXd d_mask_m;
    Eigen::MatrixXd d_mask_g;
};
LossGrad mask_loss_grad(const MaskPair& masks, const Eigen::MatrixXd& mixture_mag, const Eigen::MatrixXd& y_m,
                        const Eigen::MatrixXd& y_g, double gamma);

nlohmann::json to_json(const MaskNetwork& net);
MaskNetwork mask_network_from_json(const nlohmann::json& j);
void save_network(const std::filesystem::path& path, const MaskNetwork& net);
MaskNetwork load_network(const std::filesystem::path& path);

}  // namespace tanisep
