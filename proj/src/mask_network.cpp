#include "tanisep/mask_network.hpp"

#include <cmath>
#include <fstream>

#include "tanisep/audio.hpp"
#include "tanisep/rng.hpp"

namespace tanisep {

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = stddev * rng.normal();
    }
    return m;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

}  // namespace

MaskNetwork::MaskNetwork(const NetworkShape& shape, std::uint64_t seed) : shape_(shape) {
    if (shape.input_dim <= 0 || shape.hidden.empty()) throw Error("mask network: invalid shape");
    Rng rng(seed);
    int in = shape.input_dim;
    for (int h : shape.hidden) {
        if (h <= 0) throw Error("mask network: hidden sizes must be positive");
        params_.push_back(random_matrix(h, in, std::sqrt(2.0 / in), rng));
        params_.push_back(random_matrix(h, h, 0.5 / std::sqrt(static_cast<double>(h)), rng));
        params_.push_back(Eigen::MatrixXd::Zero(h, 1));
        in = h;
    }
    for (int head = 0; head < 2; ++head) {
        params_.push_back(random_matrix(shape.input_dim, in, std::sqrt(1.0 / in), rng));
        // Positive bias keeps the ReLU heads alive at the start of training.
        params_.push_back(Eigen::MatrixXd::Constant(shape.input_dim, 1, 0.1));
    }
}

std::vector<std::string> MaskNetwork::param_names() const {
    std::vector<std::string> names;
    for (int l = 0; l < layers(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        names.push_back(p + "W");
        names.push_back(p + "U");
        names.push_back(p + "b");
    }
    names.insert(names.end(), {"head_m.W", "head_m.b", "head_g.W", "head_g.b"});
    return names;
}

std::size_t MaskNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
    return n;
}

void MaskNetwork::validate() const {
    if (params_.size() != 3 * shape_.hidden.size() + 4) throw Error("mask network: wrong parameter count");
    int in = shape_.input_dim;
    for (std::size_t l = 0; l < shape_.hidden.size(); ++l) {
        const int h = shape_.hidden[l];
        if (params_[3 * l].rows() != h || params_[3 * l].cols() != in || params_[3 * l + 1].rows() != h ||
            params_[3 * l + 1].cols() != h || params_[3 * l + 2].rows() != h || params_[3 * l + 2].cols() != 1) {
            throw Error("mask network: layer " + std::to_string(l) + " has wrong dimensions");
        }
        in = h;
    }
    const std::size_t base = 3 * shape_.hidden.size();
    for (std::size_t head = 0; head < 2; ++head) {
        const auto& w = params_[base + 2 * head];
        const auto& b = params_[base + 2 * head + 1];
        if (w.rows() != shape_.input_dim || w.cols() != in || b.rows() != shape_.input_dim || b.cols() != 1) {
            throw Error("mask network: output head has wrong dimensions");
        }
    }
    for (const auto& p : params_) {
        if (!p.allFinite()) throw Error("mask network: non-finite parameter");
    }
}

Eigen::MatrixXd normalize_input(const Eigen::MatrixXd& magnitudes) {
    if (magnitudes.size() == 0) return magnitudes;
    const double mean = magnitudes.mean();
    const double var = (magnitudes.array() - mean).square().mean();
    const double scale = 1.0 / std::sqrt(var + 1e-12);
    return ((magnitudes.array() - mean) * scale).matrix();
}

ForwardCache forward_cached(const MaskNetwork& net, const Eigen::MatrixXd& normalized) {
    if (normalized.cols() != net.input_dim()) {
        throw Error("mask network: expected " + std::to_string(net.input_dim()) + " bins, got " +
                    std::to_string(normalized.cols()));
    }
    const auto& p = net.params();
    const Eigen::Index frames = normalized.rows();
    ForwardCache cache;
    Eigen::MatrixXd x = normalized.transpose();  // dim x frames
    for (int l = 0; l < net.layers(); ++l) {
        const auto& w = p[static_cast<std::size_t>(3 * l)];
        const auto& u = p[static_cast<std::size_t>(3 * l + 1)];
        const auto& b = p[static_cast<std::size_t>(3 * l + 2)];
        Eigen::MatrixXd z = w * x;
        z.colwise() += b.col(0);
        Eigen::MatrixXd h(z.rows(), frames);
        for (Eigen::Index t = 0; t < frames; ++t) {
            if (t > 0) z.col(t).noalias() += u * h.col(t - 1);
            h.col(t) = z.col(t).cwiseMax(0.0);
        }
        cache.inputs.push_back(std::move(x));
        cache.pre.push_back(std::move(z));
        x = h;
        cache.hidden.push_back(std::move(h));
    }
    const std::size_t base = 3 * static_cast<std::size_t>(net.layers());
    for (int head = 0; head < 2; ++head) {
        Eigen::MatrixXd z = p[base + 2 * static_cast<std::size_t>(head)] * x;
        z.colwise() += p[base + 2 * static_cast<std::size_t>(head) + 1].col(0);
        cache.head_out[head] = relu(z);
        cache.head_pre[head] = std::move(z);
    }
    const Eigen::ArrayXXd a = cache.head_out[0].array() + kMaskFloor;
    const Eigen::ArrayXXd b = cache.head_out[1].array() + kMaskFloor;
    const Eigen::ArrayXXd s = a + b;
    cache.masks.mask_m = (a / s).matrix().transpose();
    cache.masks.mask_g = (b / s).matrix().transpose();
    return cache;
}

MaskPair forward(const MaskNetwork& net, const Eigen::MatrixXd& mixture_mag) {
    return forward_cached(net, normalize_input(mixture_mag)).masks;
}

std::vector<Eigen::MatrixXd> backward(const MaskNetwork& net, const ForwardCache& cache,
                                      const Eigen::MatrixXd& d_mask_m, const Eigen::MatrixXd& d_mask_g) {
    const auto& p = net.params();
    std::vector<Eigen::MatrixXd> grads(p.size());
    const std::size_t base = 3 * static_cast<std::size_t>(net.layers());

    // Mask normalisation.
    const Eigen::ArrayXXd a = cache.head_out[0].array() + kMaskFloor;
    const Eigen::ArrayXXd b = cache.head_out[1].array() + kMaskFloor;
    const Eigen::ArrayXXd s2 = (a + b).square();
    const Eigen::ArrayXXd diff = (d_mask_m - d_mask_g).transpose().array();
    Eigen::MatrixXd d_head[2];
    d_head[0] = (diff * b / s2 * (cache.head_pre[0].array() > 0.0).cast<double>()).matrix();
    d_head[1] = (-diff * a / s2 * (cache.head_pre[1].array() > 0.0).cast<double>()).matrix();

    const Eigen::MatrixXd& top = cache.hidden.back();
    Eigen::MatrixXd d_x = Eigen::MatrixXd::Zero(top.rows(), top.cols());
    for (int head = 0; head < 2; ++head) {
        const std::size_t wi = base + 2 * static_cast<std::size_t>(head);
        grads[wi] = d_head[head] * top.transpose();
        grads[wi + 1] = d_head[head].rowwise().sum();
        d_x.noalias() += p[wi].transpose() * d_head[head];
    }

    for (int l = net.layers() - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        const auto& w = p[3 * li];
        const auto& u = p[3 * li + 1];
        const Eigen::MatrixXd& z = cache.pre[li];
        const Eigen::MatrixXd& h = cache.hidden[li];
        const Eigen::Index frames = z.cols();
        Eigen::MatrixXd d_z(z.rows(), frames);
        Eigen::VectorXd carry = Eigen::VectorXd::Zero(z.rows());
        for (Eigen::Index t = frames - 1; t >= 0; --t) {
            Eigen::VectorXd dh = d_x.col(t) + carry;
            d_z.col(t) = (z.col(t).array() > 0.0).select(dh, 0.0);
            carry.noalias() = u.transpose() * d_z.col(t);
        }
        grads[3 * li] = d_z * cache.inputs[li].transpose();
        grads[3 * li + 1] = Eigen::MatrixXd::Zero(u.rows(), u.cols());
        if (frames > 1) {
            grads[3 * li + 1].noalias() = d_z.rightCols(frames - 1) * h.leftCols(frames - 1).transpose();
        }
        grads[3 * li + 2] = d_z.rowwise().sum();
        if (l > 0) d_x = w.transpose() * d_z;
    }
    return grads;
}

double discriminative_loss(const Eigen::MatrixXd& y_hat_m, const Eigen::MatrixXd& y_hat_g,
                           const Eigen::MatrixXd& y_m, const Eigen::MatrixXd& y_g, double gamma) {
    if (y_hat_m.rows() != y_m.rows() || y_hat_m.cols() != y_m.cols() || y_hat_g.rows() != y_m.rows() ||
        y_hat_g.cols() != y_m.cols() || y_g.rows() != y_m.rows() || y_g.cols() != y_m.cols()) {
        throw Error("loss: shape mismatch");
    }
    if (gamma < 0.0) throw Error("loss: gamma must be non-negative");
    const auto n = static_cast<double>(y_m.size());
    if (n == 0) return 0.0;
    return ((y_hat_m - y_m).squaredNorm() + (y_hat_g - y_g).squaredNorm() -
            gamma * ((y_hat_m - y_g).squaredNorm() + (y_hat_g - y_m).squaredNorm())) /
           n;
}

LossGrad mask_loss_grad(const MaskPair& masks, const Eigen::MatrixXd& mixture_mag, const Eigen::MatrixXd& y_m,
                        const Eigen::MatrixXd& y_g, double gamma) {
    const Eigen::MatrixXd y_hat_m = masks.mask_m.cwiseProduct(mixture_mag);
    const Eigen::MatrixXd y_hat_g = masks.mask_g.cwiseProduct(mixture_mag);
    LossGrad out;
    out.loss = discriminative_loss(y_hat_m, y_hat_g, y_m, y_g, gamma);
    const double scale = 2.0 / static_cast<double>(y_m.size());
    const Eigen::MatrixXd d_hat_m = scale * ((y_hat_m - y_m) - gamma * (y_hat_m - y_g));
    const Eigen::MatrixXd d_hat_g = scale * ((y_hat_g - y_g) - gamma * (y_hat_g - y_m));
    out.d_mask_m = d_hat_m.cwiseProduct(mixture_mag);
    out.d_mask_g = d_hat_g.cwiseProduct(mixture_mag);
    return out;
}

nlohmann::json to_json(const MaskNetwork& net) {
    nlohmann::json j;
    j["format"] = "tanisep-mask-network";
    j["version"] = 1;
    j["input_dim"] = net.shape().input_dim;
    j["hidden"] = net.shape().hidden;
    const auto names = net.param_names();
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < net.params().size(); ++i) {
        const Eigen::MatrixXd& m = net.params()[i];
        // Row-major flat data.
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(m.size()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
        }
        params.push_back({{"name", names[i]}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}});
    }
    j["params"] = std::move(params);
    return j;
}

MaskNetwork mask_network_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "tanisep-mask-network") throw Error("mask network: wrong format tag");
    if (j.value("version", 0) != 1) throw Error("mask network: unsupported version");
    NetworkShape shape;
    shape.input_dim = j.at("input_dim").get<int>();
    shape.hidden = j.at("hidden").get<std::vector<int>>();
    MaskNetwork net(shape, 0);
    const auto& params = j.at("params");
    if (params.size() != net.params().size()) throw Error("mask network: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto rows = params[i].at("rows").get<Eigen::Index>();
        const auto cols = params[i].at("cols").get<Eigen::Index>();
        const auto& data = params[i].at("data");
        if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error("mask network: bad matrix payload");
        Eigen::MatrixXd m(rows, cols);
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
        }
        net.params()[i] = std::move(m);
    }
    net.validate();
    return net;
}

void save_network(const std::filesystem::path& path, const MaskNetwork& net) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("mask network: cannot write " + path.string());
    out << to_json(net).dump() << '\n';
    if (!out) throw Error("mask network: write failed for " + path.string());
}

MaskNetwork load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("mask network: cannot open " + path.string());
    return mask_network_from_json(nlohmann::json::parse(in));
}

}  // namespace tanisep
