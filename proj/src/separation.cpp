#include "tanisep/separation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tanisep/rng.hpp"

namespace tanisep {

void TrainConfig::validate() const {
    if (!(gamma >= 0.0)) throw Error("train: gamma must be non-negative");
    if (!(learning_rate > 0.0)) throw Error("train: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw Error("train: momentum must be in [0, 1)");
    if (epochs < 0) throw Error("train: epochs must be non-negative");
    if (sequence_len <= 0) throw Error("train: sequence length must be positive");
    if (clip_norm < 0.0) throw Error("train: clip norm must be non-negative");
    if (!is_power_of_two(static_cast<std::size_t>(std::max(fft_size, 0))) || hop <= 0 || hop > fft_size / 2) {
        throw Error("train: invalid STFT parameters");
    }
}

Spectrogram padded_stft(const AudioBuffer& audio, int fft_size, int hop) {
    if (audio.empty()) throw Error("stft: empty signal");
    const auto pad = static_cast<std::size_t>(fft_size);
    std::vector<double> padded(audio.size() + 2 * pad, 0.0);
    std::copy(audio.samples.begin(), audio.samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
    return stft(AudioBuffer(std::move(padded), audio.sample_rate), fft_size, hop);
}

namespace {

struct PreparedPair {
    Eigen::MatrixXd input;  // normalised mixture magnitude
    Eigen::MatrixXd mix;
    Eigen::MatrixXd y_m;
    Eigen::MatrixXd y_g;
};

double global_norm(const std::vector<Eigen::MatrixXd>& grads) {
    double s = 0.0;
    for (const auto& g : grads) s += g.squaredNorm();
    return std::sqrt(s);
}

}  // namespace

TrainResult train(MaskNetwork net, std::span<const TrainingPair> pairs, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    net.validate();
    if (pairs.empty()) throw Error("train: no training pairs");
    if (net.input_dim() != cfg.fft_size / 2 + 1) throw Error("train: network input size does not match fft size");

    std::vector<PreparedPair> data;
    struct Chunk {
        std::size_t pair;
        Eigen::Index start, len;
    };
    std::vector<Chunk> chunks;
    for (const auto& p : pairs) {
        if (p.mixture.empty()) throw Error("train: empty mixture");
        if (p.mixture.size() != p.source_m.size() || p.mixture.size() != p.source_g.size()) {
            throw Error("train: mixture and sources have different lengths");
        }
        if (p.mixture.sample_rate != p.source_m.sample_rate || p.mixture.sample_rate != p.source_g.sample_rate) {
            throw Error("train: mixture and sources have different sample rates");
        }
        PreparedPair prep;
        prep.mix = padded_stft(p.mixture, cfg.fft_size, cfg.hop).magnitudes;
        prep.y_m = padded_stft(p.source_m, cfg.fft_size, cfg.hop).magnitudes;
        prep.y_g = padded_stft(p.source_g, cfg.fft_size, cfg.hop).magnitudes;
        // Normalisation statistics come from the whole utterance, before chunking.
        prep.input = normalize_input(prep.mix);
        // Level-independent step size; masks are unaffected by the scaling.
        const double mean = prep.mix.mean();
        const double spread = std::sqrt((prep.mix.array() - mean).square().mean()) + 1e-12;
        prep.mix /= spread;
        prep.y_m /= spread;
        prep.y_g /= spread;
        const Eigen::Index frames = prep.mix.rows();
        for (Eigen::Index s = 0; s < frames; s += cfg.sequence_len) {
            chunks.push_back({data.size(), s, std::min<Eigen::Index>(cfg.sequence_len, frames - s)});
        }
        data.push_back(std::move(prep));
    }

    std::vector<Eigen::MatrixXd> velocity;
    for (const auto& p : net.params()) velocity.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(chunks.size());
    TrainResult result;
    result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        double total = 0.0;
        for (std::size_t ci : order) {
            const Chunk& c = chunks[ci];
            const PreparedPair& d = data[c.pair];
            const ForwardCache cache = forward_cached(net, d.input.middleRows(c.start, c.len));
            const LossGrad lg = mask_loss_grad(cache.masks, d.mix.middleRows(c.start, c.len),
                                               d.y_m.middleRows(c.start, c.len), d.y_g.middleRows(c.start, c.len),
                                               cfg.gamma);
            total += lg.loss;
            std::vector<Eigen::MatrixXd> grads = backward(net, cache, lg.d_mask_m, lg.d_mask_g);
            double scale = 1.0;
            if (cfg.clip_norm > 0.0) {
                const double norm = global_norm(grads);
                if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
            }
            for (std::size_t k = 0; k < grads.size(); ++k) {
                velocity[k] = cfg.momentum * velocity[k] - (cfg.learning_rate * scale) * grads[k];
                net.params()[k] += velocity[k];
            }
        }
        result.loss_history.push_back(total / static_cast<double>(chunks.size()));
        if (on_epoch && !on_epoch(epoch + 1, net, result.loss_history.back())) break;
    }
    net.validate();
    result.net = std::move(net);
    return result;
}

SeparationOutput apply_masks(const AudioBuffer& mixture, const MaskFunction& masks, int fft_size, int hop) {
    mixture.validate();
    Spectrogram spec = padded_stft(mixture, fft_size, hop);
    const MaskPair m = masks(spec.magnitudes);
    if (m.mask_m.rows() != spec.frames() || m.mask_m.cols() != spec.bins() || m.mask_g.rows() != spec.frames() ||
        m.mask_g.cols() != spec.bins()) {
        throw Error("separate: mask shape does not match spectrogram");
    }
    const auto pad = static_cast<std::ptrdiff_t>(fft_size);
    auto render = [&](const Eigen::MatrixXd& mask) {
        Spectrogram s = spec;
        s.magnitudes = mask.cwiseProduct(spec.magnitudes);
        AudioBuffer full = istft(s);
        std::vector<double> out(full.samples.begin() + pad,
                                full.samples.begin() + pad + static_cast<std::ptrdiff_t>(mixture.size()));
        return AudioBuffer(std::move(out), mixture.sample_rate);
    };
    return {render(m.mask_m), render(m.mask_g)};
}

SeparationOutput separate(const MaskNetwork& net, const AudioBuffer& mixture, int fft_size, int hop) {
    return apply_masks(
        mixture, [&](const Eigen::MatrixXd& mag) { return forward(net, mag); }, fft_size, hop);
}

namespace {

enum class Role { mridangam, ghatam, overlap };

struct Interval {
    std::size_t begin, end;
    Role role;
    std::string label;
};

struct Layout {
    std::vector<Interval> intervals;
    std::vector<std::size_t> half;  // crossfade half-width at the join after interval i
};

Layout build_layout(const AudioBuffer& mixture, const Annotation& labeled, const AssembleConfig& cfg) {
    if (mixture.empty()) throw Error("assemble: empty mixture");
    if (cfg.crossfade_sec < 0.0 || cfg.context_sec < 0.0) throw Error("assemble: negative crossfade or context");
    const Annotation ann = labeled.merged();
    if (ann.empty()) throw Error("assemble: empty annotation");
    const double sr = mixture.sample_rate;
    const double total = mixture.duration();
    const double tol = 1e-3 + 1.0 / sr;
    if (ann.start() > tol) throw Error("assemble: annotation does not cover the start of the mixture");
    if (ann.end() < total - tol) throw Error("assemble: annotation does not cover the end of the mixture");
    const auto n = mixture.size();
    auto to_sample = [&](double t) {
        const double s = std::round(t * sr);
        return static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(n)));
    };

    Layout layout;
    const auto& segs = ann.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const Segment& s = segs[i];
        if (i > 0 && s.start - segs[i - 1].end > tol) {
            throw Error("assemble: coverage gap at " + std::to_string(segs[i - 1].end) + " s");
        }
        if (!s.label) throw Error("assemble: unlabeled interval at " + std::to_string(s.start) + " s");
        Role role;
        if (*s.label == labels::mridangam) {
            role = Role::mridangam;
        } else if (*s.label == labels::ghatam) {
            role = Role::ghatam;
        } else if (*s.label == labels::overlap) {
            role = Role::overlap;
        } else {
            throw Error("assemble: unexpected label '" + *s.label + "'");
        }
        const std::size_t begin = i == 0 ? 0 : layout.intervals.back().end;
        const std::size_t end = i + 1 == segs.size() ? n : std::max(begin, to_sample(s.end));
        if (end == begin) continue;
        layout.intervals.push_back({begin, end, role, *s.label});
    }
    if (layout.intervals.empty()) throw Error("assemble: annotation covers no samples");
    if (layout.intervals.back().end != n) layout.intervals.back().end = n;

    const auto nominal = static_cast<std::size_t>(std::round(cfg.crossfade_sec * sr / 2.0));
    for (std::size_t i = 0; i + 1 < layout.intervals.size(); ++i) {
        const auto& a = layout.intervals[i];
        const auto& b = layout.intervals[i + 1];
        std::size_t h = std::min({nominal, (a.end - a.begin) / 2, (b.end - b.begin) / 2});
        if (a.role == b.role) h = 0;  // same routing on both sides
        layout.half.push_back(h);
    }
    return layout;
}

}  // namespace

SeparationOutput assemble_channels(const AudioBuffer& mixture, const Annotation& labeled, const MaskFunction& masks,
                                   const AssembleConfig& cfg) {
    mixture.validate();
    const Layout layout = build_layout(mixture, labeled, cfg);
    const std::size_t n = mixture.size();
    const auto ctx = static_cast<std::size_t>(std::round(cfg.context_sec * mixture.sample_rate));
    std::vector<double> out_m(n, 0.0), out_g(n, 0.0);

    for (std::size_t i = 0; i < layout.intervals.size(); ++i) {
        const Interval& iv = layout.intervals[i];
        const std::size_t h_left = i == 0 ? 0 : layout.half[i - 1];
        const std::size_t h_right = i + 1 == layout.intervals.size() ? 0 : layout.half[i];
        const std::size_t lo = iv.begin - h_left;
        const std::size_t hi = iv.end + h_right;

        auto weight = [&](std::size_t k) {
            if (h_left > 0 && k < iv.begin + h_left) {
                return (static_cast<double>(k - lo) + 0.5) / static_cast<double>(2 * h_left);
            }
            if (h_right > 0 && k >= iv.end - h_right) {
                return 1.0 - (static_cast<double>(k - (iv.end - h_right)) + 0.5) / static_cast<double>(2 * h_right);
            }
            return 1.0;
        };

        if (iv.role != Role::overlap) {
            std::vector<double>& active = iv.role == Role::mridangam ? out_m : out_g;
            for (std::size_t k = lo; k < hi; ++k) {
                const double w = weight(k);
                active[k] += w == 1.0 ? mixture.samples[k] : w * mixture.samples[k];
            }
            continue;
        }
        const std::size_t s_lo = lo >= ctx ? lo - ctx : 0;
        const std::size_t s_hi = std::min(n, hi + ctx);
        AudioBuffer slice(std::vector<double>(mixture.samples.begin() + static_cast<std::ptrdiff_t>(s_lo),
                                              mixture.samples.begin() + static_cast<std::ptrdiff_t>(s_hi)),
                          mixture.sample_rate);
        const SeparationOutput sep = apply_masks(slice, masks, cfg.fft_size, cfg.hop);
        for (std::size_t k = lo; k < hi; ++k) {
            const double w = weight(k);
            out_m[k] += w * sep.mridangam.samples[k - s_lo];
            out_g[k] += w * sep.ghatam.samples[k - s_lo];
        }
    }
    return {AudioBuffer(std::move(out_m), mixture.sample_rate), AudioBuffer(std::move(out_g), mixture.sample_rate)};
}

SeparationOutput assemble_channels(const AudioBuffer& mixture, const Annotation& labeled, const MaskNetwork& net,
                                   const AssembleConfig& cfg) {
    return assemble_channels(
        mixture, labeled, [&](const Eigen::MatrixXd& mag) { return forward(net, mag); }, cfg);
}

std::vector<SoloRange> solo_ranges(const AudioBuffer& mixture, const Annotation& labeled, const AssembleConfig& cfg) {
    const Layout layout = build_layout(mixture, labeled, cfg);
    std::vector<SoloRange> out;
    for (std::size_t i = 0; i < layout.intervals.size(); ++i) {
        const Interval& iv = layout.intervals[i];
        if (iv.role == Role::overlap) continue;
        const std::size_t h_left = i == 0 ? 0 : layout.half[i - 1];
        const std::size_t h_right = i + 1 == layout.intervals.size() ? 0 : layout.half[i];
        if (iv.begin + h_left < iv.end - h_right) out.push_back({iv.begin + h_left, iv.end - h_right, iv.label});
    }
    return out;
}

}  // namespace tanisep
