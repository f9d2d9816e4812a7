#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tanisep {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mono signal. Samples are nominally in [-1, 1].
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 44100;

    AudioBuffer() = default;
    AudioBuffer(std::vector<double> s, int rate);

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

    // Throws if the rate is non-positive or any sample is NaN/Inf.
    void validate() const;
};

enum class WavFormat { pcm16, float32 };

// Reads a mono PCM-16 or IEEE float-32 WAV file. Multi-channel files are rejected.
AudioBuffer read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavFormat format = WavFormat::float32);

}  // namespace tanisep
