#include "tanisep/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tanisep {

AudioBuffer::AudioBuffer(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {
    validate();
}

void AudioBuffer::validate() const {
    if (sample_rate <= 0) throw Error("audio: sample rate must be positive");
    for (double v : samples) {
        if (!std::isfinite(v)) throw Error("audio: non-finite sample");
    }
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("wav: cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw Error("wav: not a RIFF/WAVE file: " + path.string());
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (available < 16) throw Error("wav: truncated fmt chunk");
            format = read_u16(chunk + 8);
            channels = read_u16(chunk + 10);
            rate = read_u32(chunk + 12);
            bits = read_u16(chunk + 22);
            if (format == kFormatExtensible) {
                if (available < 26) throw Error("wav: truncated extensible fmt chunk");
                format = read_u16(chunk + 8 + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_size = available;
        }
        pos = body + size + (size & 1u);
    }

    if (!have_fmt || data == nullptr) throw Error("wav: missing fmt or data chunk");
    if (channels != 1) {
        throw Error("wav: only mono input is supported, got " + std::to_string(channels) +
                    " channels in " + path.string());
    }

    AudioBuffer audio;
    audio.sample_rate = static_cast<int>(rate);
    if (format == kFormatPcm && bits == 16) {
        const std::size_t n = data_size / 2;
        audio.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = static_cast<std::int16_t>(read_u16(data + 2 * i));
            audio.samples[i] = static_cast<double>(v) / 32768.0;
        }
    } else if (format == kFormatFloat && bits == 32) {
        const std::size_t n = data_size / 4;
        audio.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t raw = read_u32(data + 4 * i);
            float f;
            std::memcpy(&f, &raw, sizeof f);
            audio.samples[i] = static_cast<double>(f);
        }
    } else {
        throw Error("wav: unsupported encoding (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits); expected PCM-16 or float-32");
    }
    audio.validate();
    return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavFormat format) {
    audio.validate();
    const bool is_float = format == WavFormat::float32;
    const std::uint16_t bits = is_float ? 32 : 16;
    const std::uint16_t block_align = bits / 8;
    const auto data_size = static_cast<std::uint32_t>(audio.size() * block_align);

    std::vector<unsigned char> out;
    out.reserve(44 + data_size);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_size);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, is_float ? kFormatFloat : kFormatPcm);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * block_align);
    put_u16(out, block_align);
    put_u16(out, bits);
    put_tag(out, "data");
    put_u32(out, data_size);

    for (double v : audio.samples) {
        if (is_float) {
            const auto f = static_cast<float>(v);
            std::uint32_t raw;
            std::memcpy(&raw, &f, sizeof raw);
            put_u32(out, raw);
        } else {
            const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
            put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("wav: cannot write " + path.string());
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw Error("wav: write failed for " + path.string());
}

}  // namespace tanisep
