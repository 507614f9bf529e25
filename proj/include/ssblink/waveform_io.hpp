#pragma once

// Debug dump format for complex waveforms:
//   bytes 0..3   magic "SSBW"
//   bytes 4..7   format version, u32 little-endian
//   bytes 8..15  sample rate in Hz, IEEE-754 binary64 little-endian
//   then one (I, Q) pair of binary64 little-endian values per sample.

#include "ssblink/sigkit.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace ssblink::io {

inline constexpr std::array<char, 4> kWaveformMagic{'S', 'S', 'B', 'W'};
inline constexpr std::uint32_t kWaveformVersion = 1;

namespace detail {

template <typename U>
void put_le(std::ostream& os, U value) {
    std::array<unsigned char, sizeof(U)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
    std::array<unsigned char, sizeof(U)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(U))) throw Error("truncated waveform file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    U value;
    std::memcpy(&value, bytes.data(), sizeof(U));
    return value;
}

}  // namespace detail

inline void write_waveform(std::ostream& os, const ComplexWaveform& w) {
    os.write(kWaveformMagic.data(), kWaveformMagic.size());
    detail::put_le<std::uint32_t>(os, kWaveformVersion);
    detail::put_le<double>(os, w.sample_rate_hz());
    for (const auto& s : w.samples()) {
        detail::put_le<double>(os, s.real());
        detail::put_le<double>(os, s.imag());
    }
    if (!os) throw Error("failed writing waveform");
}

inline void write_waveform(const std::filesystem::path& path, const ComplexWaveform& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_waveform(os, w);
}

inline ComplexWaveform read_waveform(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kWaveformMagic) throw Error("not an SSBW waveform file");
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kWaveformVersion) throw Error("unsupported SSBW version " + std::to_string(version));
    const auto rate = detail::get_le<double>(is);
    std::vector<cplx> samples;
    while (is.peek() != std::char_traits<char>::eof()) {
        const double re = detail::get_le<double>(is);
        const double im = detail::get_le<double>(is);
        samples.emplace_back(re, im);
    }
    return {std::move(samples), rate};
}

inline ComplexWaveform read_waveform(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    return read_waveform(is);
}

}  // namespace ssblink::io
