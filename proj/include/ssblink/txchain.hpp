#pragma once

// Transmitter DSP: PAM-4 mapping, frame assembly, Nyquist shaping,
// single-sideband drive generation and a simple DAC impairment model.

#include "ssblink/sigkit.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace ssblink::tx {

using Bit = std::uint8_t;

inline constexpr std::array<int, 4> kPam4Levels{-3, -1, 1, 3};

/// Gray map: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
inline int pam4_level(Bit msb, Bit lsb) {
    if (msb == 0) return lsb == 0 ? -3 : -1;
    return lsb == 0 ? 3 : 1;
}

inline std::pair<Bit, Bit> pam4_bits(int level) {
    switch (level) {
        case -3: return {0, 0};
        case -1: return {0, 1};
        case 1: return {1, 1};
        case 3: return {1, 0};
        default: throw ParameterError("not a PAM-4 level: " + std::to_string(level));
    }
}

/// Nearest PAM-4 level of a soft sample.
inline int slice_pam4(double v) {
    if (v < -2.0) return -3;
    if (v < 0.0) return -1;
    if (v < 2.0) return 1;
    return 3;
}

inline std::vector<int> map_pam4(std::span<const Bit> bits) {
    if (bits.size() % 2 != 0) throw ParameterError("odd bit count");
    std::vector<int> out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pam4_level(bits[2 * i], bits[2 * i + 1]);
    return out;
}

inline std::vector<Bit> demap_pam4(std::span<const int> symbols) {
    std::vector<Bit> out(symbols.size() * 2);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const auto [msb, lsb] = pam4_bits(symbols[i]);
        out[2 * i] = msb;
        out[2 * i + 1] = lsb;
    }
    return out;
}

inline std::vector<Bit> random_bits(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Bit> bits(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) word = rng();
        bits[i] = static_cast<Bit>((word >> (i % 64)) & 1U);
    }
    return bits;
}

/// Peak-to-sidelobe ratio of the aperiodic autocorrelation of a block.
inline double autocorrelation_psr(std::span<const int> block) {
    const std::size_t n = block.size();
    double peak = 0.0;
    double side = 0.0;
    for (std::size_t lag = 0; lag < n; ++lag) {
        double r = 0.0;
        for (std::size_t k = 0; k + lag < n; ++k) r += block[k] * block[k + lag];
        if (lag == 0) peak = r;
        else side = std::max(side, std::abs(r));
    }
    return side > 0.0 ? peak / side : std::numeric_limits<double>::infinity();
}

/// sync (2 x 64) | training (4 x 128) | payload (25600), PAM-4 levels only.
struct SymbolFrame {
    static constexpr std::size_t kSyncBlocks = 2;
    static constexpr std::size_t kSyncBlockLen = 64;
    static constexpr std::size_t kTrainingBlocks = 4;
    static constexpr std::size_t kTrainingBlockLen = 128;
    static constexpr std::size_t kPayloadSymbols = 25600;
    static constexpr std::size_t kSyncLen = kSyncBlocks * kSyncBlockLen;
    static constexpr std::size_t kTrainingLen = kTrainingBlocks * kTrainingBlockLen;
    static constexpr std::size_t kPreambleLen = kSyncLen + kTrainingLen;
    static constexpr std::size_t kTotalSymbols = kPreambleLen + kPayloadSymbols;
    static constexpr std::size_t kPayloadBits = 2 * kPayloadSymbols;

    std::vector<int> sync;
    std::vector<int> training;
    std::vector<int> payload;

    [[nodiscard]] std::vector<int> symbols() const {
        std::vector<int> all;
        all.reserve(kTotalSymbols);
        all.insert(all.end(), sync.begin(), sync.end());
        all.insert(all.end(), training.begin(), training.end());
        all.insert(all.end(), payload.begin(), payload.end());
        return all;
    }

    /// Payload share of the frame, 25600 / 26240.
    static constexpr double payload_fraction() {
        return static_cast<double>(kPayloadSymbols) / static_cast<double>(kTotalSymbols);
    }
};

/// Net rate after frame overhead and the 7 % hard-decision FEC overhead.
inline double net_bitrate(double line_rate_bps, double fec_overhead = 0.07) {
    return line_rate_bps * SymbolFrame::payload_fraction() / (1.0 + fec_overhead);
}

inline std::vector<int> random_symbols(std::size_t n, std::mt19937_64& rng) {
    std::vector<int> out(n);
    std::uniform_int_distribution<int> pick(0, 3);
    for (auto& s : out) s = kPam4Levels[static_cast<std::size_t>(pick(rng))];
    return out;
}

/// Minimum autocorrelation peak-to-sidelobe ratio required of each sync block.
inline constexpr double kSyncMinPsr = 4.0;

/// The preamble depends only on the seed, so a receiver sharing the seed
/// knows it. Sync blocks are redrawn from the same generator until each
/// meets kSyncMinPsr.
inline SymbolFrame build_frame(std::span<const Bit> payload_bits, std::uint64_t seed) {
    if (payload_bits.size() != SymbolFrame::kPayloadBits)
        throw ParameterError("payload must hold " + std::to_string(SymbolFrame::kPayloadBits) + " bits, got " +
                             std::to_string(payload_bits.size()));
    std::mt19937_64 rng(seed);
    SymbolFrame f;
    for (std::size_t b = 0; b < SymbolFrame::kSyncBlocks; ++b) {
        std::vector<int> block;
        do {
            block = random_symbols(SymbolFrame::kSyncBlockLen, rng);
        } while (autocorrelation_psr(block) < kSyncMinPsr);
        f.sync.insert(f.sync.end(), block.begin(), block.end());
    }
    f.training = random_symbols(SymbolFrame::kTrainingLen, rng);
    f.payload = map_pam4(payload_bits);
    return f;
}

/// Default RRC span used throughout the link (symbols).
inline constexpr std::size_t kRrcSpanSymbols = 128;

/// How shape_nyquist scales its output.
enum class Scaling {
    peak,         ///< record peak |y| = 1
    outer_level,  ///< +-3 maps to +-1 in the rms sense (rms sqrt(5)/3), same for every draw
};

/// Up-samples by `up`, RRC-filters at `up` samples/symbol, keeps every
/// `down`-th sample. Output rate is baud*up/down, symbol k sits at output
/// time k*up/down samples.
inline RealWaveform shape_nyquist(std::span<const int> symbols, double baud_hz, std::size_t up, std::size_t down,
                                  double rolloff, std::size_t span_symbols = kRrcSpanSymbols,
                                  Scaling scaling = Scaling::peak) {
    if (symbols.empty()) throw ParameterError("empty waveform");
    if (up == 0 || down == 0) throw ParameterError("resample factors must be positive");
    if (up < down) throw ParameterError("sub-Nyquist DAC");
    const auto h = rrc_taps(rolloff, span_symbols, up).taps;
    const auto len = static_cast<std::ptrdiff_t>(h.size());
    const auto centre = len / 2;
    const auto U = static_cast<std::ptrdiff_t>(up);
    const auto n_sym = static_cast<std::ptrdiff_t>(symbols.size());
    const std::size_t n_out = (symbols.size() * up + down - 1) / down;

    std::vector<double> y(n_out);
    double peak = 0.0;
    for (std::size_t m = 0; m < n_out; ++m) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(m * down) + centre;
        const std::ptrdiff_t lo_num = pos - (len - 1);
        const std::ptrdiff_t k_lo = lo_num <= 0 ? 0 : (lo_num + U - 1) / U;
        const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(pos / U, n_sym - 1);
        double acc = 0.0;
        for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k)
            acc += h[static_cast<std::size_t>(pos - k * U)] * symbols[static_cast<std::size_t>(k)];
        y[m] = acc;
        peak = std::max(peak, std::abs(acc));
    }
    // unit-energy taps at `up` samples/symbol give mean power 5/up
    const double scale = scaling == Scaling::peak ? 1.0 / peak : std::sqrt(static_cast<double>(up)) / 3.0;
    for (auto& v : y) v *= scale;
    return {std::move(y), baud_hz * static_cast<double>(up) / static_cast<double>(down)};
}

inline RealWaveform shape_nyquist(const SymbolFrame& frame, double baud_hz, std::size_t up, std::size_t down,
                                  double rolloff, std::size_t span_symbols = kRrcSpanSymbols,
                                  Scaling scaling = Scaling::peak) {
    const auto s = frame.symbols();
    return shape_nyquist(s, baud_hz, up, down, rolloff, span_symbols, scaling);
}

struct SsbDrives {
    RealWaveform v_i;
    RealWaveform v_q;
};

/// Hilbert-pair drive signals: v_i is the shaped waveform, v_q its Hilbert
/// transform.
inline SsbDrives make_ssb_drives(const RealWaveform& shaped) {
    return {shaped, RealWaveform{hilbert(shaped.samples()), shaped.sample_rate_hz()}};
}

// ---------------------------------------------------------------------------
// DAC

struct DacModel {
    double sample_rate_hz{64e9};
    double enob_bits{std::numeric_limits<double>::infinity()};
    double clip_fraction{1.0};
    double channel_skew_s{0.0};  ///< channel 2 minus channel 1

    void validate(double symbol_duration_s) const {
        if (!(enob_bits > 0.0)) throw ParameterError("enob_bits must be positive");
        if (!(clip_fraction > 0.0 && clip_fraction <= 1.0)) throw ParameterError("clip_fraction must lie in (0, 1]");
        if (std::abs(channel_skew_s) >= 10.0 * symbol_duration_s)
            throw ParameterError("channel skew must be under 10 symbol durations");
    }
};

enum class DacChannel { first, second };

/// Clip at +-clip_fraction*max|w|, quantise with a mid-rise uniform quantiser
/// of 2^enob levels over the clip range, then delay the second channel by
/// the skew. ENOB of infinity disables quantisation.
inline RealWaveform apply_dac(const RealWaveform& w, const DacModel& dac, DacChannel channel = DacChannel::first) {
    std::vector<double> y = w.vec();
    double peak = 0.0;
    for (double v : y) peak = std::max(peak, std::abs(v));
    const double full_scale = dac.clip_fraction * peak;
    if (dac.clip_fraction < 1.0)
        for (auto& v : y) v = std::clamp(v, -full_scale, full_scale);
    if (std::isfinite(dac.enob_bits) && full_scale > 0.0) {
        const double step = 2.0 * full_scale / std::pow(2.0, dac.enob_bits);
        const double top = full_scale - step / 2.0;
        for (auto& v : y) v = std::clamp((std::floor(v / step) + 0.5) * step, -top, top);
    }
    if (channel == DacChannel::second && dac.channel_skew_s != 0.0)
        y = fractional_delay(y, w.sample_rate_hz(), dac.channel_skew_s);
    return {std::move(y), w.sample_rate_hz()};
}

}  // namespace ssblink::tx
