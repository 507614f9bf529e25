#pragma once

// Evaluation: bit-error counting, optical spectrum measurements (CSPR, OSSR,
// OSNR), amplitude PDFs and the closed-form DSB dispersion-fading envelope.

#include "ssblink/linkmodel.hpp"
#include "ssblink/txchain.hpp"

#include <optional>
#include <string>

namespace ssblink::metrics {

struct BerReport {
    std::size_t bit_errors{0};
    std::size_t bits_counted{0};
    std::size_t symbol_errors{0};
    double ber{0.0};

    /// Fewer than 10 errors counted, i.e. bits_counted < 10/ber.
    [[nodiscard]] bool insufficient_statistics() const { return bit_errors < 10; }

    BerReport& operator+=(const BerReport& o) {
        bit_errors += o.bit_errors;
        bits_counted += o.bits_counted;
        symbol_errors += o.symbol_errors;
        ber = bits_counted ? static_cast<double>(bit_errors) / static_cast<double>(bits_counted) : 0.0;
        return *this;
    }
};

/// Bit and (2-bit) symbol error counts over equal-length streams.
inline BerReport count_ber(std::span<const tx::Bit> tx_bits, std::span<const tx::Bit> rx_bits) {
    if (tx_bits.size() != rx_bits.size()) throw ParameterError("bit stream length mismatch");
    BerReport r;
    r.bits_counted = tx_bits.size();
    for (std::size_t i = 0; i < tx_bits.size(); ++i) r.bit_errors += (tx_bits[i] != rx_bits[i]) ? 1 : 0;
    for (std::size_t i = 0; i + 1 < tx_bits.size(); i += 2)
        r.symbol_errors += (tx_bits[i] != rx_bits[i] || tx_bits[i + 1] != rx_bits[i + 1]) ? 1 : 0;
    r.ber = r.bits_counted ? static_cast<double>(r.bit_errors) / static_cast<double>(r.bits_counted) : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Optical spectrum measurements

/// Integration bands relative to the carrier frequency.
struct OpticalBands {
    double carrier_halfwidth_hz;   ///< +- around the carrier counted as carrier
    double sideband_edge_hz;       ///< outer edge of each sideband
    double noise_floor_from_hz;    ///< |f - fc| beyond which only noise is assumed
    double rbw_hz;
    std::optional<double> known_noise_psd{};  ///< ground-truth noise density (per Hz) when available

    /// Carrier bin +-baud/256, sidebands out to (1+rolloff)*baud/2, noise
    /// floor read beyond 1.1*baud where second-order modulator products end.
    static OpticalBands for_baud(double baud_hz, double rolloff = 0.01) {
        const double half = baud_hz / 256.0;
        return {half, 0.5 * (1.0 + rolloff) * baud_hz, 1.1 * baud_hz, half / 8.0, {}};
    }
};

struct OpticalMeasurement {
    double cspr_db;
    double ossr_db;
    double osnr_db;
    double carrier_power;
    double upper_sideband_power;
    double lower_sideband_power;
    double noise_psd;  ///< per Hz
};

inline OpticalMeasurement measure_optical(const ComplexWaveform& w, double carrier_freq_hz, const OpticalBands& bands) {
    const auto spec = welch(w, bands.rbw_hz);
    const double fs = w.sample_rate_hz();
    const double bw = spec.bin_width_hz;

    double noise_per_bin = 0.0;
    if (bands.known_noise_psd) {
        noise_per_bin = *bands.known_noise_psd * bw;
    } else {
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < spec.freq_hz.size(); ++k) {
            const double d = std::abs(spec.freq_hz[k] - carrier_freq_hz);
            if (d >= bands.noise_floor_from_hz && std::abs(spec.freq_hz[k]) <= 0.9 * fs / 2.0) {
                acc += spec.power[k];
                ++count;
            }
        }
        if (count > 0) noise_per_bin = acc / static_cast<double>(count);
    }

    double carrier = 0.0, upper = 0.0, lower = 0.0;
    std::size_t n_car = 0, n_up = 0, n_lo = 0;
    for (std::size_t k = 0; k < spec.freq_hz.size(); ++k) {
        const double d = spec.freq_hz[k] - carrier_freq_hz;
        if (std::abs(d) <= bands.carrier_halfwidth_hz) {
            carrier += spec.power[k];
            ++n_car;
        } else if (d > 0 && d <= bands.sideband_edge_hz) {
            upper += spec.power[k];
            ++n_up;
        } else if (d < 0 && -d <= bands.sideband_edge_hz) {
            lower += spec.power[k];
            ++n_lo;
        }
    }
    carrier -= noise_per_bin * static_cast<double>(n_car);
    upper = std::max(upper - noise_per_bin * static_cast<double>(n_up), 0.0);
    lower = std::max(lower - noise_per_bin * static_cast<double>(n_lo), 0.0);
    const double signal = upper + lower;

    const double sideband_width = 2.0 * (bands.sideband_edge_hz - bands.carrier_halfwidth_hz);
    const double signal_in_carrier_bin = sideband_width > 0.0 ? signal * (2.0 * bands.carrier_halfwidth_hz) / sideband_width : 0.0;
    if (!(carrier > 0.0) || carrier < 10.0 * signal_in_carrier_bin) throw SimulationError("carrier not resolvable");

    static constexpr double kCapDb = 100.0;
    const auto ratio_db = [](double num, double den) {
        if (den <= 0.0) return kCapDb;
        return std::min(kCapDb, db10(num / den));
    };
    const double noise_psd = noise_per_bin / bw;
    const double total = spec.total();
    const double noise_total = noise_psd * fs;
    const double osnr_db = noise_psd > 0.0 ? db10((total - noise_total) / (noise_psd * link::kOsnrReferenceBandwidthHz)) : kCapDb;
    return {ratio_db(carrier, signal), ratio_db(upper, lower), std::min(osnr_db, kCapDb), carrier, upper, lower, noise_psd};
}

// ---------------------------------------------------------------------------
// Amplitude PDFs

struct PdfMode {
    double location;
    double density;
};

struct PdfProfile {
    std::vector<double> centers;
    std::vector<double> density;  ///< integrates to 1 over the bins
    double bin_width{0.0};

    /// Local maxima of the lightly smoothed density above min_relative of
    /// the global maximum, at least `separation` bins apart.
    [[nodiscard]] std::vector<PdfMode> modes(double min_relative = 0.05, std::size_t separation = 0) const {
        const std::size_t n = density.size();
        if (separation == 0) separation = std::max<std::size_t>(2, n / 40);
        std::vector<double> smooth(n, 0.0);
        const auto r = static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, n / 200));
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            double acc = 0.0, wsum = 0.0;
            for (std::ptrdiff_t j = -2 * r; j <= 2 * r; ++j) {
                const std::ptrdiff_t k = i + j;
                if (k < 0 || k >= static_cast<std::ptrdiff_t>(n)) continue;
                const double wgt = std::exp(-0.5 * static_cast<double>(j * j) / static_cast<double>(r * r));
                acc += wgt * density[static_cast<std::size_t>(k)];
                wsum += wgt;
            }
            smooth[static_cast<std::size_t>(i)] = acc / wsum;
        }
        const double peak = *std::max_element(smooth.begin(), smooth.end());
        std::vector<PdfMode> out;
        const auto sep = static_cast<std::ptrdiff_t>(separation);
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            const double v = smooth[static_cast<std::size_t>(i)];
            if (v < min_relative * peak) continue;
            bool is_max = true;
            for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - sep);
                 j <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, i + sep) && is_max; ++j) {
                const double u = smooth[static_cast<std::size_t>(j)];
                if (u > v || (u == v && j < i)) is_max = false;
            }
            if (is_max) out.push_back({centers[static_cast<std::size_t>(i)], v});
        }
        return out;
    }
};

/// Normalised histogram over [min, max] of the samples.
inline PdfProfile pdf_profile(std::span<const double> samples, std::size_t bins) {
    if (samples.empty() || bins == 0) throw ParameterError("pdf_profile needs samples and bins");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi <= lo) hi = lo + 1.0;
    PdfProfile p;
    p.bin_width = (hi - lo) / static_cast<double>(bins);
    p.centers.resize(bins);
    p.density.assign(bins, 0.0);
    for (std::size_t b = 0; b < bins; ++b) p.centers[b] = lo + (static_cast<double>(b) + 0.5) * p.bin_width;
    for (double v : samples) {
        auto b = static_cast<std::size_t>((v - lo) / p.bin_width);
        if (b >= bins) b = bins - 1;
        p.density[b] += 1.0;
    }
    const double norm = 1.0 / (static_cast<double>(samples.size()) * p.bin_width);
    for (auto& d : p.density) d *= norm;
    return p;
}

struct ModeStatistics {
    double mean;
    double stddev;
    std::size_t count;
};

/// Mean and spread of the samples closest to each mode location.
inline std::vector<ModeStatistics> mode_statistics(std::span<const double> samples, std::span<const PdfMode> modes) {
    std::vector<double> sum(modes.size(), 0.0), sum2(modes.size(), 0.0);
    std::vector<std::size_t> cnt(modes.size(), 0);
    for (double v : samples) {
        std::size_t best = 0;
        for (std::size_t m = 1; m < modes.size(); ++m)
            if (std::abs(v - modes[m].location) < std::abs(v - modes[best].location)) best = m;
        sum[best] += v;
        sum2[best] += v * v;
        ++cnt[best];
    }
    std::vector<ModeStatistics> out(modes.size());
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const double n = static_cast<double>(std::max<std::size_t>(cnt[m], 1));
        const double mean = sum[m] / n;
        out[m] = {mean, std::sqrt(std::max(0.0, sum2[m] / n - mean * mean)), cnt[m]};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dispersion fading

/// Small-signal DSB RF power response after fibre and square-law detection,
/// cos^2(pi D L lambda^2 nu^2 / c).
inline double fading_oracle(double nu_hz, const link::FiberParams& f) {
    const double c = std::cos(kPi * f.dispersion_s2() * nu_hz * nu_hz);
    return c * c;
}

/// Frequency of the n-th (1-based) fading null.
inline double fading_null_hz(const link::FiberParams& f, int n = 1) {
    return std::sqrt((2.0 * n - 1.0) / (2.0 * f.dispersion_s2()));
}

}  // namespace ssblink::metrics
