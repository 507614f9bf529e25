#pragma once

// Physical channel: dual-drive MZM, fibre chromatic dispersion, ASE noise
// loading, optical band-pass filtering, square-law detection and the
// electrical receiver front end.

#include "ssblink/sigkit.hpp"

#include <limits>
#include <optional>
#include <random>

namespace ssblink::link {

// ---------------------------------------------------------------------------
// Modulator

/// Lumped dual-drive MZM. arm_phase_bias is the static phase of arm 2
/// relative to arm 1, kept in [0, 2pi).
struct MzmParams {
    double v_pi{6.9};  ///< per-arm; 1.73 V*cm over 2.5 mm arms
    double arm_phase_bias{1.5 * kPi};
    double insertion_loss_db{0.0};
    std::optional<double> drive_bandwidth_hz{};  ///< lumped drive-side low-pass, off when empty

    /// Quadrature operating point, arm 2 lagging by pi/2.
    static MzmParams quadrature(double v_pi = 6.9) { return {v_pi, 1.5 * kPi, 0.0, {}}; }

    void set_bias(double radians) {
        double b = std::fmod(radians, 2.0 * kPi);
        if (b < 0) b += 2.0 * kPi;
        arm_phase_bias = b;
    }

    void validate() const {
        if (!(v_pi > 0.0)) throw ParameterError("v_pi must be positive");
        if (!(arm_phase_bias >= 0.0 && arm_phase_bias < 2.0 * kPi))
            throw ParameterError("arm_phase_bias must lie in [0, 2pi)");
        if (!(insertion_loss_db >= 0.0)) throw ParameterError("insertion loss must be non-negative");
        if (drive_bandwidth_hz && !(*drive_bandwidth_hz > 0.0)) throw ParameterError("drive bandwidth must be positive");
    }

    /// Drive amplitude A giving modulation index m = pi*Vpp/(2 Vpi) = pi*A/Vpi
    /// for a drive whose unit level is scaled to A.
    [[nodiscard]] double drive_amplitude(double modulation_index) const { return modulation_index * v_pi / kPi; }
};

inline RealWaveform low_pass(const RealWaveform& w, double f3db_hz) {
    return {filter_real_frequency_domain(w.samples(), w.sample_rate_hz(),
                                         [f3db_hz](double f) { return bessel2_response(f, f3db_hz); }),
            w.sample_rate_hz()};
}

/// E_out = (E_in/2) [exp(j pi v1/Vpi) + exp(j(pi v2/Vpi + bias))] scaled by
/// the insertion loss. Near bias = 3pi/2 (i.e. -pi/2) the first-order
/// expansion is (E_in/2)[(pi/Vpi)(v2 + j v1) + 1 - j].
inline ComplexWaveform mzm_dual_drive(const ComplexWaveform& carrier, const RealWaveform& v1, const RealWaveform& v2,
                                      const MzmParams& p) {
    p.validate();
    if (v1.size() != carrier.size() || v2.size() != carrier.size())
        throw ParameterError("drive length mismatch");
    if (v1.sample_rate_hz() != carrier.sample_rate_hz() || v2.sample_rate_hz() != carrier.sample_rate_hz())
        throw ParameterError("drive sample-rate mismatch");
    const RealWaveform d1 = p.drive_bandwidth_hz ? low_pass(v1, *p.drive_bandwidth_hz) : v1;
    const RealWaveform d2 = p.drive_bandwidth_hz ? low_pass(v2, *p.drive_bandwidth_hz) : v2;
    const double k = kPi / p.v_pi;
    const double loss = std::pow(10.0, -p.insertion_loss_db / 20.0);
    std::vector<cplx> out(carrier.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const cplx arms = std::polar(1.0, k * d1[i]) + std::polar(1.0, k * d2[i] + p.arm_phase_bias);
        out[i] = 0.5 * loss * carrier[i] * arms;
    }
    return {std::move(out), carrier.sample_rate_hz()};
}

/// Constant unit field (CW laser, no phase noise).
inline ComplexWaveform cw_carrier(std::size_t n, double fs, double amplitude = 1.0) {
    return {std::vector<cplx>(n, cplx{amplitude, 0.0}), fs};
}

// ---------------------------------------------------------------------------
// Fibre

struct FiberParams {
    double dispersion_ps_nm_km{17.0};
    double length_km{0.0};
    double wavelength_nm{1552.9};
    double loss_db_km{0.2};

    void validate() const {
        if (!(length_km >= 0.0)) throw ParameterError("fiber length must be non-negative");
        if (!(wavelength_nm > 1000.0 && wavelength_nm < 2000.0))
            throw ParameterError("wavelength must lie in (1000, 2000) nm");
        if (!(loss_db_km >= 0.0)) throw ParameterError("fiber loss must be non-negative");
    }

    /// D*L*lambda^2/c in s^2; the CD phase at baseband offset nu is pi*this*nu^2.
    [[nodiscard]] double dispersion_s2() const {
        const double d = dispersion_ps_nm_km * 1e-6;  // s/m^2
        const double l = length_km * 1e3;
        const double lambda = wavelength_nm * 1e-9;
        return d * l * lambda * lambda / kSpeedOfLight;
    }

    [[nodiscard]] double total_loss_db() const { return loss_db_km * length_km; }
};

/// All-pass H(nu) = exp(+j pi D L lambda^2 nu^2 / c) times the span loss.
/// With exp(+j 2 pi nu t) baseband this gives group delay -D L lambda^2 nu / c,
/// i.e. positive D delays the longer-wavelength (nu < 0) side.
inline ComplexWaveform fiber_cd(const ComplexWaveform& w, const FiberParams& f) {
    f.validate();
    if (f.length_km == 0.0) return w;
    const double beta = kPi * f.dispersion_s2();
    const double amp = std::pow(10.0, -f.total_loss_db() / 20.0);
    return {fft::filter_frequency_domain(w.samples(), w.sample_rate_hz(),
                                         [beta, amp](double nu) { return std::polar(amp, beta * nu * nu); }),
            w.sample_rate_hz()};
}

// ---------------------------------------------------------------------------
// Noise and optical filtering

inline constexpr double kOsnrReferenceBandwidthHz = 12.5e9;

struct NoiseLoader {
    double target_osnr_db{std::numeric_limits<double>::infinity()};
    std::uint64_t rng_seed{1};
};

/// Complex white-noise variance (total over the simulation bandwidth) that
/// sets signal power / noise power in 12.5 GHz to osnr_db.
inline double noise_variance_for_osnr(double signal_power, double fs, double osnr_db) {
    const double psd = signal_power / (from_db10(osnr_db) * kOsnrReferenceBandwidthHz);
    return psd * fs;
}

inline ComplexWaveform load_osnr(const ComplexWaveform& w, const NoiseLoader& n) {
    if (std::isnan(n.target_osnr_db) || n.target_osnr_db == -std::numeric_limits<double>::infinity())
        throw ParameterError("target OSNR must be positive in linear units");
    if (std::isinf(n.target_osnr_db)) return w;
    const double p = mean_power(w);
    if (!(p > 0.0)) throw ParameterError("cannot load noise onto a zero-power field");
    const double sigma = std::sqrt(noise_variance_for_osnr(p, w.sample_rate_hz(), n.target_osnr_db) / 2.0);
    std::mt19937_64 rng(n.rng_seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<cplx> out = w.vec();
    for (auto& v : out) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        v += cplx{re, im};
    }
    return {std::move(out), w.sample_rate_hz()};
}

/// Band-pass filter centred center_offset_hz from the carrier. The power
/// response is flat over bw*(1-edge)/2 either side of centre, rolls off as a
/// raised cosine and is zero beyond bw*(1+edge)/2, so its noise-equivalent
/// bandwidth equals bw_hz.
inline ComplexWaveform obpf(const ComplexWaveform& w, double center_offset_hz, double bw_hz, double edge_fraction = 0.1) {
    if (!(bw_hz > 0.0) || bw_hz >= w.sample_rate_hz()) throw ParameterError("OBPF bandwidth must lie in (0, fs)");
    const double inner = 0.5 * bw_hz * (1.0 - edge_fraction);
    const double outer = 0.5 * bw_hz * (1.0 + edge_fraction);
    return {fft::filter_frequency_domain(w.samples(), w.sample_rate_hz(),
                                         [=](double f) -> cplx {
                                             const double d = std::abs(f - center_offset_hz);
                                             if (d <= inner) return 1.0;
                                             if (d >= outer) return 0.0;
                                             const double p2 = 0.5 * (1.0 + std::cos(kPi * (d - inner) / (outer - inner)));
                                             return std::sqrt(p2);
                                         }),
            w.sample_rate_hz()};
}

// ---------------------------------------------------------------------------
// Detection

/// Square-law detection with unit responsivity.
inline RealWaveform photodiode(const ComplexWaveform& w) {
    std::vector<double> i(w.size());
    std::transform(w.vec().begin(), w.vec().end(), i.begin(), [](const cplx& v) { return std::norm(v); });
    return {std::move(i), w.sample_rate_hz()};
}

/// Second-order Bessel low-pass at bw_3db_hz (infinite disables it), then a
/// rational resample to adc_rate_hz.
inline RealWaveform elec_frontend(const RealWaveform& w, double bw_3db_hz, double adc_rate_hz) {
    if (std::isfinite(bw_3db_hz) && !(bw_3db_hz < adc_rate_hz / 2.0))
        throw ParameterError("front-end bandwidth must be below the ADC Nyquist frequency");
    const RealWaveform filtered = std::isfinite(bw_3db_hz) ? low_pass(w, bw_3db_hz) : w;
    if (adc_rate_hz == w.sample_rate_hz()) return filtered;
    return resample_to(filtered, adc_rate_hz);
}

/// Additive white Gaussian noise of the given variance.
inline RealWaveform add_awgn(const RealWaveform& w, double variance, std::uint64_t seed) {
    if (variance <= 0.0) return w;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(variance));
    std::vector<double> out = w.vec();
    for (auto& v : out) v += gauss(rng);
    return {std::move(out), w.sample_rate_hz()};
}

}  // namespace ssblink::link
