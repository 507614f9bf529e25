#pragma once

// Signal containers and generic DSP primitives shared by the transmitter,
// channel and receiver: rational resampling, RRC design, FFT-based Hilbert
// transform and Welch spectra.

#include "ssblink/errors.hpp"
#include "ssblink/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace ssblink {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Samples flagged as filter/transform transients at each record edge.
inline constexpr std::size_t kEdgeTransientSamples = 256;

namespace detail {
inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }
}  // namespace detail

/// Uniformly sampled record with its sample rate. Immutable once built;
/// construction rejects empty records, non-positive rates and NaN/Inf.
template <typename T>
class Waveform {
public:
    using value_type = T;

    Waveform(std::vector<T> samples, double sample_rate_hz)
        : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
        if (samples_.empty()) throw ParameterError("empty waveform");
        if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
            throw ParameterError("sample rate must be positive and finite");
        for (const auto& s : samples_)
            if (!detail::is_finite(s)) throw ParameterError("waveform contains non-finite samples");
    }

    [[nodiscard]] std::span<const T> samples() const { return samples_; }
    [[nodiscard]] const std::vector<T>& vec() const { return samples_; }
    [[nodiscard]] double sample_rate_hz() const { return sample_rate_hz_; }
    [[nodiscard]] std::size_t size() const { return samples_.size(); }
    [[nodiscard]] const T& operator[](std::size_t i) const { return samples_[i]; }
    [[nodiscard]] double duration_s() const { return static_cast<double>(size()) / sample_rate_hz_; }

private:
    std::vector<T> samples_;
    double sample_rate_hz_;
};

using ComplexWaveform = Waveform<cplx>;
using RealWaveform = Waveform<double>;

inline ComplexWaveform to_complex(const RealWaveform& w) {
    return {std::vector<cplx>(w.vec().begin(), w.vec().end()), w.sample_rate_hz()};
}

inline RealWaveform real_part(const ComplexWaveform& w) {
    std::vector<double> r(w.size());
    std::transform(w.vec().begin(), w.vec().end(), r.begin(), [](const cplx& v) { return v.real(); });
    return {std::move(r), w.sample_rate_hz()};
}

inline RealWaveform imag_part(const ComplexWaveform& w) {
    std::vector<double> r(w.size());
    std::transform(w.vec().begin(), w.vec().end(), r.begin(), [](const cplx& v) { return v.imag(); });
    return {std::move(r), w.sample_rate_hz()};
}

template <typename T>
double mean_power(std::span<const T> x) {
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

template <typename T>
double mean_power(const Waveform<T>& w) {
    return mean_power(w.samples());
}

inline double db10(double ratio) { return 10.0 * std::log10(ratio); }
inline double from_db10(double db) { return std::pow(10.0, db / 10.0); }

/// FIR coefficients; spacing_samples is the tap spacing in input samples.
struct FirFilter {
    std::vector<double> taps;
    std::size_t spacing_samples{1};

    [[nodiscard]] std::size_t size() const { return taps.size(); }
    [[nodiscard]] double energy() const {
        return std::inner_product(taps.begin(), taps.end(), taps.begin(), 0.0);
    }
};

/// Zero-phase ("same") convolution with an odd-length real filter; the
/// centre tap is aligned with each output sample, samples outside the
/// record are taken as zero.
template <typename T>
std::vector<T> filter_same(std::span<const T> x, std::span<const double> taps) {
    if (taps.size() % 2 == 0) throw ParameterError("filter_same requires an odd number of taps");
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
    std::vector<T> y(x.size(), T{});
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-half, i - (n - 1));
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(half, i);
        T acc{};
        for (std::ptrdiff_t k = lo; k <= hi; ++k) acc += taps[static_cast<std::size_t>(k + half)] * x[i - k];
        y[static_cast<std::size_t>(i)] = acc;
    }
    return y;
}

template <typename T>
Waveform<T> filter_same(const Waveform<T>& w, const FirFilter& f) {
    return {filter_same<T>(w.samples(), f.taps), w.sample_rate_hz()};
}

// ---------------------------------------------------------------------------
// Rational resampling

/// Anti-alias design for the polyphase resampler. The passband runs to
/// passband_fraction of the lower Nyquist frequency, the stopband starts at
/// (2 - passband_fraction) of it.
struct ResamplerDesign {
    double stopband_db{70.0};
    double passband_fraction{0.94};
};

namespace detail {

inline double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = kPi * x;
    return std::sin(px) / px;
}

inline double kaiser_beta(double attenuation_db) {
    if (attenuation_db > 50.0) return 0.1102 * (attenuation_db - 8.7);
    if (attenuation_db >= 21.0)
        return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
    return 0.0;
}

inline std::vector<double> kaiser_window(std::size_t n, double beta) {
    std::vector<double> w(n);
    const double denom = std::cyl_bessel_i(0.0, beta);
    const double m = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = m > 0 ? 2.0 * static_cast<double>(i) / m - 1.0 : 0.0;
        w[i] = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
    }
    return w;
}

/// Kaiser-windowed sinc prototype at the interpolated rate, gain `up`.
inline std::vector<double> resampler_prototype(std::size_t up, std::size_t down, const ResamplerDesign& d) {
    const double m = static_cast<double>(std::max(up, down));
    const double cutoff = 0.5 / m;  // cycles per interpolated sample
    const double transition = 2.0 * (1.0 - d.passband_fraction) * cutoff;
    const auto est = static_cast<std::size_t>(std::ceil((d.stopband_db - 7.95) / (14.36 * transition)));
    const std::size_t half_inputs = (est + 2 * up - 1) / (2 * up);
    const std::size_t len = 2 * half_inputs * up + 1;
    const auto win = kaiser_window(len, kaiser_beta(d.stopband_db));
    std::vector<double> h(len);
    const double centre = static_cast<double>(len / 2);
    for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) - centre;
        h[i] = static_cast<double>(up) * 2.0 * cutoff * sinc(2.0 * cutoff * t) * win[i];
    }
    return h;
}

}  // namespace detail

/// Polyphase rational resampler, up/down reduced by their gcd. Output sample
/// m sits at input time m*down/up (zero group delay); the output holds
/// ceil(N*up/down) samples.
template <typename T>
std::vector<T> resample(std::span<const T> x, std::size_t up, std::size_t down, const ResamplerDesign& design = {}) {
    if (up == 0 || down == 0) throw ParameterError("resample factors must be positive");
    if (x.empty()) throw ParameterError("empty waveform");
    const std::size_t g = std::gcd(up, down);
    up /= g;
    down /= g;
    if (up == 1 && down == 1) return {x.begin(), x.end()};

    const auto h = detail::resampler_prototype(up, down, design);
    const auto len = static_cast<std::ptrdiff_t>(h.size());
    const auto centre = len / 2;
    const auto n_in = static_cast<std::ptrdiff_t>(x.size());
    const std::size_t n_out = (x.size() * up + down - 1) / down;
    const auto U = static_cast<std::ptrdiff_t>(up);
    const auto D = static_cast<std::ptrdiff_t>(down);

    std::vector<T> y(n_out, T{});
    for (std::size_t m = 0; m < n_out; ++m) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(m) * D + centre;
        // taps index = pos - n*U, must lie in [0, len)
        const std::ptrdiff_t lo_num = pos - (len - 1);
        const std::ptrdiff_t n_lo = lo_num <= 0 ? 0 : (lo_num + U - 1) / U;
        const std::ptrdiff_t n_hi = std::min<std::ptrdiff_t>(pos / U, n_in - 1);
        T acc{};
        for (std::ptrdiff_t n = n_lo; n <= n_hi; ++n)
            acc += h[static_cast<std::size_t>(pos - n * U)] * x[static_cast<std::size_t>(n)];
        y[m] = acc;
    }
    return y;
}

template <typename T>
Waveform<T> resample(const Waveform<T>& w, std::size_t up, std::size_t down, const ResamplerDesign& design = {}) {
    const double rate = w.sample_rate_hz() * static_cast<double>(up) / static_cast<double>(down);
    return {resample<T>(w.samples(), up, down, design), rate};
}

/// Expresses target/source as a reduced integer ratio; both rates must be
/// whole numbers of hertz.
inline std::pair<std::size_t, std::size_t> rate_ratio(double source_hz, double target_hz) {
    const double rs = std::round(source_hz);
    const double rt = std::round(target_hz);
    if (rs <= 0 || rt <= 0 || std::abs(rs - source_hz) > 1e-6 * source_hz ||
        std::abs(rt - target_hz) > 1e-6 * target_hz)
        throw ParameterError("sample rates must be positive whole numbers of hertz");
    const auto s = static_cast<std::uint64_t>(rs);
    const auto t = static_cast<std::uint64_t>(rt);
    const auto g = std::gcd(s, t);
    const auto up = t / g;
    const auto down = s / g;
    if (up > 4096 || down > 4096) throw ParameterError("rate ratio too irregular for polyphase resampling");
    return {static_cast<std::size_t>(up), static_cast<std::size_t>(down)};
}

template <typename T>
Waveform<T> resample_to(const Waveform<T>& w, double target_rate_hz, const ResamplerDesign& design = {}) {
    const auto [up, down] = rate_ratio(w.sample_rate_hz(), target_rate_hz);
    return {resample<T>(w.samples(), up, down, design), target_rate_hz};
}

// ---------------------------------------------------------------------------
// Pulse shaping

/// Root-raised-cosine impulse response, span_symbols*sps + 1 taps,
/// symmetric, unit energy.
inline FirFilter rrc_taps(double rolloff, std::size_t span_symbols, std::size_t sps) {
    if (!(rolloff >= 0.0 && rolloff <= 1.0)) throw ParameterError("rolloff must lie in [0, 1]");
    if (span_symbols == 0 || sps == 0) throw ParameterError("span and samples per symbol must be positive");
    const std::size_t n = span_symbols * sps + 1;
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    const double b = rolloff;
    std::vector<double> h(n);
    for (std::ptrdiff_t i = -half; i <= half; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(sps);
        double v;
        if (std::abs(t) < 1e-12) {
            v = 1.0 - b + 4.0 * b / kPi;
        } else if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-9) {
            v = b / std::sqrt(2.0) *
                ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) + (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
        } else {
            const double num = std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b));
            const double den = kPi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
            v = num / den;
        }
        h[static_cast<std::size_t>(i + half)] = v;
    }
    const double norm = std::sqrt(std::inner_product(h.begin(), h.end(), h.begin(), 0.0));
    for (auto& v : h) v /= norm;
    return {std::move(h), 1};
}

// ---------------------------------------------------------------------------
// Hilbert transform

/// x + jH{x} by a full-record DFT sign mask: DC and Nyquist bins kept once,
/// positive bins doubled, negative bins zeroed.
inline std::vector<cplx> analytic_signal(std::span<const double> x) {
    if (x.empty()) throw ParameterError("empty waveform");
    auto spec = fft::forward_real(x);
    const std::size_t n = spec.size();
    for (std::size_t k = 1; k < n; ++k) {
        if (2 * k < n) spec[k] *= 2.0;
        else if (2 * k > n) spec[k] = 0.0;
    }
    auto z = fft::inverse(spec);
    // The real part is the input by construction; restore it exactly.
    for (std::size_t i = 0; i < n; ++i) z[i].real(x[i]);
    return z;
}

inline ComplexWaveform analytic_signal(const RealWaveform& w) {
    return {analytic_signal(w.samples()), w.sample_rate_hz()};
}

inline std::vector<double> hilbert(std::span<const double> x) {
    auto z = analytic_signal(x);
    std::vector<double> h(z.size());
    std::transform(z.begin(), z.end(), h.begin(), [](const cplx& v) { return v.imag(); });
    return h;
}

// ---------------------------------------------------------------------------
// Spectra

struct PsdPoint {
    double freq_hz;
    double power_db;  ///< power in the bin, 10log10 of linear units of |x|^2
};

/// Linear Welch estimate, bins ordered by increasing frequency over
/// [-fs/2, fs/2). power[k] is the power falling in bin k, so the bins sum
/// to the mean power of the record.
struct Spectrum {
    std::vector<double> freq_hz;
    std::vector<double> power;
    double bin_width_hz{0.0};
    std::size_t segments{0};

    [[nodiscard]] double integrate(double f_lo, double f_hi) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < freq_hz.size(); ++k)
            if (freq_hz[k] >= f_lo && freq_hz[k] <= f_hi) acc += power[k];
        return acc;
    }
    [[nodiscard]] double total() const { return std::accumulate(power.begin(), power.end(), 0.0); }
};

/// Welch periodogram with a Hann window and 50 % overlap. The segment length
/// is chosen so the window's equivalent noise bandwidth equals rbw_hz.
inline Spectrum welch(std::span<const cplx> x, double fs, double rbw_hz) {
    if (x.empty()) throw ParameterError("empty waveform");
    if (!(rbw_hz > 0.0) || rbw_hz >= fs / 2.0) throw ParameterError("rbw must lie in (0, fs/2)");
    const auto seg = static_cast<std::size_t>(std::ceil(1.5 * fs / rbw_hz));
    if (seg > x.size()) throw ParameterError("rbw too fine for record length");
    const std::size_t hop = std::max<std::size_t>(1, seg / 2);
    const std::size_t segments = (x.size() - seg) / hop + 1;

    std::vector<double> win(seg);
    double win_energy = 0.0;
    for (std::size_t i = 0; i < seg; ++i) {
        win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(seg));
        win_energy += win[i] * win[i];
    }

    std::vector<double> acc(seg, 0.0);
    std::vector<cplx> buf(seg);
    for (std::size_t s = 0; s < segments; ++s) {
        const std::size_t off = s * hop;
        for (std::size_t i = 0; i < seg; ++i) buf[i] = x[off + i] * win[i];
        const auto spec = fft::forward(buf);
        for (std::size_t k = 0; k < seg; ++k) acc[k] += std::norm(spec[k]);
    }

    Spectrum out;
    out.bin_width_hz = fs / static_cast<double>(seg);
    out.segments = segments;
    out.freq_hz.resize(seg);
    out.power.resize(seg);
    const double scale = 1.0 / (static_cast<double>(segments) * static_cast<double>(seg) * win_energy);
    const std::size_t shift = seg / 2;  // bin order -fs/2 .. fs/2
    for (std::size_t j = 0; j < seg; ++j) {
        const std::size_t k = (j + seg - shift) % seg;
        out.freq_hz[j] = (static_cast<double>(j) - static_cast<double>(shift)) * out.bin_width_hz;
        out.power[j] = acc[k] * scale;
    }
    return out;
}

inline Spectrum welch(const ComplexWaveform& w, double rbw_hz) { return welch(w.samples(), w.sample_rate_hz(), rbw_hz); }

inline Spectrum welch(const RealWaveform& w, double rbw_hz) { return welch(to_complex(w), rbw_hz); }

inline std::vector<PsdPoint> psd(const ComplexWaveform& w, double rbw_hz) {
    const auto s = welch(w, rbw_hz);
    std::vector<PsdPoint> out(s.freq_hz.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = {s.freq_hz[k], 10.0 * std::log10(std::max(s.power[k], 1e-300))};
    return out;
}

inline std::vector<PsdPoint> psd(const RealWaveform& w, double rbw_hz) { return psd(to_complex(w), rbw_hz); }

// ---------------------------------------------------------------------------
// Analog-style responses applied in the frequency domain

/// Second-order Bessel low-pass scaled to -3 dB at f3db_hz, including its
/// (near-constant) group delay.
inline cplx bessel2_response(double f_hz, double f3db_hz) {
    constexpr double kOmega3db = 1.3616541287161306;  // -3 dB point of 3/(s^2+3s+3)
    const cplx s{0.0, kOmega3db * f_hz / f3db_hz};
    return 3.0 / (s * s + 3.0 * s + 3.0);
}

/// Frequency-domain filtering of a real record; the response must be
/// conjugate-symmetric for the result to be real, which the real part
/// enforces against rounding.
template <typename Response>
std::vector<double> filter_real_frequency_domain(std::span<const double> x, double fs, Response&& response) {
    std::vector<cplx> c(x.begin(), x.end());
    const auto y = fft::filter_frequency_domain(c, fs, std::forward<Response>(response));
    std::vector<double> r(y.size());
    std::transform(y.begin(), y.end(), r.begin(), [](const cplx& v) { return v.real(); });
    return r;
}

/// Delays a real record by delay_s (may be fractional) with a linear phase
/// ramp over the full record.
inline std::vector<double> fractional_delay(std::span<const double> x, double fs, double delay_s) {
    if (delay_s == 0.0) return {x.begin(), x.end()};
    return filter_real_frequency_domain(x, fs, [delay_s](double f) {
        return std::polar(1.0, -2.0 * kPi * f * delay_s);
    });
}

}  // namespace ssblink
