#pragma once

// Receiver DSP: Kramers-Kronig field reconstruction, CD compensation, phase
// alignment, frame synchronisation, RLS equalisation, [1, alpha] post
// filter and 4-state Viterbi MLSD.

#include "ssblink/linkmodel.hpp"
#include "ssblink/txchain.hpp"

#include <array>
#include <limits>

namespace ssblink::rx {

// ---------------------------------------------------------------------------
// Field reconstruction

/// Upsamples the photocurrent by `oversample`, then
///   E = sqrt(i) * exp(j H{ln(i)/2}).
/// Exact (up to a constant phase) for a minimum-phase field whose signal
/// occupies positive frequencies only. Nonpositive samples in the edge
/// transients of the record are floored; anywhere else they mean the field
/// is not minimum phase.
inline ComplexWaveform kk_reconstruct(const RealWaveform& i_pd, std::size_t oversample = 4) {
    if (oversample < 2) throw ParameterError("KK oversampling must be at least 2");
    const RealWaveform up = resample(i_pd, oversample, 1);
    std::vector<double> i = up.vec();
    const std::size_t edge = std::min(kEdgeTransientSamples * oversample, i.size() / 2);
    double floor = std::numeric_limits<double>::infinity();
    for (std::size_t n = edge; n < i.size() - edge; ++n) {
        if (!(i[n] > 0.0)) throw SimulationError("minimum-phase violated");
        floor = std::min(floor, i[n]);
    }
    for (std::size_t n = 0; n < i.size(); ++n)
        if (!(i[n] > 0.0)) i[n] = std::isfinite(floor) ? floor : std::numeric_limits<double>::min();
    std::vector<double> log_amp(i.size());
    for (std::size_t n = 0; n < i.size(); ++n) log_amp[n] = 0.5 * std::log(i[n]);
    const auto phase = hilbert(log_amp);
    std::vector<cplx> e(i.size());
    for (std::size_t n = 0; n < e.size(); ++n) e[n] = std::polar(std::sqrt(i[n]), phase[n]);
    return {std::move(e), up.sample_rate_hz()};
}

/// Conjugate of the fibre's dispersive phase; loss is not restored.
inline ComplexWaveform cd_compensate(const ComplexWaveform& w, const link::FiberParams& f) {
    f.validate();
    if (f.length_km == 0.0) return w;
    const double beta = kPi * f.dispersion_s2();
    return {fft::filter_frequency_domain(w.samples(), w.sample_rate_hz(),
                                         [beta](double nu) { return std::polar(1.0, -beta * nu * nu); }),
            w.sample_rate_hz()};
}

/// Subtracts the record mean, i.e. the optical carrier at DC.
inline ComplexWaveform remove_carrier(const ComplexWaveform& w) {
    cplx mean{};
    for (const auto& v : w.samples()) mean += v;
    mean /= static_cast<double>(w.size());
    std::vector<cplx> out = w.vec();
    for (auto& v : out) v -= mean;
    return {std::move(out), w.sample_rate_hz()};
}

/// Re{w exp(j theta)}.
inline RealWaveform phase_align(const ComplexWaveform& w, double theta_rad) {
    const cplx rot = std::polar(1.0, theta_rad);
    std::vector<double> out(w.size());
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = (w[n] * rot).real();
    return {std::move(out), w.sample_rate_hz()};
}

inline RealWaveform remove_mean(const RealWaveform& w) {
    double mean = 0.0;
    for (double v : w.samples()) mean += v;
    mean /= static_cast<double>(w.size());
    std::vector<double> out = w.vec();
    for (auto& v : out) v -= mean;
    return {std::move(out), w.sample_rate_hz()};
}

inline RealWaveform matched_filter(const RealWaveform& w, double rolloff, std::size_t sps,
                                   std::size_t span_symbols = tx::kRrcSpanSymbols) {
    return filter_same(w, rrc_taps(rolloff, span_symbols, sps));
}

// ---------------------------------------------------------------------------
// Synchronisation

struct SyncConfig {
    std::size_t sps{4};
    double rolloff{0.01};
    std::size_t span_symbols{tx::kRrcSpanSymbols};
    double min_peak_ratio{1.5};
};

struct SyncResult {
    std::size_t offset;  ///< sample index of the first sync symbol
    double peak;         ///< normalised correlation magnitude at the peak
    double peak_ratio;   ///< peak over the largest value outside +-sps samples
    bool inverted;       ///< correlation peak is negative
};

/// Sync symbols RRC-shaped and matched-filtered (raised-cosine pulses),
/// with `pad` symbols of zero lead-in on each side.
inline std::vector<double> sync_reference(std::span<const int> sync, const SyncConfig& cfg, std::size_t pad) {
    const std::size_t n = (sync.size() + 2 * pad) * cfg.sps;
    std::vector<double> impulses(n, 0.0);
    for (std::size_t k = 0; k < sync.size(); ++k) impulses[(k + pad) * cfg.sps] = sync[k];
    const auto h = rrc_taps(cfg.rolloff, cfg.span_symbols, cfg.sps).taps;
    const auto once = filter_same<double>(impulses, h);
    return filter_same<double>(once, h);
}

/// Locates the sync block in a matched-filtered record at cfg.sps samples
/// per symbol by normalised cross-correlation.
inline SyncResult synchronize(std::span<const double> w, std::span<const int> sync_ref, const SyncConfig& cfg = {}) {
    constexpr std::size_t kPad = 4;
    const auto ref = sync_reference(sync_ref, cfg, kPad);
    if (w.size() < ref.size()) throw SimulationError("sync not found");
    const std::size_t lags = w.size() - ref.size() + 1;

    std::size_t nfft = 1;
    while (nfft < w.size() + ref.size()) nfft <<= 1;
    std::vector<cplx> a(nfft), b(nfft);
    std::copy(w.begin(), w.end(), a.begin());
    std::copy(ref.begin(), ref.end(), b.begin());
    auto fa = fft::forward(a);
    const auto fb = fft::forward(b);
    for (std::size_t k = 0; k < nfft; ++k) fa[k] *= std::conj(fb[k]);
    const auto corr = fft::inverse(fa);

    double ref_energy = 0.0;
    for (double v : ref) ref_energy += v * v;
    std::vector<double> cumsum(w.size() + 1, 0.0);
    for (std::size_t n = 0; n < w.size(); ++n) cumsum[n + 1] = cumsum[n] + w[n] * w[n];

    std::vector<double> score(lags);
    for (std::size_t tau = 0; tau < lags; ++tau) {
        const double seg_energy = cumsum[tau + ref.size()] - cumsum[tau];
        const double denom = std::sqrt(ref_energy * seg_energy);
        score[tau] = denom > 0.0 ? corr[tau].real() / denom : 0.0;
    }
    std::size_t best = 0;
    for (std::size_t tau = 1; tau < lags; ++tau)
        if (std::abs(score[tau]) > std::abs(score[best])) best = tau;
    double second = 0.0;
    for (std::size_t tau = 0; tau < lags; ++tau) {
        const std::size_t d = tau > best ? tau - best : best - tau;
        if (d > cfg.sps) second = std::max(second, std::abs(score[tau]));
    }
    const double peak = std::abs(score[best]);
    const double ratio = second > 0.0 ? peak / second : std::numeric_limits<double>::infinity();
    if (!(peak > 0.0) || ratio < cfg.min_peak_ratio) throw SimulationError("sync not found");
    return {best + kPad * cfg.sps, peak, ratio, score[best] < 0.0};
}

// ---------------------------------------------------------------------------
// RLS equalisation

struct RlsConfig {
    std::size_t taps{97};
    std::size_t samples_per_symbol{4};  ///< input samples per tap-to-symbol step
    double forgetting_factor{0.999};
    double delta{0.01};  ///< inverse-correlation state starts at I/delta

    void validate() const {
        if (taps == 0 || taps % 2 == 0) throw ParameterError("equaliser tap count must be odd");
        if (samples_per_symbol == 0) throw ParameterError("samples per symbol must be positive");
        if (!(forgetting_factor > 0.9 && forgetting_factor <= 1.0))
            throw ParameterError("forgetting factor must lie in (0.9, 1]");
        if (!(delta > 0.0)) throw ParameterError("RLS delta must be positive");
    }
};

/// Tap vector and inverse-correlation state of a centred FIR equaliser.
/// Output for symbol k is sum_i taps[i] * x[centre_k + taps/2 - i].
struct EqualizerState {
    std::vector<double> taps;
    std::size_t samples_per_symbol{4};
    double forgetting_factor{0.999};
    std::vector<double> inverse_correlation;  ///< taps x taps, row-major
    std::vector<double> training_errors;      ///< a-priori errors seen during training
};

namespace detail {

class Rls {
public:
    Rls(std::size_t n, double lambda, double delta) : n_(n), lambda_(lambda), p_(n * n, 0.0), pi_(n), w_(n, 0.0) {
        for (std::size_t i = 0; i < n; ++i) p_[i * n + i] = 1.0 / delta;
    }

    [[nodiscard]] double output(std::span<const double> u) const {
        double y = 0.0;
        for (std::size_t i = 0; i < n_; ++i) y += w_[i] * u[i];
        return y;
    }

    /// One recursion step with a-priori error e = d - w'u.
    void update(std::span<const double> u, double error) {
        double denom = lambda_;
        for (std::size_t i = 0; i < n_; ++i) {
            const double* row = &p_[i * n_];
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) acc += row[j] * u[j];
            pi_[i] = acc;
            denom += u[i] * acc;
        }
        const double inv = 1.0 / denom;
        for (std::size_t i = 0; i < n_; ++i) w_[i] += pi_[i] * inv * error;
        const double inv_lambda = 1.0 / lambda_;
        for (std::size_t i = 0; i < n_; ++i) {
            double* row = &p_[i * n_];
            const double gi = pi_[i] * inv;
            for (std::size_t j = i; j < n_; ++j) {
                const double v = (row[j] - gi * pi_[j]) * inv_lambda;
                row[j] = v;
                p_[j * n_ + i] = v;
            }
        }
    }

    std::vector<double>& weights() { return w_; }
    [[nodiscard]] const std::vector<double>& inverse_correlation() const { return p_; }

private:
    std::size_t n_;
    double lambda_;
    std::vector<double> p_;
    std::vector<double> pi_;
    std::vector<double> w_;
};

inline void fill_regressor(std::span<const double> x, std::ptrdiff_t centre, std::size_t taps, std::vector<double>& u) {
    const auto half = static_cast<std::ptrdiff_t>(taps / 2);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    for (std::size_t i = 0; i < taps; ++i) {
        const std::ptrdiff_t idx = centre + half - static_cast<std::ptrdiff_t>(i);
        u[i] = (idx >= 0 && idx < n) ? x[static_cast<std::size_t>(idx)] : 0.0;
    }
}

}  // namespace detail

/// Trains a fractionally spaced FIR on known symbols by standard RLS. The
/// first training symbol is centred on sample `first_sample` of rx and
/// later ones follow every cfg.samples_per_symbol samples.
inline EqualizerState ffe_train(std::span<const double> rx, std::size_t first_sample, std::span<const int> training,
                                const RlsConfig& cfg = {}) {
    cfg.validate();
    if (training.empty()) throw ParameterError("no training symbols");
    detail::Rls rls(cfg.taps, cfg.forgetting_factor, cfg.delta);
    std::vector<double> u(cfg.taps);
    EqualizerState st;
    st.samples_per_symbol = cfg.samples_per_symbol;
    st.forgetting_factor = cfg.forgetting_factor;
    st.training_errors.reserve(training.size());

    double initial_mse = 0.0;
    for (std::size_t k = 0; k < training.size(); ++k) {
        const auto centre = static_cast<std::ptrdiff_t>(first_sample + k * cfg.samples_per_symbol);
        detail::fill_regressor(rx, centre, cfg.taps, u);
        const double e = training[k] - rls.output(u);
        initial_mse += static_cast<double>(training[k]) * training[k];
        st.training_errors.push_back(e);
        rls.update(u, e);
    }
    initial_mse /= static_cast<double>(training.size());

    double final_mse = 0.0;
    for (std::size_t k = 0; k < training.size(); ++k) {
        const auto centre = static_cast<std::ptrdiff_t>(first_sample + k * cfg.samples_per_symbol);
        detail::fill_regressor(rx, centre, cfg.taps, u);
        const double e = training[k] - rls.output(u);
        final_mse += e * e;
    }
    final_mse /= static_cast<double>(training.size());
    if (!std::isfinite(final_mse) || final_mse > initial_mse) throw SimulationError("equalizer diverged");

    st.taps = rls.weights();
    st.inverse_correlation = rls.inverse_correlation();
    return st;
}

/// Filters at the tap spacing and decimates to one output per symbol,
/// symbol k centred on first_sample + k*samples_per_symbol.
inline std::vector<double> ffe_apply(std::span<const double> rx, std::size_t first_sample, std::size_t n_symbols,
                                     const EqualizerState& st) {
    std::vector<double> u(st.taps.size());
    std::vector<double> y(n_symbols);
    for (std::size_t k = 0; k < n_symbols; ++k) {
        const auto centre = static_cast<std::ptrdiff_t>(first_sample + k * st.samples_per_symbol);
        detail::fill_regressor(rx, centre, st.taps.size(), u);
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) acc += st.taps[i] * u[i];
        y[k] = acc;
    }
    return y;
}

struct DdRlsConfig {
    std::size_t taps{21};
    double forgetting_factor{0.999};
    // Without known symbols the recursion runs on its own decisions from the
    // first sample, and a weak prior lets early wrong decisions drag the
    // taps to a wrong fixed point. P starts at I/100 instead.
    double delta{100.0};
};

/// Symbol-spaced decision-directed RLS starting from a unit centre tap;
/// each output's reference is its nearest PAM-4 level. When `known` is
/// given, the first known.size() outputs use those symbols as references
/// instead, so the recursion settles before it relies on its own decisions.
inline std::vector<double> dd_rls(std::span<const double> x, const DdRlsConfig& cfg = {},
                                  std::span<const int> known = {}) {
    RlsConfig check{cfg.taps, 1, cfg.forgetting_factor, cfg.delta};
    check.validate();
    detail::Rls rls(cfg.taps, cfg.forgetting_factor, cfg.delta);
    rls.weights()[cfg.taps / 2] = 1.0;
    std::vector<double> u(cfg.taps);
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        detail::fill_regressor(x, static_cast<std::ptrdiff_t>(k), cfg.taps, u);
        const double out = rls.output(u);
        y[k] = out;
        const double ref = k < known.size() ? static_cast<double>(known[k]) : tx::slice_pam4(out);
        const double e = ref - out;
        if (e != 0.0) rls.update(u, e);
    }
    return y;
}

// ---------------------------------------------------------------------------
// Post filter and MLSD

struct PostFilter {
    double alpha{0.0};
    void validate() const {
        if (!(std::abs(alpha) < 1.0)) throw ParameterError("post-filter alpha must satisfy |alpha| < 1");
    }
};

/// y_k = x_k + alpha * x_{k-1}, with x_{-1} = 0.
inline std::vector<double> postfilter_apply(std::span<const double> x, const PostFilter& pf) {
    pf.validate();
    std::vector<double> y(x.size());
    double prev = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        y[k] = x[k] + pf.alpha * prev;
        prev = x[k];
    }
    return y;
}

/// Memory-1 partial-response trellis over the PAM-4 alphabet; the state is
/// the previous symbol.
struct TrellisSpec {
    std::array<int, 4> alphabet{tx::kPam4Levels};
    double alpha{0.0};

    static constexpr std::size_t kStates = 4;
    static constexpr std::size_t kBranches = 16;
};

/// Viterbi decoding of y_k = s_k + alpha*s_{k-1} + noise with squared
/// Euclidean branch metrics, s_{-1} = 0. Returns the minimum-metric path.
inline std::vector<int> mlsd_viterbi(std::span<const double> y, const TrellisSpec& t) {
    constexpr std::size_t S = TrellisSpec::kStates;
    const std::size_t n = y.size();
    if (n == 0) return {};
    std::vector<std::array<std::uint8_t, S>> back(n);
    std::array<double, S> metric{};
    for (std::size_t s = 0; s < S; ++s) {
        const double d = y[0] - t.alphabet[s];
        metric[s] = d * d;
        back[0][s] = 0;
    }
    for (std::size_t k = 1; k < n; ++k) {
        std::array<double, S> next{};
        for (std::size_t s = 0; s < S; ++s) {
            double best = std::numeric_limits<double>::infinity();
            std::uint8_t arg = 0;
            for (std::size_t p = 0; p < S; ++p) {
                const double d = y[k] - (t.alphabet[s] + t.alpha * t.alphabet[p]);
                const double m = metric[p] + d * d;
                if (m < best) {
                    best = m;
                    arg = static_cast<std::uint8_t>(p);
                }
            }
            next[s] = best;
            back[k][s] = arg;
        }
        metric = next;
    }
    std::size_t state = 0;
    for (std::size_t s = 1; s < S; ++s)
        if (metric[s] < metric[state]) state = s;
    std::vector<int> out(n);
    for (std::size_t k = n; k-- > 0;) {
        out[k] = t.alphabet[state];
        state = back[k][state];
    }
    return out;
}

inline std::vector<int> slice_all(std::span<const double> x) {
    std::vector<int> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), tx::slice_pam4);
    return out;
}

}  // namespace ssblink::rx
