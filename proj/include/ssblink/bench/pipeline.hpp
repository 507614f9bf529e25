#pragma once

// End-to-end frame simulation: transmitter, optical channel, receiver DSP.
// One LinkPlan fixes every physical parameter of a channel point; the
// receiver-only knobs (phase, stage, alpha) are evaluated on shared records.

#include "ssblink/bench/scenario.hpp"
#include "ssblink/metrics.hpp"
#include "ssblink/rxchain.hpp"

#include <map>

namespace ssblink::bench {

/// Physical parameters of one channel point.
struct LinkPlan {
    Mode mode{Mode::pam4_dsb};
    double baud_hz{60e9};
    double dac_rate_hz{65e9};
    double adc_rate_hz{160e9};
    double rolloff{0.01};
    link::FiberParams fiber{};
    double osnr_db{std::numeric_limits<double>::infinity()};
    std::optional<double> esnr_db{};
    link::MzmParams mzm{};
    double drive_index{0.5};
    bool dac_enabled{false};
    tx::DacModel dac{};
    ObpfSettings obpf{};
    double frontend_bandwidth_hz{50e9};
    EqualizerSettings equalizer{};
    std::size_t guard_symbols{384};
    std::uint64_t preamble_seed{0};

    static constexpr std::size_t kSimOversample = 3;  ///< simulation rate / DAC rate
    static constexpr std::size_t kRxSps = 4;

    [[nodiscard]] double sim_rate_hz() const { return dac_rate_hz * kSimOversample; }
    [[nodiscard]] double bitrate_bps() const { return 2.0 * baud_hz; }
    [[nodiscard]] double obpf_center_hz() const { return obpf.center_offset_hz.value_or(0.25 * baud_hz); }
    [[nodiscard]] double obpf_bandwidth_hz() const { return obpf.bandwidth_hz.value_or(0.75 * baud_hz); }
};

inline LinkPlan make_plan(const ScenarioConfig& c, double baud_hz, double fiber_km, double osnr_db) {
    LinkPlan p;
    p.mode = c.mode;
    p.baud_hz = baud_hz;
    p.dac_rate_hz = c.dac_rate_hz;
    p.adc_rate_hz = c.adc_rate_hz;
    p.rolloff = c.rolloff;
    p.fiber = c.fiber;
    p.fiber.length_km = fiber_km;
    p.osnr_db = osnr_db;
    p.esnr_db = c.esnr_db;
    p.mzm = c.mzm;
    p.drive_index = c.drive_index.value_or(c.default_drive_index());
    p.dac_enabled = c.dac_enabled;
    p.dac = c.dac;
    p.dac.sample_rate_hz = c.dac_rate_hz;
    p.obpf = c.obpf;
    p.frontend_bandwidth_hz = c.frontend_bandwidth_hz;
    p.equalizer = c.equalizer;
    p.guard_symbols = c.guard_symbols;
    p.preamble_seed = c.seed;
    return p;
}

/// splitmix64 finaliser, used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Transmitter

struct TxBurst {
    tx::SymbolFrame frame;
    std::vector<tx::Bit> payload_bits;
    ComplexWaveform field;  ///< modulator output at the simulation rate
};

/// Frame with random guard symbols either side so that filter transients and
/// circular FFT wrap-around stay outside the frame.
inline TxBurst simulate_tx(const LinkPlan& p, double drive_index, std::uint64_t frame_seed) {
    auto bits = tx::random_bits(tx::SymbolFrame::kPayloadBits, frame_seed);
    auto frame = tx::build_frame(bits, p.preamble_seed);
    std::mt19937_64 guard_rng(mix_seed(frame_seed, 0x6a));
    auto burst = tx::random_symbols(p.guard_symbols, guard_rng);
    const auto body = frame.symbols();
    burst.insert(burst.end(), body.begin(), body.end());
    const auto tail = tx::random_symbols(p.guard_symbols, guard_rng);
    burst.insert(burst.end(), tail.begin(), tail.end());

    const auto [up, down] = rate_ratio(p.baud_hz, p.dac_rate_hz);
    const RealWaveform shaped = tx::shape_nyquist(burst, p.baud_hz, up, down, p.rolloff, tx::kRrcSpanSymbols,
                                                    tx::Scaling::outer_level);

    RealWaveform drive1 = shaped;
    RealWaveform drive2 = shaped;
    if (p.mode == Mode::pam4_ssb_kk) {
        // Arm 1 takes the signal, arm 2 the negated Hilbert transform: with
        // the arm-2 bias at -pi/2 this puts the signal in the upper sideband.
        auto drives = tx::make_ssb_drives(shaped);
        drive1 = std::move(drives.v_i);
        std::vector<double> neg = drives.v_q.vec();
        for (auto& v : neg) v = -v;
        drive2 = RealWaveform{std::move(neg), shaped.sample_rate_hz()};
    } else {
        std::vector<double> neg = shaped.vec();
        for (auto& v : neg) v = -v;
        drive2 = RealWaveform{std::move(neg), shaped.sample_rate_hz()};  // push-pull
    }
    if (p.dac_enabled) {
        drive1 = tx::apply_dac(drive1, p.dac, tx::DacChannel::first);
        drive2 = tx::apply_dac(drive2, p.dac, tx::DacChannel::second);
    }

    const double amp = p.mzm.drive_amplitude(drive_index);
    const auto to_sim = [&](const RealWaveform& d) {
        RealWaveform up_w = resample(d, LinkPlan::kSimOversample, 1);
        std::vector<double> v = up_w.vec();
        for (auto& s : v) s *= amp;
        return RealWaveform{std::move(v), up_w.sample_rate_hz()};
    };
    const RealWaveform v1 = to_sim(drive1);
    const RealWaveform v2 = to_sim(drive2);
    auto field = link::mzm_dual_drive(link::cw_carrier(v1.size(), v1.sample_rate_hz()), v1, v2, p.mzm);
    return {std::move(frame), std::move(bits), std::move(field)};
}

/// Spectral measurements of a transmitted field.
inline metrics::OpticalMeasurement measure_tx(const LinkPlan& p, const ComplexWaveform& field) {
    return metrics::measure_optical(field, 0.0, metrics::OpticalBands::for_baud(p.baud_hz, p.rolloff));
}

// ---------------------------------------------------------------------------
// Channel

/// Fibre, ASE loading, optional OBPF, square-law detection, electrical front
/// end and optional electrical noise. Returns the ADC record.
inline RealWaveform simulate_channel(const LinkPlan& p, const ComplexWaveform& tx_field, std::uint64_t noise_seed) {
    ComplexWaveform e = link::fiber_cd(tx_field, p.fiber);
    e = link::load_osnr(e, {p.osnr_db, mix_seed(noise_seed, 1)});
    if (p.obpf.enabled) e = link::obpf(e, p.obpf_center_hz(), p.obpf_bandwidth_hz());
    RealWaveform i = link::elec_frontend(link::photodiode(e), p.frontend_bandwidth_hz, p.adc_rate_hz);
    if (p.esnr_db) {
        double mean = 0.0, sq = 0.0;
        for (double v : i.samples()) {
            mean += v;
            sq += v * v;
        }
        mean /= static_cast<double>(i.size());
        const double ac = sq / static_cast<double>(i.size()) - mean * mean;
        i = link::add_awgn(i, ac / from_db10(*p.esnr_db), mix_seed(noise_seed, 2));
    }
    return i;
}

// ---------------------------------------------------------------------------
// Receiver

/// Receiver front half shared by every phase setting: for DSB the
/// matched-filtered record at 4 samples/symbol; for SSB the
/// CD-compensated, carrier-free field at 8 samples/symbol.
struct RxFront {
    std::optional<RealWaveform> dsb;
    std::optional<ComplexWaveform> ssb;
};

inline RxFront receiver_front(const LinkPlan& p, const RealWaveform& adc) {
    RxFront out;
    if (p.mode == Mode::pam4_dsb) {
        const RealWaveform r = rx::remove_mean(resample_to(adc, LinkPlan::kRxSps * p.baud_hz));
        out.dsb = rx::matched_filter(r, p.rolloff, LinkPlan::kRxSps);
    } else {
        const RealWaveform r = resample_to(adc, 2.0 * p.baud_hz);
        const ComplexWaveform e = rx::kk_reconstruct(r, 4);
        out.ssb = rx::remove_carrier(rx::cd_compensate(e, p.fiber));
    }
    return out;
}

/// Matched-filtered real record at 4 samples/symbol for a phase setting.
inline RealWaveform receiver_real(const LinkPlan& p, const RxFront& f, double phase_deg) {
    if (f.dsb) return *f.dsb;
    const RealWaveform aligned = rx::phase_align(*f.ssb, phase_deg * kPi / 180.0);
    const RealWaveform r = resample(aligned, 1, 2);
    return rx::matched_filter(r, p.rolloff, LinkPlan::kRxSps);
}

/// Symbol-rate payload estimates after each equaliser.
struct Equalized {
    std::vector<double> ffe;
    std::vector<double> dd;
};

inline Equalized equalize(const LinkPlan& p, std::span<const double> mf, const tx::SymbolFrame& frame) {
    using F = tx::SymbolFrame;
    const auto s = rx::synchronize(mf, frame.sync, {LinkPlan::kRxSps, p.rolloff, tx::kRrcSpanSymbols, 1.5});
    const std::size_t first_training = s.offset + F::kSyncLen * LinkPlan::kRxSps;
    const rx::RlsConfig cfg{p.equalizer.ffe_taps, LinkPlan::kRxSps, p.equalizer.forgetting_factor, p.equalizer.delta};
    const auto st = rx::ffe_train(mf, first_training, frame.training, cfg);
    const auto y = rx::ffe_apply(mf, first_training, F::kTrainingLen + F::kPayloadSymbols, st);
    // DD-RLS runs over training and payload, referenced to the known
    // training symbols first so it has settled by the payload.
    const auto d = rx::dd_rls(y, {p.equalizer.dd_taps, p.equalizer.forgetting_factor, p.equalizer.delta}, frame.training);
    Equalized out;
    out.ffe.assign(y.begin() + F::kTrainingLen, y.end());
    out.dd.assign(d.begin() + F::kTrainingLen, d.end());
    return out;
}

/// Post filter and MLSD are only used at the top SSB rate; lower SSB rates
/// stop at DD-RLS.
inline bool postfilter_applies(const LinkPlan& p) { return p.mode == Mode::pam4_dsb || p.baud_hz >= 56e9 - 1.0; }

inline std::vector<int> decide(const Equalized& eq, DspStage stage, double alpha) {
    switch (stage) {
        case DspStage::tdeq: return rx::slice_all(eq.ffe);
        case DspStage::dd_rls: return rx::slice_all(eq.dd);
        case DspStage::postfilter_mlsd: {
            const auto y = rx::postfilter_apply(eq.dd, {alpha});
            return rx::mlsd_viterbi(y, {tx::kPam4Levels, alpha});
        }
    }
    return {};
}

inline metrics::BerReport score(std::span<const int> decisions, std::span<const tx::Bit> payload_bits) {
    const auto rx_bits = tx::demap_pam4(decisions);
    return metrics::count_ber(payload_bits, rx_bits);
}

// ---------------------------------------------------------------------------
// Drive-index search

struct CsprSearchResult {
    double drive_index;
    double cspr_db;
    int iterations;
};

/// Bisection on log(m) over [m_lo, m_hi] for a CSPR that decreases with m.
/// `measure` maps m to CSPR in dB.
template <typename Measure>
CsprSearchResult cspr_search(double target_db, double tolerance_db, Measure&& measure, double m_lo = 1e-3,
                             double m_hi = 1.0, int max_iterations = 20) {
    if (!(tolerance_db > 0.0)) throw ParameterError("CSPR tolerance must be positive");
    const double c_lo = measure(m_lo);
    const double c_hi = measure(m_hi);
    if (target_db > c_lo + tolerance_db || target_db < c_hi - tolerance_db) {
        std::ostringstream os;
        os << "CSPR target " << target_db << " dB unreachable: m in [" << m_lo << ", " << m_hi << "] gives CSPR in ["
           << c_hi << ", " << c_lo << "] dB";
        throw ParameterError(os.str());
    }
    if (std::abs(c_lo - target_db) <= tolerance_db) return {m_lo, c_lo, 0};
    if (std::abs(c_hi - target_db) <= tolerance_db) return {m_hi, c_hi, 0};
    double lo = std::log(m_lo), hi = std::log(m_hi);
    for (int it = 1; it <= max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double m = std::exp(mid);
        const double c = measure(m);
        if (std::abs(c - target_db) <= tolerance_db) return {m, c, it};
        if (c > target_db) lo = mid;
        else hi = mid;
    }
    throw SimulationError("CSPR search did not converge");
}

/// Drive index giving the target CSPR on this plan's transmitter, measured on
/// the frame built from the preamble seed.
inline CsprSearchResult cspr_search(const LinkPlan& p, double target_db, double tolerance_db) {
    return cspr_search(target_db, tolerance_db,
                       [&](double m) { return measure_tx(p, simulate_tx(p, m, p.preamble_seed).field).cspr_db; });
}

}  // namespace ssblink::bench
