#include "oracles.hpp"
#include "ssblink/bench/runner.hpp"
#include "ssblink/rxchain.hpp"

#include <gtest/gtest.h>

using namespace ssblink;

namespace {

std::vector<int> random_pam4(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return tx::random_symbols(n, rng);
}

// Symbols as impulses at `sps` samples/symbol, the first at sample `offset`.
std::vector<double> impulses(std::span<const int> sym, std::size_t sps, std::size_t offset, std::size_t total) {
    std::vector<double> v(total, 0.0);
    for (std::size_t k = 0; k < sym.size(); ++k) v[offset + k * sps] = sym[k];
    return v;
}

// Raised-cosine pulses (RRC at Tx and Rx), i.e. a matched-filtered record.
std::vector<double> raised_cosine(const std::vector<double>& imp, std::size_t sps) {
    const auto h = rrc_taps(0.01, tx::kRrcSpanSymbols, sps).taps;
    return filter_same<double>(filter_same<double>(imp, h), h);
}

// E = C + S with S one-sided (upper sideband), CSPR = |C|^2 / <|S|^2>.
ComplexWaveform minimum_phase_field(double cspr_db, std::uint64_t seed) {
    const auto sym = random_pam4(4000, seed);
    const auto x = tx::shape_nyquist(sym, 56e9, 2, 1, 0.01);
    auto s = analytic_signal(x.samples());
    const double c = std::sqrt(from_db10(cspr_db) * mean_power<cplx>(s));
    for (auto& v : s) v += c;
    return {std::move(s), x.sample_rate_hz()};
}

double kk_error_db(double cspr_db, std::uint64_t seed = 1) {
    const auto e = minimum_phase_field(cspr_db, seed);
    const auto i = link::photodiode(e);
    const auto rec = rx::kk_reconstruct(i, 4);
    const auto ref = resample(e, 4, 1);
    const std::size_t edge = 4 * 4 * kEdgeTransientSamples;
    cplx c_ref{}, c_rec{};
    for (std::size_t n = 0; n < ref.size(); ++n) {
        c_ref += ref[n];
        c_rec += rec[n];
    }
    // align the constant phase, then compare signal parts
    const cplx rot = (c_ref / std::abs(c_ref)) / (c_rec / std::abs(c_rec));
    const cplx mean = c_ref / static_cast<double>(ref.size());
    double err = 0.0, sig = 0.0;
    for (std::size_t n = edge; n + edge < ref.size(); ++n) {
        err += std::norm(rec[n] * rot - ref[n]);
        sig += std::norm(ref[n] - mean);
    }
    return db10(err / sig);
}

}  // namespace

// ---------------------------------------------------------------------------
// Kramers-Kronig

TEST(KramersKronig, ConstantIntensity) {
    const auto e = rx::kk_reconstruct(RealWaveform{std::vector<double>(4096, 4.0), 1e9}, 4);
    EXPECT_EQ(e.size(), 4u * 4096u);
    double worst = 0.0;
    for (std::size_t n = 4 * kEdgeTransientSamples; n + 4 * kEdgeTransientSamples < e.size(); ++n)
        worst = std::max(worst, std::abs(e[n] - cplx{2.0, 0.0}));
    // the resampler's passband ripple sets the floor
    EXPECT_LT(worst, 2e-3);
}

TEST(KramersKronig, ReconstructsFieldAtOperatingCspr) { EXPECT_LT(kk_error_db(16.6), -30.0); }

TEST(KramersKronig, ErrorFallsWithCspr) {
    // the error drops steeply through the minimum-phase knee, then sits
    // below -25 dB (at high CSPR the resampler floor takes over)
    double prev = std::numeric_limits<double>::infinity();
    for (double cspr : {2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0}) {
        double err = 0.0;
        try {
            err = kk_error_db(cspr);
        } catch (const SimulationError&) {
            err = 0.0;
        }
        if (cspr <= 10.0) {
            EXPECT_LT(err, prev) << cspr;
        }
        if (cspr >= 12.0) {
            EXPECT_LT(err, -25.0) << cspr;
        }
        prev = err;
    }
}

TEST(KramersKronig, FailsWithoutDominantCarrier) {
    bool failed = false;
    double err = 0.0;
    try {
        err = kk_error_db(0.0);
    } catch (const SimulationError& e) {
        failed = std::string(e.what()).find("minimum-phase violated") != std::string::npos;
    }
    EXPECT_TRUE(failed || err > -10.0);
}

TEST(KramersKronig, RejectsLowOversampling) {
    EXPECT_THROW(rx::kk_reconstruct(RealWaveform{std::vector<double>(8, 1.0), 1e9}, 1), ParameterError);
}

// ---------------------------------------------------------------------------
// Carrier and phase

TEST(PhaseAlign, ZeroIsRealPart) {
    const ComplexWaveform w{std::vector<cplx>{{1, 2}, {-3, 4}, {0.5, -0.25}}, 1e9};
    const auto r = rx::phase_align(w, 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(r[i], w[i].real());
}

TEST(PhaseAlign, HalfTurnNegates) {
    const auto w = minimum_phase_field(10.0, 2);
    for (double deg : {0.0, 17.0, 45.0, 133.0}) {
        const auto a = rx::phase_align(w, deg * kPi / 180.0);
        const auto b = rx::phase_align(w, (deg + 180.0) * kPi / 180.0);
        for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], -b[i], 1e-12 * (1.0 + std::abs(a[i])));
    }
}

TEST(PhaseAlign, FortyFiveDegreesRecoversDrive) {
    // modulator with the Hilbert-pair drive, photodiode, KK, carrier removal:
    // correlation with the drive waveform peaks at 45 degrees over [0, 90]
    const auto sym = random_pam4(3000, 5);
    const auto x = tx::shape_nyquist(sym, 56e9, 2, 1, 0.01, tx::kRrcSpanSymbols, tx::Scaling::outer_level);
    const auto hx = hilbert(x.samples());
    link::MzmParams p;
    const double a = p.drive_amplitude(0.1);
    std::vector<double> v1(x.size()), v2(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        v1[i] = a * x[i];
        v2[i] = -a * hx[i];
    }
    const double fs = x.sample_rate_hz();
    const auto e = link::mzm_dual_drive(link::cw_carrier(x.size(), fs), {v1, fs}, {v2, fs}, p);
    const auto s = rx::remove_carrier(rx::kk_reconstruct(link::photodiode(e), 4));
    const auto ref = resample(x, 4, 1);
    const std::size_t edge = 4 * 2 * kEdgeTransientSamples;
    double best = -1.0;
    int best_deg = -1;
    for (int deg = 0; deg <= 90; deg += 5) {
        const auto y = rx::phase_align(s, deg * kPi / 180.0);
        double xy = 0.0, xx = 0.0, yy = 0.0;
        for (std::size_t i = edge; i + edge < y.size(); ++i) {
            xy += y[i] * ref[i];
            xx += ref[i] * ref[i];
            yy += y[i] * y[i];
        }
        const double rho = std::abs(xy) / std::sqrt(xx * yy);
        if (rho > best) {
            best = rho;
            best_deg = deg;
        }
    }
    EXPECT_EQ(best_deg, 45);
    EXPECT_GT(best, 0.99);
}

TEST(RemoveCarrier, LeavesZeroMean) {
    const auto s = rx::remove_carrier(minimum_phase_field(16.6, 3));
    cplx m{};
    for (const auto& v : s.samples()) m += v;
    EXPECT_LT(std::abs(m) / static_cast<double>(s.size()), 1e-12);
}

// ---------------------------------------------------------------------------
// Synchronisation

namespace {

struct SyncRecord {
    std::vector<double> mf;
    std::vector<int> sync;
};

// Sync block starting at sample 1234, random symbols around it, at 4 sps.
SyncRecord sync_record(std::uint64_t seed, double snr_db) {
    constexpr std::size_t kSps = 4, kStart = 1234, kBefore = kStart / kSps;
    const auto sync = random_pam4(128, 1000 + seed);
    auto sym = random_pam4(kBefore, 2000 + seed);
    sym.insert(sym.end(), sync.begin(), sync.end());
    const auto tail = random_pam4(600, 3000 + seed);
    sym.insert(sym.end(), tail.begin(), tail.end());
    const std::size_t first = kStart - kBefore * kSps;
    const auto h = rrc_taps(0.01, tx::kRrcSpanSymbols, kSps).taps;
    auto txw = filter_same<double>(impulses(sym, kSps, first, first + sym.size() * kSps + 64), h);
    if (std::isfinite(snr_db)) {
        // noise over the full simulation bandwidth, SNR referred to the signal band
        const double p = mean_power<double>(txw) * kSps;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, std::sqrt(p / from_db10(snr_db)));
        for (auto& v : txw) v += g(rng);
    }
    return {filter_same<double>(txw, h), sync};
}

}  // namespace

TEST(Synchronize, FindsInsertedDelay) {
    const auto r = sync_record(0, std::numeric_limits<double>::infinity());
    const auto s = rx::synchronize(r.mf, r.sync);
    EXPECT_EQ(s.offset, 1234u);
    EXPECT_FALSE(s.inverted);
    EXPECT_GT(s.peak, 0.9);
}

TEST(Synchronize, RobustAtTwentyDb) {
    int ok = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const auto r = sync_record(t, 20.0);
        try {
            const auto s = rx::synchronize(r.mf, r.sync);
            if (std::abs(static_cast<double>(s.offset) - 1234.0) <= 1.0) ++ok;
        } catch (const SimulationError&) {
        }
    }
    EXPECT_GE(ok, 99);
}

TEST(Synchronize, DetectsInversion) {
    auto r = sync_record(1, std::numeric_limits<double>::infinity());
    for (auto& v : r.mf) v = -v;
    const auto s = rx::synchronize(r.mf, r.sync);
    EXPECT_EQ(s.offset, 1234u);
    EXPECT_TRUE(s.inverted);
}

TEST(Synchronize, PureNoiseIsRejected) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    std::vector<double> noise(8000);
    for (auto& v : noise) v = g(rng);
    const auto h = rrc_taps(0.01, tx::kRrcSpanSymbols, 4).taps;
    const auto mf = filter_same<double>(noise, h);
    const auto sync = random_pam4(128, 9);
    try {
        rx::synchronize(mf, sync);
        FAIL() << "expected sync failure";
    } catch (const SimulationError& e) {
        EXPECT_STREQ(e.what(), "sync not found");
    }
}

// ---------------------------------------------------------------------------
// Feed-forward equaliser

TEST(Ffe, IdentityChannelGivesUnitCentreTap) {
    // identity channel: one sample per symbol carries the symbol, the other
    // three phases are empty
    const auto sym = random_pam4(700, 6);
    const auto rx_rec = impulses(sym, 4, 200, 200 + 700 * 4 + 200);
    const std::span<const int> train(sym.data() + 50, 512);
    const auto st = rx::ffe_train(rx_rec, 200 + 50 * 4, train);
    ASSERT_EQ(st.taps.size(), 97u);
    const double centre = st.taps[48];
    EXPECT_NEAR(centre, 1.0, 1e-3);
    for (std::size_t i = 0; i < st.taps.size(); ++i)
        if (i != 48) {
            EXPECT_LT(db10(st.taps[i] * st.taps[i] / (centre * centre)), -30.0) << i;
        }
    // applying it returns the decimated input
    const auto y = rx::ffe_apply(rx_rec, 200 + 50 * 4, 512, st);
    for (std::size_t k = 0; k < y.size(); ++k) ASSERT_NEAR(y[k], train[k], 1e-2);
}

TEST(Ffe, InvertsThreeTapChannel) {
    const auto sym = random_pam4(900, 7);
    constexpr std::size_t kOff = 600;
    auto rec = raised_cosine(impulses(sym, 4, kOff, kOff + 900 * 4 + kOff), 4);
    // symbol-spaced channel [1, 0.5, 0.2]
    std::vector<double> ch(rec.size(), 0.0);
    for (std::size_t n = 0; n < rec.size(); ++n) {
        ch[n] = rec[n];
        if (n >= 4) ch[n] += 0.5 * rec[n - 4];
        if (n >= 8) ch[n] += 0.2 * rec[n - 8];
    }
    const std::size_t first = kOff + 100 * 4;
    const std::span<const int> train(sym.data() + 100, 512);
    const auto st = rx::ffe_train(ch, first, train);
    const auto y = rx::ffe_apply(ch, first, 512, st);
    double mse = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) mse += (y[k] - train[k]) * (y[k] - train[k]);
    mse /= static_cast<double>(y.size());
    EXPECT_LT(db10(mse / 5.0), -20.0);
}

TEST(Ffe, TrainingErrorFallsInTrend) {
    const auto sym = random_pam4(900, 8);
    auto rec = raised_cosine(impulses(sym, 4, 600, 600 + 900 * 4 + 600), 4);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 0.1);
    for (auto& v : rec) v += g(rng);
    const auto st = rx::ffe_train(rec, 600 + 100 * 4, std::span<const int>(sym.data() + 100, 512));
    const auto window_median = [&](std::size_t w) {
        std::vector<double> e2;
        for (std::size_t k = 32 * w; k < 32 * (w + 1); ++k) e2.push_back(st.training_errors[k] * st.training_errors[k]);
        std::nth_element(e2.begin(), e2.begin() + 16, e2.end());
        return e2[16];
    };
    EXPECT_LT(window_median(15), window_median(0));
    EXPECT_LT(window_median(8), window_median(0));
}

TEST(Ffe, ApplyIsLinear) {
    const auto sym = random_pam4(900, 9);
    const auto a = raised_cosine(impulses(sym, 4, 600, 600 + 900 * 4 + 600), 4);
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    std::vector<double> b(a.size()), mix(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        b[i] = g(rng);
        mix[i] = 0.7 * a[i] - 1.3 * b[i];
    }
    const auto st = rx::ffe_train(a, 600 + 100 * 4, std::span<const int>(sym.data() + 100, 512));
    const auto ya = rx::ffe_apply(a, 1000, 600, st);
    const auto yb = rx::ffe_apply(b, 1000, 600, st);
    const auto ym = rx::ffe_apply(mix, 1000, 600, st);
    for (std::size_t k = 0; k < ym.size(); ++k) ASSERT_NEAR(ym[k], 0.7 * ya[k] - 1.3 * yb[k], 1e-9);
}

TEST(Ffe, RejectsEvenTapCount) {
    const std::vector<double> rec(4000, 0.0);
    const auto sym = random_pam4(512, 1);
    EXPECT_THROW(rx::ffe_train(rec, 100, sym, {96}), ParameterError);
}

// ---------------------------------------------------------------------------
// Decision-directed RLS

TEST(DdRls, PerfectLevelsPassUnchanged) {
    const auto sym = random_pam4(2000, 11);
    const std::vector<double> x(sym.begin(), sym.end());
    const auto y = rx::dd_rls(x);
    for (std::size_t k = 0; k < y.size(); ++k) ASSERT_NEAR(y[k], x[k], 1e-6);
}

namespace {

struct IsiRecord {
    std::vector<int> sym;
    std::vector<double> x;
};

IsiRecord residual_isi(std::uint64_t noise_seed) {
    IsiRecord r{random_pam4(20000, 12), {}};
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> g(0.0, 0.3);
    r.x.resize(r.sym.size());
    for (std::size_t k = 0; k < r.sym.size(); ++k) {
        r.x[k] = r.sym[k] + g(rng);
        if (k >= 1) r.x[k] += 0.2 * r.sym[k - 1];
        if (k + 1 < r.sym.size()) r.x[k] -= 0.1 * r.sym[k + 1];
    }
    return r;
}

std::size_t symbol_errors(std::span<const double> v, std::span<const int> sym, std::size_t from = 0) {
    std::size_t e = 0;
    for (std::size_t k = from; k < v.size(); ++k) e += tx::slice_pam4(v[k]) != sym[k];
    return e;
}

double level_mse(std::span<const double> v) {
    double acc = 0.0;
    for (double s : v) acc += (s - tx::slice_pam4(s)) * (s - tx::slice_pam4(s));
    return acc / static_cast<double>(v.size());
}

}  // namespace

TEST(DdRls, DoesNotRaiseErrorsOnResidualIsi) {
    for (std::uint64_t seed : {112, 113, 114, 115}) {
        const auto r = residual_isi(seed);
        const auto y = rx::dd_rls(r.x);
        const std::size_t before = symbol_errors(r.x, r.sym), after = symbol_errors(y, r.sym);
        EXPECT_GT(before, 0u);
        EXPECT_LE(after, before) << seed;
        EXPECT_LE(level_mse(y), level_mse(r.x)) << seed;
    }
}

TEST(DdRls, WarmStartOnKnownSymbols) {
    // as the receiver runs it: training symbols first, weak prior
    const auto r = residual_isi(116);
    const std::span<const int> known(r.sym.data(), 512);
    const auto y = rx::dd_rls(r.x, {21, 0.999, 0.01}, known);
    EXPECT_LT(symbol_errors(y, r.sym, 512), symbol_errors(r.x, r.sym, 512) / 10);
}

// ---------------------------------------------------------------------------
// Post filter and MLSD

TEST(PostFilter, ZeroAlphaIsIdentity) {
    const std::vector<double> x{0.5, -1.0, 3.0, 2.0};
    EXPECT_EQ(rx::postfilter_apply(x, {0.0}), x);
}

TEST(PostFilter, ImpulseResponse) {
    const std::vector<double> x{1.0, 0.0, 0.0, 0.0};
    const auto y = rx::postfilter_apply(x, {0.35});
    EXPECT_EQ(y, (std::vector<double>{1.0, 0.35, 0.0, 0.0}));
    EXPECT_THROW(rx::postfilter_apply(x, {1.0}), ParameterError);
}

TEST(PostFilter, ShapesWhiteNoise) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g;
    std::vector<double> x(1 << 17);
    for (auto& v : x) v = g(rng);
    const double alpha = 0.5, fs = 1.0e9;
    const auto y = rx::postfilter_apply(x, {alpha});
    const auto sx = welch(RealWaveform{x, fs}, fs / 256);
    const auto sy = welch(RealWaveform{y, fs}, fs / 256);
    for (double f : {0.05e9, 0.2e9, 0.35e9, 0.45e9}) {
        const double band = 0.02e9;
        const double ratio = sy.integrate(f - band, f + band) / sx.integrate(f - band, f + band);
        const double expect = std::norm(1.0 + alpha * std::polar(1.0, -2.0 * kPi * f / fs));
        EXPECT_NEAR(db10(ratio), db10(expect), 0.3) << f;
    }
    EXPECT_LT(sy.integrate(0.4e9, 0.5e9), sx.integrate(0.4e9, 0.5e9));
}

TEST(Viterbi, ZeroAlphaEqualsSlicing) {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(-4.5, 4.5);
    std::vector<double> y(1000);
    for (auto& v : y) v = u(rng);
    EXPECT_EQ(rx::mlsd_viterbi(y, {tx::kPam4Levels, 0.0}), rx::slice_all(y));
}

TEST(Viterbi, MatchesExhaustiveSearchAtTenSymbols) {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> g(0.0, 0.6);
    int agree = 0;
    for (int t = 0; t < 100; ++t) {
        const auto s = tx::random_symbols(10, rng);
        std::vector<double> y(10);
        for (std::size_t k = 0; k < 10; ++k) y[k] = s[k] + (k ? 0.4 * s[k - 1] : 0.0) + g(rng);
        agree += rx::mlsd_viterbi(y, {tx::kPam4Levels, 0.4}) == oracle::brute_force_mlsd(y, 0.4);
    }
    EXPECT_EQ(agree, 100);
}

TEST(Viterbi, MatchesExhaustiveSearchOnRandomInstances) {
    std::mt19937_64 rng(16);
    std::normal_distribution<double> g(0.0, 0.8);
    std::uniform_int_distribution<std::size_t> len(1, 8);
    std::uniform_real_distribution<double> a(0.0, 0.9);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = len(rng);
        const double alpha = a(rng);
        const auto s = tx::random_symbols(n, rng);
        std::vector<double> y(n);
        for (std::size_t k = 0; k < n; ++k) y[k] = s[k] + (k ? alpha * s[k - 1] : 0.0) + g(rng);
        ASSERT_EQ(rx::mlsd_viterbi(y, {tx::kPam4Levels, alpha}), oracle::brute_force_mlsd(y, alpha))
            << "instance " << t;
    }
}

TEST(Viterbi, EmptyInput) { EXPECT_TRUE(rx::mlsd_viterbi({}, {}).empty()); }

// ---------------------------------------------------------------------------
// Whole receiver

namespace {

bench::ResultRow run_one(bench::Mode mode, double baud, double km) {
    auto c = bench::ScenarioConfig::for_mode(mode);
    c.scenario = "chain";
    c.baud_hz = {baud};
    c.fiber_km = {km};
    c.frames = 1;
    c.seed = 21;
    c.alpha = {{false, 0.0}};
    c.dsp_stage = {bench::DspStage::dd_rls};
    const auto r = bench::run_scenario(c);
    return r.rows.at(0);
}

}  // namespace

TEST(Chain, NoiselessSsbOverEightyKmIsErrorFree) {
    const auto row = run_one(bench::Mode::pam4_ssb_kk, 56e9, 80.0);
    ASSERT_FALSE(row.failed);
    EXPECT_EQ(row.ber.bit_errors, 0u);
    EXPECT_EQ(row.ber.bits_counted, tx::SymbolFrame::kPayloadBits);
    EXPECT_NEAR(row.cspr_db, 16.6, 0.2);
}

TEST(Chain, DsbOverEightyKmIsUnrecoverable) {
    const auto row = run_one(bench::Mode::pam4_dsb, 60e9, 80.0);
    EXPECT_TRUE(row.failed || row.ber.ber > 0.1) << row.ber.ber;
}
