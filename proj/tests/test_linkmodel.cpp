#include "oracles.hpp"
#include "ssblink/linkmodel.hpp"
#include "ssblink/metrics.hpp"
#include "ssblink/rxchain.hpp"
#include "ssblink/txchain.hpp"

#include <gtest/gtest.h>

using namespace ssblink;

namespace {

constexpr double kSimRate = 192e9;

RealWaveform scaled(const RealWaveform& w, double a) {
    std::vector<double> v = w.vec();
    for (auto& x : v) x *= a;
    return {std::move(v), w.sample_rate_hz()};
}

RealWaveform negated(const RealWaveform& w) { return scaled(w, -1.0); }

// Nyquist PAM-4 at 56 Gbaud on the simulation grid, outer level at 1.
RealWaveform pam4_drive(std::size_t n_symbols, std::uint64_t seed, tx::Scaling scaling = tx::Scaling::outer_level) {
    std::mt19937_64 rng(seed);
    const auto sym = tx::random_symbols(n_symbols, rng);
    const auto dac = tx::shape_nyquist(sym, 56e9, 8, 7, 0.01, tx::kRrcSpanSymbols, scaling);
    return resample(dac, 3, 1);
}

ComplexWaveform ssb_field(double m, std::uint64_t seed = 1) {
    const auto x = pam4_drive(6000, seed);
    const link::MzmParams p;
    const double a = p.drive_amplitude(m);
    const auto q = RealWaveform{hilbert(x.samples()), x.sample_rate_hz()};
    return link::mzm_dual_drive(link::cw_carrier(x.size(), x.sample_rate_hz()), scaled(x, a), scaled(negated(q), a), p);
}

double tone_power(const RealWaveform& w, double f) {
    // single-bin DFT over an integer number of periods
    cplx acc{};
    for (std::size_t i = 0; i < w.size(); ++i)
        acc += w[i] * std::polar(1.0, -2.0 * kPi * f * static_cast<double>(i) / w.sample_rate_hz());
    return std::norm(acc / static_cast<double>(w.size()));
}

// RF power of a small intensity tone at f after `km` of fibre, push-pull
// drive at quadrature.
double dsb_tone_response(double f, double km) {
    const double fs = 256e9;
    const std::size_t n = 1 << 16;
    const double fbin = std::round(f * n / fs) * fs / n;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::cos(2.0 * kPi * fbin * static_cast<double>(i) / fs);
    const link::MzmParams p;
    const RealWaveform d = scaled(RealWaveform{v, fs}, p.drive_amplitude(0.01));
    const auto e = link::mzm_dual_drive(link::cw_carrier(n, fs), d, negated(d), p);
    link::FiberParams fiber;
    fiber.length_km = km;
    fiber.loss_db_km = 0.0;
    return tone_power(link::photodiode(link::fiber_cd(e, fiber)), fbin);
}

}  // namespace

TEST(Mzm, QuadraturePointWithoutDrive) {
    link::MzmParams p;
    p.set_bias(-kPi / 2.0);
    const auto zero = RealWaveform{std::vector<double>(16, 0.0), 1e9};
    const auto e = link::mzm_dual_drive(link::cw_carrier(16, 1e9), zero, zero, p);
    for (const auto& v : e.samples()) {
        EXPECT_NEAR(v.real(), 0.5, 1e-15);
        EXPECT_NEAR(v.imag(), -0.5, 1e-15);
        EXPECT_NEAR(std::abs(v), 1.0 / std::sqrt(2.0), 1e-15);
    }
}

TEST(Mzm, SmallSignalMatchesLinearModel) {
    link::MzmParams p;
    // one drive swing for both arms, set by the larger (Hilbert) peak
    const auto x = pam4_drive(2000, 3, tx::Scaling::peak);
    const auto q = RealWaveform{hilbert(x.samples()), x.sample_rate_hz()};
    double peak = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) peak = std::max({peak, std::abs(x[i]), std::abs(q[i])});
    const double a = p.drive_amplitude(0.05) / peak;
    const auto v1 = scaled(q, a), v2 = scaled(x, a);
    const auto e = link::mzm_dual_drive(link::cw_carrier(x.size(), x.sample_rate_hz()), v1, v2, p);
    // arm 2 carries V_I, arm 1 carries V_Q at bias -pi/2
    EXPECT_LT(oracle::small_signal_residual(e.vec(), v2.vec(), v1.vec(), p.v_pi), 0.01);
}

TEST(Mzm, HilbertPairGivesCarrierAtMinus45Degrees) {
    const auto e = ssb_field(0.05);
    cplx c{};
    for (const auto& v : e.samples()) c += v;
    c /= static_cast<double>(e.size());
    EXPECT_NEAR(std::arg(c) * 180.0 / kPi, -45.0, 1.0);
    // the zero-mean part is one-sided
    std::vector<cplx> s(e.vec());
    for (auto& v : s) v -= c;
    const auto spec = welch(std::span<const cplx>(s).subspan(2048, s.size() - 4096), e.sample_rate_hz(), 500e6);
    EXPECT_GT(db10(spec.integrate(0.5e9, 30e9) / spec.integrate(-30e9, -0.5e9)), 30.0);
}

TEST(Mzm, CommonDriveAtZeroBiasIsPurePhase) {
    link::MzmParams p;
    p.arm_phase_bias = 0.0;
    const auto x = scaled(pam4_drive(500, 4), 2.0);
    const auto e = link::mzm_dual_drive(link::cw_carrier(x.size(), x.sample_rate_hz()), x, x, p);
    for (const auto& v : e.samples()) EXPECT_NEAR(std::abs(v), 1.0, 1e-12);
}

TEST(Mzm, MismatchedDrivesAreRejected) {
    const auto c = link::cw_carrier(10, 1e9);
    const RealWaveform short_drive{std::vector<double>(9, 0.0), 1e9};
    const RealWaveform ok{std::vector<double>(10, 0.0), 1e9};
    EXPECT_THROW(link::mzm_dual_drive(c, short_drive, ok, {}), ParameterError);
    EXPECT_THROW(link::mzm_dual_drive(c, ok, RealWaveform{std::vector<double>(10, 0.0), 2e9}, {}), ParameterError);
}

TEST(Mzm, CsprFallsWithDriveIndex) {
    const auto bands = metrics::OpticalBands::for_baud(56e9);
    double prev = std::numeric_limits<double>::infinity();
    for (double m : {0.05, 0.1, 0.15, 0.2, 0.3, 0.4}) {
        const double cspr = metrics::measure_optical(ssb_field(m), 0.0, bands).cspr_db;
        EXPECT_LT(cspr, prev) << "m = " << m;
        prev = cspr;
    }
}

TEST(FiberCd, ZeroLengthIsIdentity) {
    const auto e = ssb_field(0.1);
    EXPECT_EQ(link::fiber_cd(e, {}).vec(), e.vec());
}

TEST(FiberCd, UnitaryUpToSpanLoss) {
    const auto e = ssb_field(0.1);
    link::FiberParams f;
    f.length_km = 80;
    const auto out = link::fiber_cd(e, f);
    const double ratio = mean_power(out) / mean_power(e);
    EXPECT_NEAR(ratio / from_db10(-16.0), 1.0, 1e-9);
}

TEST(FiberCd, CompensationInvertsDispersion) {
    const auto e = ssb_field(0.1);
    link::FiberParams f;
    f.length_km = 80;
    f.loss_db_km = 0.0;
    const auto back = rx::cd_compensate(link::fiber_cd(e, f), f);
    double err = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) err += std::norm(back[i] - e[i]);
    EXPECT_LT(std::sqrt(err / e.size()), 1e-6);
    EXPECT_EQ(rx::cd_compensate(e, link::FiberParams{}).vec(), e.vec());
}

TEST(FiberCd, LongerWavelengthArrivesLater) {
    // Gaussian pulses on tones at -/+ 20 GHz from the carrier
    const double fs = 256e9;
    const std::size_t n = 1 << 15;
    link::FiberParams f;
    f.length_km = 10;
    f.loss_db_km = 0.0;
    const auto arrival = [&](double nu) {
        std::vector<cplx> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = (static_cast<double>(i) - n / 2.0) / fs;
            v[i] = std::exp(-t * t / (2.0 * 10e-12 * 10e-12)) * std::polar(1.0, 2.0 * kPi * nu * t);
        }
        const auto out = link::fiber_cd(ComplexWaveform{v, fs}, f);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num += static_cast<double>(i) * std::norm(out[i]);
            den += std::norm(out[i]);
        }
        return num / den / fs;
    };
    const double delay = arrival(-20e9) - arrival(20e9);
    // D L dlambda with dlambda = lambda^2 * 40 GHz / c
    const double lambda = 1552.9e-9;
    const double expected = 17e-6 * 10e3 * lambda * lambda * 40e9 / 299792458.0;
    EXPECT_GT(delay, 0.0);
    EXPECT_NEAR(delay, expected, 0.01 * expected);
}

TEST(FiberCd, DsbFadingFollowsCosineSquared) {
    link::FiberParams f;
    f.length_km = 80;
    const double null1 = oracle::first_fading_null(17, 80, 1552.9);
    EXPECT_NEAR(null1, 6.76e9, 0.01e9);
    for (double nu : {2e9, 4e9, 9e9, 14e9, 20e9, 25e9}) {
        const double pred = oracle::dsb_fading(nu, 17, 80, 1552.9);
        if (pred < 0.1) continue;  // near a null
        const double meas = dsb_tone_response(nu, 80) / dsb_tone_response(nu, 0);
        EXPECT_NEAR(db10(meas), db10(pred), 1.0) << nu;
    }
    EXPECT_LT(db10(dsb_tone_response(null1, 80) / dsb_tone_response(null1, 0)), -30.0);
}

TEST(LoadOsnr, InfiniteTargetIsIdentity) {
    const auto e = ssb_field(0.1);
    EXPECT_EQ(link::load_osnr(e, {}).vec(), e.vec());
}

TEST(LoadOsnr, MeasuredOsnrMatchesTarget) {
    const auto e = ssb_field(0.2);
    const auto noisy = link::load_osnr(e, {41.1, 5});
    const auto m = metrics::measure_optical(noisy, 0.0, metrics::OpticalBands::for_baud(56e9));
    EXPECT_NEAR(m.osnr_db, 41.1, 0.2);
}

TEST(LoadOsnr, HalvingSignalAtFixedNoiseCostsThreeDb) {
    const auto e = ssb_field(0.2);
    const auto noisy = link::load_osnr(e, {30.0, 6});
    std::vector<cplx> full(e.size()), half(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        const cplx noise = noisy[i] - e[i];
        full[i] = e[i] + noise;
        half[i] = e[i] / std::sqrt(2.0) + noise;
    }
    const auto bands = metrics::OpticalBands::for_baud(56e9);
    const double a = metrics::measure_optical(ComplexWaveform{full, e.sample_rate_hz()}, 0.0, bands).osnr_db;
    const double b = metrics::measure_optical(ComplexWaveform{half, e.sample_rate_hz()}, 0.0, bands).osnr_db;
    EXPECT_NEAR(a - b, 3.0, 0.1);
}

TEST(LoadOsnr, NonPositiveLinearTargetIsRejected) {
    const auto e = ssb_field(0.1);
    EXPECT_THROW(link::load_osnr(e, {-std::numeric_limits<double>::infinity(), 1}), ParameterError);
    EXPECT_THROW(link::load_osnr(e, {std::numeric_limits<double>::quiet_NaN(), 1}), ParameterError);
}

TEST(Obpf, WidePassbandLeavesSignal) {
    const auto e = ssb_field(0.2);
    const auto out = link::obpf(e, 14e9, 80e9);
    EXPECT_NEAR(db10(mean_power(out) / mean_power(e)), 0.0, 0.1);
}

TEST(Obpf, NoisePowerScalesWithBandwidth) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    std::vector<cplx> v(1 << 16);
    for (auto& x : v) x = {g(rng), g(rng)};
    const ComplexWaveform w{v, kSimRate};
    const auto out = link::obpf(w, 10e9, 50e9);
    EXPECT_NEAR(db10(mean_power(out) / mean_power(w)), db10(50e9 / kSimRate), 0.3);
    const auto s = welch(out, 500e6);
    EXPECT_LT(db10(s.integrate(50e9, 90e9) / s.integrate(-10e9, 30e9)), -40.0);
}

TEST(Photodiode, ConstantField) {
    const auto i = link::photodiode(link::cw_carrier(8, 1e9, 1.7));
    for (double v : i.samples()) EXPECT_DOUBLE_EQ(v, 1.7 * 1.7);
}

TEST(Photodiode, ThreeTermExpansion) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    const cplx c{1.3, 0.4};
    std::vector<cplx> field(1000), s(1000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = {0.2 * g(rng), 0.2 * g(rng)};
        field[i] = c * std::polar(1.0, -kPi / 4.0) + s[i];
    }
    const auto i_pd = link::photodiode(ComplexWaveform{field, 1e9});
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double ref = oracle::square_law_expansion(c, s[k]);
        EXPECT_NEAR(i_pd[k], ref, 8.0 * std::numeric_limits<double>::epsilon() * ref);
    }
}

TEST(Photodiode, NonNegativeAndPhaseBlind) {
    const auto e = link::load_osnr(ssb_field(0.3), {20.0, 2});
    std::vector<cplx> rot(e.vec());
    for (auto& v : rot) v *= std::polar(1.0, 1.234);
    const auto a = link::photodiode(e);
    const auto b = link::photodiode(ComplexWaveform{rot, e.sample_rate_hz()});
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_GE(a[i], 0.0);
        EXPECT_NEAR(a[i], b[i], 1e-14 * std::max(1.0, a[i]));
    }
}

TEST(Photodiode, TwoToneBeatProducts) {
    const double fs = 128e9, f1 = 5e9, f2 = 8e9;
    const std::size_t n = 1 << 14;
    std::vector<cplx> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        v[i] = std::cos(2.0 * kPi * f1 * t) + std::cos(2.0 * kPi * f2 * t);
    }
    const auto i_pd = link::photodiode(ComplexWaveform{v, fs});
    const double floor = tone_power(i_pd, 17e9);
    for (double f : {f2 - f1, 2 * f1, 2 * f2, f1 + f2}) EXPECT_GT(db10(tone_power(i_pd, f) / floor), 60.0) << f;
}

TEST(ElecFrontend, DisabledIsIdentity) {
    const RealWaveform w{std::vector<double>{1.0, 2.0, 3.0, 2.0}, 160e9};
    EXPECT_EQ(link::elec_frontend(w, std::numeric_limits<double>::infinity(), 160e9).vec(), w.vec());
}

TEST(ElecFrontend, ThreeDbAtCorner) {
    const double fs = 480e9, bw = 50e9;
    const std::size_t n = 1 << 14;
    const double f = std::round(bw * n / fs) * fs / n;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::cos(2.0 * kPi * f * static_cast<double>(i) / fs);
    const RealWaveform w{v, fs};
    const auto out = link::elec_frontend(w, bw, fs);
    EXPECT_NEAR(db10(tone_power(out, f) / tone_power(w, f)), -3.0, 0.5);
}

TEST(ElecFrontend, ResamplesToAdcRate) {
    const RealWaveform w{std::vector<double>(1920, 1.0), 192e9};
    const auto out = link::elec_frontend(w, 50e9, 160e9);
    EXPECT_DOUBLE_EQ(out.sample_rate_hz(), 160e9);
    EXPECT_EQ(out.size(), 1600u);
    EXPECT_THROW(link::elec_frontend(w, 90e9, 160e9), ParameterError);
}
