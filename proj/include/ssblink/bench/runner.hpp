#pragma once

// Sweep execution. Channel points (baud x fibre length x OSNR) are
// simulated independently from per-point seeds; phase, DSP stage and alpha
// are receiver-only axes evaluated on the same detected records.

#include "ssblink/bench/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

namespace ssblink::bench {

struct ResultRow {
    std::string scenario;
    Mode mode{};
    double baud_hz{};
    double bitrate_bps{};
    double fiber_km{};
    double osnr_db{};
    double cspr_db{};
    double ossr_db{};
    double phase_deg{};
    std::optional<double> alpha{};  ///< empty for stages without a post filter
    DspStage stage{};
    metrics::BerReport ber{};
    bool failed{false};
    std::vector<std::string> flags;

    [[nodiscard]] bool has_flag(const std::string& f) const {
        return std::find(flags.begin(), flags.end(), f) != flags.end();
    }
};

/// Amplitude PDF of the DD-RLS output (before any post filter).
struct PointPdf {
    std::size_t point;
    double baud_hz;
    double fiber_km;
    double osnr_db;
    double phase_deg;
    metrics::PdfProfile profile;
};

struct ScenarioResult {
    std::vector<ResultRow> rows;
    std::vector<PointPdf> pdfs;
};

struct RunOptions {
    std::size_t parallel{1};
};

namespace detail {

inline std::string failure_flag(const std::string& what) {
    if (what.find("minimum-phase") != std::string::npos) return "kk-minimum-phase-violated";
    if (what.find("sync") != std::string::npos) return "sync-not-found";
    if (what.find("diverged") != std::string::npos) return "equalizer-diverged";
    return "simulation-error";
}

struct ChannelPoint {
    double baud_hz;
    double fiber_km;
    double osnr_db;
};

/// BER accumulators for one phase setting, indexed like the emitted rows.
struct PhaseAccumulator {
    std::vector<metrics::BerReport> stage_fixed;  // per (stage, fixed alpha) slot
    std::array<metrics::BerReport, kAlphaGrid.size()> auto_grid{};
    std::vector<double> pdf_samples;
    std::optional<std::string> failure;
};

struct Slot {
    DspStage stage;
    std::optional<AlphaSetting> alpha;
};

inline std::vector<Slot> make_slots(const ScenarioConfig& c) {
    std::vector<Slot> slots;
    for (DspStage s : c.dsp_stage) {
        if (s != DspStage::postfilter_mlsd) {
            slots.push_back({s, std::nullopt});
            continue;
        }
        for (const auto& a : c.alpha) slots.push_back({s, a});
    }
    return slots;
}

inline bool any_auto(const std::vector<Slot>& slots) {
    return std::any_of(slots.begin(), slots.end(), [](const Slot& s) { return s.alpha && s.alpha->automatic; });
}

}  // namespace detail

/// Grid of channel points in emission order: baud, then fibre, then OSNR.
inline std::vector<detail::ChannelPoint> channel_points(const ScenarioConfig& c) {
    std::vector<detail::ChannelPoint> pts;
    for (double b : c.baud_hz)
        for (double l : c.fiber_km)
            for (double o : c.osnr_db) pts.push_back({b, l, o});
    return pts;
}

/// Drive index for each baud rate: fixed when configured, otherwise from the
/// CSPR search (SSB only).
inline std::map<double, double> resolve_drive_indices(const ScenarioConfig& c) {
    std::map<double, double> out;
    for (double b : c.baud_hz) {
        if (out.count(b)) continue;
        if (c.drive_index || c.mode == Mode::pam4_dsb) {
            out[b] = c.drive_index.value_or(c.default_drive_index());
            continue;
        }
        const LinkPlan p = make_plan(c, b, 0.0, std::numeric_limits<double>::infinity());
        try {
            out[b] = cspr_search(p, c.cspr_target_db, c.cspr_tolerance_db).drive_index;
        } catch (const ParameterError& e) {
            throw ConfigError({std::string("cspr_target_db: ") + e.what()});
        }
    }
    return out;
}

namespace detail {

inline void run_point(const ScenarioConfig& c, std::size_t index, const ChannelPoint& cp, double drive_index,
                      std::vector<ResultRow>& rows_out, std::vector<PointPdf>& pdfs_out) {
    LinkPlan plan = make_plan(c, cp.baud_hz, cp.fiber_km, cp.osnr_db);
    plan.drive_index = drive_index;
    const std::uint64_t point_seed = c.seed + index;
    const auto slots = make_slots(c);
    const bool pf_ok = postfilter_applies(plan);

    std::vector<PhaseAccumulator> acc(c.phase_deg.size());
    for (auto& a : acc) a.stage_fixed.resize(slots.size());

    double cspr_db = std::numeric_limits<double>::quiet_NaN();
    double ossr_db = std::numeric_limits<double>::quiet_NaN();

    for (std::size_t f = 0; f < c.frames; ++f) {
        const std::uint64_t frame_seed = mix_seed(point_seed, f);
        const TxBurst burst = simulate_tx(plan, drive_index, frame_seed);
        if (f == 0) {
            try {
                const auto m = measure_tx(plan, burst.field);
                cspr_db = m.cspr_db;
                ossr_db = m.ossr_db;
            } catch (const SimulationError&) {
                // carrier not resolvable: leave the columns as nan
            }
        }
        const RealWaveform adc = simulate_channel(plan, burst.field, mix_seed(point_seed, 1000 + f));

        std::optional<RxFront> front;
        try {
            front = receiver_front(plan, adc);
        } catch (const SimulationError& e) {
            for (auto& a : acc)
                if (!a.failure) a.failure = failure_flag(e.what());
            continue;
        }

        for (std::size_t ph = 0; ph < c.phase_deg.size(); ++ph) {
            auto& a = acc[ph];
            if (a.failure) continue;
            Equalized eq;
            try {
                const RealWaveform mf = receiver_real(plan, *front, c.phase_deg[ph]);
                eq = equalize(plan, mf.samples(), burst.frame);
            } catch (const SimulationError& e) {
                a.failure = failure_flag(e.what());
                continue;
            }
            if (c.pdf_bins > 0) a.pdf_samples.insert(a.pdf_samples.end(), eq.dd.begin(), eq.dd.end());
            for (std::size_t s = 0; s < slots.size(); ++s) {
                const auto& slot = slots[s];
                if (slot.alpha && slot.alpha->automatic) continue;
                DspStage stage = slot.stage;
                if (stage == DspStage::postfilter_mlsd && !pf_ok) stage = DspStage::dd_rls;
                const double alpha = slot.alpha ? slot.alpha->value : 0.0;
                a.stage_fixed[s] += score(decide(eq, stage, alpha), burst.payload_bits);
            }
            if (any_auto(slots)) {
                if (pf_ok) {
                    for (std::size_t g = 0; g < kAlphaGrid.size(); ++g)
                        a.auto_grid[g] += score(decide(eq, DspStage::postfilter_mlsd, kAlphaGrid[g]), burst.payload_bits);
                } else {
                    a.auto_grid[0] += score(decide(eq, DspStage::dd_rls, 0.0), burst.payload_bits);
                }
            }
        }
    }

    for (std::size_t ph = 0; ph < c.phase_deg.size(); ++ph) {
        const auto& a = acc[ph];
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const auto& slot = slots[s];
            ResultRow r;
            r.scenario = c.scenario;
            r.mode = c.mode;
            r.baud_hz = cp.baud_hz;
            r.bitrate_bps = plan.bitrate_bps();
            r.fiber_km = cp.fiber_km;
            r.osnr_db = cp.osnr_db;
            r.cspr_db = cspr_db;
            r.ossr_db = ossr_db;
            r.phase_deg = c.phase_deg[ph];
            r.stage = slot.stage;
            if (a.failure) {
                r.failed = true;
                r.ber.ber = std::numeric_limits<double>::quiet_NaN();
                r.flags.push_back(*a.failure);
                rows_out.push_back(std::move(r));
                continue;
            }
            if (slot.alpha && slot.alpha->automatic) {
                if (pf_ok) {
                    r.flags.push_back("alpha-auto");
                    std::size_t best = 0;
                    for (std::size_t g = 1; g < kAlphaGrid.size(); ++g)
                        if (a.auto_grid[g].bit_errors < a.auto_grid[best].bit_errors) best = g;
                    r.alpha = kAlphaGrid[best];
                    r.ber = a.auto_grid[best];
                } else {
                    r.ber = a.auto_grid[0];
                }
            } else {
                if (slot.alpha && pf_ok) r.alpha = slot.alpha->value;
                r.ber = a.stage_fixed[s];
            }
            if (slot.stage == DspStage::postfilter_mlsd && !pf_ok) r.flags.push_back("postfilter-not-used");
            if (r.ber.insufficient_statistics()) r.flags.push_back("insufficient-statistics");
            rows_out.push_back(std::move(r));
        }
        if (c.pdf_bins > 0 && !a.failure && !a.pdf_samples.empty())
            pdfs_out.push_back({index, cp.baud_hz, cp.fiber_km, cp.osnr_db, c.phase_deg[ph],
                                metrics::pdf_profile(a.pdf_samples, c.pdf_bins)});
    }
}

}  // namespace detail

/// Runs every sweep point. Output order depends only on the config, never on
/// the degree of parallelism.
inline ScenarioResult run_scenario(const ScenarioConfig& c, const RunOptions& opt = {}) {
    const auto points = channel_points(c);
    const auto drive = resolve_drive_indices(c);

    std::vector<std::vector<ResultRow>> rows(points.size());
    std::vector<std::vector<PointPdf>> pdfs(points.size());
    std::vector<std::exception_ptr> errors(points.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            try {
                detail::run_point(c, i, points[i], drive.at(points[i].baud_hz), rows[i], pdfs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(opt.parallel, points.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    ScenarioResult out;
    for (auto& r : rows) std::move(r.begin(), r.end(), std::back_inserter(out.rows));
    for (auto& p : pdfs) std::move(p.begin(), p.end(), std::back_inserter(out.pdfs));
    return out;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* kCsvHeader =
    "scenario,mode,baud_hz,bitrate_bps,fiber_km,osnr_db,cspr_db,ossr_db,phase_deg,alpha,dsp_stage,ber,bit_errors,"
    "bits_counted,flags";

namespace detail {

inline std::string fmt(const char* spec, double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

}  // namespace detail

inline void write_csv(std::ostream& os, const ScenarioResult& r) {
    os << kCsvHeader << '\n';
    for (const auto& row : r.rows) {
        std::string flags;
        for (const auto& f : row.flags) flags += (flags.empty() ? "" : ";") + f;
        os << detail::csv_field(row.scenario) << ',' << to_string(row.mode) << ',' << detail::fmt("%.0f", row.baud_hz)
           << ',' << detail::fmt("%.0f", row.bitrate_bps) << ',' << detail::fmt("%.3f", row.fiber_km) << ','
           << detail::fmt("%.2f", row.osnr_db) << ',' << detail::fmt("%.3f", row.cspr_db) << ','
           << detail::fmt("%.3f", row.ossr_db) << ',' << detail::fmt("%.2f", row.phase_deg) << ','
           << (row.alpha ? detail::fmt("%.2f", *row.alpha) : std::string{}) << ',' << to_string(row.stage) << ','
           << detail::fmt("%.6e", row.ber.ber) << ',' << row.ber.bit_errors << ',' << row.ber.bits_counted << ','
           << detail::csv_field(flags) << '\n';
    }
}

inline void write_pdf_csv(std::ostream& os, const ScenarioResult& r) {
    os << "point,baud_hz,fiber_km,osnr_db,phase_deg,amplitude,density\n";
    for (const auto& p : r.pdfs)
        for (std::size_t b = 0; b < p.profile.centers.size(); ++b)
            os << p.point << ',' << detail::fmt("%.0f", p.baud_hz) << ',' << detail::fmt("%.3f", p.fiber_km) << ','
               << detail::fmt("%.2f", p.osnr_db) << ',' << detail::fmt("%.2f", p.phase_deg) << ','
               << detail::fmt("%.6f", p.profile.centers[b]) << ',' << detail::fmt("%.6e", p.profile.density[b]) << '\n';
}

}  // namespace ssblink::bench
