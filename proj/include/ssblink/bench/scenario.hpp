#pragma once

// Experiment description loaded from JSON. Scalar-or-list fields become
// sweep axes; everything else has a default matching the reference link.

#include "ssblink/linkmodel.hpp"
#include "ssblink/txchain.hpp"

#include <json.hpp>

#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace ssblink::bench {

using json = nlohmann::json;

/// Invalid configuration; `fields` lists every offending key.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> fields)
        : Error(describe(fields)), fields_(std::move(fields)) {}
    [[nodiscard]] const std::vector<std::string>& fields() const { return fields_; }

private:
    static std::string describe(const std::vector<std::string>& fields) {
        std::string s = "invalid config:";
        for (const auto& f : fields) s += "\n  - " + f;
        return s;
    }
    std::vector<std::string> fields_;
};

enum class Mode { pam4_dsb, pam4_ssb_kk };
enum class DspStage { tdeq, dd_rls, postfilter_mlsd };

inline std::string to_string(Mode m) { return m == Mode::pam4_dsb ? "pam4-dsb" : "pam4-ssb-kk"; }

inline std::string to_string(DspStage s) {
    switch (s) {
        case DspStage::tdeq: return "tdeq";
        case DspStage::dd_rls: return "dd-rls";
        case DspStage::postfilter_mlsd: return "postfilter-mlsd";
    }
    return "?";
}

inline std::optional<DspStage> parse_stage(const std::string& s) {
    if (s == "tdeq") return DspStage::tdeq;
    if (s == "dd-rls") return DspStage::dd_rls;
    if (s == "postfilter-mlsd") return DspStage::postfilter_mlsd;
    return std::nullopt;
}

/// Post-filter coefficient: fixed, or chosen per point by minimum BER.
struct AlphaSetting {
    bool automatic{false};
    double value{0.0};
};

inline constexpr std::array<double, 8> kAlphaGrid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};

struct EqualizerSettings {
    std::size_t ffe_taps{97};
    std::size_t dd_taps{21};
    double forgetting_factor{0.999};
    double delta{0.01};
};

struct ObpfSettings {
    bool enabled{false};
    std::optional<double> center_offset_hz{};  ///< default: a quarter of the baud rate
    std::optional<double> bandwidth_hz{};      ///< default: 0.75 x baud rate
};

struct ScenarioConfig {
    std::string scenario{"scenario"};
    Mode mode{Mode::pam4_dsb};
    std::vector<double> baud_hz{60e9};
    double dac_rate_hz{65e9};
    double adc_rate_hz{160e9};
    double rolloff{0.01};
    link::FiberParams fiber{};
    std::vector<double> fiber_km{0.0};
    std::vector<double> osnr_db{std::numeric_limits<double>::infinity()};
    std::optional<double> esnr_db{};
    double cspr_target_db{16.6};
    double cspr_tolerance_db{0.2};
    std::optional<double> drive_index{};
    std::vector<double> phase_deg{45.0};
    std::vector<AlphaSetting> alpha{{true, 0.0}};
    std::vector<DspStage> dsp_stage{DspStage::postfilter_mlsd};
    std::uint64_t seed{0};
    std::size_t frames{5};
    std::size_t guard_symbols{384};
    link::MzmParams mzm{};
    double frontend_bandwidth_hz{50e9};
    tx::DacModel dac{};
    bool dac_enabled{false};
    ObpfSettings obpf{};
    EqualizerSettings equalizer{};
    std::size_t pdf_bins{0};  ///< 0 disables PDF collection

    /// DSB: outer levels reach sin(2m) = 0.64, about 8 % short of linear.
    /// SSB takes its index from the CSPR search instead.
    [[nodiscard]] double default_drive_index() const { return mode == Mode::pam4_dsb ? 0.35 : 0.0; }

    /// Defaults that depend on the mode: the SSB link runs 56 Gbaud from a
    /// 64 GSa/s DAC with the optical bandpass filter in place.
    static ScenarioConfig for_mode(Mode m) {
        ScenarioConfig c;
        c.mode = m;
        if (m == Mode::pam4_ssb_kk) {
            c.dac_rate_hz = 64e9;
            c.baud_hz = {56e9};
            c.obpf.enabled = true;
        }
        return c;
    }
};

namespace detail {

inline std::vector<double> number_or_list(const json& j, const std::string& key, std::vector<std::string>& errors) {
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else if (j.is_null()) {
        out.push_back(std::numeric_limits<double>::infinity());
    } else if (j.is_array() && !j.empty()) {
        for (const auto& v : j) {
            if (v.is_number()) out.push_back(v.get<double>());
            else if (v.is_null()) out.push_back(std::numeric_limits<double>::infinity());
            else {
                errors.push_back(key + ": list entries must be numbers");
                return {};
            }
        }
    } else {
        errors.push_back(key + ": expected a number or a non-empty list of numbers");
    }
    return out;
}

template <typename T>
void read_number(const json& obj, const char* key, T& target, const std::string& path, std::vector<std::string>& errors) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number()) {
        errors.push_back(path + key + ": expected a number");
        return;
    }
    target = v.get<T>();
}

}  // namespace detail

/// Parses and validates a scenario. Unknown keys are rejected so typos do
/// not silently fall back to defaults.
inline ScenarioConfig parse_config(const json& j) {
    std::vector<std::string> errors;
    ScenarioConfig c;
    if (!j.is_object()) throw ConfigError({"<root>: expected a JSON object"});

    static const std::vector<std::string> kKnown{
        "scenario", "mode", "baud_hz", "dac_rate_hz", "adc_rate_hz", "rolloff", "fiber", "osnr_db", "esnr_db",
        "cspr_target_db", "cspr_tolerance_db", "drive_index", "phase_deg", "alpha", "dsp_stage", "dsp_stage_cap",
        "seed", "frames", "guard_symbols", "mzm", "frontend", "dac", "obpf", "equalizer", "pdf_bins", "comment"};
    for (const auto& [key, _] : j.items())
        if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) errors.push_back(key + ": unknown field");

    if (!j.contains("mode")) {
        errors.push_back("mode: required (pam4-dsb | pam4-ssb-kk)");
    } else if (j["mode"] == "pam4-dsb") {
        c = ScenarioConfig::for_mode(Mode::pam4_dsb);
    } else if (j["mode"] == "pam4-ssb-kk") {
        c = ScenarioConfig::for_mode(Mode::pam4_ssb_kk);
    } else {
        errors.push_back("mode: must be pam4-dsb or pam4-ssb-kk");
    }

    if (j.contains("scenario")) {
        if (j["scenario"].is_string()) c.scenario = j["scenario"].get<std::string>();
        else errors.push_back("scenario: expected a string");
    }

    if (j.contains("baud_hz")) c.baud_hz = detail::number_or_list(j["baud_hz"], "baud_hz", errors);
    detail::read_number(j, "dac_rate_hz", c.dac_rate_hz, "", errors);
    detail::read_number(j, "adc_rate_hz", c.adc_rate_hz, "", errors);
    detail::read_number(j, "rolloff", c.rolloff, "", errors);
    detail::read_number(j, "cspr_target_db", c.cspr_target_db, "", errors);
    detail::read_number(j, "cspr_tolerance_db", c.cspr_tolerance_db, "", errors);
    detail::read_number(j, "frames", c.frames, "", errors);
    detail::read_number(j, "guard_symbols", c.guard_symbols, "", errors);
    detail::read_number(j, "pdf_bins", c.pdf_bins, "", errors);
    if (j.contains("drive_index")) {
        if (j["drive_index"].is_number()) c.drive_index = j["drive_index"].get<double>();
        else errors.push_back("drive_index: expected a number");
    }
    if (j.contains("esnr_db")) {
        if (j["esnr_db"].is_number()) c.esnr_db = j["esnr_db"].get<double>();
        else if (!j["esnr_db"].is_null()) errors.push_back("esnr_db: expected a number or null");
    }

    if (!j.contains("seed")) {
        errors.push_back("seed: required for reproducibility");
    } else if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0) {
        errors.push_back("seed: expected a non-negative integer");
    } else {
        c.seed = j["seed"].get<std::uint64_t>();
    }

    if (j.contains("fiber")) {
        const auto& f = j["fiber"];
        if (!f.is_object()) {
            errors.push_back("fiber: expected an object");
        } else {
            if (f.contains("length_km")) c.fiber_km = detail::number_or_list(f["length_km"], "fiber.length_km", errors);
            detail::read_number(f, "dispersion_ps_nm_km", c.fiber.dispersion_ps_nm_km, "fiber.", errors);
            detail::read_number(f, "wavelength_nm", c.fiber.wavelength_nm, "fiber.", errors);
            detail::read_number(f, "loss_db_km", c.fiber.loss_db_km, "fiber.", errors);
        }
    }
    if (j.contains("osnr_db")) c.osnr_db = detail::number_or_list(j["osnr_db"], "osnr_db", errors);
    if (j.contains("phase_deg")) c.phase_deg = detail::number_or_list(j["phase_deg"], "phase_deg", errors);

    if (j.contains("alpha")) {
        const auto& a = j["alpha"];
        c.alpha.clear();
        if (a.is_string() && a == "auto") {
            c.alpha.push_back({true, 0.0});
        } else {
            for (double v : detail::number_or_list(a, "alpha", errors)) c.alpha.push_back({false, v});
        }
    }

    const char* stage_key = j.contains("dsp_stage") ? "dsp_stage" : (j.contains("dsp_stage_cap") ? "dsp_stage_cap" : nullptr);
    if (stage_key != nullptr) {
        const auto& s = j[stage_key];
        c.dsp_stage.clear();
        const auto add = [&](const json& v) {
            if (!v.is_string() || !parse_stage(v.get<std::string>())) {
                errors.push_back(std::string(stage_key) + ": entries must be tdeq, dd-rls or postfilter-mlsd");
                return;
            }
            c.dsp_stage.push_back(*parse_stage(v.get<std::string>()));
        };
        if (s.is_array()) for (const auto& v : s) add(v);
        else add(s);
    }

    if (j.contains("mzm")) {
        const auto& m = j["mzm"];
        if (!m.is_object()) {
            errors.push_back("mzm: expected an object");
        } else {
            detail::read_number(m, "v_pi", c.mzm.v_pi, "mzm.", errors);
            detail::read_number(m, "insertion_loss_db", c.mzm.insertion_loss_db, "mzm.", errors);
            if (m.contains("arm_phase_bias_deg")) {
                if (m["arm_phase_bias_deg"].is_number()) c.mzm.set_bias(m["arm_phase_bias_deg"].get<double>() * kPi / 180.0);
                else errors.push_back("mzm.arm_phase_bias_deg: expected a number");
            }
            if (m.contains("drive_bandwidth_hz") && !m["drive_bandwidth_hz"].is_null()) {
                if (m["drive_bandwidth_hz"].is_number()) c.mzm.drive_bandwidth_hz = m["drive_bandwidth_hz"].get<double>();
                else errors.push_back("mzm.drive_bandwidth_hz: expected a number or null");
            }
        }
    }
    if (j.contains("frontend")) {
        const auto& f = j["frontend"];
        if (!f.is_object()) errors.push_back("frontend: expected an object");
        else {
            if (f.contains("bandwidth_hz") && f["bandwidth_hz"].is_null())
                c.frontend_bandwidth_hz = std::numeric_limits<double>::infinity();
            else detail::read_number(f, "bandwidth_hz", c.frontend_bandwidth_hz, "frontend.", errors);
        }
    }
    if (j.contains("dac")) {
        const auto& d = j["dac"];
        if (!d.is_object()) errors.push_back("dac: expected an object");
        else {
            c.dac_enabled = true;
            detail::read_number(d, "enob_bits", c.dac.enob_bits, "dac.", errors);
            detail::read_number(d, "clip_fraction", c.dac.clip_fraction, "dac.", errors);
            detail::read_number(d, "skew_s", c.dac.channel_skew_s, "dac.", errors);
        }
    }
    if (j.contains("obpf")) {
        const auto& o = j["obpf"];
        if (!o.is_object()) errors.push_back("obpf: expected an object");
        else {
            if (o.contains("enabled")) {
                if (o["enabled"].is_boolean()) c.obpf.enabled = o["enabled"].get<bool>();
                else errors.push_back("obpf.enabled: expected a boolean");
            }
            if (o.contains("center_offset_hz")) {
                double v = 0.0;
                detail::read_number(o, "center_offset_hz", v, "obpf.", errors);
                c.obpf.center_offset_hz = v;
            }
            if (o.contains("bandwidth_hz")) {
                double v = 0.0;
                detail::read_number(o, "bandwidth_hz", v, "obpf.", errors);
                c.obpf.bandwidth_hz = v;
            }
        }
    }
    if (j.contains("equalizer")) {
        const auto& e = j["equalizer"];
        if (!e.is_object()) errors.push_back("equalizer: expected an object");
        else {
            detail::read_number(e, "ffe_taps", c.equalizer.ffe_taps, "equalizer.", errors);
            detail::read_number(e, "dd_taps", c.equalizer.dd_taps, "equalizer.", errors);
            detail::read_number(e, "forgetting_factor", c.equalizer.forgetting_factor, "equalizer.", errors);
            detail::read_number(e, "delta", c.equalizer.delta, "equalizer.", errors);
        }
    }

    // Semantic checks.
    for (double b : c.baud_hz)
        if (!(b > 0.0) || !std::isfinite(b)) errors.push_back("baud_hz: must be positive");
    if (!(c.dac_rate_hz > 0.0)) errors.push_back("dac_rate_hz: must be positive");
    if (!(c.adc_rate_hz > 0.0)) errors.push_back("adc_rate_hz: must be positive");
    for (double b : c.baud_hz)
        if (b > 0.0 && c.dac_rate_hz < b) errors.push_back("dac_rate_hz: below one sample per symbol (sub-Nyquist DAC)");
    if (!(c.rolloff >= 0.0 && c.rolloff <= 1.0)) errors.push_back("rolloff: must lie in [0, 1]");
    for (double l : c.fiber_km)
        if (!(l >= 0.0) || !std::isfinite(l)) errors.push_back("fiber.length_km: must be non-negative");
    if (!(c.fiber.wavelength_nm > 1000.0 && c.fiber.wavelength_nm < 2000.0))
        errors.push_back("fiber.wavelength_nm: must lie in (1000, 2000)");
    if (!(c.fiber.loss_db_km >= 0.0)) errors.push_back("fiber.loss_db_km: must be non-negative");
    for (double o : c.osnr_db)
        if (std::isnan(o)) errors.push_back("osnr_db: must be a number or null");
    if (c.frames == 0) errors.push_back("frames: must be at least 1");
    if (c.guard_symbols < 160) errors.push_back("guard_symbols: must be at least 160");
    if (!(c.mzm.v_pi > 0.0)) errors.push_back("mzm.v_pi: must be positive");
    if (c.mzm.drive_bandwidth_hz && !(*c.mzm.drive_bandwidth_hz > 0.0))
        errors.push_back("mzm.drive_bandwidth_hz: must be positive");
    if (c.drive_index && !(*c.drive_index > 0.0 && *c.drive_index <= 1.0))
        errors.push_back("drive_index: must lie in (0, 1]");
    if (c.mode == Mode::pam4_ssb_kk && !c.drive_index && !(c.cspr_tolerance_db > 0.0))
        errors.push_back("cspr_tolerance_db: must be positive");
    for (const auto& a : c.alpha)
        if (!a.automatic && !(a.value >= 0.0 && a.value < 1.0)) errors.push_back("alpha: must lie in [0, 1) or be \"auto\"");
    if (c.dsp_stage.empty()) errors.push_back("dsp_stage: at least one stage required");
    if (c.dac_enabled) {
        if (!(c.dac.enob_bits > 0.0)) errors.push_back("dac.enob_bits: must be positive");
        if (!(c.dac.clip_fraction > 0.0 && c.dac.clip_fraction <= 1.0)) errors.push_back("dac.clip_fraction: must lie in (0, 1]");
        for (double b : c.baud_hz)
            if (b > 0.0 && std::abs(c.dac.channel_skew_s) >= 10.0 / b) errors.push_back("dac.skew_s: must be under 10 symbol durations");
    }
    if (c.equalizer.ffe_taps % 2 == 0 || c.equalizer.ffe_taps == 0) errors.push_back("equalizer.ffe_taps: must be odd");
    if (c.equalizer.dd_taps % 2 == 0 || c.equalizer.dd_taps == 0) errors.push_back("equalizer.dd_taps: must be odd");
    if (!(c.equalizer.forgetting_factor > 0.9 && c.equalizer.forgetting_factor <= 1.0))
        errors.push_back("equalizer.forgetting_factor: must lie in (0.9, 1]");
    if (!(c.equalizer.delta > 0.0)) errors.push_back("equalizer.delta: must be positive");
    for (double b : c.baud_hz) {
        if (!(b > 0.0) || !std::isfinite(b) || !(c.dac_rate_hz > 0.0) || !(c.adc_rate_hz > 0.0)) break;
        try {
            (void)rate_ratio(b, c.dac_rate_hz);
            (void)rate_ratio(c.adc_rate_hz, 4.0 * b);
            (void)rate_ratio(c.adc_rate_hz, 2.0 * b);
        } catch (const ParameterError&) {
            errors.push_back("baud_hz: " + std::to_string(b) + " gives no usable rational resampling ratio");
        }
    }
    if (!(c.frontend_bandwidth_hz > 0.0) || (std::isfinite(c.frontend_bandwidth_hz) && c.frontend_bandwidth_hz >= c.adc_rate_hz / 2.0))
        errors.push_back("frontend.bandwidth_hz: must be positive and below the ADC Nyquist frequency");
    if (c.mode == Mode::pam4_dsb && c.phase_deg.size() > 1)
        errors.push_back("phase_deg: a phase sweep only applies to pam4-ssb-kk");

    if (!errors.empty()) throw ConfigError(std::move(errors));
    c.fiber.length_km = c.fiber_km.front();
    return c;
}

/// SSBLINK_SEED, when set to an integer, replaces the configured seed.
inline void apply_seed_override(ScenarioConfig& c) {
    const char* env = std::getenv("SSBLINK_SEED");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == nullptr || *end != '\0') throw ConfigError({"SSBLINK_SEED: expected a non-negative integer"});
    c.seed = v;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("<json>: ") + e.what()});
    }
    return parse_config(j);
}

}  // namespace ssblink::bench
