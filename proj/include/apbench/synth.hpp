#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apbench/seeding.hpp"
#include "apbench/series.hpp"

namespace apbench {

// ============================================================================
// Synthetic dataset generator
//
// Each instance is a smooth sine/cosine base series into which a number of
// anomaly events are injected. An event is: a hidden precursor pattern
// (Gaussian noise segment followed by a rising ramp) added to channel 0, a
// brewing gap, and then a run of positive labels (the observation period).
// The precursor is what a model can detect; the labels are what it must
// predict.
// ============================================================================

enum class BasePattern { Fixed, Mixed, MultiFixed, MultiMixed };

inline const char* to_string(BasePattern p) {
    switch (p) {
        case BasePattern::Fixed: return "fixed";
        case BasePattern::Mixed: return "mixed";
        case BasePattern::MultiFixed: return "multi_fixed";
        case BasePattern::MultiMixed: return "multi_mixed";
    }
    return "?";
}

inline BasePattern base_pattern_from_string(const std::string& s) {
    if (s == "fixed") return BasePattern::Fixed;
    if (s == "mixed") return BasePattern::Mixed;
    if (s == "multi_fixed") return BasePattern::MultiFixed;
    if (s == "multi_mixed") return BasePattern::MultiMixed;
    throw std::invalid_argument("unknown base pattern '" + s + "'");
}

/// A step count that is either fixed or drawn from a Gaussian (rounded to
/// the nearest integer, clipped to >= 1 so every event has nonzero brewing
/// and observation).
struct DurationSpec {
    enum class Kind { Fixed, Gaussian } kind = Kind::Fixed;
    double mean = 0.0;
    double stddev = 0.0;

    static DurationSpec fixed(double steps) { return {Kind::Fixed, steps, 0.0}; }
    static DurationSpec gaussian(double mean, double stddev) {
        return {Kind::Gaussian, mean, stddev};
    }

    std::size_t draw(std::mt19937_64& rng) const {
        double v = mean;
        if (kind == Kind::Gaussian) {
            std::normal_distribution<double> dist(mean, stddev);
            v = std::round(dist(rng));
        }
        return static_cast<std::size_t>(std::max(1.0, v));
    }
    std::size_t max_plausible() const {
        // conservative packing bound: mean + 4 sigma
        return static_cast<std::size_t>(
            std::max(1.0, std::ceil(mean + (kind == Kind::Gaussian ? 4.0 * stddev : 0.0))));
    }
};

struct GenConfig {
    int dataset_id = 1;  // 1..10
    std::size_t n_steps = 10000;
    std::size_t n_features = 1;
    std::size_t n_instances = 10;
    std::size_t n_events = 10;
    BasePattern base_pattern = BasePattern::Fixed;
    std::size_t sine_period = 50;
    std::size_t pattern_len = 10;
    DurationSpec brewing = DurationSpec::fixed(20);
    DurationSpec observation = DurationSpec::fixed(10);
    // minimum gap between consecutive event spans; sized to the default
    // look-back so one window never straddles two events
    std::size_t guard_gap = 50;
    double snr = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (dataset_id < 1 || dataset_id > 10)
            throw std::invalid_argument("dataset_id must be in 1..10");
        if (n_steps < 1 || n_events < 1 || pattern_len < 1 || n_instances < 1 ||
            n_features < 1)
            throw std::invalid_argument("n_steps, n_events, n_instances, n_features, "
                                        "pattern_len must be >= 1");
        if (pattern_len < 2)
            throw std::invalid_argument("pattern_len must be >= 2");
        if (!(snr > 0.0)) throw std::invalid_argument("snr must be > 0");
        if (sine_period < 2) throw std::invalid_argument("sine_period must be >= 2");
    }
};

/// Preset for one of the ten standard synthetic datasets. Univariate for ids
/// 1..5, three channels for 6..10; brewing and observation are fixed or
/// Gaussian per the published difficulty ladder.
inline GenConfig dataset_config(int dataset_id, std::uint64_t seed = 0) {
    if (dataset_id < 1 || dataset_id > 10)
        throw std::invalid_argument("dataset_id must be in 1..10, got " +
                                    std::to_string(dataset_id));
    GenConfig cfg;
    cfg.dataset_id = dataset_id;
    cfg.seed = seed;
    const DurationSpec brew_fixed = DurationSpec::fixed(20);
    const DurationSpec brew_gauss = DurationSpec::gaussian(20, 5);
    const DurationSpec obs_fixed = DurationSpec::fixed(10);
    const DurationSpec obs_gauss = DurationSpec::gaussian(10, 3);
    switch (dataset_id) {
        case 1: cfg.base_pattern = BasePattern::Fixed;      cfg.brewing = brew_fixed; cfg.observation = obs_fixed; break;
        case 2: cfg.base_pattern = BasePattern::Fixed;      cfg.brewing = brew_gauss; cfg.observation = obs_fixed; break;
        case 3: cfg.base_pattern = BasePattern::Fixed;      cfg.brewing = brew_fixed; cfg.observation = obs_gauss; break;
        case 4: cfg.base_pattern = BasePattern::Fixed;      cfg.brewing = brew_gauss; cfg.observation = obs_gauss; break;
        case 5: cfg.base_pattern = BasePattern::Mixed;      cfg.brewing = brew_gauss; cfg.observation = obs_gauss; break;
        case 6: cfg.base_pattern = BasePattern::MultiFixed; cfg.brewing = brew_fixed; cfg.observation = obs_fixed; break;
        case 7: cfg.base_pattern = BasePattern::MultiFixed; cfg.brewing = brew_gauss; cfg.observation = obs_fixed; break;
        case 8: cfg.base_pattern = BasePattern::MultiFixed; cfg.brewing = brew_fixed; cfg.observation = obs_gauss; break;
        case 9: cfg.base_pattern = BasePattern::MultiFixed; cfg.brewing = brew_gauss; cfg.observation = obs_gauss; break;
        case 10: cfg.base_pattern = BasePattern::MultiMixed; cfg.brewing = brew_gauss; cfg.observation = obs_gauss; break;
    }
    cfg.n_features = dataset_id <= 5 ? 1 : 3;
    return cfg;
}

inline std::string dataset_name(int dataset_id) {
    return "synthetic_" + std::to_string(dataset_id);
}

/// One injected anomaly event. The full span is
/// [pattern_start, pattern_start + pattern_len + brewing + observation).
struct EventSpec {
    std::size_t pattern_start = 0;
    std::size_t pattern_len = 0;
    std::size_t brewing = 0;
    std::size_t observation = 0;

    std::size_t label_start() const { return pattern_start + pattern_len + brewing; }
    std::size_t span_end() const { return label_start() + observation; }
};

namespace detail {

// distinct candidate periods for mixed bases
inline const std::size_t kMixPeriods[] = {25, 50, 100};

struct SineComponent {
    double amplitude;
    double period;
    double phase;
};

// 2-3 sines with distinct periods from {25,50,100}; amplitudes sum to 1.
inline std::vector<SineComponent> draw_mix(std::mt19937_64& rng, double phase_offset) {
    std::uniform_int_distribution<int> count_dist(2, 3);
    const int k = count_dist(rng);
    std::vector<std::size_t> periods(std::begin(kMixPeriods), std::end(kMixPeriods));
    for (int i = 0; i < 2; ++i) {  // partial Fisher-Yates
        std::uniform_int_distribution<std::size_t> pick(i, periods.size() - 1);
        std::swap(periods[i], periods[pick(rng)]);
    }
    std::uniform_real_distribution<double> weight_dist(0.2, 1.0);
    std::vector<double> weights(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& w : weights) { w = weight_dist(rng); total += w; }
    std::vector<SineComponent> mix;
    for (int i = 0; i < k; ++i)
        mix.push_back({weights[static_cast<std::size_t>(i)] / total,
                       static_cast<double>(periods[static_cast<std::size_t>(i)]),
                       phase_offset});
    return mix;
}

inline void fill_channel(SeriesInstance& s, std::size_t channel,
                         std::span<const SineComponent> mix) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t k = 0; k < s.n_steps; ++k) {
        double v = 0.0;
        for (const auto& c : mix)
            v += c.amplitude * std::sin(two_pi * static_cast<double>(k) / c.period + c.phase);
        s.value(k, channel) = v;
    }
}

}  // namespace detail

/// Clean labeled-all-zero base series for one instance. Fixed is a unit sine
/// of the configured period; Mixed sums 2-3 sines with distinct periods and
/// unit total amplitude; the Multi variants add a j*pi/4 phase offset on
/// channel j (so sines and cosines both appear across channels).
inline SeriesInstance gen_base_series(const GenConfig& config, std::uint64_t instance_seed,
                                      const std::string& instance_id) {
    config.validate();
    SeriesInstance s;
    s.instance_id = instance_id;
    s.n_steps = config.n_steps;
    s.n_features = config.n_features;
    s.values.assign(s.n_steps * s.n_features, 0.0);
    s.labels.assign(s.n_steps, 0);
    s.feature_names = default_feature_names(s.n_features);

    std::mt19937_64 rng(instance_seed);
    const double period = static_cast<double>(config.sine_period);
    constexpr double quarter_pi = std::numbers::pi / 4.0;
    for (std::size_t j = 0; j < s.n_features; ++j) {
        const double phase = static_cast<double>(j) * quarter_pi;
        std::vector<detail::SineComponent> mix;
        switch (config.base_pattern) {
            case BasePattern::Fixed:
            case BasePattern::MultiFixed:
                mix = {{1.0, period, phase}};
                break;
            case BasePattern::Mixed:
            case BasePattern::MultiMixed:
                mix = detail::draw_mix(rng, phase);
                break;
        }
        detail::fill_channel(s, j, mix);
    }
    return s;
}

/// The hidden precursor: floor(len/2) i.i.d. standard Gaussian samples
/// followed by a linear ramp from 0 to 1 inclusive.
inline std::vector<double> gen_anomaly_pattern(std::size_t pattern_len,
                                               std::mt19937_64& rng) {
    if (pattern_len < 2)
        throw std::invalid_argument("gen_anomaly_pattern: pattern_len must be >= 2");
    std::vector<double> pattern(pattern_len);
    const std::size_t n_gauss = pattern_len / 2;
    const std::size_t n_ramp = pattern_len - n_gauss;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n_gauss; ++i) pattern[i] = gauss(rng);
    for (std::size_t j = 0; j < n_ramp; ++j)
        pattern[n_gauss + j] =
            n_ramp == 1 ? 1.0
                        : static_cast<double>(j) / static_cast<double>(n_ramp - 1);
    return pattern;
}

/// Draws n_events non-overlapping events, at least guard_gap steps apart,
/// by rejection sampling of the start positions (up to 1000 attempts).
/// Brewing/observation lengths are drawn once per event up front.
inline std::vector<EventSpec> sample_events(const GenConfig& config,
                                            std::mt19937_64& rng) {
    config.validate();
    std::vector<EventSpec> events(config.n_events);
    std::size_t total_span = 0;
    for (auto& e : events) {
        e.pattern_len = config.pattern_len;
        e.brewing = config.brewing.draw(rng);
        e.observation = config.observation.draw(rng);
        total_span += e.pattern_len + e.brewing + e.observation;
    }
    const std::size_t total_guard = config.guard_gap * (config.n_events - 1);
    if (total_span + total_guard > config.n_steps)
        throw std::runtime_error(
            "sample_events: cannot pack " + std::to_string(config.n_events) +
            " events (spans " + std::to_string(total_span) + " + guard gaps " +
            std::to_string(total_guard) + ") into " + std::to_string(config.n_steps) +
            " steps");

    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<std::size_t> starts(config.n_events);
        bool ok = true;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const std::size_t span =
                events[i].pattern_len + events[i].brewing + events[i].observation;
            if (span > config.n_steps) { ok = false; break; }
            std::uniform_int_distribution<std::size_t> pos(0, config.n_steps - span);
            starts[i] = pos(rng);
        }
        if (!ok) continue;
        std::vector<std::size_t> order(events.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return starts[a] < starts[b]; });
        std::vector<EventSpec> placed;
        placed.reserve(events.size());
        for (std::size_t i : order) {
            EventSpec e = events[i];
            e.pattern_start = starts[i];
            if (!placed.empty() &&
                e.pattern_start < placed.back().span_end() + config.guard_gap) {
                ok = false;
                break;
            }
            placed.push_back(e);
        }
        if (ok) return placed;
    }
    throw std::runtime_error(
        "sample_events: no non-overlapping placement found after 1000 attempts; "
        "binding constraint: " + std::to_string(config.n_events) + " events of ~" +
        std::to_string(total_span / config.n_events) + " steps plus " +
        std::to_string(config.guard_gap) + "-step guard gaps in " +
        std::to_string(config.n_steps) + " steps");
}

/// Adds snr * pattern onto channel 0 over the pattern span and sets the
/// observation labels. Other channels and labels are untouched.
inline SeriesInstance inject_event(SeriesInstance series, const EventSpec& event,
                                   std::span<const double> pattern, double snr) {
    if (pattern.size() != event.pattern_len)
        throw std::invalid_argument("inject_event: pattern length does not match event");
    if (event.span_end() > series.n_steps)
        throw std::invalid_argument("inject_event: event does not fit in series '" +
                                    series.instance_id + "'");
    for (std::size_t j = 0; j < pattern.size(); ++j)
        series.value(event.pattern_start + j, 0) += snr * pattern[j];
    for (std::size_t k = event.label_start(); k < event.span_end(); ++k)
        series.labels[k] = 1;
    return series;
}

/// Generates all instances of one dataset. Instance i is driven entirely by
/// derive_seed(config.seed, i); the precursor pattern is drawn once per
/// dataset and shared by every event, so it is a stable signature a model
/// can learn.
inline std::vector<SeriesInstance> generate_dataset(const GenConfig& config) {
    config.validate();
    // dedicated stream, out of the per-instance range
    constexpr std::uint64_t kPatternStream = 0xff00000000000001ull;
    std::mt19937_64 pattern_rng(derive_seed(config.seed, kPatternStream));
    const std::vector<double> pattern = gen_anomaly_pattern(config.pattern_len, pattern_rng);

    std::vector<SeriesInstance> instances;
    instances.reserve(config.n_instances);
    for (std::size_t i = 0; i < config.n_instances; ++i) {
        const std::uint64_t instance_seed = derive_seed(config.seed, i);
        std::string id = dataset_name(config.dataset_id) + "/" +
                         (i < 10 ? "0" : "") + std::to_string(i);
        SeriesInstance s = gen_base_series(config, instance_seed, id);
        std::mt19937_64 rng(derive_seed(instance_seed, 1));
        const std::vector<EventSpec> events = sample_events(config, rng);
        for (const auto& e : events) s = inject_event(std::move(s), e, pattern, config.snr);
        s.validate();
        instances.push_back(std::move(s));
    }
    return instances;
}

}  // namespace apbench
