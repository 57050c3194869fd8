#include "unicast/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "unicast/errors.hpp"

namespace unicast {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

const int kPeriods[] = {8, 12, 16, 24, 32};

std::vector<double> sine_mix_series(Rng& rng, int length, double noise_sigma) {
    int period = kPeriods[rng.next_below(sizeof(kPeriods) / sizeof(kPeriods[0]))];
    int harmonics = 1 + static_cast<int>(rng.next_below(3));
    std::vector<double> amp, phase;
    std::vector<int> k;
    for (int h = 0; h < harmonics; ++h) {
        k.push_back(h + 1);
        amp.push_back(h == 0 ? rng.next_uniform(0.5, 1.0) : rng.next_uniform(0.1, 0.4));
        phase.push_back(rng.next_uniform(0.0, kTwoPi));
    }
    std::vector<double> out(length);
    for (int i = 0; i < length; ++i) {
        // i mod period keeps the sin argument identical one period later,
        // so a noise-free series repeats bitwise.
        int t = i % period;
        double v = 0.0;
        for (int h = 0; h < harmonics; ++h) {
            v += amp[h] * std::sin(kTwoPi * k[h] * t / period + phase[h]);
        }
        if (noise_sigma > 0.0) v += rng.next_gaussian(noise_sigma);
        out[i] = v;
    }
    return out;
}

std::vector<double> trend_season_series(Rng& rng, int length, double noise_sigma) {
    int period = kPeriods[rng.next_below(sizeof(kPeriods) / sizeof(kPeriods[0]))];
    double slope = rng.next_uniform(-0.02, 0.02);
    double amp = rng.next_uniform(0.5, 1.5);
    double phase = rng.next_uniform(0.0, kTwoPi);
    std::vector<double> out(length);
    for (int i = 0; i < length; ++i) {
        double v = slope * i + amp * std::sin(kTwoPi * (i % period) / period + phase);
        if (noise_sigma > 0.0) v += rng.next_gaussian(noise_sigma);
        out[i] = v;
    }
    return out;
}

std::vector<double> random_walk_series(Rng& rng, int length, double noise_sigma) {
    std::vector<double> out(length);
    double x = 0.0;
    for (int i = 0; i < length; ++i) {
        x += rng.next_gaussian(noise_sigma);
        out[i] = x;
    }
    return out;
}

}  // namespace

std::string to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::SineMix: return "sine_mix";
        case SynthKind::TrendSeason: return "trend_season";
        case SynthKind::RandomWalk: return "random_walk";
    }
    throw contract_error("unhandled synth kind");
}

SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "sine_mix") return SynthKind::SineMix;
    if (s == "trend_season") return SynthKind::TrendSeason;
    if (s == "random_walk") return SynthKind::RandomWalk;
    throw config_error("unknown synthetic kind '" + s + "'");
}

SeriesCollection make_synthetic(const SynthSpec& spec) {
    if (spec.num_series < 1) throw config_error("num_series must be >= 1");
    if (spec.length < 2) throw config_error("length must be >= 2");
    if (spec.noise_sigma < 0.0) throw config_error("noise_sigma must be >= 0");

    const Rng root(spec.seed);
    SeriesCollection c;
    c.name = to_string(spec.kind);
    for (int s = 0; s < spec.num_series; ++s) {
        Rng rng = root.split("series_" + std::to_string(s));
        switch (spec.kind) {
            case SynthKind::SineMix:
                c.series.push_back(sine_mix_series(rng, spec.length, spec.noise_sigma));
                break;
            case SynthKind::TrendSeason:
                c.series.push_back(trend_season_series(rng, spec.length, spec.noise_sigma));
                break;
            case SynthKind::RandomWalk:
                c.series.push_back(random_walk_series(rng, spec.length, spec.noise_sigma));
                break;
        }
    }
    c.source_ids.resize(c.series.size());
    std::iota(c.source_ids.begin(), c.source_ids.end(), 0);
    return c;
}

void write_collection_csv(const SeriesCollection& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path + "'");
    char buf[40];
    for (const std::vector<double>& row : c.series) {
        for (size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
            if (i) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace unicast
