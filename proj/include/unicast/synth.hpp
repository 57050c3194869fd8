#pragma once

#include <cstdint>
#include <string>

#include "unicast/data.hpp"

namespace unicast {

// Generator families for desk-scale stand-ins of the benchmark corpora.
//   SineMix:     sum of integer-harmonic sinusoids, exactly periodic at
//                noise 0 (phase is computed from i mod period).
//   TrendSeason: linear trend plus one seasonal component.
//   RandomWalk:  cumulative sum of gaussian steps; noise_sigma is the step
//                scale.
enum class SynthKind { SineMix, TrendSeason, RandomWalk };

std::string to_string(SynthKind kind);
SynthKind synth_kind_from_string(const std::string& s);

struct SynthSpec {
    SynthKind kind = SynthKind::SineMix;
    int num_series = 10;
    int length = 200;
    double noise_sigma = 0.1;
    uint64_t seed = 0;
};

// Deterministic generation: series i draws from a child stream labeled by
// its index, so num_series can grow without reshuffling earlier series.
SeriesCollection make_synthetic(const SynthSpec& spec);

// Wide-CSV writer (one series per row, %.17g), the loader's inverse.
void write_collection_csv(const SeriesCollection& c, const std::string& path);

}  // namespace unicast
