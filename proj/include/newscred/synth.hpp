#pragma once

#include <cstdint>
#include <vector>

#include "newscred/hsn.hpp"

namespace newscred {

// Knobs for the synthetic network generator. Article-per-creator counts
// follow a power law; article labels follow a per-creator latent reliability;
// texts are drawn from class-conditional word distributions whose divergence
// scales with signal_strength (0 = indistinguishable, 1 = strongest).
struct SynthSpec {
    std::size_t n_articles = 600;
    std::size_t n_creators = 100;
    std::size_t n_subjects = 20;
    double signal_strength = 0.8;
    std::uint64_t seed = 7;

    std::size_t vocab_size = 300;   // total distinct tokens
    std::size_t n_markers = 30;     // per-polarity marker tokens
    double zipf_exponent = 1.6;     // creator size distribution
};

struct SynthResult {
    Hsn hsn;
    std::vector<double> creator_reliability;  // index-aligned with sorted creator ids
    double expected_positive_rate = 0.0;      // article-weighted mean reliability
};

SynthResult generate_synthetic(const SynthSpec& spec);

}  // namespace newscred
