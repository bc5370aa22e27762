#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "newscred/features.hpp"
#include "newscred/hsn.hpp"

namespace newscred {

struct WordContrast {
    std::string token;
    std::size_t true_count = 0;   // occurrences in positive-group articles
    std::size_t false_count = 0;  // occurrences in negative-group articles
    double contrast = 0.0;        // log((true_count+1)/(false_count+1))
};

struct CreatorRatio {
    std::string id;
    std::size_t articles = 0;
    std::size_t true_articles = 0;
    std::size_t false_articles = 0;
    CredLabel label = CredLabel::True;
};

struct PowerLawBucket {
    std::size_t articles_per_creator = 0;
    std::size_t creators = 0;
};

struct SubjectRow {
    std::string id;
    std::size_t articles = 0;
    std::size_t true_articles = 0;
    std::size_t false_articles = 0;
    CredLabel label = CredLabel::True;
};

struct StatsReport {
    std::size_t n_articles = 0, n_creators = 0, n_subjects = 0;
    std::size_t n_subject_links = 0;
    std::array<std::size_t, kNumClasses> label_counts{};
    std::size_t true_articles = 0, false_articles = 0;  // bi-class grouping

    // Top-K contrast tokens in each direction; empty when either article
    // group is empty.
    std::vector<WordContrast> true_leaning, false_leaning;

    std::vector<CreatorRatio> creator_ratios;  // by article count, descending
    std::vector<PowerLawBucket> creator_histogram;
    // Log-log least-squares slope over the histogram; absent with fewer than
    // two distinct bucket sizes.
    std::optional<double> power_law_slope;

    std::vector<SubjectRow> top_subjects;  // up to 20, by article count
};

// Missing creator/subject labels are derived internally; the input network is
// not modified.
StatsReport stats(const Hsn& hsn, std::size_t top_k_words = 25,
                  const TokenizerConfig& cfg = {});

// Writes summary.csv, word_contrast.csv, creator_ratio.csv, power_law.csv and
// subject_top.csv into an existing directory.
void write_stats_csv(const StatsReport& report, const std::string& dir);

}  // namespace newscred
