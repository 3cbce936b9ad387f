#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sciline/corpus.hpp"
#include "sciline/twins.hpp"

namespace sciline {

struct SynthConfig {
    int start_year = 2000;
    int n_years = 10;
    int n_fields = 4;
    int papers_per_year = 100;  // per field in the first year
    double growth_rate = 0.0;   // yearly multiplicative growth of papers_per_year
    // Moves papers between fields within a year (totals unchanged), so field
    // size is not a pure year + field effect.
    double field_size_jitter = 0.2;
    int dim = 32;
    int topics_per_field = 8;

    // Stylization: either calibrate the spread so the expected yearly mean
    // knn5 score follows target_start + target_slope * (year - start_year),
    // or interpolate the spread linearly from sigma_start to sigma_end.
    bool calibrate = true;
    double target_start = 0.5;
    double target_slope = -0.01;
    double sigma_start = 1.0;
    double sigma_end = 0.5;

    // Citations
    double mean_references = 15.0;
    double recency_decay = 0.3;
    double preferential_attachment = 0.0;
    double stylized_citation_factor = 0.6;

    // Review lag in days: base * factor * exp(spread * N(0,1))
    double review_base_days = 150.0;
    double review_spread = 0.1;
    double stylized_review_factor = 1.05;
    double review_outlier_fraction = 0.02;

    // Concepts
    int concepts_per_field = 30;
    int concepts_per_paper = 4;
    double cross_field_prob = 0.1;
    double stylized_cross_factor = 1.5;

    // Twins
    int twin_count = 0;
    double twin_noise = 0.05;
    double twin_b2b_prob = 0.5;
    int twin_contexts = 4;
    int noise_contexts = 200;

    int journals_per_field = 3;
    std::optional<std::uint64_t> seed;
};

void validate(const SynthConfig& config);

struct SynthYearTruth {
    int year = 0;
    double sigma = 0.0;
    double target_score = 0.0;
    double calibration_score = 0.0;
};

struct SynthOutput {
    std::vector<PaperRecord> papers;
    EmbeddingStore embeddings;
    std::vector<CitationContext> contexts;
    std::vector<SynthYearTruth> years;
    std::vector<std::pair<std::string, std::string>> twins;
    std::size_t stylized_count = 0;
};

// Fully deterministic per seed. Throws config error when the seed is unset.
SynthOutput generate(const SynthConfig& config);

// Writes corpus.ndjson, embeddings.bin, citations.csv, contexts.ndjson and truth.json.
void write_synth(const SynthConfig& config, const SynthOutput& output, const std::filesystem::path& dir);

void generate_corpus(const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace sciline
