#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sciline/corpus.hpp"
#include "sciline/embed_space.hpp"

namespace sciline {

// Unordered pair stored with first < second.
using ConceptPair = std::pair<std::string, std::string>;

std::vector<ConceptPair> extract_pairs(const PaperRecord& paper);
std::set<ConceptPair> baseline_pairs(const Corpus& corpus, int cutoff_year);

struct ComboEvent {
    std::string concept_a;
    std::string concept_b;
    int first_year = 0;
    std::vector<std::string> originator_ids;  // sorted
    double distance = 1.0;
    bool remote = false;
    std::size_t reuse_count = 0;
    bool disconnected = false;
};

// Events sorted by (first_year, concept_a, concept_b); reuse counts filled in.
std::vector<ComboEvent> detect_new_combos(const Corpus& corpus, const std::set<ConceptPair>& baseline);

std::size_t reuse_count(const ComboEvent& event, const Corpus& corpus);

struct WalkParams {
    int dim = 64;
    int walks_per_node = 10;
    int walk_length = 40;
    int context = 5;
    int window_years = 5;
    std::uint64_t seed = 42;
};

struct ConceptWindowEmbedding {
    int first_year = 0;
    int last_year = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> concepts;  // sorted vocabulary
    Eigen::MatrixXd vectors;            // unit rows, or zero when no signal
    std::vector<int> component;         // connected component per concept

    std::optional<std::size_t> index_of(std::string_view concept_id) const;
};

// Vocabularies up to this size use a dense eigensolver.
inline constexpr std::size_t kDenseVocabLimit = 2000;

ConceptWindowEmbedding concept_window_embedding(const Corpus& corpus, int year, const WalkParams& params);

struct ComboDistance {
    double distance = 1.0;
    bool disconnected = false;
};

// (1 - cos) / 2 between two vectors.
double half_cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Out-of-vocabulary, zero-vector and cross-component pairs get 1.0 and the flag.
ComboDistance combo_distance(std::string_view a, std::string_view b, const ConceptWindowEmbedding& embedding);

bool classify_remote(double distance, double threshold);

struct RecombinationParams {
    std::optional<int> cutoff_year;  // default: first corpus year + 5
    double threshold = 0.5;
    WalkParams walk;
};

struct RecombinationResult {
    int cutoff_year = 0;
    std::size_t baseline_size = 0;
    std::vector<ComboEvent> events;
};

int default_cutoff_year(const Corpus& corpus);

// Detects events and attaches distances from the window ending in each first year.
RecombinationResult run_recombination(const Corpus& corpus, const RecombinationParams& params);

struct RemoteStats {
    int year = 0;
    std::size_t n_stylized = 0;  // papers contributing
    std::size_t n_popularized = 0;
    double overall_distance = 0.0;
    double overall_remote = 0.0;
    std::optional<double> distance_ratio_stylized;
    std::optional<double> distance_ratio_popularized;
    std::optional<double> remote_ratio_stylized;
    std::optional<double> remote_ratio_popularized;
    bool stylized_dropped = false;
    bool popularized_dropped = false;
};

// Each originator of an event receives weight 1/|originators|. Papers of the
// year without new combinations contribute a zero unless excluded.
RemoteStats group_remote_stats(std::span<const ComboEvent> events, const std::unordered_map<std::string, Label>& labels,
                               const std::unordered_map<std::string, int>& paper_years, int year,
                               bool exclude_without_combos = false);

}  // namespace sciline
