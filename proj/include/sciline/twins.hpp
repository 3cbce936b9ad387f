#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sciline/corpus.hpp"
#include "sciline/embed_space.hpp"

namespace sciline {

struct CitationContext {
    std::string citing_paper_id;
    int sentence_index = 0;
    int group_index = 0;
    std::vector<std::string> cited_ids;
};

std::vector<CitationContext> load_contexts(const std::filesystem::path& path);
std::string context_to_json_line(const CitationContext& context);

using PaperPair = std::pair<std::string, std::string>;  // first < second

// Pairs inside one group count once per group. Pairs split across two groups
// of the same citing paper whose sentences are at most max_sentence_gap apart
// count once per such group pair.
std::map<PaperPair, std::size_t> cocitation_pairs(std::span<const CitationContext> contexts,
                                                  int max_sentence_gap = 1);

// Overlap coefficient; undefined when either paper has no references.
std::optional<double> refsim(const PaperRecord& a, const PaperRecord& b);

struct BackToBack {
    bool b2b = false;
    bool order_unknown = false;
};

BackToBack b2b_flag(const PaperRecord& a, const PaperRecord& b);

struct TwinParams {
    std::size_t min_cocite = 3;
    double refsim_threshold = 0.5;
};

struct TwinPair {
    std::string paper_a;
    std::string paper_b;
    std::size_t co_citation_count = 0;
    double refsim = 0.0;
    bool same_year = true;
    bool b2b = false;
    bool order_unknown = false;
    std::optional<double> score_a;
    std::optional<double> score_b;
    std::optional<double> score_diff;
    std::optional<std::string> control_id;
    std::optional<double> control_diff;
};

// Sorted by (paper_a, paper_b).
std::vector<TwinPair> detect_twins(const std::map<PaperPair, std::size_t>& pairs, const Corpus& corpus,
                                   const TwinParams& params = {});

using PaperFilter = std::function<bool(const PaperRecord&)>;

// Pool: papers of paper_a's year sharing one of its level-1 fields, minus both
// twins, sorted by id. Throws when the pool is empty.
std::vector<std::string> control_pool(const TwinPair& pair, const Corpus& corpus, const PaperFilter& eligible = {});
std::string sample_controls(const TwinPair& pair, const Corpus& corpus, std::uint64_t seed,
                            const PaperFilter& eligible = {});

struct SurvivalPoint {
    double threshold = 0.0;
    double fraction = 0.0;  // share of pairs with |diff| > threshold
};

std::vector<SurvivalPoint> survival_curve(std::span<const double> diffs, double step = 0.01, double max = 1.0);

struct ValidationReport {
    std::size_t n_pairs = 0;
    std::optional<double> pearson_r;
    double twin_within = 0.0;     // share with |diff| <= tolerance
    double control_within = 0.0;
    double tolerance = 0.05;
    std::optional<double> rank_sum_p;  // twin diffs vs control diffs
    double mutual_knn_fraction = 0.0;
    std::array<std::size_t, 6> neighbor_overlap{};  // 0..5 shared neighbors
    std::size_t no_common_cohort = 0;
    std::vector<SurvivalPoint> twin_survival;
    std::vector<SurvivalPoint> control_survival;
};

// pairs must carry scores, and controls where available. knn5 entries supply
// neighbor lists; a pair is compared within a cohort both members belong to.
ValidationReport validate_scores(std::span<const TwinPair> pairs, std::span<const StylizationEntry> knn5_entries,
                                 double tolerance = 0.05);

double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace sciline
