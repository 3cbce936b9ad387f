#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sciline/corpus.hpp"

namespace sciline {

enum class Variant { knn5, knn10, pct5 };
enum class Label { stylized, popularized };

std::string_view to_string(Variant v);
std::string_view to_string(Label l);
Variant parse_variant(std::string_view text);
std::vector<Variant> parse_variants(std::string_view comma_list);

struct RotationOptions {
    int removal_rank = 1;
    bool center = true;
    // false: each row is centered on the mean of the other rows
    bool include_self_in_mean = true;
};

// Mean-centering only is {0, true}; normalization only is {0, false}.
RotationOptions rotation_none();

struct RotatedCohortMatrix {
    Eigen::MatrixXd centered;    // after centering, before projection
    Eigen::MatrixXd unit;        // unit rows; degenerate rows are left zero
    Eigen::MatrixXd removed;     // dim x removal_rank, orthonormal columns
    std::vector<bool> degenerate;
    int removal_rank = 0;

    std::size_t usable_rows() const;
};

inline constexpr double kDegenerateNorm = 1e-12;

RotatedCohortMatrix rotate_cohort(const Eigen::MatrixXd& vectors, const RotationOptions& options = {});

// Top-r eigenvectors of a symmetric PSD matrix by seeded block power
// iteration. Columns are ordered by decreasing eigenvalue.
Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& sym, int r, std::uint64_t seed = 0x5eedULL,
                                 int max_iter = 100, double tol = 1e-10);

struct StylizationEntry {
    std::string paper_id;
    Variant variant = Variant::knn5;
    double score = 0.0;
    std::vector<std::string> neighbor_ids;
    int cohort_year = 0;
    std::string cohort_field;
    double cohort_mean = 0.0;
    Label label = Label::popularized;
};

std::size_t effective_k(Variant v, std::size_t cohort_size);

// Scores the usable rows of an already rotated matrix. ids[i] names row i and
// must be sorted ascending so index order is the tie-break order.
std::vector<StylizationEntry> score_rotated(const RotatedCohortMatrix& rotated, std::span<const std::string> ids,
                                            Variant variant, int year, const std::string& field);

std::vector<StylizationEntry> stylization_scores(const Cohort& cohort, const EmbeddingStore& store, Variant variant,
                                                 const RotationOptions& options = {});

struct StylizeOptions {
    std::vector<Variant> variants{Variant::knn5};
    RotationOptions rotation;
};

struct StylizeResult {
    std::vector<StylizationEntry> entries;  // sorted by variant, year, field, paper_id
    std::size_t cohorts_scored = 0;
    std::size_t small_cohorts = 0;    // 2..5 members, reduced k
    std::size_t skipped_cohorts = 0;  // fewer than 2 usable rows
    std::size_t degenerate_rows = 0;
    std::size_t unembedded_papers = 0;
};

// Scores every cohort of the corpus, in parallel over cohorts.
StylizeResult stylize_corpus(const Corpus& corpus, const StylizeOptions& options);

double paper_score(std::string_view paper_id, std::span<const StylizationEntry> entries, Variant variant);

struct PaperScore {
    std::string paper_id;
    Variant variant = Variant::knn5;
    int year = 0;
    double score = 0.0;
    double reference_mean = 0.0;  // mean of the paper's cohort means
    Label label = Label::popularized;
    std::size_t n_cohorts = 0;
};

// One row per (paper, variant), sorted by variant then paper_id.
std::vector<PaperScore> paper_scores(std::span<const StylizationEntry> entries);

inline constexpr std::size_t kHistogramBins = 200;
inline constexpr double kHistogramWidth = 0.01;

std::size_t histogram_bin(double score);

struct DecadeRow {
    int decade = 0;
    std::size_t count = 0;
    double mean = 0.0;
    std::vector<std::size_t> histogram;      // kHistogramBins bins over [0, 2]
    std::map<std::string, double> field_means;
};

// Decades without entries are absent.
std::vector<DecadeRow> decade_distribution(std::span<const StylizationEntry> entries);

}  // namespace sciline
