#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sciline/corpus.hpp"
#include "sciline/disruption.hpp"
#include "sciline/embed_space.hpp"

namespace sciline {

struct CitationCounts {
    std::size_t c5 = 0;
    std::size_t c10 = 0;
    std::size_t total = 0;
};

// Offsets are citer year minus focal year. Half-open [0,5) and [0,10) unless
// inclusive, which makes them [0,5] and [0,10].
CitationCounts citation_windows(const CitationGraph& graph, std::uint32_t node, bool inclusive = false);
CitationCounts citation_windows(const CitationGraph& graph, std::string_view paper_id, bool inclusive = false);

// Yearly citation counts from the publication year through last_year.
std::vector<double> citation_trajectory(const CitationGraph& graph, std::uint32_t node, int last_year);

struct CitationItem {
    double count = 0.0;
    int year = 0;
    std::vector<std::string> fields;  // a paper without fields forms its own "" field
};

struct NormalizedCitations {
    std::vector<double> values;
    std::vector<bool> zero_mean;  // some group of the paper had mean 0
    std::size_t zero_mean_groups = 0;
};

NormalizedCitations normalize_citations(std::span<const CitationItem> items);

double sleeping_beauty(std::span<const double> trajectory);

enum class Exclusion { too_short, too_long, missing_dates };
std::string_view to_string(Exclusion e);

struct TurnaroundFilter {
    int min_days = 30;
    int max_days = 1000;
    bool include_outliers = false;
};

struct Turnaround {
    std::optional<int> days;
    std::optional<Exclusion> excluded;
};

// Throws a data error when accepted precedes submitted.
Turnaround turnaround(const SubmissionHistory& history, const TurnaroundFilter& filter = {});

struct RankSumResult {
    double p_value = 1.0;
    double u = 0.0;  // Mann-Whitney U of the first sample
    bool exact = false;
};

// Two-sided. Exact enumeration when both samples have at most 8 values.
RankSumResult rank_sum_test(std::span<const double> a, std::span<const double> b);

std::string stars_fig(double p);  // * p<0.1, ** p<0.05, *** p<0.01

struct LabeledValue {
    int year = 0;
    Label label = Label::popularized;
    double value = 0.0;
};

struct RatioPoint {
    int year = 0;
    std::size_t n_stylized = 0;
    std::size_t n_popularized = 0;
    double stylized_mean = 0.0;
    double popularized_mean = 0.0;
    std::optional<double> ratio;  // null when the popularized mean is <= 0
    double p_value = 1.0;
    bool exact = false;
    std::string stars;
};

struct RatioSeries {
    std::string metric;
    std::vector<RatioPoint> points;  // years with both groups present
    std::size_t skipped_years = 0;
};

RatioSeries ratio_series(std::string metric, std::span<const LabeledValue> values);

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
};

double silverman_bandwidth(std::span<const double> x);

std::vector<CurvePoint> kernel_smooth(std::span<const CurvePoint> points, std::optional<double> bandwidth = {},
                                      std::size_t grid_points = 200);

struct BandPoint {
    double x = 0.0;
    double fit = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct TrendFit {
    double beta = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double se_beta = 0.0;
    std::size_t n = 0;
    std::vector<BandPoint> band;  // 95% confidence band at each input x
};

TrendFit trend_fit(std::span<const CurvePoint> points);

struct ReceptionOptions {
    bool inclusive_windows = false;
    TurnaroundFilter turnaround;
};

struct ReceptionRow {
    std::string paper_id;
    int year = 0;
    std::size_t c5 = 0;
    std::size_t c10 = 0;
    std::size_t citation_count = 0;
    double citation_normalized = 0.0;
    bool normalization_flag = false;
    std::optional<double> sb_strength;
    std::optional<int> turnaround_days;
    std::optional<Exclusion> excluded_reason;
    bool date_error = false;  // accepted before submitted
};

// One row per corpus paper, in corpus order.
std::vector<ReceptionRow> compute_reception(const Corpus& corpus, const CitationGraph& graph,
                                            const ReceptionOptions& options = {});

}  // namespace sciline
