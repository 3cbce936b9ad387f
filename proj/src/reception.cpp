#include "sciline/reception.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "sciline/common.hpp"

namespace sciline {

CitationCounts citation_windows(const CitationGraph& graph, std::uint32_t node, bool inclusive) {
    CitationCounts out;
    const int year = graph.year(node);
    const int w5 = inclusive ? 5 : 4;
    const int w10 = inclusive ? 10 : 9;
    for (auto c : graph.citers(node)) {
        const int offset = graph.year(c) - year;
        ++out.total;
        if (offset >= 0 && offset <= w5) {
            ++out.c5;
        }
        if (offset >= 0 && offset <= w10) {
            ++out.c10;
        }
    }
    return out;
}

CitationCounts citation_windows(const CitationGraph& graph, std::string_view paper_id, bool inclusive) {
    return citation_windows(graph, graph.require_node(paper_id), inclusive);
}

std::vector<double> citation_trajectory(const CitationGraph& graph, std::uint32_t node, int last_year) {
    const int year = graph.year(node);
    std::vector<double> out(static_cast<std::size_t>(std::max(0, last_year - year) + 1), 0.0);
    for (auto c : graph.citers(node)) {
        const int offset = graph.year(c) - year;
        if (offset >= 0 && offset < static_cast<int>(out.size())) {
            out[static_cast<std::size_t>(offset)] += 1.0;
        }
    }
    return out;
}

NormalizedCitations normalize_citations(std::span<const CitationItem> items) {
    using Key = std::pair<int, std::string>;
    std::map<Key, std::pair<double, std::size_t>> groups;
    auto fields_of = [](const CitationItem& it) {
        return it.fields.empty() ? std::vector<std::string>{""} : it.fields;
    };
    for (const auto& it : items) {
        for (const auto& f : fields_of(it)) {
            auto& g = groups[{it.year, f}];
            g.first += it.count;
            ++g.second;
        }
    }
    NormalizedCitations out;
    out.values.resize(items.size());
    out.zero_mean.assign(items.size(), false);
    for (const auto& [key, g] : groups) {
        if (g.first == 0.0) {
            ++out.zero_mean_groups;
        }
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto fields = fields_of(items[i]);
        double sum = 0.0;
        for (const auto& f : fields) {
            const auto& g = groups.at({items[i].year, f});
            const double m = g.first / static_cast<double>(g.second);
            if (m == 0.0) {
                out.zero_mean[i] = true;
            } else {
                sum += items[i].count / m;
            }
        }
        out.values[i] = sum / static_cast<double>(fields.size());
    }
    return out;
}

double sleeping_beauty(std::span<const double> c) {
    if (c.empty()) {
        throw Error(ErrorKind::invalid_argument, "empty citation trajectory");
    }
    const auto tm = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    if (tm == 0) {
        return 0.0;
    }
    const double slope = (c[tm] - c[0]) / static_cast<double>(tm);
    double b = 0.0;
    for (std::size_t t = 0; t <= tm; ++t) {
        b += (slope * static_cast<double>(t) + c[0] - c[t]) / std::max(1.0, c[t]);
    }
    return b;
}

std::string_view to_string(Exclusion e) {
    switch (e) {
        case Exclusion::too_short: return "too_short";
        case Exclusion::too_long: return "too_long";
        case Exclusion::missing_dates: return "missing_dates";
    }
    return "";
}

Turnaround turnaround(const SubmissionHistory& history, const TurnaroundFilter& filter) {
    Turnaround out;
    if (!history.submitted || !history.accepted) {
        out.excluded = Exclusion::missing_dates;
        return out;
    }
    const int days = *history.accepted - *history.submitted;
    if (days < 0) {
        throw Error(ErrorKind::data, "accepted " + format_iso_date(*history.accepted) + " precedes submitted " +
                                         format_iso_date(*history.submitted));
    }
    out.days = days;
    if (!filter.include_outliers) {
        if (days < filter.min_days) {
            out.excluded = Exclusion::too_short;
        } else if (days > filter.max_days) {
            out.excluded = Exclusion::too_long;
        }
    }
    return out;
}

namespace {

// Ranks doubled so tied midranks stay integral.
std::vector<long> doubled_midranks(const std::vector<double>& pooled, std::vector<double>& tie_sizes) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<long> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) {
            ++j;
        }
        const long doubled = static_cast<long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = doubled;
        }
        tie_sizes.push_back(static_cast<double>(j - i + 1));
        i = j + 1;
    }
    return ranks;
}

}  // namespace

RankSumResult rank_sum_test(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw Error(ErrorKind::invalid_argument, "rank sum test needs two nonempty samples");
    }
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const std::size_t n = na + nb;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<double> ties;
    const auto ranks = doubled_midranks(pooled, ties);
    long w2 = 0;  // doubled rank sum of a
    for (std::size_t i = 0; i < na; ++i) {
        w2 += ranks[i];
    }
    RankSumResult out;
    out.u = static_cast<double>(w2) / 2.0 - static_cast<double>(na * (na + 1)) / 2.0;
    const long center2 = static_cast<long>(na * (n + 1));  // 2 E[W]
    if (na <= 8 && nb <= 8) {
        out.exact = true;
        const long observed = std::labs(w2 - center2);
        const long max_sum = std::accumulate(ranks.begin(), ranks.end(), 0L);
        // dp[k][s]: subsets of size k with doubled rank sum s
        std::vector<std::vector<double>> dp(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
        dp[0][0] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<std::size_t>(ranks[i]);
            for (std::size_t k = std::min(i + 1, na); k >= 1; --k) {
                for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s) {
                    dp[k][s] += dp[k - 1][s - r];
                }
            }
        }
        double extreme = 0.0;
        double total = 0.0;
        for (std::size_t s = 0; s <= static_cast<std::size_t>(max_sum); ++s) {
            total += dp[na][s];
            if (std::labs(static_cast<long>(s) - center2) >= observed) {
                extreme += dp[na][s];
            }
        }
        out.p_value = std::min(1.0, extreme / total);
        return out;
    }
    const double dna = static_cast<double>(na);
    const double dnb = static_cast<double>(nb);
    const double dn = static_cast<double>(n);
    double tie_term = 0.0;
    for (double t : ties) {
        tie_term += t * t * t - t;
    }
    const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var <= 0.0) {
        out.p_value = 1.0;
        return out;
    }
    const double dev = std::max(0.0, std::abs(out.u - dna * dnb / 2.0) - 0.5);
    const double z = dev / std::sqrt(var);
    out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return out;
}

std::string stars_fig(double p) {
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

RatioSeries ratio_series(std::string metric, std::span<const LabeledValue> values) {
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_year;
    for (const auto& v : values) {
        auto& g = by_year[v.year];
        (v.label == Label::stylized ? g.first : g.second).push_back(v.value);
    }
    RatioSeries out;
    out.metric = std::move(metric);
    for (const auto& [year, g] : by_year) {
        if (g.first.empty() || g.second.empty()) {
            ++out.skipped_years;
            continue;
        }
        RatioPoint pt;
        pt.year = year;
        pt.n_stylized = g.first.size();
        pt.n_popularized = g.second.size();
        pt.stylized_mean = mean(g.first);
        pt.popularized_mean = mean(g.second);
        if (pt.popularized_mean > 0.0) {
            pt.ratio = pt.stylized_mean / pt.popularized_mean;
        }
        const auto test = rank_sum_test(g.first, g.second);
        pt.p_value = test.p_value;
        pt.exact = test.exact;
        pt.stars = stars_fig(test.p_value);
        out.points.push_back(std::move(pt));
    }
    return out;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

double silverman_bandwidth(std::span<const double> x) {
    if (x.size() < 2) {
        throw Error(ErrorKind::invalid_argument, "bandwidth needs at least 2 points");
    }
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double m = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) {
        ss += (v - m) * (v - m);
    }
    const double sd = std::sqrt(ss / static_cast<double>(s.size() - 1));
    const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
    const double factor = std::pow(static_cast<double>(s.size()), -0.2);
    const double spread = std::min(sd, iqr / 1.34);
    if (spread > 0.0) {
        return 0.9 * spread * factor;
    }
    return 1.06 * sd * factor;
}

std::vector<CurvePoint> kernel_smooth(std::span<const CurvePoint> points, std::optional<double> bandwidth,
                                      std::size_t grid_points) {
    if (points.size() < 2) {
        throw Error(ErrorKind::invalid_argument, "kernel smoothing needs at least 2 points");
    }
    if (grid_points < 2) {
        throw Error(ErrorKind::invalid_argument, "grid needs at least 2 points");
    }
    std::vector<double> xs;
    for (const auto& p : points) {
        xs.push_back(p.x);
    }
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) {
        throw Error(ErrorKind::invalid_argument, "degenerate x range");
    }
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(xs);
    if (!(h > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "bandwidth must be positive");
    }
    std::vector<CurvePoint> out(grid_points);
    std::vector<double> expo(points.size());
    for (std::size_t g = 0; g < grid_points; ++g) {
        const double x = g + 1 == grid_points
                             ? hi
                             : lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
        double top = -INFINITY;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double u = (x - points[i].x) / h;
            expo[i] = -0.5 * u * u;
            top = std::max(top, expo[i]);
        }
        // shifting by the largest exponent keeps tiny bandwidths finite
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double w = std::exp(expo[i] - top);
            num += w * points[i].y;
            den += w;
        }
        out[g] = {x, num / den};
    }
    return out;
}

TrendFit trend_fit(std::span<const CurvePoint> points) {
    if (points.size() < 3) {
        throw Error(ErrorKind::invalid_argument, "trend fit needs at least 3 points");
    }
    const double n = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double sst = 0.0;
    for (const auto& p : points) {
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
        sst += (p.y - my) * (p.y - my);
    }
    if (sxx == 0.0) {
        throw Error(ErrorKind::invalid_argument, "trend fit needs distinct x values");
    }
    TrendFit out;
    out.n = points.size();
    out.beta = sxy / sxx;
    out.intercept = my - out.beta * mx;
    double sse = 0.0;
    for (const auto& p : points) {
        const double r = p.y - (out.intercept + out.beta * p.x);
        sse += r * r;
    }
    out.r2 = sst > 0.0 ? std::max(0.0, 1.0 - sse / sst) : 0.0;
    const double df = n - 2.0;
    const double s2 = sse / df;
    out.se_beta = std::sqrt(s2 / sxx);
    const boost::math::students_t dist(df);
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    for (const auto& p : points) {
        const double fit = out.intercept + out.beta * p.x;
        const double half = t * std::sqrt(s2 * (1.0 / n + (p.x - mx) * (p.x - mx) / sxx));
        out.band.push_back({p.x, fit, fit - half, fit + half});
    }
    return out;
}

std::vector<ReceptionRow> compute_reception(const Corpus& corpus, const CitationGraph& graph,
                                            const ReceptionOptions& options) {
    const auto papers = corpus.papers();
    if (graph.size() != papers.size()) {
        throw Error(ErrorKind::invalid_argument, "graph and corpus differ in size");
    }
    int last_year = corpus.max_year();
    std::vector<ReceptionRow> rows(papers.size());
    parallel_for(papers.size(), [&](std::size_t i) {
        const auto& p = papers[i];
        auto& r = rows[i];
        const auto node = static_cast<std::uint32_t>(i);
        r.paper_id = p.paper_id;
        r.year = p.year;
        const auto counts = citation_windows(graph, node, options.inclusive_windows);
        r.c5 = counts.c5;
        r.c10 = counts.c10;
        r.citation_count = counts.total;
        const auto traj = citation_trajectory(graph, node, last_year);
        r.sb_strength = sleeping_beauty(traj);
        try {
            const auto t = turnaround(p.history, options.turnaround);
            r.turnaround_days = t.days;
            r.excluded_reason = t.excluded;
        } catch (const Error&) {
            r.date_error = true;
        }
    });
    std::vector<CitationItem> items(papers.size());
    for (std::size_t i = 0; i < papers.size(); ++i) {
        items[i] = {static_cast<double>(rows[i].citation_count), papers[i].year, papers[i].fields_l1};
    }
    const auto norm = normalize_citations(items);
    for (std::size_t i = 0; i < papers.size(); ++i) {
        rows[i].citation_normalized = norm.values[i];
        rows[i].normalization_flag = norm.zero_mean[i];
    }
    return rows;
}

}  // namespace sciline
