#include <doctest.h>

#include <cmath>
#include <map>

#include "../oracles.hpp"
#include "helpers.hpp"
#include "sciline/reception.hpp"

using namespace sciline;
using testing::paper;

namespace {

SubmissionHistory history(const char* submitted, const char* accepted) {
    SubmissionHistory h;
    if (submitted) h.submitted = parse_iso_date(submitted);
    if (accepted) h.accepted = parse_iso_date(accepted);
    return h;
}

std::vector<LabeledValue> labeled(int year, const std::vector<double>& s, const std::vector<double>& p) {
    std::vector<LabeledValue> out;
    for (double v : s) out.push_back({year, Label::stylized, v});
    for (double v : p) out.push_back({year, Label::popularized, v});
    return out;
}

}  // namespace

TEST_SUITE("reception") {
    TEST_CASE("citation windows") {
        const auto c = Corpus::from_records({paper("f", 2000), paper("a", 2001, {"f"}), paper("b", 2004, {"f"}),
                                             paper("c", 2007, {"f"}), paper("d", 2012, {"f"}),
                                             paper("same", 2000, {"f"}), paper("lone", 2000)});
        const auto g = CitationGraph::from_corpus(c);
        const auto f = citation_windows(g, "f");
        CHECK(f.c5 == 3);  // same-year, +1, +4
        CHECK(f.c10 == 4);
        CHECK(f.total == 5);
        const auto lone = citation_windows(g, "lone");
        CHECK(lone.total == 0);
        CHECK(lone.c5 == 0);
        CHECK_THROWS_AS(citation_windows(g, "nobody"), Error);

        const auto c2 = Corpus::from_records({paper("f", 2000), paper("a", 2001, {"f"}), paper("b", 2004, {"f"}),
                                              paper("c", 2007, {"f"}), paper("d", 2012, {"f"})});
        const auto g2 = CitationGraph::from_corpus(c2);
        const auto hand = citation_windows(g2, "f");
        CHECK(hand.c5 == 2);
        CHECK(hand.c10 == 3);
        CHECK(hand.total == 4);
        const auto incl = citation_windows(CitationGraph::from_corpus(Corpus::from_records(
                                               {paper("f", 2000), paper("a", 2005, {"f"}), paper("b", 2010, {"f"})})),
                                           "f", true);
        CHECK(incl.c5 == 1);
        CHECK(incl.c10 == 2);
        CHECK(citation_trajectory(g2, g2.require_node("f"), 2004) == std::vector<double>{0, 1, 0, 0, 1});
    }

    TEST_CASE("field-year normalization") {
        std::vector<CitationItem> items{{0, 2000, {"x"}}, {2, 2000, {"x"}}, {4, 2000, {"x"}}, {0, 2000, {"z"}},
                                        {0, 2000, {"z"}}, {3, 2001, {"x", "y"}}, {1, 2001, {"x"}}, {5, 2001, {"y"}}};
        const auto n = normalize_citations(items);
        CHECK(n.values[0] == 0.0);
        CHECK(n.values[1] == 1.0);
        CHECK(n.values[2] == 2.0);
        CHECK(n.values[3] == 0.0);
        CHECK(n.zero_mean[3]);
        CHECK_FALSE(n.zero_mean[0]);
        CHECK(n.zero_mean_groups == 1);
        // x/2001 mean 2: 3 -> 1.5; y/2001 mean 4: 3 -> 0.75
        CHECK(n.values[5] == doctest::Approx((1.5 + 0.75) / 2));

        Rng rng(6);
        std::vector<CitationItem> many;
        for (int i = 0; i < 2000; ++i)
            many.push_back({static_cast<double>(poisson_draw(rng, 4.0)), 2000 + static_cast<int>(uniform_index(rng, 5)),
                            {"f" + std::to_string(uniform_index(rng, 7))}});
        const auto m = normalize_citations(many);
        std::map<std::pair<int, std::string>, std::pair<double, int>> groups;
        for (std::size_t i = 0; i < many.size(); ++i) {
            auto& acc = groups[{many[i].year, many[i].fields[0]}];
            acc.first += m.values[i];
            acc.second += 1;
        }
        for (const auto& [k, acc] : groups) CHECK(std::abs(acc.first / acc.second - 1.0) < 1e-9);
    }

    TEST_CASE("sleeping beauty coefficient") {
        const std::vector<double> hand{0, 0, 0, 4};
        CHECK(sleeping_beauty(hand) == 4.0);
        CHECK(sleeping_beauty(std::vector<double>{0, 1, 2, 3}) == 0.0);
        CHECK(sleeping_beauty(std::vector<double>{9, 1, 2}) == 0.0);
        CHECK(sleeping_beauty(std::vector<double>{5}) == 0.0);
        CHECK(sleeping_beauty(std::vector<double>{2, 5, 5}) == 0.0);  // earliest maximum
        CHECK_THROWS_AS(sleeping_beauty(std::vector<double>{}), Error);
        // concave trajectories sit above the line
        CHECK(sleeping_beauty(std::vector<double>{0, 4, 4, 5}) < 0.0);

        Rng rng(8);
        for (int trial = 0; trial < 1000; ++trial) {
            std::vector<int> counts(1 + uniform_index(rng, 15));
            for (auto& v : counts) v = poisson_draw(rng, 3.0);
            const std::vector<double> asd(counts.begin(), counts.end());
            const double got = sleeping_beauty(asd);
            const double want = oracle::sleeping_beauty(counts);
            CHECK(std::abs(got - want) < 1e-9);
            if (std::abs(want) > 1e-9) CHECK((got > 0) == (want > 0));
        }
    }

    TEST_CASE("turnaround filters") {
        const auto kept = turnaround(history("2020-01-01", "2020-03-01"));
        CHECK(*kept.days == 60);
        CHECK_FALSE(kept.excluded.has_value());
        CHECK(*turnaround(history("2020-01-01", "2020-01-16")).excluded == Exclusion::too_short);
        CHECK(*turnaround(history("2020-01-01", "2023-04-15")).excluded == Exclusion::too_long);
        CHECK(*turnaround(history(nullptr, "2020-01-16")).excluded == Exclusion::missing_dates);
        CHECK(turnaround(history("2020-01-01", "2020-01-31")).excluded == std::nullopt);  // 30 days kept
        CHECK(turnaround(history("2020-01-01", "2022-09-27")).excluded == std::nullopt);  // 1000 days kept
        TurnaroundFilter all;
        all.include_outliers = true;
        CHECK_FALSE(turnaround(history("2020-01-01", "2020-01-16"), all).excluded.has_value());
        try {
            turnaround(history("2020-03-01", "2020-01-01"));
            FAIL("expected a data error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::data);
        }

        Rng rng(1);
        std::size_t kept_n = 0, excluded_n = 0;
        for (int i = 0; i < 500; ++i) {
            SubmissionHistory h;
            if (uniform01(rng) > 0.1) h.submitted = 18000;
            h.accepted = 18000 + static_cast<int>(uniform_index(rng, 1500));
            const auto t = turnaround(h);
            (t.excluded ? excluded_n : kept_n) += 1;
            if (!t.excluded) CHECK((*t.days >= 30 && *t.days <= 1000));
        }
        CHECK(kept_n + excluded_n == 500);
    }

    TEST_CASE("rank sum test") {
        const std::vector<double> a{1, 2, 3}, b{101, 102, 103};
        const auto r = rank_sum_test(a, b);
        CHECK(r.exact);
        CHECK(r.p_value == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(r.u == 0.0);
        CHECK(rank_sum_test(a, a).p_value > 0.9);
        CHECK_THROWS_AS(rank_sum_test(a, std::vector<double>{}), Error);

        Rng rng(12);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(1 + uniform_index(rng, 8)), y(1 + uniform_index(rng, 8));
            for (auto& v : x) v = static_cast<double>(uniform_index(rng, 6));  // plenty of ties
            for (auto& v : y) v = static_cast<double>(uniform_index(rng, 6));
            const double want = oracle::rank_sum_enumerated(x, y);
            CHECK(rank_sum_test(x, y).p_value == doctest::Approx(want).epsilon(1e-12));
            CHECK(rank_sum_test(x, y).p_value == rank_sum_test(y, x).p_value);
        }

        std::vector<double> big_a, big_b;
        for (int i = 0; i < 400; ++i) {
            big_a.push_back(standard_normal(rng));
            big_b.push_back(standard_normal(rng) + 1.0);
        }
        const auto shifted = rank_sum_test(big_a, big_b);
        CHECK_FALSE(shifted.exact);
        CHECK(shifted.p_value < 1e-6);
        CHECK(rank_sum_test(big_a, big_a).p_value > 0.9);
        CHECK(rank_sum_test(big_a, big_b).p_value == rank_sum_test(big_b, big_a).p_value);
    }

    TEST_CASE("star thresholds") {
        CHECK(stars_fig(0.2) == "");
        CHECK(stars_fig(0.1) == "");
        CHECK(stars_fig(0.09) == "*");
        CHECK(stars_fig(0.04) == "**");
        CHECK(stars_fig(0.009) == "***");
    }

    TEST_CASE("ratio series") {
        auto eq = labeled(2000, {1, 2, 3}, {1, 2, 3});
        auto s = ratio_series("c5", eq);
        REQUIRE(s.points.size() == 1);
        CHECK(*s.points[0].ratio == 1.0);
        CHECK(s.points[0].stars == "");

        auto one = labeled(2001, {4}, {2});
        auto only_s = labeled(2002, {4}, {});
        one.insert(one.end(), only_s.begin(), only_s.end());
        s = ratio_series("c5", one);
        REQUIRE(s.points.size() == 1);
        CHECK(s.points[0].exact);
        CHECK(*s.points[0].ratio == 2.0);
        CHECK(s.skipped_years == 1);

        s = ratio_series("c5", labeled(2003, {1}, {0, 0}));
        CHECK_FALSE(s.points[0].ratio.has_value());

        // planted 0.60 citation ratio
        Rng rng(15);
        std::vector<LabeledValue> v;
        for (int i = 0; i < 4000; ++i) {
            v.push_back({2005, Label::stylized, static_cast<double>(poisson_draw(rng, 6.0))});
            v.push_back({2005, Label::popularized, static_cast<double>(poisson_draw(rng, 10.0))});
        }
        s = ratio_series("c5", v);
        CHECK(std::abs(*s.points[0].ratio - 0.6) < 0.05);
        CHECK(s.points[0].stars == "***");
    }

    TEST_CASE("kernel smoothing") {
        std::vector<CurvePoint> flat{{0, 2.5}, {1, 2.5}, {3, 2.5}, {7, 2.5}};
        for (const auto& p : kernel_smooth(flat)) CHECK(p.y == doctest::Approx(2.5));
        CHECK(kernel_smooth(flat).size() == 200);

        std::vector<CurvePoint> sym{{-2, 1}, {-1, 3}, {0, 0}, {1, 3}, {2, 1}};
        const auto c = kernel_smooth(sym, 0.7, 201);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c[i].y - c[c.size() - 1 - i].y) < 1e-12);

        std::vector<CurvePoint> line;
        for (int i = 0; i <= 1000; ++i) line.push_back({i / 1000.0, 0.5 + 2.0 * i / 1000.0});
        double worst = 0.0;
        for (const auto& p : kernel_smooth(line, 5e-4)) worst = std::max(worst, std::abs(p.y - (0.5 + 2.0 * p.x)));
        CHECK(worst < 1e-3);

        CHECK_THROWS_AS(kernel_smooth(std::vector<CurvePoint>{{1, 1}, {1, 2}}), Error);
        CHECK_THROWS_AS(kernel_smooth(std::vector<CurvePoint>{{1, 1}}), Error);
        CHECK(silverman_bandwidth(std::vector<double>{1, 2, 3, 4, 5}) > 0.0);
    }

    TEST_CASE("trend fit") {
        std::vector<CurvePoint> exact{{1, 2}, {2, 4}, {3, 6}, {4, 8}};
        auto t = trend_fit(exact);
        CHECK(t.beta == doctest::Approx(2.0));
        CHECK(t.r2 == doctest::Approx(1.0));
        CHECK(t.se_beta == doctest::Approx(0.0));

        std::vector<CurvePoint> flat{{1, 5}, {2, 5}, {3, 5}};
        t = trend_fit(flat);
        CHECK(t.beta == 0.0);
        CHECK(t.r2 == 0.0);
        CHECK_THROWS_AS(trend_fit(std::vector<CurvePoint>{{1, 1}, {2, 2}}), Error);

        Rng rng(101);
        std::vector<CurvePoint> noisy;
        for (int y = 1960; y < 2020; ++y) noisy.push_back({double(y), 0.6 - 0.003 * (y - 1960) + 0.01 * standard_normal(rng)});
        t = trend_fit(noisy);
        double mx = 0, my = 0;
        for (const auto& p : noisy) mx += p.x / noisy.size(), my += p.y / noisy.size();
        double sxy = 0, sxx = 0, sse = 0;
        for (const auto& p : noisy) sxy += (p.x - mx) * (p.y - my), sxx += (p.x - mx) * (p.x - mx);
        const double slope = sxy / sxx;
        for (const auto& p : noisy) sse += std::pow(p.y - my - slope * (p.x - mx), 2);
        CHECK(t.beta == doctest::Approx(slope).epsilon(1e-10));
        CHECK(t.se_beta == doctest::Approx(std::sqrt(sse / (noisy.size() - 2) / sxx)).epsilon(1e-10));
        // one draw: about 2.1 standard errors off here, so 2 would be a coin toss over seeds
        CHECK(std::abs(t.beta + 0.003) < 3 * t.se_beta);
        REQUIRE(t.band.size() == noisy.size());
        for (const auto& b : t.band) {
            CHECK(b.lo < b.fit);
            CHECK(b.fit < b.hi);
        }
        // the band is narrowest near the mean of x
        CHECK(t.band[30].hi - t.band[30].lo < t.band[0].hi - t.band[0].lo);
    }

    TEST_CASE("per-paper reception rows") {
        auto f = paper("f", 2000, {}, {"x"});
        f.history = history("2000-01-01", "2000-02-15");
        auto late = paper("late", 2003, {"f"}, {"x"});
        late.history = history("2002-05-01", "2002-05-10");
        auto bad = paper("bad", 2001, {"f"}, {"x"});
        bad.history = history("2001-05-01", "2001-01-10");
        const auto c = Corpus::from_records({f, late, bad});
        const auto rows = compute_reception(c, CitationGraph::from_corpus(c));
        REQUIRE(rows.size() == 3);
        const auto& rf = rows[1];
        CHECK(rf.paper_id == "f");
        CHECK(rf.c5 == 2);
        CHECK(rf.citation_count == 2);
        CHECK(*rf.turnaround_days == 45);
        CHECK(rows[2].excluded_reason == Exclusion::too_short);
        CHECK(rows[0].date_error);
        for (const auto& r : rows) {
            CHECK(r.c5 <= r.c10);
            CHECK(r.c10 <= r.citation_count);
        }
    }
}
