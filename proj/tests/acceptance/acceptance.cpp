// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "sciline/disruption.hpp"
#include "sciline/embed_space.hpp"
#include "sciline/pipeline.hpp"
#include "sciline/reception.hpp"
#include "sciline/recombination.hpp"
#include "sciline/regress.hpp"
#include "sciline/synth.hpp"
#include "sciline/twins.hpp"
#include "unit/helpers.hpp"

using namespace sciline;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    std::vector<std::string> failures;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double x, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

Eigen::MatrixXd as_stored(const Eigen::MatrixXd& x) { return x.cast<float>().cast<double>(); }

std::string pid(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, i);
    return buf;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("no column " + name);
    }
};

Table read_csv(const fs::path& path) {
    std::istringstream in(testing::read_text(path));
    Table t;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) t.header = csv_split(line);
        else t.rows.push_back(csv_split(line));
    }
    return t;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = testing::read_text(e.path());
    return out;
}

// ---------------------------------------------------------------------------

void stylization_oracle(Outcome& k) {
    Rng rng(1001);
    double worst = 0.0;
    std::size_t compared = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 10 + static_cast<int>(uniform_index(rng, 291));
        const int d = 4 + static_cast<int>(uniform_index(rng, 61));
        const int centers = 1 + static_cast<int>(uniform_index(rng, 5));
        Eigen::MatrixXd c(centers, d), x(n, d);
        for (int i = 0; i < centers; ++i)
            for (int j = 0; j < d; ++j) c(i, j) = 2.0 * standard_normal(rng);
        for (int i = 0; i < n; ++i) {
            const auto g = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(centers)));
            for (int j = 0; j < d; ++j) x(i, j) = c(g, j) + standard_normal(rng);
        }
        Cohort cohort{2000, "F", {}};
        EmbeddingStore store(static_cast<std::uint32_t>(d));
        std::map<std::string, std::size_t> row;
        for (int i = 0; i < n; ++i) {
            cohort.members.push_back(pid("c", static_cast<std::size_t>(i)));
            row[cohort.members.back()] = static_cast<std::size_t>(i);
            std::vector<float> v(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j) v[static_cast<std::size_t>(j)] = static_cast<float>(x(i, j));
            store.add(cohort.members.back(), v);
        }
        const auto unit = oracle::rotate(as_stored(x), 1);
        for (const auto v : {Variant::knn5, Variant::knn10, Variant::pct5}) {
            const auto want = oracle::knn_scores(unit, v == Variant::knn5 ? 5 : 10, v == Variant::pct5);
            const auto got = stylization_scores(cohort, store, v);
            k.expect(got.size() == static_cast<std::size_t>(n), "cohort " + std::to_string(trial) + ": row count");
            for (const auto& e : got) {
                const double diff = std::abs(e.score - want[row.at(e.paper_id)].score);
                worst = std::max(worst, diff);
                ++compared;
            }
        }
    }
    k.expect(worst <= 1e-9, "max deviation " + num(worst) + " exceeds 1e-9");
    k.note(std::to_string(compared) + " scores, max |diff| " + num(worst, 3));

    // 100k papers: 20 years x 5 fields x 1000, 64 dimensions
    Rng big(1002);
    const int dim = 64;
    std::vector<Eigen::VectorXd> topics;
    for (int t = 0; t < 40; ++t) {
        Eigen::VectorXd v(dim);
        for (int j = 0; j < dim; ++j) v(j) = standard_normal(big);
        topics.push_back(v / v.norm());
    }
    std::vector<PaperRecord> papers;
    auto store = std::make_shared<EmbeddingStore>(dim);
    std::vector<float> v(dim);
    for (int y = 0; y < 20; ++y)
        for (int f = 0; f < 5; ++f)
            for (int i = 0; i < 1000; ++i) {
                PaperRecord p;
                p.paper_id = pid("P", papers.size());
                p.year = 2000 + y;
                p.fields_l1 = {"F" + std::to_string(f)};
                const auto& t = topics[static_cast<std::size_t>(f * 8) + uniform_index(big, 8)];
                for (int j = 0; j < dim; ++j) v[static_cast<std::size_t>(j)] = static_cast<float>(t(j) + 0.3 * standard_normal(big));
                store->add(p.paper_id, v);
                papers.push_back(std::move(p));
            }
    const auto start = std::chrono::steady_clock::now();
    const auto corpus = Corpus::from_records(std::move(papers), store);
    const auto st = stylize_corpus(corpus, {});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    k.expect(st.entries.size() == 100000, "100k corpus scored " + std::to_string(st.entries.size()) + " papers");
    k.expect(secs < 60.0, "100k stylization took " + num(secs, 3) + " s");
    k.note("100k papers in " + num(secs, 3) + " s on " + std::to_string(thread_count()) + " thread(s)");
}

void planted_decline(Outcome& k) {
    SynthConfig c;
    c.start_year = 2000;
    c.n_years = 10;
    c.n_fields = 4;
    c.papers_per_year = 200;
    c.dim = 32;
    c.target_start = 0.45;
    c.target_slope = -0.01;
    c.seed = 2024;
    const auto out = generate(c);
    auto store = std::make_shared<EmbeddingStore>(out.embeddings);
    const auto corpus = Corpus::from_records(out.papers, store);
    const auto st = stylize_corpus(corpus, {});
    std::map<int, std::vector<double>> by_year;
    for (const auto& p : paper_scores(st.entries)) by_year[p.year].push_back(p.score);
    std::vector<CurvePoint> pts;
    for (const auto& [y, s] : by_year) pts.push_back({static_cast<double>(y), mean(s)});
    k.expect(pts.size() == 10, "expected 10 yearly means");
    for (std::size_t i = 1; i < pts.size(); ++i)
        k.expect(pts[i].y < pts[i - 1].y, "mean rises from " + num(pts[i - 1].x) + " to " + num(pts[i].x));
    const auto fit = trend_fit(pts);
    const double z = std::abs(fit.beta - c.target_slope) / fit.se_beta;
    k.expect(z <= 2.0, "beta " + num(fit.beta) + " is " + num(z, 3) + " SE from the planted slope");
    k.note("beta " + num(fit.beta) + " se " + num(fit.se_beta, 3) + " planted " + num(c.target_slope) + ", means " +
           num(pts.front().y, 4) + " -> " + num(pts.back().y, 4));
}

void cd_suite(Outcome& k) {
    using Edge = std::pair<std::uint32_t, std::uint32_t>;
    Rng rng(303);
    std::size_t defined = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 10 + static_cast<int>(uniform_index(rng, 91));
        const double p = 0.02 + 0.13 * uniform01(rng);
        std::vector<std::string> ids;
        std::vector<int> years;
        std::vector<std::set<int>> refs(static_cast<std::size_t>(n));
        std::vector<Edge> edges;
        for (int i = 0; i < n; ++i) {
            ids.push_back("n" + std::to_string(i));
            years.push_back(1980 + i / 4);
            for (int j = 0; j < i; ++j)
                if (uniform01(rng) < p) {
                    edges.emplace_back(i, j);
                    refs[static_cast<std::size_t>(i)].insert(j);
                }
        }
        const auto g = CitationGraph::from_edges(ids, years, edges);
        for (int i = 0; i < n; ++i) {
            const double want = oracle::cd_index(years, refs, i);
            const auto got = cd_index(g, static_cast<std::uint32_t>(i));
            if (std::isnan(want)) {
                k.expect(!got.has_value(), "dag " + std::to_string(trial) + " node " + std::to_string(i) + ": defined");
            } else {
                ++defined;
                k.expect(got.has_value() && *got == want,
                         "dag " + std::to_string(trial) + " node " + std::to_string(i) + ": " + num(got.value_or(NAN)) +
                             " vs " + num(want));
            }
        }
    }
    auto small = [](std::vector<std::string> ids, std::vector<int> years, std::vector<Edge> e) {
        return CitationGraph::from_edges(std::move(ids), std::move(years), e);
    };
    const auto pure = small({"p", "r", "a", "b"}, {2000, 1990, 2001, 2002}, {{0, 1}, {2, 0}, {3, 0}});
    const auto cons = small({"p", "r", "a", "b"}, {2000, 1990, 2001, 2002}, {{0, 1}, {2, 0}, {2, 1}, {3, 0}, {3, 1}});
    const auto mixed = small({"p", "r", "a", "b", "c"}, {2000, 1990, 2001, 2001, 2001},
                             {{0, 1}, {2, 0}, {3, 0}, {3, 1}, {4, 1}});
    k.expect(cd_index(pure, "p") == 1.0, "pure disruption is not +1");
    k.expect(cd_index(cons, "p") == -1.0, "pure consolidation is not -1");
    k.expect(cd_index(mixed, "p") == 0.0, "mixed example is not 0");

    const auto fx = small({"p", "r1", "r2", "A", "B"}, {2000, 1990, 1991, 2001, 2002},
                          {{0, 1}, {0, 2}, {3, 0}, {3, 1}, {4, 0}});
    const auto prof = decompose_cd(fx, "p");
    k.expect(prof.c_prime && std::abs(*prof.c_prime - 0.25) < 1e-12, "fixture C' is not 0.25");
    k.expect(prof.d_prime && std::abs(*prof.d_prime - 0.25) < 1e-12, "fixture D' is not 0.25");

    const auto one = small({"p", "r", "a", "b"}, {2000, 1990, 2001, 2001}, {{0, 1}, {2, 0}, {3, 1}});
    const auto single = decompose_cd(one, "p");
    k.expect(single.c_prime == 0.0 && single.d_prime == 0.0 && single.cd_prime == 0.0,
             "single-reference dispersion is not exactly 0");
    k.note("200 DAGs, " + std::to_string(defined) + " defined CD values equal to enumeration");
}

void recombination_suite(Outcome& k) {
    Rng rng(404);
    std::vector<PaperRecord> ps;
    for (int i = 0; i < 600; ++i) {
        auto p = testing::paper(pid("p", static_cast<std::size_t>(i)), 1990 + static_cast<int>(uniform_index(rng, 20)));
        const auto m = 1 + uniform_index(rng, 6);
        for (std::size_t t = 0; t < m; ++t) p.concept_ids.push_back("c" + std::to_string(uniform_index(rng, 30)));
        ps.push_back(std::move(p));
    }
    const auto corpus = Corpus::from_records(ps);
    const int cutoff = default_cutoff_year(corpus);
    const auto base = baseline_pairs(corpus, cutoff);
    const auto events = detect_new_combos(corpus, base);
    std::set<ConceptPair> seen;
    std::size_t credited = 0, occurrences = 0;
    for (const auto& e : events) {
        k.expect(seen.insert({e.concept_a, e.concept_b}).second, "duplicate event " + e.concept_a + "|" + e.concept_b);
        k.expect(base.count({e.concept_a, e.concept_b}) == 0, "event in the baseline");
        credited += e.originator_ids.size() + e.reuse_count;
    }
    for (const auto& p : corpus.papers()) {
        if (p.year < cutoff) continue;
        for (const auto& pr : extract_pairs(p)) occurrences += base.count(pr) ? 0 : 1;
    }
    k.expect(credited == occurrences,
             "originators + reuse " + std::to_string(credited) + " != occurrences " + std::to_string(occurrences));

    Eigen::VectorXd x(3), y(3), z(3);
    x << 1, 0, 0;
    y << 0, 2, 0;
    z << -3, 0, 0;
    k.expect(half_cosine_distance(x, x) == 0.0, "identical vectors are not at 0");
    k.expect(half_cosine_distance(x, y) == 0.5, "orthogonal vectors are not at 0.5");
    k.expect(half_cosine_distance(x, z) == 1.0, "opposite vectors are not at 1");
    auto joined = testing::paper("q", 2000);
    joined.concept_ids = {"A", "B"};
    auto apart = testing::paper("r", 1999);
    apart.concept_ids = {"C", "D"};
    WalkParams w;
    w.dim = 8;
    const auto emb = concept_window_embedding(Corpus::from_records({joined, apart}), 2000, w);
    k.expect(combo_distance("A", "A", emb).distance == 0.0, "a concept is not at 0 from itself");
    k.expect(combo_distance("A", "C", emb).distance == 1.0, "disconnected concepts are not at 1");

    for (const double t : {0.4, 0.5, 0.6}) {
        k.expect(!classify_remote(t, t), "distance equal to threshold " + num(t) + " counted as remote");
        k.expect(classify_remote(std::nextafter(t, 2.0), t), "distance just above " + num(t) + " not remote");
        k.expect(!classify_remote(std::nextafter(t, 0.0), t), "distance just below " + num(t) + " remote");
    }
    k.note(std::to_string(events.size()) + " events, " + std::to_string(occurrences) + " occurrences conserved");
}

void reception_suite(Outcome& k) {
    Rng rng(505);
    std::vector<CitationItem> items;
    for (int i = 0; i < 5000; ++i)
        items.push_back({static_cast<double>(poisson_draw(rng, 3.0)), 2000 + static_cast<int>(uniform_index(rng, 8)),
                         {"f" + std::to_string(uniform_index(rng, 6))}});
    const auto norm = normalize_citations(items);
    std::map<std::pair<int, std::string>, std::pair<double, int>> groups;
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& g = groups[{items[i].year, items[i].fields[0]}];
        g.first += norm.values[i];
        g.second += 1;
    }
    double worst = 0.0;
    for (const auto& [key, g] : groups) worst = std::max(worst, std::abs(g.first / g.second - 1.0));
    k.expect(worst <= 1e-9, "group mean off by " + num(worst));

    const std::vector<double> hand{0, 0, 0, 4};
    k.expect(sleeping_beauty(hand) == 4.0, "sleeping beauty of [0,0,0,4] is " + num(sleeping_beauty(hand)));
    double sb_worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<int> c(1 + uniform_index(rng, 20));
        for (auto& v : c) v = poisson_draw(rng, 1.0 + 4.0 * uniform01(rng));
        const std::vector<double> cd(c.begin(), c.end());
        sb_worst = std::max(sb_worst, std::abs(sleeping_beauty(cd) - oracle::sleeping_beauty(c)));
    }
    k.expect(sb_worst <= 1e-9, "sleeping beauty off by " + num(sb_worst));

    // lags in days from a fixed submission date; 15 and 1200 are the outliers
    const int day0 = *parse_iso_date("2015-06-01");
    const std::vector<std::optional<int>> lags{15, 29, 30, 31, 150, 999, 1000, 1001, 1200, std::nullopt};
    std::size_t kept = 0, short_n = 0, long_n = 0, missing = 0;
    for (const auto& lag : lags) {
        SubmissionHistory h;
        h.accepted = day0 + lag.value_or(0);
        if (lag) h.submitted = day0;
        const auto t = turnaround(h);
        if (!t.excluded) ++kept;
        else if (*t.excluded == Exclusion::too_short) ++short_n;
        else if (*t.excluded == Exclusion::too_long) ++long_n;
        else ++missing;
    }
    k.expect(kept == 5 && short_n == 2 && long_n == 2 && missing == 1,
             "kept/short/long/missing " + std::to_string(kept) + "/" + std::to_string(short_n) + "/" +
                 std::to_string(long_n) + "/" + std::to_string(missing) + ", want 5/2/2/1");
    TurnaroundFilter all;
    all.include_outliers = true;
    SubmissionHistory h15;
    h15.submitted = day0;
    h15.accepted = day0 + 15;
    k.expect(turnaround(h15, all).days == 15 && !turnaround(h15, all).excluded, "outliers not kept on request");
    k.note(std::to_string(groups.size()) + " field-year groups, max |mean-1| " + num(worst, 3) +
           "; 1000 trajectories, max |diff| " + num(sb_worst, 3));
}

void rank_sum_exact(Outcome& k) {
    Rng rng(606);
    std::size_t cases = 0;
    for (std::size_t na = 1; na <= 8; ++na)
        for (std::size_t nb = 1; nb <= 8; ++nb)
            for (int rep = 0; rep < 3; ++rep) {
                std::vector<double> a(na), b(nb);
                // small integer range forces ties
                for (auto& v : a) v = static_cast<double>(uniform_index(rng, rep == 0 ? 4 : 50));
                for (auto& v : b) v = static_cast<double>(uniform_index(rng, rep == 0 ? 4 : 50)) + (rep == 2 ? 10 : 0);
                const auto got = rank_sum_test(a, b);
                const double want = oracle::rank_sum_enumerated(a, b);
                ++cases;
                k.expect(got.exact, "sizes " + std::to_string(na) + "," + std::to_string(nb) + " not exact");
                k.expect(got.p_value == want, "sizes " + std::to_string(na) + "," + std::to_string(nb) + ": " +
                                                   num(got.p_value, 17) + " vs " + num(want, 17));
            }
    const std::vector<double> lo{1, 2, 3}, hi{101, 102, 103};
    const double p = rank_sum_test(lo, hi).p_value;
    k.expect(p == 0.1, "[1,2,3] vs [101,102,103] gives " + num(p, 17));
    k.note(std::to_string(cases) + " sample pairs equal to enumeration, separated triple p = " + num(p));
}

void twin_validation(Outcome& k) {
    SynthConfig c;
    c.n_years = 10;
    c.n_fields = 4;
    c.papers_per_year = 500;
    c.twin_count = 200;
    c.seed = 707;
    const auto out = generate(c);
    auto store = std::make_shared<EmbeddingStore>(out.embeddings);
    const auto corpus = Corpus::from_records(out.papers, store);
    const auto knn5 = stylize_corpus(corpus, {}).entries;
    std::unordered_map<std::string, double> score;
    for (const auto& p : paper_scores(knn5)) score[p.paper_id] = p.score;

    auto twins = detect_twins(cocitation_pairs(out.contexts), corpus);
    std::set<std::pair<std::string, std::string>> injected;
    for (auto [a, b] : out.twins) injected.insert(a < b ? std::pair{a, b} : std::pair{b, a});
    std::size_t found = 0;
    for (const auto& t : twins) found += injected.count({t.paper_a, t.paper_b});

    const PaperFilter eligible = [&](const PaperRecord& p) { return score.count(p.paper_id) > 0; };
    std::vector<TwinPair> scored;
    for (auto& t : twins) {
        if (!score.count(t.paper_a) || !score.count(t.paper_b)) continue;
        t.score_a = score[t.paper_a];
        t.score_b = score[t.paper_b];
        t.score_diff = std::abs(*t.score_a - *t.score_b);
        t.control_id = sample_controls(t, corpus, 707, eligible);
        t.control_diff = std::abs(*t.score_a - score.at(*t.control_id));
        scored.push_back(t);
    }
    // mutual 5-NN over the injected pairs themselves
    std::unordered_map<std::string, const StylizationEntry*> entry;
    for (const auto& e : knn5) entry[e.paper_id] = &e;
    std::size_t mutual = 0;
    for (const auto& [a, b] : injected) {
        const auto& na = entry.at(a)->neighbor_ids;
        const auto& nb = entry.at(b)->neighbor_ids;
        mutual += std::find(na.begin(), na.end(), b) != na.end() && std::find(nb.begin(), nb.end(), a) != nb.end();
    }
    const double mutual_share = static_cast<double>(mutual) / static_cast<double>(injected.size());

    k.expect(out.papers.size() == 20000, "corpus has " + std::to_string(out.papers.size()) + " papers");
    k.expect(injected.size() == 200, "synth injected " + std::to_string(injected.size()) + " pairs");
    k.expect(!scored.empty(), "no twin pair detected");
    if (scored.empty()) return;
    const auto rep = validate_scores(scored, knn5);
    k.expect(rep.twin_within > rep.control_within,
             "twin share " + num(rep.twin_within) + " <= control share " + num(rep.control_within));
    k.expect(rep.rank_sum_p && *rep.rank_sum_p < 0.01, "rank-sum p " + num(rep.rank_sum_p.value_or(1.0)));
    k.expect(mutual_share >= 0.9, "mutual 5-NN share " + num(mutual_share));
    k.note(std::to_string(twins.size()) + " detected (" + std::to_string(found) + " injected), within 0.05: twins " +
           num(rep.twin_within, 3) + " vs controls " + num(rep.control_within, 3) + ", p " +
           num(*rep.rank_sum_p, 3) + ", mutual 5-NN " + num(mutual_share, 3) + " (detected pairs " +
           num(rep.mutual_knn_fraction, 3) + ")");
}

Design design_of(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::vector<int>>& groups) {
    Design d;
    d.response = "y";
    for (Eigen::Index j = 0; j < x.cols(); ++j) d.names.push_back("x" + std::to_string(j));
    d.x = x;
    d.y = y;
    const char* dims[] = {"year", "field"};
    for (std::size_t g = 0; g < groups.size(); ++g) {
        d.fe_names.push_back(dims[g]);
        std::vector<std::string> lv;
        for (int v : groups[g]) lv.push_back(pid("", static_cast<std::size_t>(v)));
        d.fe_levels.push_back(lv);
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) d.row_ids.push_back("r" + std::to_string(i));
    return d;
}

void regression_recovery(Outcome& k) {
    Rng rng(808);
    const int n = 50000;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    std::vector<int> year(n), field(n);
    for (int i = 0; i < n; ++i) {
        year[i] = static_cast<int>(uniform_index(rng, 10));
        field[i] = static_cast<int>(uniform_index(rng, 6));
        x(i, 0) = standard_normal(rng);
        x(i, 1) = uniform01(rng) + 0.05 * year[i];
        y(i) = poisson_draw(rng, std::exp(0.5 + 0.3 * x(i, 0) - 0.4 * x(i, 1) + 0.05 * year[i] - 0.1 * field[i]));
    }
    const auto pr = poisson_pml(design_of(x, y, {year, field}));
    k.expect(std::abs(pr.beta(0) - 0.3) <= 0.02, "poisson beta 0 = " + num(pr.beta(0)));
    k.expect(std::abs(pr.beta(1) + 0.4) <= 0.02, "poisson beta 1 = " + num(pr.beta(1)));

    const int m = 200;
    Eigen::MatrixXd xs(m, 3);
    Eigen::VectorXd ys(m);
    std::vector<int> yr(m), fd(m);
    for (int i = 0; i < m; ++i) {
        yr[i] = static_cast<int>(uniform_index(rng, 8));
        fd[i] = static_cast<int>(uniform_index(rng, 5));
        for (int j = 0; j < 3; ++j) xs(i, j) = standard_normal(rng) + 0.3 * fd[i];
        ys(i) = xs(i, 0) - 2 * xs(i, 1) + 0.5 * xs(i, 2) + yr[i] - fd[i] + standard_normal(rng);
    }
    const auto d = design_of(xs, ys, {yr, fd});
    const auto r = ols_fe(d);
    const Eigen::VectorXd want = oracle::dummy_ols(xs, ys, {yr, fd});
    double worst = 0.0;
    for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(r.beta(j) - want(j)));
    k.expect(worst <= 1e-8, "within vs dummy differ by " + num(worst));

    Design shuffled = d;
    std::vector<Eigen::Index> perm(m);
    for (int i = 0; i < m; ++i) perm[static_cast<std::size_t>(i)] = (i * 73 + 11) % m;
    for (int i = 0; i < m; ++i) {
        shuffled.x.row(i) = d.x.row(perm[static_cast<std::size_t>(i)]);
        shuffled.y(i) = d.y(perm[static_cast<std::size_t>(i)]);
        for (std::size_t g = 0; g < 2; ++g)
            shuffled.fe_levels[g][static_cast<std::size_t>(i)] = d.fe_levels[g][static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    const auto rs = ols_fe(shuffled);
    const auto ps = poisson_pml(design_of(x.topRows(5000), y.head(5000), {std::vector<int>(year.begin(), year.begin() + 5000)}));
    for (int j = 0; j < 3; ++j) {
        k.expect(r.se(j) > 0.0 && std::isfinite(r.se(j)), "OLS SE " + std::to_string(j) + " not positive");
        k.expect(std::abs(rs.se(j) - r.se(j)) <= 1e-10 * r.se(j), "OLS SE " + std::to_string(j) + " changes with row order");
    }
    for (Eigen::Index j = 0; j < pr.se.size(); ++j) k.expect(pr.se(j) > 0.0, "Poisson SE not positive");
    for (Eigen::Index j = 0; j < ps.se.size(); ++j) k.expect(ps.se(j) > 0.0, "Poisson SE not positive");
    k.note("poisson " + num(pr.beta(0), 4) + " / " + num(pr.beta(1), 4) + " (planted 0.3 / -0.4), OLS vs dummy " +
           num(worst, 3));
}

SynthConfig fixture_config() {
    SynthConfig c;
    c.n_years = 8;
    c.n_fields = 2;
    c.papers_per_year = 25;
    c.dim = 8;
    c.topics_per_field = 3;
    c.twin_count = 4;
    c.seed = 5;
    return c;
}

void determinism(Outcome& k) {
    const auto data = testing::scratch("acc_fixture");
    generate_corpus(fixture_config(), data);
    const auto strip = [](std::map<std::string, std::string> t) {
        t["manifest.ndjson"] =
            std::regex_replace(t["manifest.ndjson"], std::regex(R"("duration_ms":[0-9.eE+-]+)"), "\"duration_ms\":0");
        return t;
    };
    std::vector<std::map<std::string, std::string>> runs;
    for (const auto& [name, threads] : std::vector<std::pair<std::string, unsigned>>{{"acc_run1", 1}, {"acc_run2", 1}, {"acc_run8", 8}}) {
        PipelineConfig c;
        c.corpus = {data / "corpus.ndjson"};
        c.embeddings = data / "embeddings.bin";
        c.contexts = data / "contexts.ndjson";
        c.out_dir = testing::scratch(name);
        c.threads = threads;
        c.walk.dim = 16;
        const auto r = run_pipeline(c);
        k.expect(r.exit_code == 0, name + ": exit " + std::to_string(r.exit_code) + " " + r.error);
        k.expect(r.manifest.size() == kStages.size(), name + ": manifest has " + std::to_string(r.manifest.size()) + " stages");
        runs.push_back(strip(tree(c.out_dir)));
    }
    set_thread_count(0);
    for (std::size_t i = 1; i < runs.size(); ++i) {
        k.expect(runs[i].size() == runs[0].size(), "file count differs");
        for (const auto& [name, body] : runs[0]) {
            auto it = runs[i].find(name);
            k.expect(it != runs[i].end() && it->second == body,
                     name + " differs " + (i == 1 ? "between reruns" : "between 1 and 8 threads"));
        }
    }
    k.note(std::to_string(runs[0].size()) + " files identical across reruns and 1 vs 8 threads (durations masked)");
}

void bias_recovery(Outcome& k) {
    SynthConfig s;
    s.n_years = 12;
    s.n_fields = 4;
    s.papers_per_year = 400;
    s.stylized_citation_factor = 0.60;
    s.stylized_review_factor = 1.05;
    s.seed = 909;
    const auto data = testing::scratch("acc_bias_data");
    generate_corpus(s, data);
    PipelineConfig c;
    c.corpus = {data / "corpus.ndjson"};
    c.embeddings = data / "embeddings.bin";
    c.out_dir = testing::scratch("acc_bias_out");
    c.stages = {"ingest", "stylize", "reception"};
    const auto r = run_pipeline(c);
    k.expect(r.exit_code == 0, "pipeline exit " + std::to_string(r.exit_code) + " " + r.error);
    if (r.exit_code != 0) return;
    const auto t = read_csv(c.out_dir / "ratio_series.csv");
    const int last_year = s.start_year + s.n_years - 1;
    std::map<std::string, std::pair<double, double>> range{{"c5", {1e9, -1e9}}, {"turnaround_days", {1e9, -1e9}}};
    std::map<std::string, std::size_t> years;
    for (const auto& row : t.rows) {
        const auto& metric = row[t.col("metric")];
        if (!range.count(metric)) continue;
        const int year = std::stoi(row[t.col("year")]);
        // a five-year window has to fit inside the corpus, and the first year has nothing to cite
        if (metric == "c5" && year + 4 > last_year) continue;
        const double planted = metric == "c5" ? 0.60 : 1.05;
        const double ratio = std::stod(row[t.col("ratio")]);
        const auto stars = row[t.col("stars")];
        const std::string where = metric + " " + std::to_string(year);
        k.expect(std::abs(ratio - planted) <= 0.05, where + ": ratio " + num(ratio, 4) + " vs planted " + num(planted));
        k.expect(stars == "***", where + ": stars '" + stars + "' (p " + row[t.col("p_value")] + ", n " +
                                     row[t.col("n_stylized")] + "/" + row[t.col("n_popularized")] + ")");
        range[metric].first = std::min(range[metric].first, ratio);
        range[metric].second = std::max(range[metric].second, ratio);
        ++years[metric];
    }
    k.expect(years["c5"] >= 7, "only " + std::to_string(years["c5"]) + " years with a full C5 window");
    k.expect(years["turnaround_days"] == 12, "turnaround ratio in " + std::to_string(years["turnaround_days"]) + " years");
    k.note("C5 ratio " + num(range["c5"].first, 4) + ".." + num(range["c5"].second, 4) + " over " +
           std::to_string(years["c5"]) + " years, turnaround ratio " + num(range["turnaround_days"].first, 4) + ".." +
           num(range["turnaround_days"].second, 4) + " over " + std::to_string(years["turnaround_days"]) + " years");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"stylization oracle equality and 100k runtime", stylization_oracle},
        {"planted decline recovery", planted_decline},
        {"CD suite", cd_suite},
        {"recombination conservation", recombination_suite},
        {"reception suite", reception_suite},
        {"rank-sum exactness", rank_sum_exact},
        {"twin validation", twin_validation},
        {"regression recovery", regression_recovery},
        {"determinism", determinism},
        {"end-to-end bias recovery", bias_recovery},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool ok = o.failures.empty();
        failed += ok ? 0 : 1;
        std::cout << "criterion " << i + 1 << ": " << (ok ? "PASS" : "FAIL") << "  " << criteria[i].first << " ("
                  << num(secs, 3) << " s)\n";
        for (const auto& n : o.notes) std::cout << "    " << n << '\n';
        const std::size_t shown = std::min<std::size_t>(o.failures.size(), 10);
        for (std::size_t f = 0; f < shown; ++f) std::cout << "    fail: " << o.failures[f] << '\n';
        if (o.failures.size() > shown) std::cout << "    ... " << o.failures.size() - shown << " more\n";
        std::cout.flush();
    }
    std::cout << (failed ? std::to_string(failed) + " of 10 criteria failed" : std::string("all 10 criteria passed"))
              << '\n';
    return failed ? 1 : 0;
}
