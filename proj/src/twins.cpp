#include "sciline/twins.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "sciline/common.hpp"
#include "sciline/reception.hpp"

namespace sciline {

using nlohmann::json;

std::vector<CitationContext> load_contexts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot read contexts file " + path.string());
    }
    std::vector<CitationContext> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto where = path.string() + ":" + std::to_string(line_no);
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw Error(ErrorKind::schema, "malformed context at " + where);
        }
        CitationContext c;
        try {
            c.citing_paper_id = obj.at("citing_paper_id").get<std::string>();
            c.sentence_index = obj.at("sentence_index").get<int>();
            c.group_index = obj.value("group_index", 0);
            c.cited_ids = obj.at("cited_ids").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::schema, "bad context at " + where + ": " + e.what());
        }
        if (c.cited_ids.empty()) {
            throw Error(ErrorKind::schema, "context without cited_ids at " + where);
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::string context_to_json_line(const CitationContext& c) {
    nlohmann::ordered_json obj;
    obj["citing_paper_id"] = c.citing_paper_id;
    obj["sentence_index"] = c.sentence_index;
    obj["group_index"] = c.group_index;
    obj["cited_ids"] = c.cited_ids;
    return obj.dump();
}

std::map<PaperPair, std::size_t> cocitation_pairs(std::span<const CitationContext> contexts, int max_sentence_gap) {
    struct Group {
        int sentence;
        int group;
        std::vector<std::string> cited;
    };
    std::map<std::string, std::vector<Group>> by_citer;
    for (const auto& c : contexts) {
        Group g{c.sentence_index, c.group_index, c.cited_ids};
        std::sort(g.cited.begin(), g.cited.end());
        g.cited.erase(std::unique(g.cited.begin(), g.cited.end()), g.cited.end());
        by_citer[c.citing_paper_id].push_back(std::move(g));
    }
    std::vector<std::vector<Group>*> papers;
    for (auto& [id, groups] : by_citer) {
        papers.push_back(&groups);
    }
    std::vector<std::map<PaperPair, std::size_t>> partial(papers.size());
    parallel_for(papers.size(), [&](std::size_t p) {
        auto& groups = *papers[p];
        std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
            return std::tie(a.sentence, a.group) < std::tie(b.sentence, b.group);
        });
        auto& counts = partial[p];
        auto add = [&](const std::string& x, const std::string& y) {
            if (x != y) {
                ++counts[x < y ? PaperPair{x, y} : PaperPair{y, x}];
            }
        };
        for (std::size_t i = 0; i < groups.size(); ++i) {
            const auto& gi = groups[i].cited;
            for (std::size_t a = 0; a < gi.size(); ++a) {
                for (std::size_t b = a + 1; b < gi.size(); ++b) {
                    add(gi[a], gi[b]);
                }
            }
            for (std::size_t j = i + 1; j < groups.size(); ++j) {
                if (std::abs(groups[j].sentence - groups[i].sentence) > max_sentence_gap) {
                    break;  // sorted by sentence
                }
                for (const auto& x : gi) {
                    for (const auto& y : groups[j].cited) {
                        add(x, y);
                    }
                }
            }
        }
    });
    std::map<PaperPair, std::size_t> out;
    for (const auto& part : partial) {
        for (const auto& [pair, n] : part) {
            out[pair] += n;
        }
    }
    return out;
}

std::optional<double> refsim(const PaperRecord& a, const PaperRecord& b) {
    if (a.reference_ids.empty() || b.reference_ids.empty()) {
        return std::nullopt;
    }
    std::vector<std::string> shared;
    std::set_intersection(a.reference_ids.begin(), a.reference_ids.end(), b.reference_ids.begin(),
                          b.reference_ids.end(), std::back_inserter(shared));
    return static_cast<double>(shared.size()) /
           static_cast<double>(std::min(a.reference_ids.size(), b.reference_ids.size()));
}

BackToBack b2b_flag(const PaperRecord& a, const PaperRecord& b) {
    BackToBack out;
    if (!a.journal || !b.journal || *a.journal != *b.journal || a.year != b.year) {
        return out;
    }
    if (!a.issue_order || !b.issue_order) {
        out.order_unknown = true;
        return out;
    }
    out.b2b = std::abs(*a.issue_order - *b.issue_order) == 1;
    return out;
}

namespace {

bool authors_disjoint(const PaperRecord& a, const PaperRecord& b) {
    std::set<std::string> seen(a.author_ids.begin(), a.author_ids.end());
    return std::none_of(b.author_ids.begin(), b.author_ids.end(),
                        [&](const std::string& id) { return seen.count(id) > 0; });
}

}  // namespace

std::vector<TwinPair> detect_twins(const std::map<PaperPair, std::size_t>& pairs, const Corpus& corpus,
                                   const TwinParams& params) {
    std::vector<TwinPair> out;
    for (const auto& [pair, count] : pairs) {
        if (count < params.min_cocite) {
            continue;
        }
        const auto* a = corpus.find(pair.first);
        const auto* b = corpus.find(pair.second);
        if (!a || !b || a->year != b->year || !authors_disjoint(*a, *b)) {
            continue;
        }
        const auto sim = refsim(*a, *b);
        if (!sim || *sim < params.refsim_threshold) {
            continue;
        }
        TwinPair t;
        t.paper_a = pair.first;
        t.paper_b = pair.second;
        t.co_citation_count = count;
        t.refsim = *sim;
        const auto flag = b2b_flag(*a, *b);
        t.b2b = flag.b2b;
        t.order_unknown = flag.order_unknown;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::string> control_pool(const TwinPair& pair, const Corpus& corpus, const PaperFilter& eligible) {
    const auto* a = corpus.find(pair.paper_a);
    if (!a) {
        throw Error(ErrorKind::unknown_key, "unknown paper: " + pair.paper_a);
    }
    std::vector<std::string> pool;
    for (const auto& p : corpus.papers()) {
        if (p.year != a->year || p.paper_id == pair.paper_a || p.paper_id == pair.paper_b) {
            continue;
        }
        const bool shares_field = std::any_of(p.fields_l1.begin(), p.fields_l1.end(), [&](const std::string& f) {
            return std::binary_search(a->fields_l1.begin(), a->fields_l1.end(), f);
        });
        if (shares_field && (!eligible || eligible(p))) {
            pool.push_back(p.paper_id);
        }
    }
    return pool;  // corpus order is id order
}

std::string sample_controls(const TwinPair& pair, const Corpus& corpus, std::uint64_t seed,
                            const PaperFilter& eligible) {
    const auto pool = control_pool(pair, corpus, eligible);
    if (pool.empty()) {
        throw Error(ErrorKind::data, "no control candidates for " + pair.paper_a + "/" + pair.paper_b);
    }
    Rng rng(mix_seed(seed, fnv1a64(pair.paper_a + '\0' + pair.paper_b)));
    return pool[uniform_index(rng, pool.size())];
}

std::vector<SurvivalPoint> survival_curve(std::span<const double> diffs, double step, double max) {
    std::vector<SurvivalPoint> out;
    const auto steps = static_cast<std::size_t>(std::llround(max / step));
    for (std::size_t i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) * step;
        const auto above = std::count_if(diffs.begin(), diffs.end(), [&](double d) { return d > t; });
        out.push_back({t, diffs.empty() ? 0.0 : static_cast<double>(above) / static_cast<double>(diffs.size())});
    }
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) {
        return std::nan("");
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nan("");
    }
    return sxy / std::sqrt(sxx * syy);
}

ValidationReport validate_scores(std::span<const TwinPair> pairs, std::span<const StylizationEntry> knn5_entries,
                                 double tolerance) {
    if (pairs.empty()) {
        throw Error(ErrorKind::invalid_argument, "no twin pairs to validate");
    }
    // (paper, year, field) -> neighbor ids
    std::map<std::tuple<std::string, int, std::string>, const std::vector<std::string>*> nbrs;
    std::map<std::string, std::vector<std::pair<int, std::string>>> cohorts_of;
    for (const auto& e : knn5_entries) {
        nbrs[{e.paper_id, e.cohort_year, e.cohort_field}] = &e.neighbor_ids;
        cohorts_of[e.paper_id].emplace_back(e.cohort_year, e.cohort_field);
    }
    ValidationReport rep;
    rep.tolerance = tolerance;
    std::vector<double> sa, sb, twin_diffs, control_diffs;
    std::size_t mutual = 0;
    for (const auto& p : pairs) {
        if (!p.score_a || !p.score_b) {
            throw Error(ErrorKind::invalid_argument, "twin pair without scores: " + p.paper_a + "/" + p.paper_b);
        }
        ++rep.n_pairs;
        sa.push_back(*p.score_a);
        sb.push_back(*p.score_b);
        twin_diffs.push_back(std::abs(*p.score_a - *p.score_b));
        if (p.control_diff) {
            control_diffs.push_back(*p.control_diff);
        }
        const auto ia = cohorts_of.find(p.paper_a);
        const auto ib = cohorts_of.find(p.paper_b);
        std::optional<std::pair<int, std::string>> shared;
        if (ia != cohorts_of.end() && ib != cohorts_of.end()) {
            for (const auto& c : ia->second) {
                if (std::find(ib->second.begin(), ib->second.end(), c) != ib->second.end()) {
                    shared = c;
                    break;
                }
            }
        }
        if (!shared) {
            ++rep.no_common_cohort;
            ++rep.neighbor_overlap[0];
            continue;
        }
        const auto& na = *nbrs.at({p.paper_a, shared->first, shared->second});
        const auto& nb = *nbrs.at({p.paper_b, shared->first, shared->second});
        const bool a_has_b = std::find(na.begin(), na.end(), p.paper_b) != na.end();
        const bool b_has_a = std::find(nb.begin(), nb.end(), p.paper_a) != nb.end();
        mutual += (a_has_b && b_has_a) ? 1 : 0;
        std::size_t overlap = 0;
        for (const auto& x : na) {
            overlap += std::find(nb.begin(), nb.end(), x) != nb.end() ? 1 : 0;
        }
        ++rep.neighbor_overlap[std::min<std::size_t>(overlap, 5)];
    }
    const double r = pearson(sa, sb);
    if (std::isfinite(r)) {
        rep.pearson_r = r;
    }
    auto within = [&](const std::vector<double>& d) {
        if (d.empty()) {
            return 0.0;
        }
        const auto n = std::count_if(d.begin(), d.end(), [&](double v) { return v <= tolerance; });
        return static_cast<double>(n) / static_cast<double>(d.size());
    };
    rep.twin_within = within(twin_diffs);
    rep.control_within = within(control_diffs);
    if (!control_diffs.empty()) {
        rep.rank_sum_p = rank_sum_test(twin_diffs, control_diffs).p_value;
    }
    rep.mutual_knn_fraction = static_cast<double>(mutual) / static_cast<double>(rep.n_pairs);
    rep.twin_survival = survival_curve(twin_diffs);
    rep.control_survival = survival_curve(control_diffs);
    return rep;
}

}  // namespace sciline
