#include "sciline/disruption.hpp"

#include <algorithm>
#include <cmath>

#include "sciline/common.hpp"

namespace sciline {

void CitationGraph::build(std::vector<std::pair<std::uint32_t, std::uint32_t>> edges) {
    const std::size_t n = ids_.size();
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    ref_offsets_.assign(n + 1, 0);
    cite_offsets_.assign(n + 1, 0);
    for (const auto& [from, to] : edges) {
        if (from >= n || to >= n) {
            throw Error(ErrorKind::invalid_argument, "edge endpoint out of range");
        }
        if (from == to) {
            throw Error(ErrorKind::data, "self-citation on " + ids_[from]);
        }
        ++ref_offsets_[from + 1];
        ++cite_offsets_[to + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
        ref_offsets_[i + 1] += ref_offsets_[i];
        cite_offsets_[i + 1] += cite_offsets_[i];
    }
    ref_targets_.resize(edges.size());
    cite_sources_.resize(edges.size());
    std::vector<std::size_t> ref_fill(ref_offsets_.begin(), ref_offsets_.end() - 1);
    std::vector<std::size_t> cite_fill(cite_offsets_.begin(), cite_offsets_.end() - 1);
    // edges are sorted by (from, to), so both adjacency lists come out sorted
    for (const auto& [from, to] : edges) {
        ref_targets_[ref_fill[from]++] = to;
        cite_sources_[cite_fill[to]++] = from;
    }
    by_id_.clear();
    by_id_.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!by_id_.emplace(ids_[i], i).second) {
            throw Error(ErrorKind::duplicate_key, "duplicate node id " + ids_[i]);
        }
    }
}

CitationGraph CitationGraph::from_corpus(const Corpus& corpus) {
    CitationGraph g;
    const auto papers = corpus.papers();
    g.ids_.reserve(papers.size());
    g.years_.reserve(papers.size());
    for (const auto& p : papers) {
        g.ids_.push_back(p.paper_id);
        g.years_.push_back(p.year);
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::size_t i = 0; i < papers.size(); ++i) {
        for (const auto& ref : papers[i].reference_ids) {
            auto j = corpus.index_of(ref);
            if (j) {
                edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(*j));
            } else {
                ++g.unresolved_;
            }
        }
    }
    g.build(std::move(edges));
    return g;
}

CitationGraph CitationGraph::from_edges(std::vector<std::string> ids, std::vector<int> years,
                                        std::span<const std::pair<std::uint32_t, std::uint32_t>> edges) {
    if (ids.size() != years.size()) {
        throw Error(ErrorKind::invalid_argument, "ids and years differ in length");
    }
    CitationGraph g;
    g.ids_ = std::move(ids);
    g.years_ = std::move(years);
    g.build({edges.begin(), edges.end()});
    return g;
}

std::optional<std::uint32_t> CitationGraph::node(std::string_view paper_id) const {
    auto it = by_id_.find(std::string(paper_id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::uint32_t CitationGraph::require_node(std::string_view paper_id) const {
    auto n = node(paper_id);
    if (!n) {
        throw Error(ErrorKind::unknown_key, "unknown paper: " + std::string(paper_id));
    }
    return *n;
}

namespace {

// Later citers of the focal paper and of its references, with f and b bits.
struct Citer {
    std::uint32_t node;
    bool f;
    bool b;
};

std::vector<Citer> collect_citers(const CitationGraph& g, std::uint32_t p) {
    const int year = g.year(p);
    std::vector<std::pair<std::uint32_t, int>> raw;  // bit 1 = f, bit 2 = b
    for (auto c : g.citers(p)) {
        if (g.year(c) > year) {
            raw.emplace_back(c, 1);
        }
    }
    for (auto r : g.references(p)) {
        for (auto c : g.citers(r)) {
            if (g.year(c) > year) {
                raw.emplace_back(c, 2);
            }
        }
    }
    std::sort(raw.begin(), raw.end());
    std::vector<Citer> out;
    for (std::size_t i = 0; i < raw.size();) {
        int bits = 0;
        std::size_t j = i;
        while (j < raw.size() && raw[j].first == raw[i].first) {
            bits |= raw[j].second;
            ++j;
        }
        out.push_back({raw[i].first, (bits & 1) != 0, (bits & 2) != 0});
        i = j;
    }
    return out;
}

}  // namespace

std::optional<double> cd_index(const CitationGraph& graph, std::uint32_t node) {
    const auto citers = collect_citers(graph, node);
    if (citers.empty()) {
        return std::nullopt;
    }
    double sum = 0.0;
    for (const auto& c : citers) {
        const double f = c.f ? 1.0 : 0.0;
        const double b = c.b ? 1.0 : 0.0;
        sum += -2.0 * f * b + f;
    }
    return sum / static_cast<double>(citers.size());
}

std::optional<double> cd_index(const CitationGraph& graph, std::string_view paper_id) {
    return cd_index(graph, graph.require_node(paper_id));
}

std::size_t cd_citer_count(const CitationGraph& graph, std::uint32_t node) {
    return collect_citers(graph, node).size();
}

DisruptionProfile decompose_cd(const CitationGraph& graph, std::uint32_t node, bool cd_prime_literal) {
    DisruptionProfile prof;
    prof.paper_id = graph.id(node);
    prof.year = graph.year(node);
    const auto citers = collect_citers(graph, node);
    prof.n_citers = citers.size();
    if (!citers.empty()) {
        double sum = 0.0;
        for (const auto& c : citers) {
            sum += c.f ? (c.b ? -1.0 : 1.0) : 0.0;
        }
        prof.cd = sum / static_cast<double>(citers.size());
    }
    const int year = graph.year(node);
    const auto focal_citers = graph.citers(node);
    const auto refs = graph.references(node);
    prof.n_refs = refs.size();
    std::vector<double> cs, ds, gaps;
    for (auto r : refs) {
        // c_p^j: later citers of p or of j; f = cites p, b = cites j
        std::vector<std::pair<std::uint32_t, int>> raw;
        for (auto c : focal_citers) {
            if (graph.year(c) > year) {
                raw.emplace_back(c, 1);
            }
        }
        for (auto c : graph.citers(r)) {
            if (graph.year(c) > year) {
                raw.emplace_back(c, 2);
            }
        }
        std::sort(raw.begin(), raw.end());
        std::size_t n = 0;
        double c_sum = 0.0;
        double d_sum = 0.0;
        double f_sum = 0.0;
        for (std::size_t i = 0; i < raw.size();) {
            int bits = 0;
            std::size_t j = i;
            while (j < raw.size() && raw[j].first == raw[i].first) {
                bits |= raw[j].second;
                ++j;
            }
            const double f = (bits & 1) ? 1.0 : 0.0;
            const double b = (bits & 2) ? 1.0 : 0.0;
            c_sum += -f * b;
            d_sum += f - f * b;
            f_sum += f;
            ++n;
            i = j;
        }
        ReferenceTerm term;
        term.reference_id = graph.id(r);
        term.n_citers = n;
        term.empty = n == 0;
        double gap = 0.0;
        if (n > 0) {
            term.c = c_sum / static_cast<double>(n);
            term.d = d_sum / static_cast<double>(n);
            gap = cd_prime_literal ? term.d - term.c : f_sum / static_cast<double>(n);
        }
        cs.push_back(term.c);
        ds.push_back(term.d);
        gaps.push_back(gap);
        prof.per_ref.push_back(std::move(term));
    }
    if (!refs.empty()) {
        prof.c_prime = population_stddev(cs);
        prof.d_prime = population_stddev(ds);
        prof.cd_prime = population_stddev(gaps);
    }
    return prof;
}

DisruptionProfile decompose_cd(const CitationGraph& graph, std::string_view paper_id, bool cd_prime_literal) {
    return decompose_cd(graph, graph.require_node(paper_id), cd_prime_literal);
}

std::vector<DisruptionProfile> all_profiles(const CitationGraph& graph, bool cd_prime_literal) {
    std::vector<DisruptionProfile> out(graph.size());
    parallel_for(graph.size(), [&](std::size_t i) {
        out[i] = decompose_cd(graph, static_cast<std::uint32_t>(i), cd_prime_literal);
    });
    return out;
}

DisruptionRatio disruption_ratio(std::span<const double> stylized_cd, std::span<const double> popularized_cd) {
    if (stylized_cd.empty() || popularized_cd.empty()) {
        throw Error(ErrorKind::data, "disruption ratio needs both label groups");
    }
    std::vector<double> all(stylized_cd.begin(), stylized_cd.end());
    all.insert(all.end(), popularized_cd.begin(), popularized_cd.end());
    DisruptionRatio out;
    out.cutoff = median(all);
    out.n_stylized = stylized_cd.size();
    out.n_popularized = popularized_cd.size();
    auto share_above = [&](std::span<const double> v) {
        const auto above = std::count_if(v.begin(), v.end(), [&](double x) { return x > out.cutoff; });
        return static_cast<double>(above) / static_cast<double>(v.size());
    };
    out.p_stylized = share_above(stylized_cd);
    out.p_popularized = share_above(popularized_cd);
    if (out.p_popularized == 0.0) {
        out.undefined = true;
    } else {
        out.ratio = out.p_stylized / out.p_popularized;
    }
    return out;
}

DisruptionRatio disruption_ratio(std::span<const DisruptionProfile> profiles,
                                 const std::unordered_map<std::string, Label>& labels, int year) {
    std::vector<double> s, p;
    for (const auto& prof : profiles) {
        if (prof.year != year || !prof.cd) {
            continue;
        }
        auto it = labels.find(prof.paper_id);
        if (it == labels.end()) {
            continue;
        }
        (it->second == Label::stylized ? s : p).push_back(*prof.cd);
    }
    if (s.empty() || p.empty()) {
        throw Error(ErrorKind::data, "year " + std::to_string(year) + " lacks a label group with defined CD");
    }
    auto out = disruption_ratio(s, p);
    out.year = year;
    return out;
}

std::vector<double> pagerank(const CitationGraph& graph, double damping, double tol, int max_iter) {
    const std::size_t n = graph.size();
    if (n == 0) {
        throw Error(ErrorKind::invalid_argument, "pagerank on an empty graph");
    }
    if (!(damping > 0.0 && damping < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "damping must lie in (0, 1)");
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> x(n, inv_n);
    std::vector<double> next(n);
    for (int it = 0; it < max_iter; ++it) {
        double dangling = 0.0;
        for (std::uint32_t i = 0; i < n; ++i) {
            if (graph.references(i).empty()) {
                dangling += x[i];
            }
        }
        const double base = (1.0 - damping) * inv_n + damping * dangling * inv_n;
        parallel_for((n + 4095) / 4096, [&](std::size_t block) {
            const std::size_t end = std::min(n, (block + 1) * 4096);
            for (std::size_t i = block * 4096; i < end; ++i) {
                double inflow = 0.0;
                for (auto c : graph.citers(static_cast<std::uint32_t>(i))) {
                    inflow += x[c] / static_cast<double>(graph.references(c).size());
                }
                next[i] = base + damping * inflow;
            }
        });
        double diff = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diff += std::abs(next[i] - x[i]);
            total += next[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = next[i] / total;
        }
        if (diff < tol) {
            return x;
        }
    }
    throw Error(ErrorKind::non_convergence, "pagerank did not reach tolerance in " + std::to_string(max_iter) +
                                                " iterations");
}

}  // namespace sciline
