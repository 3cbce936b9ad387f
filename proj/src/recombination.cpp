#include "sciline/recombination.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include <Eigen/Sparse>

#include "sciline/common.hpp"

namespace sciline {

namespace {

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) {
        std::swap(a, b);
    }
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::uint32_t key_first(std::uint64_t k) { return static_cast<std::uint32_t>(k >> 32); }
std::uint32_t key_second(std::uint64_t k) { return static_cast<std::uint32_t>(k & 0xffffffffu); }

// Concept ids interned in lexicographic order, so key order matches string order.
struct Vocabulary {
    std::vector<std::string> names;
    std::unordered_map<std::string, std::uint32_t> index;

    template <typename Papers>
    static Vocabulary from(const Papers& papers) {
        std::set<std::string> all;
        for (const PaperRecord* p : papers) {
            all.insert(p->concept_ids.begin(), p->concept_ids.end());
        }
        Vocabulary v;
        v.names.assign(all.begin(), all.end());
        for (std::uint32_t i = 0; i < v.names.size(); ++i) {
            v.index.emplace(v.names[i], i);
        }
        return v;
    }

    std::vector<std::uint64_t> keys(const PaperRecord& p) const {
        std::vector<std::uint32_t> ids;
        ids.reserve(p.concept_ids.size());
        for (const auto& c : p.concept_ids) {
            ids.push_back(index.at(c));
        }
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                out.push_back(pair_key(ids[i], ids[j]));
            }
        }
        return out;
    }
};

std::vector<const PaperRecord*> papers_by_year(const Corpus& corpus) {
    std::vector<const PaperRecord*> out;
    for (const auto& p : corpus.papers()) {
        out.push_back(&p);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PaperRecord* a, const PaperRecord* b) { return a->year < b->year; });
    return out;
}

}  // namespace

std::vector<ConceptPair> extract_pairs(const PaperRecord& paper) {
    std::vector<std::string> c = paper.concept_ids;
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    std::vector<ConceptPair> out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = i + 1; j < c.size(); ++j) {
            out.emplace_back(c[i], c[j]);
        }
    }
    return out;
}

std::set<ConceptPair> baseline_pairs(const Corpus& corpus, int cutoff_year) {
    std::set<ConceptPair> out;
    for (const auto& p : corpus.papers()) {
        if (p.year < cutoff_year) {
            for (auto& pair : extract_pairs(p)) {
                out.insert(std::move(pair));
            }
        }
    }
    return out;
}

std::vector<ComboEvent> detect_new_combos(const Corpus& corpus, const std::set<ConceptPair>& baseline) {
    const auto papers = papers_by_year(corpus);
    const auto vocab = Vocabulary::from(papers);
    std::unordered_map<std::uint64_t, std::size_t> seen;  // key -> event slot, or npos for baseline
    constexpr std::size_t kBaseline = static_cast<std::size_t>(-1);
    for (const auto& [a, b] : baseline) {
        auto ia = vocab.index.find(a);
        auto ib = vocab.index.find(b);
        if (ia != vocab.index.end() && ib != vocab.index.end()) {
            seen.emplace(pair_key(ia->second, ib->second), kBaseline);
        }
    }
    std::vector<std::vector<std::uint64_t>> keys(papers.size());
    parallel_for(papers.size(), [&](std::size_t i) { keys[i] = vocab.keys(*papers[i]); });

    struct Pending {
        std::uint64_t key;
        ComboEvent event;
    };
    std::vector<Pending> events;
    for (std::size_t i = 0; i < papers.size(); ++i) {
        const auto& p = *papers[i];
        for (auto k : keys[i]) {
            auto [it, inserted] = seen.emplace(k, events.size());
            if (inserted) {
                ComboEvent e;
                e.concept_a = vocab.names[key_first(k)];
                e.concept_b = vocab.names[key_second(k)];
                e.first_year = p.year;
                e.originator_ids.push_back(p.paper_id);
                events.push_back({k, std::move(e)});
                continue;
            }
            if (it->second == kBaseline) {
                continue;
            }
            auto& e = events[it->second].event;
            if (p.year == e.first_year) {
                e.originator_ids.push_back(p.paper_id);
            } else {
                ++e.reuse_count;
            }
        }
    }
    std::sort(events.begin(), events.end(), [](const Pending& x, const Pending& y) {
        return std::tie(x.event.first_year, x.key) < std::tie(y.event.first_year, y.key);
    });
    std::vector<ComboEvent> out;
    out.reserve(events.size());
    for (auto& pe : events) {
        std::sort(pe.event.originator_ids.begin(), pe.event.originator_ids.end());
        out.push_back(std::move(pe.event));
    }
    return out;
}

std::size_t reuse_count(const ComboEvent& event, const Corpus& corpus) {
    std::size_t n = 0;
    for (const auto& p : corpus.papers()) {
        if (p.year > event.first_year &&
            std::binary_search(p.concept_ids.begin(), p.concept_ids.end(), event.concept_a) &&
            std::binary_search(p.concept_ids.begin(), p.concept_ids.end(), event.concept_b)) {
            ++n;
        }
    }
    return n;
}

std::optional<std::size_t> ConceptWindowEmbedding::index_of(std::string_view concept_id) const {
    auto it = std::lower_bound(concepts.begin(), concepts.end(), concept_id);
    if (it == concepts.end() || *it != concept_id) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - concepts.begin());
}

namespace {

struct WeightedGraph {
    std::vector<std::vector<std::uint32_t>> neighbors;  // sorted
    std::vector<std::vector<double>> cumulative;
};

// Largest positive eigenpairs of a sparse symmetric matrix by shifted subspace
// iteration with Rayleigh-Ritz extraction.
void sparse_positive_eigenpairs(const Eigen::SparseMatrix<double>& m, int k, std::uint64_t seed,
                                Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
    const Eigen::Index n = m.rows();
    const Eigen::Index b = std::min<Eigen::Index>(n, k + 8);
    double shift = 0.0;
    for (Eigen::Index j = 0; j < m.outerSize(); ++j) {
        double s = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, j); it; ++it) {
            s += std::abs(it.value());
        }
        shift = std::max(shift, s);
    }
    Rng rng(seed);
    Eigen::MatrixXd q(n, b);
    for (Eigen::Index j = 0; j < b; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            q(i, j) = standard_normal(rng);
        }
    }
    Eigen::VectorXd ritz_values;
    Eigen::VectorXd previous = Eigen::VectorXd::Zero(b);
    for (int it = 0; it < 500; ++it) {
        Eigen::MatrixXd z = m * q + shift * q;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
        q = qr.householderQ() * Eigen::MatrixXd::Identity(n, b);
        Eigen::MatrixXd t = q.transpose() * (m * q);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        q = q * es.eigenvectors().rowwise().reverse();
        ritz_values = es.eigenvalues().reverse();
        if ((ritz_values - previous).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, shift)) {
            break;
        }
        previous = ritz_values;
    }
    values = ritz_values;
    vectors = q;
}

}  // namespace

ConceptWindowEmbedding concept_window_embedding(const Corpus& corpus, int year, const WalkParams& params) {
    if (params.dim <= 0 || params.walks_per_node <= 0 || params.walk_length < 1 || params.context < 1 ||
        params.window_years < 1) {
        throw Error(ErrorKind::invalid_argument, "walk parameters must be positive");
    }
    ConceptWindowEmbedding out;
    out.first_year = year - params.window_years + 1;
    out.last_year = year;
    out.dim = params.dim;
    out.seed = params.seed;
    std::vector<const PaperRecord*> window;
    for (const auto& p : corpus.papers()) {
        if (p.year >= out.first_year && p.year <= out.last_year) {
            window.push_back(&p);
        }
    }
    if (window.empty()) {
        throw Error(ErrorKind::data, "no papers in window " + std::to_string(out.first_year) + "-" +
                                         std::to_string(out.last_year));
    }
    const auto vocab = Vocabulary::from(window);
    out.concepts = vocab.names;
    const auto n = static_cast<std::uint32_t>(vocab.names.size());

    std::map<std::uint64_t, double> weights;
    for (const auto* p : window) {
        for (auto k : vocab.keys(*p)) {
            weights[k] += 1.0;
        }
    }
    WeightedGraph g;
    g.neighbors.resize(n);
    g.cumulative.resize(n);
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    {
        std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(n);
        for (const auto& [k, w] : weights) {
            const auto a = key_first(k);
            const auto b = key_second(k);
            adj[a].emplace_back(b, w);
            adj[b].emplace_back(a, w);
            const auto ra = find(a);
            const auto rb = find(b);
            if (ra != rb) {
                parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
        for (std::uint32_t i = 0; i < n; ++i) {
            std::sort(adj[i].begin(), adj[i].end());
            double acc = 0.0;
            for (const auto& [j, w] : adj[i]) {
                acc += w;
                g.neighbors[i].push_back(j);
                g.cumulative[i].push_back(acc);
            }
        }
    }
    out.component.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        out.component[i] = static_cast<int>(find(i));
    }

    // walks are seeded per (window, node, walk) so the worker count is irrelevant
    const std::uint64_t window_seed = mix_seed(params.seed, static_cast<std::uint64_t>(year));
    std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> per_node(n);
    parallel_for(n, [&](std::size_t start) {
        std::map<std::uint64_t, std::uint64_t> local;
        std::vector<std::uint32_t> walk;
        for (int w = 0; w < params.walks_per_node; ++w) {
            Rng rng(mix_seed(window_seed, start * static_cast<std::uint64_t>(params.walks_per_node) +
                                              static_cast<std::uint64_t>(w)));
            walk.assign(1, static_cast<std::uint32_t>(start));
            while (static_cast<int>(walk.size()) < params.walk_length) {
                const auto cur = walk.back();
                const auto& cum = g.cumulative[cur];
                if (cum.empty()) {
                    break;
                }
                const double r = uniform01(rng) * cum.back();
                auto pos = std::upper_bound(cum.begin(), cum.end(), r) - cum.begin();
                pos = std::min<std::ptrdiff_t>(pos, static_cast<std::ptrdiff_t>(cum.size()) - 1);
                walk.push_back(g.neighbors[cur][static_cast<std::size_t>(pos)]);
            }
            for (std::size_t i = 0; i < walk.size(); ++i) {
                for (std::size_t off = 1; off <= static_cast<std::size_t>(params.context) && i + off < walk.size();
                     ++off) {
                    const auto a = walk[i];
                    const auto b = walk[i + off];
                    ++local[(static_cast<std::uint64_t>(a) << 32) | b];
                    ++local[(static_cast<std::uint64_t>(b) << 32) | a];
                }
            }
        }
        per_node[start].assign(local.begin(), local.end());
    });
    std::map<std::uint64_t, std::uint64_t> counts;
    for (const auto& part : per_node) {
        for (const auto& [k, c] : part) {
            counts[k] += c;
        }
    }
    std::vector<double> row_sum(n, 0.0);
    double total = 0.0;
    for (const auto& [k, c] : counts) {
        row_sum[key_first(k)] += static_cast<double>(c);
        total += static_cast<double>(c);
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto& [k, c] : counts) {
        const auto i = key_first(k);
        const auto j = key_second(k);
        const double pmi = std::log(static_cast<double>(c) * total / (row_sum[i] * row_sum[j]));
        if (pmi > 0.0) {
            trip.emplace_back(static_cast<int>(i), static_cast<int>(j), pmi);
        }
    }

    Eigen::VectorXd values;
    Eigen::MatrixXd vecs;
    if (n <= kDenseVocabLimit) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (const auto& t : trip) {
            m(t.row(), t.col()) = t.value();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        values = es.eigenvalues().reverse();
        vecs = es.eigenvectors().rowwise().reverse();
    } else {
        Eigen::SparseMatrix<double> m(n, n);
        m.setFromTriplets(trip.begin(), trip.end());
        sparse_positive_eigenpairs(m, params.dim, window_seed, values, vecs);
    }
    const double scale = values.size() ? std::max(std::abs(values(0)), std::abs(values(values.size() - 1))) : 0.0;
    Eigen::Index keep = 0;
    while (keep < values.size() && keep < params.dim && values(keep) > 1e-12 * std::max(1.0, scale)) {
        ++keep;
    }
    out.vectors = Eigen::MatrixXd::Zero(n, params.dim);
    for (Eigen::Index j = 0; j < keep; ++j) {
        out.vectors.col(j) = vecs.col(j) * std::sqrt(values(j));
    }
    for (Eigen::Index i = 0; i < out.vectors.rows(); ++i) {
        const double norm = out.vectors.row(i).norm();
        if (norm > kDegenerateNorm) {
            out.vectors.row(i) /= norm;
        } else {
            out.vectors.row(i).setZero();
        }
    }
    return out;
}

double half_cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw Error(ErrorKind::invalid_argument, "distance of a zero vector");
    }
    const double cos = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return (1.0 - cos) / 2.0;
}

ComboDistance combo_distance(std::string_view a, std::string_view b, const ConceptWindowEmbedding& embedding) {
    const auto ia = embedding.index_of(a);
    const auto ib = embedding.index_of(b);
    if (!ia || !ib) {
        return {1.0, true};
    }
    if (*ia == *ib) {
        return {0.0, false};
    }
    if (embedding.component[*ia] != embedding.component[*ib]) {
        return {1.0, true};
    }
    const Eigen::VectorXd va = embedding.vectors.row(static_cast<Eigen::Index>(*ia)).transpose();
    const Eigen::VectorXd vb = embedding.vectors.row(static_cast<Eigen::Index>(*ib)).transpose();
    if (va.squaredNorm() == 0.0 || vb.squaredNorm() == 0.0) {
        return {1.0, true};
    }
    return {half_cosine_distance(va, vb), false};
}

bool classify_remote(double distance, double threshold) {
    return distance > threshold;
}

int default_cutoff_year(const Corpus& corpus) {
    return corpus.min_year() + 5;
}

RecombinationResult run_recombination(const Corpus& corpus, const RecombinationParams& params) {
    RecombinationResult result;
    result.cutoff_year = params.cutoff_year.value_or(default_cutoff_year(corpus));
    const auto baseline = baseline_pairs(corpus, result.cutoff_year);
    result.baseline_size = baseline.size();
    result.events = detect_new_combos(corpus, baseline);
    std::vector<int> years;
    for (const auto& e : result.events) {
        if (years.empty() || years.back() != e.first_year) {
            years.push_back(e.first_year);
        }
    }
    std::vector<ConceptWindowEmbedding> embeddings(years.size());
    parallel_for(years.size(), [&](std::size_t i) {
        embeddings[i] = concept_window_embedding(corpus, years[i], params.walk);
    });
    std::size_t y = 0;
    for (auto& e : result.events) {
        while (years[y] != e.first_year) {
            ++y;
        }
        const auto d = combo_distance(e.concept_a, e.concept_b, embeddings[y]);
        e.distance = d.distance;
        e.disconnected = d.disconnected;
        e.remote = classify_remote(e.distance, params.threshold);
    }
    return result;
}

RemoteStats group_remote_stats(std::span<const ComboEvent> events, const std::unordered_map<std::string, Label>& labels,
                               const std::unordered_map<std::string, int>& paper_years, int year,
                               bool exclude_without_combos) {
    struct Acc {
        double weight = 0.0;
        double distance = 0.0;
        double remote = 0.0;
    };
    std::map<std::string, Acc> per_paper;
    for (const auto& [id, y] : paper_years) {
        if (y == year && labels.count(id)) {
            per_paper[id];
        }
    }
    for (const auto& e : events) {
        if (e.first_year != year || e.originator_ids.empty()) {
            continue;
        }
        const double w = 1.0 / static_cast<double>(e.originator_ids.size());
        for (const auto& id : e.originator_ids) {
            auto it = per_paper.find(id);
            if (it == per_paper.end()) {
                continue;
            }
            it->second.weight += w;
            it->second.distance += w * e.distance;
            it->second.remote += w * (e.remote ? 1.0 : 0.0);
        }
    }
    RemoteStats out;
    out.year = year;
    Acc groups[2];
    Acc overall;
    for (const auto& [id, acc] : per_paper) {
        Acc a = acc;
        if (a.weight == 0.0) {
            if (exclude_without_combos) {
                continue;
            }
            a.weight = 1.0;  // counts as a zero-distance, non-remote paper
        }
        const int g = labels.at(id) == Label::stylized ? 0 : 1;
        (g == 0 ? out.n_stylized : out.n_popularized) += 1;
        for (Acc* t : {&groups[g], &overall}) {
            t->weight += a.weight;
            t->distance += a.distance;
            t->remote += a.remote;
        }
    }
    if (out.n_stylized == 0 && out.n_popularized == 0 && !exclude_without_combos) {
        throw Error(ErrorKind::data, "no labeled papers in year " + std::to_string(year));
    }
    if (overall.weight > 0.0) {
        out.overall_distance = overall.distance / overall.weight;
        out.overall_remote = overall.remote / overall.weight;
    }
    auto ratio = [](const Acc& g, double overall_mean) -> std::optional<double> {
        if (g.weight == 0.0 || overall_mean == 0.0) {
            return std::nullopt;
        }
        return g.distance / g.weight / overall_mean;
    };
    auto remote_ratio = [](const Acc& g, double overall_mean) -> std::optional<double> {
        if (g.weight == 0.0 || overall_mean == 0.0) {
            return std::nullopt;
        }
        return g.remote / g.weight / overall_mean;
    };
    out.stylized_dropped = out.n_stylized == 0;
    out.popularized_dropped = out.n_popularized == 0;
    out.distance_ratio_stylized = ratio(groups[0], out.overall_distance);
    out.distance_ratio_popularized = ratio(groups[1], out.overall_distance);
    out.remote_ratio_stylized = remote_ratio(groups[0], out.overall_remote);
    out.remote_ratio_popularized = remote_ratio(groups[1], out.overall_remote);
    return out;
}

}  // namespace sciline
