#include "sciline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "sciline/common.hpp"
#include "sciline/embed_space.hpp"

namespace sciline {

namespace {

enum Stream : std::uint64_t {
    kSkeleton = 1,
    kTopics,
    kVectors,
    kTwins,
    kCitations,
    kContexts,
    kConcepts,
    kReview,
};

std::string padded(const char* prefix, int width, long value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s%0*ld", prefix, width, value);
    return buf;
}

std::string field_tag(int f) { return padded("F", 2, f); }

Eigen::VectorXd gaussian(Rng& rng, int dim, double scale) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) {
        v(i) = standard_normal(rng) * scale;
    }
    return v;
}

struct Draw {
    int topic = 0;
    Eigen::VectorXd noise;  // N(0, I/dim)
};

Eigen::VectorXd place(const Eigen::VectorXd& center, const Eigen::VectorXd& noise, double sigma) {
    Eigen::VectorXd v = center + sigma * noise;
    const double n = v.norm();
    return n > 0.0 ? Eigen::VectorXd(v / n) : v;
}

// Mean knn5 score over one cohort per field, each built from fixed draws.
double calibration_score(const std::vector<std::vector<Eigen::VectorXd>>& topics,
                         const std::vector<std::vector<Draw>>& draws, double sigma) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t f = 0; f < draws.size(); ++f) {
        const auto& fd = draws[f];
        if (fd.size() < 2) {
            continue;
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(fd.size()), topics[f][0].size());
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < fd.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) =
                place(topics[f][static_cast<std::size_t>(fd[i].topic)], fd[i].noise, sigma).transpose();
            ids.push_back(padded("c", 6, static_cast<long>(i)));
        }
        const auto rotated = rotate_cohort(x, RotationOptions{});
        if (rotated.usable_rows() < 2) {
            continue;
        }
        for (const auto& e : score_rotated(rotated, ids, Variant::knn5, 0, "")) {
            sum += e.score;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double calibrate_sigma(const std::vector<std::vector<Eigen::VectorXd>>& topics,
                       const std::vector<std::vector<Draw>>& draws, double target, double& achieved) {
    double lo = std::log(1e-3);
    double hi = std::log(1e2);
    const double f_lo = calibration_score(topics, draws, std::exp(lo));
    const double f_hi = calibration_score(topics, draws, std::exp(hi));
    if (target <= f_lo) {
        achieved = f_lo;
        return std::exp(lo);
    }
    if (target >= f_hi) {
        achieved = f_hi;
        return std::exp(hi);
    }
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (calibration_score(topics, draws, std::exp(mid)) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double sigma = std::exp(0.5 * (lo + hi));
    achieved = calibration_score(topics, draws, sigma);
    return sigma;
}

struct Skeleton {
    int field = 0;
    int topic = 0;
    Eigen::VectorXd noise;
    Eigen::VectorXd vector;
};

}  // namespace

void validate(const SynthConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) {
            throw Error(ErrorKind::config, "synth config: " + what);
        }
    };
    require(c.seed.has_value(), "seed is required");
    require(c.start_year >= kMinYear, "start_year must be >= 1800");
    require(c.n_years >= 1, "n_years must be positive");
    require(c.n_fields >= 1, "n_fields must be positive");
    require(c.papers_per_year >= 1, "papers_per_year must be positive");
    require(c.growth_rate >= 0.0, "growth_rate must be >= 0");
    require(c.field_size_jitter >= 0.0 && c.field_size_jitter < 1.0, "field_size_jitter must lie in [0, 1)");
    require(c.dim >= 2, "dim must be >= 2");
    require(c.topics_per_field >= 1, "topics_per_field must be positive");
    require(c.sigma_start > 0.0 && c.sigma_end > 0.0, "sigma schedule must be positive");
    require(c.mean_references >= 0.0, "mean_references must be >= 0");
    require(c.recency_decay >= 0.0, "recency_decay must be >= 0");
    require(c.preferential_attachment >= 0.0, "preferential_attachment must be >= 0");
    require(c.stylized_citation_factor > 0.0, "stylized_citation_factor must be positive");
    require(c.review_base_days > 0.0 && c.review_spread >= 0.0, "review model must be positive");
    require(c.stylized_review_factor > 0.0, "stylized_review_factor must be positive");
    require(c.review_outlier_fraction >= 0.0 && c.review_outlier_fraction <= 1.0,
            "review_outlier_fraction must lie in [0, 1]");
    require(c.concepts_per_field >= 1 && c.concepts_per_paper >= 0, "concept pools must be positive");
    require(c.cross_field_prob >= 0.0 && c.cross_field_prob <= 1.0, "cross_field_prob must lie in [0, 1]");
    require(c.twin_count >= 0 && c.twin_contexts >= 0 && c.noise_contexts >= 0, "twin counts must be >= 0");
    require(c.twin_count == 0 || c.n_years >= 3, "twins need at least 3 years");
    require(c.journals_per_field >= 1, "journals_per_field must be positive");
}

SynthOutput generate(const SynthConfig& c) {
    validate(c);
    const std::uint64_t seed = *c.seed;
    auto stream = [&](Stream s) { return Rng(mix_seed(seed, s)); };
    const double noise_scale = 1.0 / std::sqrt(static_cast<double>(c.dim));

    // topic centers per field
    Rng topic_rng = stream(kTopics);
    std::vector<std::vector<Eigen::VectorXd>> topics(static_cast<std::size_t>(c.n_fields));
    for (auto& ft : topics) {
        for (int k = 0; k < c.topics_per_field; ++k) {
            Eigen::VectorXd v = gaussian(topic_rng, c.dim, 1.0);
            ft.push_back(v / v.norm());
        }
    }

    // skeleton: ids in year then field order, so id order is year order
    Rng skel = stream(kSkeleton);
    Rng vec_rng = stream(kVectors);
    SynthOutput out;
    std::vector<Skeleton> sk;
    std::vector<std::vector<std::string>> author_pool(static_cast<std::size_t>(c.n_fields));
    long next_author = 0;
    std::vector<std::vector<std::vector<std::size_t>>> by_year_field(static_cast<std::size_t>(c.n_years));
    for (int t = 0; t < c.n_years; ++t) {
        const int year = c.start_year + t;
        const auto n_t = static_cast<int>(std::lround(c.papers_per_year * std::pow(1.0 + c.growth_rate, t)));
        std::vector<double> u(static_cast<std::size_t>(c.n_fields));
        for (auto& x : u) x = 2.0 * uniform01(skel) - 1.0;
        const double u_mean = mean(u);
        std::vector<int> counts(static_cast<std::size_t>(c.n_fields), n_t);
        int shift = 0;
        for (int f = 0; f + 1 < c.n_fields; ++f) {
            const auto d = static_cast<int>(std::lround(c.field_size_jitter * n_t * (u[static_cast<std::size_t>(f)] - u_mean)));
            counts[static_cast<std::size_t>(f)] += d;
            shift += d;
        }
        counts.back() -= shift;
        for (auto& n : counts) n = std::max(n, std::min(n_t, 2));
        by_year_field[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(c.n_fields));
        for (int f = 0; f < c.n_fields; ++f) {
            for (int i = 0; i < counts[static_cast<std::size_t>(f)]; ++i) {
                PaperRecord p;
                p.paper_id = padded("P", 7, static_cast<long>(out.papers.size()));
                p.doi = "10.5555/synth." + p.paper_id;
                p.year = year;
                p.journal = padded("J", 2, f) + "-" + std::to_string(uniform_index(skel, static_cast<std::size_t>(c.journals_per_field)));
                p.fields_l1 = {field_tag(f)};
                p.fields_l0 = {padded("G", 2, f / 2)};
                const int team = 1 + std::min(7, poisson_draw(skel, 1.5));
                auto& pool = author_pool[static_cast<std::size_t>(f)];
                std::set<std::string> authors;
                while (static_cast<int>(authors.size()) < team) {
                    if (pool.empty() || uniform01(skel) < 0.3) {
                        pool.push_back(padded("A", 7, next_author++));
                        authors.insert(pool.back());
                    } else {
                        authors.insert(pool[uniform_index(skel, pool.size())]);
                    }
                }
                p.author_ids.assign(authors.begin(), authors.end());
                Skeleton s;
                s.field = f;
                s.topic = static_cast<int>(uniform_index(vec_rng, static_cast<std::size_t>(c.topics_per_field)));
                s.noise = gaussian(vec_rng, c.dim, noise_scale);
                by_year_field[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)].push_back(out.papers.size());
                out.papers.push_back(std::move(p));
                sk.push_back(std::move(s));
            }
        }
    }

    // spread per year
    for (int t = 0; t < c.n_years; ++t) {
        SynthYearTruth yt;
        yt.year = c.start_year + t;
        if (c.calibrate) {
            yt.target_score = c.target_start + c.target_slope * t;
            // the year's own draws, so the realized mean lands on the target rather than near it
            std::vector<std::vector<Draw>> draws(static_cast<std::size_t>(c.n_fields));
            for (int f = 0; f < c.n_fields; ++f) {
                for (const auto i : by_year_field[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)]) {
                    draws[static_cast<std::size_t>(f)].push_back({sk[i].topic, sk[i].noise});
                }
            }
            yt.sigma = calibrate_sigma(topics, draws, yt.target_score, yt.calibration_score);
        } else {
            const double frac = c.n_years > 1 ? static_cast<double>(t) / (c.n_years - 1) : 0.0;
            yt.sigma = c.sigma_start + (c.sigma_end - c.sigma_start) * frac;
        }
        out.years.push_back(yt);
    }
    for (std::size_t i = 0; i < sk.size(); ++i) {
        const auto t = static_cast<std::size_t>(out.papers[i].year - c.start_year);
        sk[i].vector = place(topics[static_cast<std::size_t>(sk[i].field)][static_cast<std::size_t>(sk[i].topic)],
                             sk[i].noise, out.years[t].sigma);
    }

    // twins: B becomes a near copy of A within the same year and field
    Rng twin_rng = stream(kTwins);
    std::vector<bool> in_twin(out.papers.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> twin_idx;
    std::vector<bool> twin_b2b;
    for (int k = 0; k < c.twin_count; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            // twin years leave room for earlier references and later citers
            const auto t = 1 + uniform_index(twin_rng, static_cast<std::size_t>(c.n_years - 2));
            const auto f = uniform_index(twin_rng, static_cast<std::size_t>(c.n_fields));
            const auto& cell = by_year_field[t][f];
            if (cell.size() < 2) {
                continue;
            }
            const auto a = cell[uniform_index(twin_rng, cell.size())];
            const auto b = cell[uniform_index(twin_rng, cell.size())];
            if (a == b || in_twin[a] || in_twin[b]) {
                continue;
            }
            in_twin[a] = in_twin[b] = true;
            const auto lo = std::min(a, b);
            const auto hi = std::max(a, b);
            twin_idx.emplace_back(lo, hi);
            twin_b2b.push_back(uniform01(twin_rng) < c.twin_b2b_prob);
            placed = true;
        }
        if (!placed) {
            throw Error(ErrorKind::config, "synth config: cannot place " + std::to_string(c.twin_count) + " twins");
        }
    }
    for (std::size_t k = 0; k < twin_idx.size(); ++k) {
        const auto [a, b] = twin_idx[k];
        const auto t = static_cast<std::size_t>(out.papers[a].year - c.start_year);
        sk[b].topic = sk[a].topic;
        sk[b].noise = sk[a].noise + c.twin_noise * gaussian(twin_rng, c.dim, noise_scale);
        sk[b].vector = place(topics[static_cast<std::size_t>(sk[b].field)][static_cast<std::size_t>(sk[b].topic)],
                             sk[b].noise, out.years[t].sigma);
        auto& pb = out.papers[b];
        pb.journal = out.papers[a].journal;
        pb.author_ids.clear();
        const int team = 1 + std::min(7, poisson_draw(twin_rng, 1.5));
        for (int i = 0; i < team; ++i) {
            pb.author_ids.push_back(padded("A", 7, next_author++));
        }
        out.twins.emplace_back(out.papers[a].paper_id, pb.paper_id);
    }

    out.embeddings = EmbeddingStore(static_cast<std::uint32_t>(c.dim));
    std::vector<float> row(static_cast<std::size_t>(c.dim));
    for (std::size_t i = 0; i < out.papers.size(); ++i) {
        for (int j = 0; j < c.dim; ++j) {
            row[static_cast<std::size_t>(j)] = static_cast<float>(sk[i].vector(j));
        }
        out.embeddings.add(out.papers[i].paper_id, row);
    }

    // labels exactly as the scoring stage will assign them
    std::vector<bool> stylized(out.papers.size(), false);
    {
        auto store = std::make_shared<EmbeddingStore>(out.embeddings);
        auto corpus = Corpus::from_records(out.papers, store);
        auto scored = stylize_corpus(corpus, StylizeOptions{});
        std::unordered_map<std::string, bool> label;
        for (const auto& ps : paper_scores(scored.entries)) {
            label[ps.paper_id] = ps.label == Label::stylized;
        }
        for (std::size_t i = 0; i < out.papers.size(); ++i) {
            auto it = label.find(out.papers[i].paper_id);
            stylized[i] = it != label.end() && it->second;
            out.stylized_count += stylized[i] ? 1 : 0;
        }
    }

    // citations: references drawn from strictly earlier years without replacement
    Rng cite_rng = stream(kCitations);
    std::vector<double> indegree(out.papers.size(), 0.0);
    std::vector<std::set<std::size_t>> refs(out.papers.size());
    std::size_t year_begin = 0;
    while (year_begin < out.papers.size()) {
        const int year = out.papers[year_begin].year;
        std::size_t year_end = year_begin;
        while (year_end < out.papers.size() && out.papers[year_end].year == year) {
            ++year_end;
        }
        if (year_begin > 0) {
            std::vector<double> cum(year_begin);
            double acc = 0.0;
            for (std::size_t j = 0; j < year_begin; ++j) {
                const double fitness = stylized[j] ? c.stylized_citation_factor : 1.0;
                acc += fitness * std::exp(-c.recency_decay * (year - out.papers[j].year)) *
                       std::pow(1.0 + indegree[j], c.preferential_attachment);
                cum[j] = acc;
            }
            for (std::size_t i = year_begin; i < year_end; ++i) {
                const auto want = std::min<std::size_t>(static_cast<std::size_t>(poisson_draw(cite_rng, c.mean_references)),
                                                        year_begin);
                auto& r = refs[i];
                std::size_t guard = 0;
                while (r.size() < want && guard++ < want * 200) {
                    const double u = uniform01(cite_rng) * acc;
                    auto pos = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
                    r.insert(std::min(pos, year_begin - 1));
                }
            }
            for (std::size_t i = year_begin; i < year_end; ++i) {
                for (auto j : refs[i]) {
                    indegree[j] += 1.0;
                }
            }
        }
        year_begin = year_end;
    }

    // twin references overlap heavily; contexts come from later papers
    Rng ctx_rng = stream(kContexts);
    for (const auto& [a, b] : twin_idx) {
        if (refs[a].empty()) {
            const auto first_of_year = static_cast<std::size_t>(
                std::lower_bound(out.papers.begin(), out.papers.end(), out.papers[a].year,
                                 [](const PaperRecord& p, int y) { return p.year < y; }) -
                out.papers.begin());
            for (int k = 0; k < 3 && first_of_year > 0; ++k) {
                refs[a].insert(uniform_index(ctx_rng, first_of_year));
            }
        }
        const std::size_t keep_target = std::max<std::size_t>(1, (refs[a].size() * 4 + 4) / 5);
        std::vector<std::size_t> shared(refs[a].begin(), refs[a].end());
        std::set<std::size_t> rb;
        for (std::size_t k = 0; k < keep_target && !shared.empty(); ++k) {
            const auto pick = uniform_index(ctx_rng, shared.size());
            rb.insert(shared[pick]);
            shared.erase(shared.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        const auto own = refs[b];
        for (auto j : own) {
            if (rb.size() >= refs[a].size()) {
                break;
            }
            rb.insert(j);
        }
        refs[b] = std::move(rb);
    }
    const std::size_t n_papers = out.papers.size();
    for (std::size_t k = 0; k < twin_idx.size(); ++k) {
        const auto [a, b] = twin_idx[k];
        const int year = out.papers[a].year;
        const auto later = static_cast<std::size_t>(
            std::upper_bound(out.papers.begin(), out.papers.end(), year,
                             [](int y, const PaperRecord& p) { return y < p.year; }) -
            out.papers.begin());
        std::set<std::size_t> citers;
        const auto available = n_papers - later;
        while (citers.size() < std::min<std::size_t>(static_cast<std::size_t>(c.twin_contexts), available)) {
            citers.insert(later + uniform_index(ctx_rng, available));
        }
        for (auto ci : citers) {
            refs[ci].insert(a);
            refs[ci].insert(b);
            CitationContext ctx;
            ctx.citing_paper_id = out.papers[ci].paper_id;
            ctx.sentence_index = static_cast<int>(uniform_index(ctx_rng, 40));
            ctx.group_index = 0;
            ctx.cited_ids = {out.papers[a].paper_id, out.papers[b].paper_id};
            out.contexts.push_back(std::move(ctx));
        }
    }
    for (int k = 0; k < c.noise_contexts && n_papers > 0; ++k) {
        const auto ci = uniform_index(ctx_rng, n_papers);
        if (refs[ci].size() < 2) {
            continue;
        }
        std::vector<std::size_t> r(refs[ci].begin(), refs[ci].end());
        const auto x = r[uniform_index(ctx_rng, r.size())];
        const auto y = r[uniform_index(ctx_rng, r.size())];
        if (x == y) {
            continue;
        }
        const int sentence = static_cast<int>(uniform_index(ctx_rng, 40));
        if (uniform01(ctx_rng) < 0.5) {
            out.contexts.push_back({out.papers[ci].paper_id, sentence, 0, {out.papers[x].paper_id, out.papers[y].paper_id}});
        } else {
            // far apart: no co-citation credit
            out.contexts.push_back({out.papers[ci].paper_id, sentence, 0, {out.papers[x].paper_id}});
            out.contexts.push_back({out.papers[ci].paper_id, sentence + 3, 0, {out.papers[y].paper_id}});
        }
    }
    for (std::size_t i = 0; i < n_papers; ++i) {
        for (auto j : refs[i]) {
            out.papers[i].reference_ids.push_back(out.papers[j].paper_id);
        }
    }

    // concepts
    Rng concept_rng = stream(kConcepts);
    for (std::size_t i = 0; i < n_papers; ++i) {
        const int f = sk[i].field;
        const double cross = std::min(1.0, c.cross_field_prob * (stylized[i] ? c.stylized_cross_factor : 1.0));
        std::set<std::string> concepts;
        for (int k = 0; k < c.concepts_per_paper; ++k) {
            int pool = f;
            if (c.n_fields > 1 && uniform01(concept_rng) < cross) {
                pool = static_cast<int>(uniform_index(concept_rng, static_cast<std::size_t>(c.n_fields - 1)));
                if (pool >= f) {
                    ++pool;
                }
            }
            const auto idx = uniform_index(concept_rng, static_cast<std::size_t>(c.concepts_per_field));
            concepts.insert(padded("K", 2, pool) + "-" + padded("", 3, static_cast<long>(idx)));
        }
        out.papers[i].concept_ids.assign(concepts.begin(), concepts.end());
    }

    // review lag
    Rng review_rng = stream(kReview);
    for (std::size_t i = 0; i < n_papers; ++i) {
        auto& p = out.papers[i];
        const int jan1 = *parse_iso_date(std::to_string(p.year) + "-01-01");
        const int accepted = jan1 + static_cast<int>(uniform_index(review_rng, 365));
        int lag;
        if (uniform01(review_rng) < c.review_outlier_fraction) {
            lag = uniform01(review_rng) < 0.5 ? 1 + static_cast<int>(uniform_index(review_rng, 29))
                                              : 1001 + static_cast<int>(uniform_index(review_rng, 500));
        } else {
            const double factor = stylized[i] ? c.stylized_review_factor : 1.0;
            lag = static_cast<int>(std::lround(c.review_base_days * factor *
                                               std::exp(c.review_spread * standard_normal(review_rng))));
        }
        p.history.accepted = accepted;
        p.history.submitted = accepted - lag;
    }

    // issue order within journal-year; back-to-back twins sit adjacent
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> issues;
    std::unordered_map<std::size_t, std::size_t> follow;  // b placed right after a
    for (std::size_t k = 0; k < twin_idx.size(); ++k) {
        if (twin_b2b[k]) {
            follow[twin_idx[k].first] = twin_idx[k].second;
        }
    }
    std::unordered_set<std::size_t> followers;
    for (const auto& [a, b] : follow) {
        followers.insert(b);
    }
    for (std::size_t i = 0; i < n_papers; ++i) {
        if (followers.count(i)) {
            continue;
        }
        auto& list = issues[{*out.papers[i].journal, out.papers[i].year}];
        list.push_back(i);
        if (auto it = follow.find(i); it != follow.end()) {
            list.push_back(it->second);
        }
    }
    for (const auto& [key, list] : issues) {
        for (std::size_t pos = 0; pos < list.size(); ++pos) {
            out.papers[list[pos]].issue_order = static_cast<int>(pos + 1);
        }
    }
    return out;
}

void write_synth(const SynthConfig& c, const SynthOutput& output, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
    }
    auto open = [&](const std::string& name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) {
            throw Error(ErrorKind::io, "cannot write " + (dir / name).string());
        }
        return f;
    };
    {
        auto f = open("corpus.ndjson");
        f << "{\"schema_version\":\"" << kSchemaVersion << "\"}\n";
        for (const auto& p : output.papers) {
            f << paper_to_json_line(p) << '\n';
        }
    }
    write_embeddings(dir / "embeddings.bin", output.embeddings);
    {
        auto f = open("citations.csv");
        CsvWriter csv(f);
        csv.comment("seed=" + std::to_string(*c.seed));
        csv.row({"citing_id", "cited_id"});
        for (const auto& p : output.papers) {
            for (const auto& r : p.reference_ids) {
                csv.row({p.paper_id, r});
            }
        }
    }
    {
        auto f = open("contexts.ndjson");
        for (const auto& ctx : output.contexts) {
            f << context_to_json_line(ctx) << '\n';
        }
    }
    nlohmann::ordered_json truth;
    truth["seed"] = *c.seed;
    truth["start_year"] = c.start_year;
    truth["n_years"] = c.n_years;
    truth["n_fields"] = c.n_fields;
    truth["papers_per_year"] = c.papers_per_year;
    truth["growth_rate"] = c.growth_rate;
    truth["field_size_jitter"] = c.field_size_jitter;
    truth["dim"] = c.dim;
    truth["topics_per_field"] = c.topics_per_field;
    truth["calibrate"] = c.calibrate;
    truth["target_start"] = c.target_start;
    truth["target_slope"] = c.target_slope;
    truth["sigma_start"] = c.sigma_start;
    truth["sigma_end"] = c.sigma_end;
    truth["mean_references"] = c.mean_references;
    truth["recency_decay"] = c.recency_decay;
    truth["preferential_attachment"] = c.preferential_attachment;
    truth["stylized_citation_factor"] = c.stylized_citation_factor;
    truth["review_base_days"] = c.review_base_days;
    truth["review_spread"] = c.review_spread;
    truth["stylized_review_factor"] = c.stylized_review_factor;
    truth["review_outlier_fraction"] = c.review_outlier_fraction;
    truth["concepts_per_field"] = c.concepts_per_field;
    truth["concepts_per_paper"] = c.concepts_per_paper;
    truth["cross_field_prob"] = c.cross_field_prob;
    truth["stylized_cross_factor"] = c.stylized_cross_factor;
    truth["twin_count"] = c.twin_count;
    truth["twin_noise"] = c.twin_noise;
    truth["twin_b2b_prob"] = c.twin_b2b_prob;
    truth["paper_count"] = output.papers.size();
    truth["stylized_count"] = output.stylized_count;
    nlohmann::ordered_json years = nlohmann::ordered_json::array();
    for (const auto& y : output.years) {
        years.push_back({{"year", y.year},
                         {"sigma", y.sigma},
                         {"target_score", y.target_score},
                         {"calibration_score", y.calibration_score}});
    }
    truth["years"] = years;
    nlohmann::ordered_json twins = nlohmann::ordered_json::array();
    for (const auto& [a, b] : output.twins) {
        twins.push_back({a, b});
    }
    truth["twins"] = twins;
    auto f = open("truth.json");
    f << truth.dump(2) << '\n';
}

void generate_corpus(const SynthConfig& config, const std::filesystem::path& dir) {
    write_synth(config, generate(config), dir);
}

}  // namespace sciline
