#include "sciline/embed_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <utility>

#include "sciline/common.hpp"

namespace sciline {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::knn5: return "knn5";
        case Variant::knn10: return "knn10";
        case Variant::pct5: return "pct5";
    }
    return "knn5";
}

std::string_view to_string(Label l) {
    return l == Label::stylized ? "stylized" : "popularized";
}

Variant parse_variant(std::string_view text) {
    if (text == "knn5") return Variant::knn5;
    if (text == "knn10") return Variant::knn10;
    if (text == "pct5") return Variant::pct5;
    throw Error(ErrorKind::invalid_argument, "unknown variant: " + std::string(text));
}

std::vector<Variant> parse_variants(std::string_view comma_list) {
    std::vector<Variant> out;
    std::size_t start = 0;
    while (start <= comma_list.size()) {
        auto end = comma_list.find(',', start);
        if (end == std::string_view::npos) {
            end = comma_list.size();
        }
        auto token = comma_list.substr(start, end - start);
        if (!token.empty()) {
            auto v = parse_variant(token);
            if (std::find(out.begin(), out.end(), v) == out.end()) {
                out.push_back(v);
            }
        }
        start = end + 1;
    }
    if (out.empty()) {
        throw Error(ErrorKind::invalid_argument, "no variant given");
    }
    return out;
}

RotationOptions rotation_none() {
    return RotationOptions{0, false, true};
}

std::size_t RotatedCohortMatrix::usable_rows() const {
    return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), false));
}

Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& sym, int r, std::uint64_t seed, int max_iter, double tol) {
    const auto d = sym.rows();
    if (r <= 0 || d == 0) {
        return Eigen::MatrixXd(d, 0);
    }
    r = static_cast<int>(std::min<Eigen::Index>(r, d));
    // extra columns make convergence depend on the gap after the block
    const auto b = std::min<Eigen::Index>(d, r + 16);
    Rng rng(seed);
    Eigen::MatrixXd q(d, b);
    for (Eigen::Index j = 0; j < b; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            q(i, j) = standard_normal(rng);
        }
    }
    auto orthonormalize = [&](const Eigen::MatrixXd& m) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
        return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(d, b));
    };
    auto ritz = [&](const Eigen::MatrixXd& basis) {
        Eigen::MatrixXd t = basis.transpose() * sym * basis;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        // ascending eigenvalues; flip to descending
        return Eigen::MatrixXd(basis * es.eigenvectors().rowwise().reverse());
    };
    q = ritz(orthonormalize(q));
    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd next = ritz(orthonormalize(sym * q));
        double change = 0.0;
        for (int j = 0; j < r; ++j) {
            // angle, not 1 - cos, which is quadratic and stops far too early
            change = std::max(change, std::min((next.col(j) - q.col(j)).norm(), (next.col(j) + q.col(j)).norm()));
        }
        q = std::move(next);
        if (change < tol) {
            break;
        }
    }
    Eigen::MatrixXd out = q.leftCols(r);
    // sign convention: largest-magnitude entry positive
    for (int j = 0; j < r; ++j) {
        Eigen::Index arg = 0;
        out.col(j).cwiseAbs().maxCoeff(&arg);
        if (out(arg, j) < 0) {
            out.col(j) *= -1.0;
        }
    }
    return out;
}

RotatedCohortMatrix rotate_cohort(const Eigen::MatrixXd& vectors, const RotationOptions& options) {
    const auto n = vectors.rows();
    if (n < 2) {
        throw Error(ErrorKind::invalid_argument, "cohort needs at least 2 rows, got " + std::to_string(n));
    }
    if (options.removal_rank < 0) {
        throw Error(ErrorKind::invalid_argument, "removal_rank must be >= 0");
    }
    RotatedCohortMatrix out;
    out.removal_rank = options.removal_rank;
    out.centered = vectors;
    if (options.center) {
        const Eigen::RowVectorXd sum = vectors.colwise().sum();
        if (options.include_self_in_mean) {
            out.centered.rowwise() -= sum / static_cast<double>(n);
        } else {
            for (Eigen::Index i = 0; i < n; ++i) {
                out.centered.row(i) = vectors.row(i) - (sum - vectors.row(i)) / static_cast<double>(n - 1);
            }
        }
    }
    Eigen::MatrixXd work = out.centered;
    if (options.removal_rank > 0) {
        const Eigen::MatrixXd cov = out.centered.transpose() * out.centered;
        out.removed = top_eigenvectors(cov, options.removal_rank);
        work -= (work * out.removed) * out.removed.transpose();
    } else {
        out.removed = Eigen::MatrixXd(vectors.cols(), 0);
    }
    out.degenerate.assign(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = work.row(i).norm();
        if (norm < kDegenerateNorm) {
            out.degenerate[static_cast<std::size_t>(i)] = true;
            work.row(i).setZero();
        } else {
            work.row(i) /= norm;
        }
    }
    out.unit = std::move(work);
    return out;
}

std::size_t effective_k(Variant v, std::size_t cohort_size) {
    if (cohort_size < 2) {
        return 0;
    }
    const std::size_t others = cohort_size - 1;
    switch (v) {
        case Variant::knn5: return std::min<std::size_t>(5, others);
        case Variant::knn10: return std::min<std::size_t>(10, others);
        case Variant::pct5: return std::max<std::size_t>(1, (others + 19) / 20);
    }
    return 0;
}

namespace {

constexpr Eigen::Index kBlockRows = 256;

void assign_labels(std::vector<StylizationEntry>& entries) {
    if (entries.empty()) {
        return;
    }
    double lo = entries.front().score;
    double hi = lo;
    double sum = 0.0;
    for (const auto& e : entries) {
        lo = std::min(lo, e.score);
        hi = std::max(hi, e.score);
        sum += e.score;
    }
    // a constant cohort must not label anyone through rounding in the mean
    const double cohort_mean = lo == hi ? lo : sum / static_cast<double>(entries.size());
    for (auto& e : entries) {
        e.cohort_mean = cohort_mean;
        e.label = e.score > cohort_mean ? Label::stylized : Label::popularized;
    }
}

}  // namespace

std::vector<StylizationEntry> score_rotated(const RotatedCohortMatrix& rotated, std::span<const std::string> ids,
                                            Variant variant, int year, const std::string& field) {
    if (ids.size() != static_cast<std::size_t>(rotated.unit.rows())) {
        throw Error(ErrorKind::invalid_argument, "id count does not match matrix rows");
    }
    std::vector<Eigen::Index> usable;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!rotated.degenerate[i]) {
            usable.push_back(static_cast<Eigen::Index>(i));
        }
    }
    const auto m = static_cast<Eigen::Index>(usable.size());
    if (m < 2) {
        throw Error(ErrorKind::data, "cohort " + std::to_string(year) + "/" + field +
                                         " has fewer than 2 non-degenerate rows");
    }
    Eigen::MatrixXd u(m, rotated.unit.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
        u.row(i) = rotated.unit.row(usable[static_cast<std::size_t>(i)]);
    }
    const std::size_t k = effective_k(variant, static_cast<std::size_t>(m));
    std::vector<StylizationEntry> entries(static_cast<std::size_t>(m));
    const auto n_blocks = static_cast<std::size_t>((m + kBlockRows - 1) / kBlockRows);
    parallel_for(n_blocks, [&](std::size_t block) {
        const Eigen::Index start = static_cast<Eigen::Index>(block) * kBlockRows;
        const Eigen::Index rows = std::min(kBlockRows, m - start);
        const Eigen::MatrixXd gram = u.middleRows(start, rows) * u.transpose();
        std::vector<std::pair<double, Eigen::Index>> cand;
        cand.reserve(static_cast<std::size_t>(m));
        for (Eigen::Index r = 0; r < rows; ++r) {
            const Eigen::Index i = start + r;
            cand.clear();
            for (Eigen::Index j = 0; j < m; ++j) {
                if (j != i) {
                    cand.emplace_back(std::max(0.0, 1.0 - gram(r, j)), j);
                }
            }
            std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
            auto& e = entries[static_cast<std::size_t>(i)];
            e.paper_id = ids[static_cast<std::size_t>(usable[static_cast<std::size_t>(i)])];
            e.variant = variant;
            e.cohort_year = year;
            e.cohort_field = field;
            double sum = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                sum += cand[t].first;
                e.neighbor_ids.push_back(ids[static_cast<std::size_t>(usable[static_cast<std::size_t>(cand[t].second)])]);
            }
            e.score = sum / static_cast<double>(k);
        }
    });
    assign_labels(entries);
    return entries;
}

namespace {

Eigen::MatrixXd gather_rows(const Cohort& cohort, const EmbeddingStore& store) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(cohort.members.size()), store.dim());
    for (std::size_t i = 0; i < cohort.members.size(); ++i) {
        auto row = store.row_of(cohort.members[i]);
        if (!row) {
            throw Error(ErrorKind::unknown_key, "no embedding for " + cohort.members[i]);
        }
        auto v = store.row(*row);
        for (std::size_t j = 0; j < v.size(); ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
        }
    }
    return x;
}

}  // namespace

std::vector<StylizationEntry> stylization_scores(const Cohort& cohort, const EmbeddingStore& store, Variant variant,
                                                 const RotationOptions& options) {
    if (cohort.members.size() < 2) {
        throw Error(ErrorKind::invalid_argument, "cohort " + std::to_string(cohort.year) + "/" + cohort.field +
                                                     " has fewer than 2 members");
    }
    if (!std::is_sorted(cohort.members.begin(), cohort.members.end())) {
        throw Error(ErrorKind::invalid_argument, "cohort members must be sorted");
    }
    auto rotated = rotate_cohort(gather_rows(cohort, store), options);
    return score_rotated(rotated, cohort.members, variant, cohort.year, cohort.field);
}

StylizeResult stylize_corpus(const Corpus& corpus, const StylizeOptions& options) {
    StylizeResult result;
    result.unembedded_papers = corpus.size() - corpus.embedded_count();
    const auto* store = corpus.embeddings();
    if (!store) {
        throw Error(ErrorKind::data, "corpus has no embeddings");
    }
    const auto keys = corpus.cohort_keys();
    struct Slot {
        std::vector<StylizationEntry> entries;
        bool skipped = false;
        bool small = false;
        std::size_t degenerate = 0;
    };
    std::vector<Slot> slots(keys.size());
    parallel_for(keys.size(), [&](std::size_t c) {
        auto cohort = cohort_view(corpus, keys[c].year, keys[c].field);
        auto& slot = slots[c];
        if (cohort.members.size() < 2) {
            slot.skipped = true;
            return;
        }
        auto rotated = rotate_cohort(gather_rows(cohort, *store), options.rotation);
        const std::size_t usable = rotated.usable_rows();
        slot.degenerate = cohort.members.size() - usable;
        if (usable < 2) {
            slot.skipped = true;
            return;
        }
        slot.small = usable <= 5;
        for (auto v : options.variants) {
            auto part = score_rotated(rotated, cohort.members, v, cohort.year, cohort.field);
            std::move(part.begin(), part.end(), std::back_inserter(slot.entries));
        }
    });
    for (auto& slot : slots) {
        result.degenerate_rows += slot.degenerate;
        if (slot.skipped) {
            ++result.skipped_cohorts;
            continue;
        }
        ++result.cohorts_scored;
        result.small_cohorts += slot.small ? 1 : 0;
        std::move(slot.entries.begin(), slot.entries.end(), std::back_inserter(result.entries));
    }
    std::stable_sort(result.entries.begin(), result.entries.end(),
                     [](const StylizationEntry& a, const StylizationEntry& b) {
                         return std::tie(a.variant, a.cohort_year, a.cohort_field, a.paper_id) <
                                std::tie(b.variant, b.cohort_year, b.cohort_field, b.paper_id);
                     });
    return result;
}

double paper_score(std::string_view paper_id, std::span<const StylizationEntry> entries, Variant variant) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : entries) {
        if (e.variant == variant && e.paper_id == paper_id) {
            sum += e.score;
            ++n;
        }
    }
    if (n == 0) {
        throw Error(ErrorKind::unknown_key, "no stylization entries for " + std::string(paper_id));
    }
    return sum / static_cast<double>(n);
}

std::vector<PaperScore> paper_scores(std::span<const StylizationEntry> entries) {
    std::vector<const StylizationEntry*> order;
    order.reserve(entries.size());
    for (const auto& e : entries) {
        order.push_back(&e);
    }
    std::stable_sort(order.begin(), order.end(), [](const StylizationEntry* a, const StylizationEntry* b) {
        return std::tie(a->variant, a->paper_id, a->cohort_field) < std::tie(b->variant, b->paper_id, b->cohort_field);
    });
    std::vector<PaperScore> out;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        PaperScore ps;
        ps.paper_id = order[i]->paper_id;
        ps.variant = order[i]->variant;
        ps.year = order[i]->cohort_year;
        double score_sum = 0.0;
        double mean_sum = 0.0;
        while (j < order.size() && order[j]->variant == ps.variant && order[j]->paper_id == ps.paper_id) {
            score_sum += order[j]->score;
            mean_sum += order[j]->cohort_mean;
            ++j;
        }
        ps.n_cohorts = j - i;
        if (ps.n_cohorts == 1) {
            ps.score = order[i]->score;
            ps.reference_mean = order[i]->cohort_mean;
        } else {
            ps.score = score_sum / static_cast<double>(ps.n_cohorts);
            ps.reference_mean = mean_sum / static_cast<double>(ps.n_cohorts);
        }
        ps.label = ps.score > ps.reference_mean ? Label::stylized : Label::popularized;
        out.push_back(std::move(ps));
        i = j;
    }
    return out;
}

std::size_t histogram_bin(double score) {
    if (!(score > 0.0)) {
        return 0;
    }
    auto b = static_cast<long>(std::floor(score / kHistogramWidth));
    // the division can land one bin off near an edge
    if (static_cast<double>(b + 1) * kHistogramWidth <= score) {
        ++b;
    } else if (b > 0 && static_cast<double>(b) * kHistogramWidth > score) {
        --b;
    }
    return static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(kHistogramBins) - 1));
}

std::vector<DecadeRow> decade_distribution(std::span<const StylizationEntry> entries) {
    struct Acc {
        DecadeRow row;
        double sum = 0.0;
        std::map<std::string, std::pair<double, std::size_t>> fields;
    };
    std::map<int, Acc> by_decade;
    for (const auto& e : entries) {
        const int decade = e.cohort_year / 10 * 10;
        auto& acc = by_decade[decade];
        if (acc.row.histogram.empty()) {
            acc.row.decade = decade;
            acc.row.histogram.assign(kHistogramBins, 0);
        }
        ++acc.row.count;
        acc.sum += e.score;
        ++acc.row.histogram[histogram_bin(e.score)];
        auto& f = acc.fields[e.cohort_field];
        f.first += e.score;
        ++f.second;
    }
    std::vector<DecadeRow> out;
    for (auto& [decade, acc] : by_decade) {
        acc.row.mean = acc.sum / static_cast<double>(acc.row.count);
        for (const auto& [field, sn] : acc.fields) {
            acc.row.field_means[field] = sn.first / static_cast<double>(sn.second);
        }
        out.push_back(std::move(acc.row));
    }
    return out;
}

}  // namespace sciline
