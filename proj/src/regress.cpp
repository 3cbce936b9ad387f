#include "sciline/regress.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "sciline/common.hpp"

namespace sciline {

std::optional<double> CovariateRow::get(std::string_view name) const {
    for (std::size_t i = 0; i < kCovariateNames.size() && i < values.size(); ++i) {
        if (kCovariateNames[i] == name) {
            return values[i];
        }
    }
    throw Error(ErrorKind::unknown_key, "unknown covariate: " + std::string(name));
}

std::vector<CovariateRow> build_covariates(const Corpus& corpus, const std::unordered_map<std::string, double>& scores) {
    std::unordered_map<std::string, int> first_year;
    for (const auto& p : corpus.papers()) {
        for (const auto& a : p.author_ids) {
            auto [it, inserted] = first_year.emplace(a, p.year);
            if (!inserted) {
                it->second = std::min(it->second, p.year);
            }
        }
    }
    std::vector<CovariateRow> rows;
    rows.reserve(corpus.size());
    for (const auto& p : corpus.papers()) {
        CovariateRow r;
        r.paper_id = p.paper_id;
        r.year = p.year;
        r.values.assign(kCovariateNames.size(), std::nullopt);
        if (auto it = scores.find(p.paper_id); it != scores.end()) {
            r.values[0] = it->second;
        }
        if (!p.author_ids.empty()) {
            r.values[1] = static_cast<double>(p.author_ids.size());
        }
        if (!p.fields_l1.empty()) {
            r.field = p.fields_l1.front();
            r.values[2] = static_cast<double>(field_size(corpus, p.year, r.field));
        }
        r.values[3] = static_cast<double>(p.reference_ids.size());
        std::vector<double> ages;
        for (const auto& ref : p.reference_ids) {
            if (const auto* q = corpus.find(ref)) {
                ages.push_back(static_cast<double>(p.year - q->year));
            }
        }
        if (!ages.empty()) {
            r.values[4] = mean(ages);
            r.values[5] = population_stddev(ages);
        }
        std::vector<double> careers;
        for (const auto& a : p.author_ids) {
            careers.push_back(static_cast<double>(p.year - first_year.at(a)));
        }
        if (!careers.empty()) {
            r.values[6] = mean(careers);
            r.values[7] = population_stddev(careers);
        }
        for (std::size_t i = 0; i < kCovariateNames.size(); ++i) {
            if (!r.values[i]) {
                r.missing.push_back(kCovariateNames[i]);
            }
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

Design build_design(std::span<const CovariateRow> rows, const std::unordered_map<std::string, double>& response,
                    const std::string& response_name, const std::vector<std::string>& fe,
                    const std::vector<std::string>& covariates) {
    for (const auto& f : fe) {
        if (f != "year" && f != "field") {
            throw Error(ErrorKind::invalid_argument, "unknown fixed effect: " + f);
        }
    }
    Design d;
    d.response = response_name;
    d.names = covariates;
    d.fe_names = fe;
    d.fe_levels.resize(fe.size());
    std::vector<std::vector<double>> cells;
    std::vector<double> ys;
    for (const auto& r : rows) {
        auto it = response.find(r.paper_id);
        if (it == response.end() || !std::isfinite(it->second)) {
            continue;
        }
        std::vector<double> xs;
        bool ok = true;
        for (const auto& c : covariates) {
            auto v = r.get(c);
            if (!v) {
                ok = false;
                break;
            }
            xs.push_back(*v);
        }
        if (!ok || (r.field.empty() && std::find(fe.begin(), fe.end(), "field") != fe.end())) {
            continue;
        }
        cells.push_back(std::move(xs));
        ys.push_back(it->second);
        d.row_ids.push_back(r.paper_id);
        for (std::size_t f = 0; f < fe.size(); ++f) {
            d.fe_levels[f].push_back(fe[f] == "year" ? std::to_string(r.year) : r.field);
        }
    }
    d.x.resize(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(covariates.size()));
    d.y.resize(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t j = 0; j < covariates.size(); ++j) {
            d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cells[i][j];
        }
        d.y(static_cast<Eigen::Index>(i)) = ys[i];
    }
    return d;
}

std::string_view to_string(Model m) {
    return m == Model::ols_fe ? "ols_fe" : "poisson_pml";
}

namespace {

struct Encoded {
    std::vector<std::vector<int>> groups;  // [dim][row]
    std::vector<int> n_groups;
    std::vector<std::vector<std::string>> labels;  // [dim][group]
};

Encoded encode(const std::vector<std::vector<std::string>>& levels) {
    Encoded e;
    for (const auto& dim : levels) {
        std::map<std::string, int> ids;
        for (const auto& l : dim) {
            ids.emplace(l, 0);
        }
        int next = 0;
        std::vector<std::string> labels;
        for (auto& [label, id] : ids) {
            id = next++;
            labels.push_back(label);
        }
        std::vector<int> g;
        g.reserve(dim.size());
        for (const auto& l : dim) {
            g.push_back(ids.at(l));
        }
        e.groups.push_back(std::move(g));
        e.n_groups.push_back(next);
        e.labels.push_back(std::move(labels));
    }
    return e;
}

// Names the first column that lies in the span of the ones before it.
void check_rank(const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.leftCols(j + 1));
        qr.setThreshold(1e-10);
        if (qr.rank() < j + 1 || x.col(j).cwiseAbs().maxCoeff() < 1e-12 * scale) {
            throw Error(ErrorKind::collinear, "collinear column: " + names[static_cast<std::size_t>(j)]);
        }
    }
}

double t_two_sided(double t, double df) {
    if (!std::isfinite(t)) {
        return std::nan("");
    }
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double z_two_sided(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

Eigen::MatrixXd demean(const Eigen::MatrixXd& m, const std::vector<std::vector<int>>& groups,
                       const std::vector<int>& n_groups, double tol) {
    Eigen::MatrixXd out = m;
    if (groups.empty()) {
        return out;
    }
    const Eigen::Index n = m.rows();
    for (int it = 0; it < 100000; ++it) {
        double change = 0.0;
        for (std::size_t d = 0; d < groups.size(); ++d) {
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_groups[d], m.cols());
            std::vector<double> counts(static_cast<std::size_t>(n_groups[d]), 0.0);
            for (Eigen::Index i = 0; i < n; ++i) {
                const int g = groups[d][static_cast<std::size_t>(i)];
                sums.row(g) += out.row(i);
                counts[static_cast<std::size_t>(g)] += 1.0;
            }
            for (int g = 0; g < n_groups[d]; ++g) {
                sums.row(g) /= counts[static_cast<std::size_t>(g)];
            }
            change = std::max(change, sums.cwiseAbs().maxCoeff());
            for (Eigen::Index i = 0; i < n; ++i) {
                out.row(i) -= sums.row(groups[d][static_cast<std::size_t>(i)]);
            }
        }
        if (groups.size() == 1 || change < tol) {
            return out;
        }
    }
    throw Error(ErrorKind::non_convergence, "fixed-effect demeaning did not converge");
}

RegressionResult ols_fe(const Design& design, double demean_tol) {
    const Eigen::Index n = design.x.rows();
    if (design.y.size() != n) {
        throw Error(ErrorKind::invalid_argument, "response length differs from design rows");
    }
    RegressionResult res;
    res.model = Model::ols_fe;
    res.response = design.response;
    res.fe_names = design.fe_names;
    const auto enc = encode(design.fe_levels);
    Eigen::MatrixXd x = design.x;
    res.names = design.names;
    if (design.fe_names.empty()) {
        x.conservativeResize(n, x.cols() + 1);
        x.col(x.cols() - 1).setOnes();
        res.names.push_back("(intercept)");
    }
    const Eigen::Index k = x.cols();
    std::size_t absorbed = 0;
    for (int g : enc.n_groups) {
        res.fe_groups.push_back(static_cast<std::size_t>(g));
        absorbed += static_cast<std::size_t>(g);
    }
    if (!enc.n_groups.empty()) {
        absorbed -= enc.n_groups.size() - 1;
    }
    if (static_cast<std::size_t>(n) <= static_cast<std::size_t>(k) + absorbed) {
        throw Error(ErrorKind::invalid_argument, "too few observations for the model");
    }
    Eigen::MatrixXd joint(n, k + 1);
    joint << x, design.y;
    const Eigen::MatrixXd dm = demean(joint, enc.groups, enc.n_groups, demean_tol);
    const Eigen::MatrixXd xd = dm.leftCols(k);
    const Eigen::VectorXd yd = dm.col(k);
    check_rank(xd, res.names);
    const Eigen::MatrixXd xtx = xd.transpose() * xd;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    res.beta = ldlt.solve(xd.transpose() * yd);
    const Eigen::VectorXd e = yd - xd * res.beta;
    const Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        meat.noalias() += (e(i) * e(i)) * xd.row(i).transpose() * xd.row(i);
    }
    const double df = static_cast<double>(n) - static_cast<double>(k) - static_cast<double>(absorbed);
    const Eigen::MatrixXd v = bread * meat * bread * (static_cast<double>(n) / df);
    res.se = v.diagonal().cwiseMax(0.0).cwiseSqrt();
    res.p.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        res.p(j) = t_two_sided(res.beta(j) / res.se(j), df);
    }
    res.n_obs = static_cast<std::size_t>(n);
    const double sst = design.fe_names.empty() ? (yd.array() - yd.mean()).square().sum() : yd.squaredNorm();
    res.r2 = sst > 0.0 ? 1.0 - e.squaredNorm() / sst : 0.0;
    return res;
}

RegressionResult poisson_pml(const Design& design, int max_iter, double tol) {
    RegressionResult res;
    res.model = Model::poisson_pml;
    res.response = design.response;
    res.fe_names = design.fe_names;
    for (Eigen::Index i = 0; i < design.y.size(); ++i) {
        const double y = design.y(i);
        if (y < 0.0 || y != std::floor(y)) {
            throw Error(ErrorKind::invalid_argument, "poisson response must be a nonnegative integer");
        }
    }
    // drop fixed-effect groups whose outcomes are all zero, until none remain
    std::vector<bool> keep(static_cast<std::size_t>(design.y.size()), true);
    std::vector<std::string> dropped;
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t d = 0; d < design.fe_names.size(); ++d) {
            std::map<std::string, double> sums;
            for (std::size_t i = 0; i < keep.size(); ++i) {
                if (keep[i]) {
                    sums[design.fe_levels[d][i]] += design.y(static_cast<Eigen::Index>(i));
                }
            }
            for (const auto& [level, s] : sums) {
                if (s != 0.0) {
                    continue;
                }
                dropped.push_back(design.fe_names[d] + "=" + level);
                changed = true;
                for (std::size_t i = 0; i < keep.size(); ++i) {
                    if (keep[i] && design.fe_levels[d][i] == level) {
                        keep[i] = false;
                    }
                }
            }
        }
    }
    res.dropped_groups = dropped;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) {
            rows.push_back(static_cast<Eigen::Index>(i));
        }
    }
    res.dropped_rows = keep.size() - rows.size();
    const auto n = static_cast<Eigen::Index>(rows.size());
    std::vector<std::vector<std::string>> levels(design.fe_names.size());
    for (std::size_t d = 0; d < levels.size(); ++d) {
        for (auto r : rows) {
            levels[d].push_back(design.fe_levels[d][static_cast<std::size_t>(r)]);
        }
    }
    const auto enc = encode(levels);
    Eigen::Index p = design.x.cols() + 1;
    for (int g : enc.n_groups) {
        p += g - 1;
        res.fe_groups.push_back(static_cast<std::size_t>(g));
    }
    if (n <= p) {
        throw Error(ErrorKind::invalid_argument, "too few observations for the model");
    }
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
    Eigen::VectorXd y(n);
    std::vector<std::string> names = design.names;
    names.push_back("(intercept)");
    for (std::size_t d = 0; d < enc.groups.size(); ++d) {
        for (int g = 1; g < enc.n_groups[d]; ++g) {
            names.push_back(design.fe_names[d] + "=" + enc.labels[d][static_cast<std::size_t>(g)]);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i).head(design.x.cols()) = design.x.row(rows[static_cast<std::size_t>(i)]);
        x(i, design.x.cols()) = 1.0;
        y(i) = design.y(rows[static_cast<std::size_t>(i)]);
        Eigen::Index offset = design.x.cols() + 1;
        for (std::size_t d = 0; d < enc.groups.size(); ++d) {
            const int g = enc.groups[d][static_cast<std::size_t>(i)];
            if (g > 0) {
                x(i, offset + g - 1) = 1.0;
            }
            offset += enc.n_groups[d] - 1;
        }
    }
    check_rank(x, names);

    Eigen::VectorXd mu = y.array() + 0.1;
    Eigen::VectorXd eta = mu.array().log();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    std::vector<double> trace;
    bool converged = false;
    int it = 0;
    for (; it < max_iter; ++it) {
        const Eigen::VectorXd z = eta.array() + (y - mu).array() / mu.array();
        const Eigen::MatrixXd xw = x.array().colwise() * mu.array();
        const Eigen::MatrixXd xtwx = x.transpose() * xw;
        const Eigen::VectorXd next = xtwx.ldlt().solve(xw.transpose() * z);
        const double change = it == 0 ? INFINITY : (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        eta = (x * beta).cwiseMin(700.0);
        mu = eta.array().exp();
        if (it > 0) {
            trace.push_back(change);
            if (change < tol) {
                converged = true;
                ++it;
                break;
            }
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "poisson IRLS did not converge in " << max_iter << " iterations; max |dbeta| by iteration:";
        for (double c : trace) {
            msg << ' ' << format_double(c);
        }
        throw Error(ErrorKind::non_convergence, msg.str());
    }
    res.iterations = it;
    const Eigen::MatrixXd xw = x.array().colwise() * mu.array();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(x.transpose() * xw);
    const Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = y(i) - mu(i);
        meat.noalias() += (r * r) * x.row(i).transpose() * x.row(i);
    }
    const double scale = static_cast<double>(n) / static_cast<double>(n - p);
    const Eigen::MatrixXd v = bread * meat * bread * scale;

    const auto k = design.x.cols() + 1;  // reported: covariates and intercept
    res.names.assign(names.begin(), names.begin() + k);
    res.beta = beta.head(k);
    res.se = v.diagonal().head(k).cwiseMax(0.0).cwiseSqrt();
    res.p.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        res.p(j) = z_two_sided(res.beta(j) / res.se(j));
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        if (std::abs(beta(j)) > 30.0) {
            res.separated.push_back(names[static_cast<std::size_t>(j)]);
        }
    }
    auto deviance = [&](const Eigen::VectorXd& m) {
        double dev = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            dev += (y(i) > 0.0 ? y(i) * std::log(y(i) / m(i)) : 0.0) - (y(i) - m(i));
        }
        return 2.0 * dev;
    };
    const double dev = deviance(mu);
    const double null_dev = deviance(Eigen::VectorXd::Constant(n, y.mean()));
    res.r2 = null_dev > 0.0 ? 1.0 - dev / null_dev : 0.0;
    res.n_obs = static_cast<std::size_t>(n);
    return res;
}

std::string stars_table(double p) {
    if (!std::isfinite(p)) return "";
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    if (p < 0.1) return "+";
    return "";
}

ModelTable model_table(std::span<const RegressionResult> results) {
    if (results.empty()) {
        throw Error(ErrorKind::invalid_argument, "model table needs at least one result");
    }
    std::vector<std::string> rows;
    for (const auto& r : results) {
        for (const auto& nm : r.names) {
            if (std::find(rows.begin(), rows.end(), nm) == rows.end()) {
                rows.push_back(nm);
            }
        }
    }
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{""};
    for (std::size_t m = 0; m < results.size(); ++m) {
        header.push_back("(" + std::to_string(m + 1) + ") " + results[m].response + " " +
                         std::string(to_string(results[m].model)));
    }
    grid.push_back(header);
    for (const auto& nm : rows) {
        std::vector<std::string> coef{nm};
        std::vector<std::string> se{""};
        for (const auto& r : results) {
            auto it = std::find(r.names.begin(), r.names.end(), nm);
            if (it == r.names.end()) {
                coef.emplace_back("");
                se.emplace_back("");
                continue;
            }
            const auto j = static_cast<Eigen::Index>(it - r.names.begin());
            coef.push_back(format_fixed(r.beta(j), 4) + stars_table(r.p(j)));
            se.push_back("(" + format_fixed(r.se(j), 4) + ")");
        }
        grid.push_back(coef);
        grid.push_back(se);
    }
    std::vector<std::string> fe_row{"Fixed effects"};
    std::vector<std::string> n_row{"N"};
    std::vector<std::string> r2_row{"R2 / pseudo R2"};
    for (const auto& r : results) {
        fe_row.push_back(r.fe_names.empty() ? "none" : join(r.fe_names, "+"));
        n_row.push_back(std::to_string(r.n_obs));
        r2_row.push_back(format_fixed(r.r2, 4));
    }
    grid.push_back(fe_row);
    grid.push_back(n_row);
    grid.push_back(r2_row);

    ModelTable out;
    std::ostringstream md;
    std::ostringstream csv;
    CsvWriter writer(csv);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        md << "| " << join(grid[i], " | ") << " |\n";
        if (i == 0) {
            md << '|';
            for (std::size_t c = 0; c < grid[i].size(); ++c) {
                md << (c == 0 ? " --- |" : " ---: |");
            }
            md << '\n';
        }
        writer.row(grid[i]);
    }
    md << "\n+ p<0.1, * p<0.05, ** p<0.01, *** p<0.001. Robust standard errors in parentheses.\n";
    out.markdown = md.str();
    out.csv = csv.str();
    return out;
}

}  // namespace sciline
