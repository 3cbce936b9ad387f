#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sciline/corpus.hpp"

namespace sciline {

// Covariate order used in every fitted model.
inline const std::vector<std::string> kCovariateNames = {"s",    "ts",      "fs",   "rc",
                                                         "k_mu", "k_theta", "c_mu", "c_theta"};

struct CovariateRow {
    std::string paper_id;
    int year = 0;
    std::string field;  // primary level-1 field: first in sorted order
    std::vector<std::optional<double>> values;  // aligned with kCovariateNames
    std::vector<std::string> missing;           // names of missing cells

    bool complete() const { return missing.empty(); }
    std::optional<double> get(std::string_view name) const;
};

// scores: paper-level stylization per paper id.
std::vector<CovariateRow> build_covariates(const Corpus& corpus, const std::unordered_map<std::string, double>& scores);

struct Design {
    std::string response;
    std::vector<std::string> names;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::string> fe_names;
    std::vector<std::vector<std::string>> fe_levels;  // [dim][row]
    std::vector<std::string> row_ids;
};

// Keeps complete rows that also have a response value. fe may name "year" and "field".
Design build_design(std::span<const CovariateRow> rows, const std::unordered_map<std::string, double>& response,
                    const std::string& response_name, const std::vector<std::string>& fe = {"year", "field"},
                    const std::vector<std::string>& covariates = kCovariateNames);

enum class Model { ols_fe, poisson_pml };
std::string_view to_string(Model m);

struct RegressionResult {
    Model model = Model::ols_fe;
    std::string response;
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::VectorXd p;
    std::size_t n_obs = 0;
    double r2 = 0.0;  // R2 of the demeaned model, or pseudo R2
    std::vector<std::string> fe_names;
    std::vector<std::size_t> fe_groups;
    std::size_t dropped_rows = 0;
    std::vector<std::string> dropped_groups;  // "dim=level"
    std::vector<std::string> separated;       // |beta| > 30
    int iterations = 0;
};

// Two-way (or any-way) fixed effects absorbed by alternating demeaning. Without
// fixed effects an intercept is added.
RegressionResult ols_fe(const Design& design, double demean_tol = 1e-10);

// Alternating-projection demeaning shared with tests.
Eigen::MatrixXd demean(const Eigen::MatrixXd& m, const std::vector<std::vector<int>>& groups,
                       const std::vector<int>& n_groups, double tol);

// Log-link Poisson by IRLS, fixed effects as indicator columns plus intercept.
RegressionResult poisson_pml(const Design& design, int max_iter = 100, double tol = 1e-8);

std::string stars_table(double p);  // + p<0.1, * p<0.05, ** p<0.01, *** p<0.001

struct ModelTable {
    std::string markdown;
    std::string csv;
};

ModelTable model_table(std::span<const RegressionResult> results);

}  // namespace sciline
