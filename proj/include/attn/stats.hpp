#pragma once

#include "attn/corpus.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace attn::stats {

struct TestResult {
    double statistic = 0.0; ///< may be +-inf for zero-variance, nonzero-mean input
    double degrees_of_freedom = 0.0;
    double p_value = 1.0;
    double mean_difference = 0.0;
    double standard_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n = 0;

    bool operator==(const TestResult&) const = default;
};

struct RegressionFit {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> standard_errors;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
    std::vector<double> t_statistics;
    std::vector<double> p_values;
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    double degrees_of_freedom = 0.0; ///< reference t distribution (clusters - 1)
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double residual_se = 0.0;
    std::size_t residual_df = 0;

    /// Index of a named regressor, or throws std::out_of_range.
    std::size_t index(std::string_view name) const;
    double coef(std::string_view name) const { return coefficients[index(name)]; }
    double se(std::string_view name) const { return standard_errors[index(name)]; }

    bool operator==(const RegressionFit&) const = default;
};

struct Design {
    std::vector<std::string> names; ///< one per column of X
    Eigen::MatrixXd X;
    std::vector<double> y;
    std::vector<std::string> clusters;
};

/// Two-sided p-value and critical value of Student's t.
double t_two_sided_p(double t, double df);
double t_critical(double level, double df);

/// One-sample t-test of the mean of `diffs` against zero.
/// Throws stats_error for n < 2.
TestResult paired_t_test(std::span<const double> diffs, double level = 0.95);

/// OLS with CR1 cluster-robust covariance and a t(G-1) reference.
/// Throws stats_error on rank deficiency (naming columns) or a single cluster.
RegressionFit ols_clustered(std::span<const double> y, const Eigen::MatrixXd& X,
                            const std::vector<std::string>& names, std::span<const std::string> clusters,
                            double level = 0.95);
RegressionFit ols_clustered(const Design& d, double level = 0.95);

/// OLS residuals y - X beta for a fitted model (same column order).
Eigen::VectorXd residuals(std::span<const double> y, const Eigen::MatrixXd& X, const RegressionFit& fit);

/// z-scores within each grade using the sample sd. Students without
/// baseline_raw are passed through untouched. Throws stats_error for a grade
/// with fewer than two scored students or zero variance.
std::vector<StudentRecord> standardize_within_grade(std::vector<StudentRecord> students);
Roster standardize_within_grade(const Roster& roster);

/// Significance stars at 0.1 / 0.05 / 0.01.
std::string stars(double p);

/// Text table: estimate with stars, SE in parentheses below, then
/// observations, R^2, adjusted R^2 and residual SE.
std::string render_fit_table(const RegressionFit& fit, const std::string& title, int digits = 3);

} // namespace attn::stats
