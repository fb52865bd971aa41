#include "attn/stats.hpp"

#include "attn/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace attn::stats {

std::size_t RegressionFit::index(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("no regressor named '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names.begin());
}

double t_two_sided_p(double t, double df) {
    if (std::isnan(t)) return 1.0;
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(df);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

double t_critical(double level, double df) {
    boost::math::students_t dist(df);
    return boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
}

TestResult paired_t_test(std::span<const double> diffs, double level) {
    if (diffs.size() < 2) throw stats_error("paired_t_test: need at least two differences");
    const double n = static_cast<double>(diffs.size());
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= n;
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    const double sd = std::sqrt(ss / (n - 1.0));

    TestResult r;
    r.n = diffs.size();
    r.degrees_of_freedom = n - 1.0;
    r.mean_difference = mean;
    r.standard_error = sd / std::sqrt(n);
    if (r.standard_error == 0.0) {
        if (mean == 0.0) {
            r.statistic = 0.0;
            r.p_value = 1.0;
        } else {
            r.statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        r.ci_low = r.ci_high = mean;
        return r;
    }
    r.statistic = mean / r.standard_error;
    r.p_value = t_two_sided_p(r.statistic, r.degrees_of_freedom);
    const double crit = t_critical(level, r.degrees_of_freedom);
    r.ci_low = mean - crit * r.standard_error;
    r.ci_high = mean + crit * r.standard_error;
    return r;
}

RegressionFit ols_clustered(std::span<const double> y, const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                            std::span<const std::string> clusters, double level) {
    const auto N = static_cast<std::size_t>(X.rows());
    const auto K = static_cast<std::size_t>(X.cols());
    if (y.size() != N || clusters.size() != N)
        throw stats_error("ols_clustered: y, X and clusters must have the same number of rows");
    if (names.size() != K) throw stats_error("ols_clustered: one name per column required");
    if (N <= K) throw stats_error("ols_clustered: need more observations than regressors");

    std::map<std::string_view, std::size_t> cluster_index;
    for (const auto& c : clusters) cluster_index.emplace(c, 0);
    const std::size_t G = cluster_index.size();
    if (G < 2) throw stats_error("ols_clustered: at least two clusters required");
    {
        std::size_t g = 0;
        for (auto& [_, idx] : cluster_index) idx = g++;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X.rows(), X.cols());
    qr.setThreshold(1e-10);
    qr.compute(X);
    if (static_cast<std::size_t>(qr.rank()) < K) {
        std::string cols;
        const auto& perm = qr.colsPermutation().indices();
        for (std::size_t i = static_cast<std::size_t>(qr.rank()); i < K; ++i)
            cols += (cols.empty() ? "" : ", ") + names[static_cast<std::size_t>(perm[static_cast<Eigen::Index>(i)])];
        throw stats_error("ols_clustered: design is rank deficient; collinear column(s): " + cols);
    }

    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(N));
    const Eigen::VectorXd beta = qr.solve(yv);
    const Eigen::VectorXd u = yv - X * beta;

    const Eigen::MatrixXd R =
        qr.matrixR().topLeftCorner(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K)).template triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K)));
    const auto& P = qr.colsPermutation();
    const Eigen::MatrixXd bread = P * (Rinv * Rinv.transpose()) * P.transpose();

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(G), static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < N; ++i) {
        const auto g = static_cast<Eigen::Index>(cluster_index.at(clusters[i]));
        scores.row(g) += X.row(static_cast<Eigen::Index>(i)) * u(static_cast<Eigen::Index>(i));
    }
    const Eigen::MatrixXd meat = scores.transpose() * scores;
    const double dG = static_cast<double>(G), dN = static_cast<double>(N), dK = static_cast<double>(K);
    const double c = dG / (dG - 1.0) * (dN - 1.0) / (dN - dK);
    const Eigen::MatrixXd V = c * bread * meat * bread;

    RegressionFit fit;
    fit.names = names;
    fit.n_obs = N;
    fit.n_clusters = G;
    fit.degrees_of_freedom = dG - 1.0;
    fit.residual_df = N - K;
    const double crit = t_critical(level, fit.degrees_of_freedom);
    for (std::size_t j = 0; j < K; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double b = beta(jj);
        const double se = std::sqrt(std::max(0.0, V(jj, jj)));
        double t;
        if (se > 0.0)
            t = b / se;
        else
            t = b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
        fit.coefficients.push_back(b);
        fit.standard_errors.push_back(se);
        fit.t_statistics.push_back(t);
        fit.p_values.push_back(t_two_sided_p(t, fit.degrees_of_freedom));
        fit.ci_low.push_back(b - crit * se);
        fit.ci_high.push_back(b + crit * se);
    }

    bool has_intercept = false;
    for (Eigen::Index j = 0; j < X.cols() && !has_intercept; ++j) {
        const double v0 = X(0, j);
        has_intercept = v0 != 0.0 && (X.col(j).array() == v0).all();
    }
    const double rss = u.squaredNorm();
    double tss = 0.0;
    if (has_intercept) {
        const double ybar = yv.mean();
        tss = (yv.array() - ybar).square().sum();
    } else {
        tss = yv.squaredNorm();
    }
    fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : (rss == 0.0 ? 1.0 : 0.0);
    const double df_total = has_intercept ? dN - 1.0 : dN;
    fit.adj_r_squared = 1.0 - (1.0 - fit.r_squared) * df_total / (dN - dK);
    fit.residual_se = std::sqrt(rss / (dN - dK));
    return fit;
}

RegressionFit ols_clustered(const Design& d, double level) {
    return ols_clustered(d.y, d.X, d.names, d.clusters, level);
}

Eigen::VectorXd residuals(std::span<const double> y, const Eigen::MatrixXd& X, const RegressionFit& fit) {
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::Map<const Eigen::VectorXd> beta(fit.coefficients.data(),
                                                 static_cast<Eigen::Index>(fit.coefficients.size()));
    return yv - X * beta;
}

std::vector<StudentRecord> standardize_within_grade(std::vector<StudentRecord> students) {
    std::map<Grade, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < students.size(); ++i)
        if (students[i].baseline_raw) groups[students[i].grade].push_back(i);
    for (const auto& [grade, idx] : groups) {
        const std::string g(to_string(grade));
        if (idx.size() < 2) throw stats_error("standardize_within_grade: grade " + g + " has fewer than two scored students");
        double mean = 0.0;
        for (auto i : idx) mean += *students[i].baseline_raw;
        mean /= static_cast<double>(idx.size());
        double ss = 0.0;
        for (auto i : idx) ss += (*students[i].baseline_raw - mean) * (*students[i].baseline_raw - mean);
        const double sd = std::sqrt(ss / static_cast<double>(idx.size() - 1));
        if (!(sd > 0.0)) throw stats_error("standardize_within_grade: grade " + g + " has zero variance");
        for (auto i : idx) students[i].baseline_z = (*students[i].baseline_raw - mean) / sd;
    }
    return students;
}

Roster standardize_within_grade(const Roster& roster) {
    std::vector<StudentRecord> v;
    v.reserve(roster.size());
    for (const auto& [_, s] : roster) v.push_back(s);
    Roster out;
    for (auto& s : standardize_within_grade(std::move(v))) {
        auto id = s.student_id;
        out.emplace(std::move(id), std::move(s));
    }
    return out;
}

std::string stars(double p) {
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

std::string render_fit_table(const RegressionFit& fit, const std::string& title, int digits) {
    auto fmt = [&](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", digits, v);
        return std::string(buf);
    };
    std::size_t width = 24;
    for (const auto& n : fit.names) width = std::max(width, n.size() + 2);
    std::ostringstream os;
    auto row = [&](const std::string& l, const std::string& r) {
        os << l << std::string(width > l.size() ? width - l.size() : 1, ' ') << r << '\n';
    };
    const std::string rule(width + 20, '-');
    os << title << '\n' << rule << '\n';
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        row(fit.names[j], fmt(fit.coefficients[j]) + stars(fit.p_values[j]));
        row("", "(" + fmt(fit.standard_errors[j]) + ")");
    }
    os << rule << '\n';
    row("Observations", std::to_string(fit.n_obs));
    row("Clusters", std::to_string(fit.n_clusters));
    row("R^2", fmt(fit.r_squared));
    row("Adjusted R^2", fmt(fit.adj_r_squared));
    row("Residual Std. Error", fmt(fit.residual_se) + " (df = " + std::to_string(fit.residual_df) + ")");
    os << rule << '\n';
    os << "Note: *p<0.1; **p<0.05; ***p<0.01\n";
    return os.str();
}

} // namespace attn::stats
