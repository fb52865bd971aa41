#include "attn/studies.hpp"

#include "attn/csv.hpp"
#include "attn/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace attn::studies {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kReportSchema = "attn-report/1";
constexpr const char* kFigureSchema = "attn-figure/1";

// JSON has no inf/nan; those travel as strings.
json dbl(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double get_dbl(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan") return std::nan("");
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        throw data_error("report: bad number '" + s + "'");
    }
    return j.get<double>();
}

json dbls(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(dbl(x));
    return a;
}

std::vector<double> get_dbls(const json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(get_dbl(x));
    return v;
}

json to_json(const stats::TestResult& t) {
    return json{{"statistic", dbl(t.statistic)}, {"df", dbl(t.degrees_of_freedom)}, {"p_value", dbl(t.p_value)},
                {"mean_difference", dbl(t.mean_difference)}, {"standard_error", dbl(t.standard_error)},
                {"ci_low", dbl(t.ci_low)}, {"ci_high", dbl(t.ci_high)}, {"n", t.n}};
}

stats::TestResult test_from(const json& j) {
    stats::TestResult t;
    t.statistic = get_dbl(j.at("statistic"));
    t.degrees_of_freedom = get_dbl(j.at("df"));
    t.p_value = get_dbl(j.at("p_value"));
    t.mean_difference = get_dbl(j.at("mean_difference"));
    t.standard_error = get_dbl(j.at("standard_error"));
    t.ci_low = get_dbl(j.at("ci_low"));
    t.ci_high = get_dbl(j.at("ci_high"));
    t.n = j.at("n").get<std::size_t>();
    return t;
}

json to_json(const stats::RegressionFit& f) {
    return json{{"names", f.names},
                {"coefficients", dbls(f.coefficients)},
                {"standard_errors", dbls(f.standard_errors)},
                {"ci_low", dbls(f.ci_low)},
                {"ci_high", dbls(f.ci_high)},
                {"t_statistics", dbls(f.t_statistics)},
                {"p_values", dbls(f.p_values)},
                {"n_obs", f.n_obs},
                {"n_clusters", f.n_clusters},
                {"df", dbl(f.degrees_of_freedom)},
                {"r_squared", dbl(f.r_squared)},
                {"adj_r_squared", dbl(f.adj_r_squared)},
                {"residual_se", dbl(f.residual_se)},
                {"residual_df", f.residual_df}};
}

stats::RegressionFit fit_from(const json& j) {
    stats::RegressionFit f;
    f.names = j.at("names").get<std::vector<std::string>>();
    f.coefficients = get_dbls(j.at("coefficients"));
    f.standard_errors = get_dbls(j.at("standard_errors"));
    f.ci_low = get_dbls(j.at("ci_low"));
    f.ci_high = get_dbls(j.at("ci_high"));
    f.t_statistics = get_dbls(j.at("t_statistics"));
    f.p_values = get_dbls(j.at("p_values"));
    f.n_obs = j.at("n_obs").get<std::size_t>();
    f.n_clusters = j.at("n_clusters").get<std::size_t>();
    f.degrees_of_freedom = get_dbl(j.at("df"));
    f.r_squared = get_dbl(j.at("r_squared"));
    f.adj_r_squared = get_dbl(j.at("adj_r_squared"));
    f.residual_se = get_dbl(j.at("residual_se"));
    f.residual_df = j.at("residual_df").get<std::size_t>();
    return f;
}

json to_json(const Fingerprint& f) {
    json ex = json::object();
    for (const auto& [k, v] : f.exclusions) ex[k] = v;
    return json{{"corpus_digest", f.corpus_digest}, {"sessions_total", f.sessions_total},
                {"sessions_kept", f.sessions_kept}, {"exclusions", ex},
                {"pairs", f.pairs},                 {"tie_pairs", f.tie_pairs},
                {"utterances", f.utterances}};
}

Fingerprint fingerprint_from(const json& j) {
    Fingerprint f;
    f.corpus_digest = j.at("corpus_digest").get<std::string>();
    f.sessions_total = j.at("sessions_total").get<std::size_t>();
    f.sessions_kept = j.at("sessions_kept").get<std::size_t>();
    for (const auto& [k, v] : j.at("exclusions").items()) f.exclusions[k] = v.get<std::size_t>();
    f.pairs = j.at("pairs").get<std::size_t>();
    f.tie_pairs = j.at("tie_pairs").get<std::size_t>();
    f.utterances = j.at("utterances").get<std::size_t>();
    return f;
}

json to_json(const StudyReport& r) {
    json tests = json::array();
    for (const auto& t : r.tests)
        tests.push_back(json{{"key", t.key},
                             {"outcome", t.outcome},
                             {"n_units", t.n_units},
                             {"lower_mean", dbl(t.lower_mean)},
                             {"higher_mean", dbl(t.higher_mean)},
                             {"lower_se", dbl(t.lower_se)},
                             {"higher_se", dbl(t.higher_se)},
                             {"low_n", t.low_n},
                             {"test", to_json(t.test)}});
    json fits = json::array();
    for (const auto& f : r.fits) fits.push_back(json{{"key", f.key}, {"outcome", f.outcome}, {"fit", to_json(f.fit)}});
    json bounds = json::array();
    for (const auto& b : r.bounds)
        bounds.push_back(json{{"key", b.key},
                              {"study2_gap", dbl(b.study2_gap)},
                              {"ambiguity_differential", dbl(b.ambiguity_differential)},
                              {"residual_gap", dbl(b.residual_gap)}});
    json cfg = json::object();
    for (const auto& [k, v] : r.config) cfg[k] = v;
    return json{{"study", r.study},   {"run_id", r.run_id}, {"fingerprint", to_json(r.fingerprint)},
                {"config", cfg},      {"tests", tests},     {"fits", fits},
                {"bounds", bounds},   {"notices", r.notices}};
}

StudyReport report_from(const json& j) {
    StudyReport r;
    r.study = j.at("study").get<std::string>();
    r.run_id = j.at("run_id").get<std::string>();
    r.fingerprint = fingerprint_from(j.at("fingerprint"));
    for (const auto& [k, v] : j.at("config").items()) r.config[k] = v.get<std::string>();
    for (const auto& t : j.at("tests")) {
        TestEntry e;
        e.key = t.at("key").get<std::string>();
        e.outcome = t.at("outcome").get<std::string>();
        e.n_units = t.at("n_units").get<std::size_t>();
        e.lower_mean = get_dbl(t.at("lower_mean"));
        e.higher_mean = get_dbl(t.at("higher_mean"));
        e.lower_se = get_dbl(t.at("lower_se"));
        e.higher_se = get_dbl(t.at("higher_se"));
        e.low_n = t.at("low_n").get<bool>();
        e.test = test_from(t.at("test"));
        r.tests.push_back(std::move(e));
    }
    for (const auto& f : j.at("fits"))
        r.fits.push_back({f.at("key").get<std::string>(), f.at("outcome").get<std::string>(), fit_from(f.at("fit"))});
    for (const auto& b : j.at("bounds"))
        r.bounds.push_back({b.at("key").get<std::string>(), get_dbl(b.at("study2_gap")),
                            get_dbl(b.at("ambiguity_differential")), get_dbl(b.at("residual_gap"))});
    r.notices = j.at("notices").get<std::vector<std::string>>();
    return r;
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Table {
public:
    Table(const StudyReport& r, const std::string& figure, std::vector<std::string> header) {
        text_ = std::string("# ") + kFigureSchema + " study=" + r.study + " figure=" + figure + " run_id=" + r.run_id +
                "\n" + csv::join_row(header) + "\n";
    }
    void row(const std::vector<std::string>& fields) { text_ += csv::join_row(fields) + "\n"; }
    std::string str() const { return text_; }

private:
    std::string text_;
};

std::pair<std::string, std::string> split_key(const std::string& key, std::size_t first, std::size_t second) {
    // key "study3/gender/mixed_female_lower/overall": parts by '/'
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string p; std::getline(ss, p, '/');) parts.push_back(p);
    return {parts.at(first), parts.at(second)};
}

} // namespace

std::string report_to_json(const std::vector<StudyReport>& reports, const std::string& run_id) {
    json studies = json::array();
    for (const auto& r : reports) studies.push_back(to_json(r));
    json doc{{"schema", kReportSchema}, {"run_id", run_id}, {"studies", studies}};
    return doc.dump(2) + "\n";
}

std::vector<StudyReport> reports_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw data_error(std::string("report: invalid JSON: ") + e.what());
    }
    if (doc.value("schema", "") != kReportSchema) throw data_error("report: unsupported schema");
    std::vector<StudyReport> out;
    try {
        for (const auto& s : doc.at("studies")) out.push_back(report_from(s));
    } catch (const json::exception& e) {
        throw data_error(std::string("report: malformed: ") + e.what());
    }
    return out;
}

std::vector<StudyReport> read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return reports_from_json(ss.str());
}

std::map<std::string, std::string> figure_tables(const StudyReport& r) {
    std::map<std::string, std::string> out;
    if (r.study == "study1") {
        Table a(r, "fig2a", {"group", "mean", "se", "n"});
        Table b(r, "fig2b", {"nature", "group", "mean", "se", "n"});
        for (const auto& t : r.tests) {
            const auto n = std::to_string(t.n_units);
            if (t.outcome == "overall") {
                a.row({"L", num(t.lower_mean), num(t.lower_se), n});
                a.row({"H", num(t.higher_mean), num(t.higher_se), n});
            } else {
                b.row({t.outcome, "L", num(t.lower_mean), num(t.lower_se), n});
                b.row({t.outcome, "H", num(t.higher_mean), num(t.higher_se), n});
            }
        }
        out["fig2a"] = a.str();
        out["fig2b"] = b.str();
    } else if (r.study == "study2") {
        // One figure per outcome; the reference category is the zero dot.
        std::map<std::string, Table> figs;
        for (const auto& f : r.fits) {
            const auto [axis, outcome] = split_key(f.key, 1, 2);
            const std::string name = outcome == "overall" ? "fig3" : "figA_" + outcome;
            auto it = figs.find(name);
            if (it == figs.end())
                it = figs.emplace(name, Table(r, name, {"axis", "category", "estimate", "se", "ci_low", "ci_high",
                                                        "p_value", "reference"}))
                         .first;
            Axis ax = axis == "gender" ? Axis::gender : axis == "race" ? Axis::race : Axis::el;
            it->second.row({axis, reference_category(ax), "0", "0", "0", "0", "", "1"});
            for (const auto& c : dummy_categories(ax)) {
                auto pos = std::find(f.fit.names.begin(), f.fit.names.end(), c);
                if (pos == f.fit.names.end()) continue;
                const auto j = static_cast<std::size_t>(pos - f.fit.names.begin());
                it->second.row({axis, c, num(f.fit.coefficients[j]), num(f.fit.standard_errors[j]),
                                num(f.fit.ci_low[j]), num(f.fit.ci_high[j]), num(f.fit.p_values[j]), "0"});
            }
        }
        for (auto& [k, t] : figs) out[k] = t.str();
    } else if (r.study == "study3") {
        Table t(r, "fig4", {"axis", "cell", "outcome", "n", "lower_mean", "lower_se", "higher_mean", "higher_se",
                            "gap", "ci_low", "ci_high", "p_value", "low_n"});
        for (const auto& e : r.tests) {
            const auto [axis, cell] = split_key(e.key, 1, 2);
            t.row({axis, cell, e.outcome, std::to_string(e.n_units), num(e.lower_mean), num(e.lower_se),
                   num(e.higher_mean), num(e.higher_se), num(e.test.mean_difference), num(e.test.ci_low),
                   num(e.test.ci_high), num(e.test.p_value), e.low_n ? "1" : "0"});
        }
        out["fig4"] = t.str();
    } else if (r.study == "robustness") {
        Table t(r, "table5", {"term", "estimate", "se", "p_value"});
        for (const auto& f : r.fits)
            for (std::size_t j = 0; j < f.fit.names.size(); ++j)
                t.row({f.fit.names[j], num(f.fit.coefficients[j]), num(f.fit.standard_errors[j]), num(f.fit.p_values[j])});
        out["table5"] = t.str();
        Table b(r, "bound", {"axis", "category", "study2_gap", "ambiguity_differential", "residual_gap"});
        for (const auto& e : r.bounds) {
            const auto [axis, cat] = split_key(e.key, 2, 3);
            b.row({axis, cat, num(e.study2_gap), num(e.ambiguity_differential), num(e.residual_gap)});
        }
        out["bound"] = b.str();
    }
    return out;
}

std::vector<std::filesystem::path> emit_report(const std::vector<StudyReport>& reports,
                                               const std::filesystem::path& dir, const std::string& run_id) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw data_error("cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto write = [&](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw data_error("cannot write " + p.string());
        out << text;
        if (!out) throw data_error("write failed: " + p.string());
        written.push_back(p);
    };
    write(dir / (run_id + ".report.json"), report_to_json(reports, run_id));
    for (const auto& r : reports)
        for (const auto& [fig, text] : figure_tables(r)) write(dir / (run_id + "." + r.study + "." + fig + ".csv"), text);
    return written;
}

} // namespace attn::studies
