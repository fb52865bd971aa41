#include "attn/studies.hpp"

#include "attn/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace attn::studies {

namespace {

constexpr std::array<std::string_view, 4> kOutcomes{"overall", "content", "relationship", "management"};

std::optional<Nature> outcome_nature(std::size_t o) {
    if (o == 0) return std::nullopt;
    return kNatures[o - 1];
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double sample_se(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

double mean(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

// Bound values are reported to 1e-6 pp so exact arithmetic survives float noise.
double round_bound(double x) { return std::round(x * 1e8) / 1e8; }

std::vector<TestEntry> lower_higher_tests(const std::string& prefix, const std::vector<UnitGaps>& units,
                                          const Config& cfg) {
    std::vector<TestEntry> out;
    for (std::size_t o = 0; o < kOutcomes.size(); ++o) {
        std::vector<double> lo, hi, diff;
        for (const auto& u : units) {
            lo.push_back(u.lower[o]);
            hi.push_back(u.higher[o]);
            diff.push_back(u.lower[o] - u.higher[o]);
        }
        TestEntry e;
        e.key = prefix + "/" + std::string(kOutcomes[o]);
        e.outcome = kOutcomes[o];
        e.n_units = units.size();
        e.lower_mean = mean(lo);
        e.higher_mean = mean(hi);
        e.lower_se = sample_se(lo);
        e.higher_se = sample_se(hi);
        e.low_n = units.size() < cfg.min_cell_pairs;
        e.test = stats::paired_t_test(diff, cfg.level);
        out.push_back(std::move(e));
    }
    return out;
}

StudyReport blank(std::string study, const StudyInput& in, const Config& cfg) {
    StudyReport r;
    r.study = std::move(study);
    r.run_id = in.fingerprint.corpus_digest;
    r.fingerprint = in.fingerprint;
    r.config = echo(cfg);
    return r;
}

} // namespace

std::string_view to_string(Aggregation a) { return a == Aggregation::pair_mean ? "pair_mean" : "pooled_sessions"; }

Aggregation parse_aggregation(std::string_view s) {
    if (s == "pair_mean") return Aggregation::pair_mean;
    if (s == "pooled_sessions") return Aggregation::pooled_sessions;
    throw data_error("unknown aggregation '" + std::string(s) + "'");
}

std::string_view to_string(Axis a) {
    switch (a) {
    case Axis::gender: return "gender";
    case Axis::race: return "race";
    case Axis::el: return "el";
    }
    return "?";
}

std::string student_category(Axis axis, const StudentRecord& self, const PairComposition& comp, Slot) {
    switch (axis) {
    case Axis::gender:
        if (comp.gender_pair == GenderPair::mixed) return self.gender == Gender::female ? "female_mixed" : "male_mixed";
        return comp.gender_pair == GenderPair::female_female ? "female_female" : "male_male";
    case Axis::race:
        if (comp.race_pair == RacePair::mixed) return self.race == Race::black ? "black_mixed" : "nonblack_mixed";
        return comp.race_pair == RacePair::black_black ? "black_black" : "other_other";
    case Axis::el:
        if (comp.el_pair == ElPair::mixed) return self.el_status == ElStatus::el ? "el_mixed" : "nonel_mixed";
        return comp.el_pair == ElPair::el_el ? "el_el" : "nonel_nonel";
    }
    throw std::logic_error("bad axis");
}

std::string reference_category(Axis axis) {
    switch (axis) {
    case Axis::gender: return "male_mixed";
    case Axis::race: return "nonblack_mixed";
    case Axis::el: return "nonel_mixed";
    }
    throw std::logic_error("bad axis");
}

std::vector<std::string> dummy_categories(Axis axis) {
    switch (axis) {
    case Axis::gender: return {"female_mixed", "female_female", "male_male"};
    case Axis::race: return {"black_mixed", "black_black", "other_other"};
    case Axis::el: return {"el_mixed", "el_el", "nonel_nonel"};
    }
    throw std::logic_error("bad axis");
}

std::string pair_cell(Axis axis, const StudentRecord& a, const StudentRecord& b, const PairComposition& comp) {
    if (comp.is_tie()) throw data_error("pair_cell: tied pair has no lower student");
    const StudentRecord& lo = comp.lower_slot() == Slot::a ? a : b;
    switch (axis) {
    case Axis::gender:
        if (comp.gender_pair == GenderPair::mixed)
            return lo.gender == Gender::female ? "mixed_female_lower" : "mixed_male_lower";
        return std::string(to_string(comp.gender_pair));
    case Axis::race:
        if (comp.race_pair == RacePair::mixed) return lo.race == Race::black ? "mixed_black_lower" : "mixed_nonblack_lower";
        return std::string(to_string(comp.race_pair));
    case Axis::el:
        if (comp.el_pair == ElPair::mixed) return lo.el_status == ElStatus::el ? "mixed_el_lower" : "mixed_nonel_lower";
        return std::string(to_string(comp.el_pair));
    }
    throw std::logic_error("bad axis");
}

std::vector<std::string> pair_cells(Axis axis) {
    switch (axis) {
    case Axis::gender: return {"mixed_female_lower", "mixed_male_lower", "female_female", "male_male"};
    case Axis::race: return {"mixed_black_lower", "mixed_nonblack_lower", "black_black", "other_other"};
    case Axis::el: return {"mixed_el_lower", "mixed_nonel_lower", "el_el", "nonel_nonel"};
    }
    throw std::logic_error("bad axis");
}

std::vector<std::string> session_dummies(Axis axis) {
    auto d = dummy_categories(axis);
    return {d[1], d[2]};
}

StudyInput prepare(const std::vector<SessionRecord>& sessions, const std::vector<LabeledUtterance>& labels,
                   Denominator denominator) {
    StudyInput in;
    auto& fp = in.fingerprint;
    fp.corpus_digest = corpus_digest(sessions);
    const ExclusionTally tally = tally_exclusions(sessions);
    fp.sessions_total = tally.total;
    fp.sessions_kept = tally.kept;
    fp.exclusions = tally.by_reason;

    const auto grouped = group_labels(labels);
    const std::vector<LabeledUtterance> none;
    std::set<std::string> pairs, ties;
    for (const auto& s : sessions) {
        if (!s.kept) continue;
        if (!s.student_a || !s.student_b)
            throw data_error("session " + s.session_id + ": students not linked to the roster");
        if (!s.student_a->baseline_z || !s.student_b->baseline_z)
            throw data_error("session " + s.session_id + ": baseline scores not standardized");
        AnalysisRow row;
        row.session_id = s.session_id;
        row.pair_id = s.pair_id;
        row.a = *s.student_a;
        row.b = *s.student_b;
        row.comp = compose(row.a, row.b);
        auto it = grouped.find(s.session_id);
        row.shares = compute_shares(s, it == grouped.end() ? none : it->second, denominator);
        fp.utterances += s.utterances.size();
        pairs.insert(s.pair_id);
        if (row.comp.is_tie()) ties.insert(s.pair_id);
        in.rows.push_back(std::move(row));
    }
    std::sort(in.rows.begin(), in.rows.end(),
              [](const AnalysisRow& x, const AnalysisRow& y) { return x.session_id < y.session_id; });
    fp.pairs = pairs.size();
    fp.tie_pairs = ties.size();
    return in;
}

StudyInput ingest(std::vector<SessionRecord> transcripts, const Roster& roster,
                  const std::vector<LabeledUtterance>& labels, Denominator denominator) {
    const Roster standardized = stats::standardize_within_grade(roster);
    return prepare(preprocess(std::move(transcripts), standardized), labels, denominator);
}

std::map<std::string, std::string> echo(const Config& c) {
    return {{"aggregation", std::string(to_string(c.aggregation))},
            {"denominator", std::string(to_string(c.denominator))},
            {"level", num(c.level)},
            {"min_cell_pairs", std::to_string(c.min_cell_pairs)}};
}

std::vector<UnitGaps> unit_gaps(const std::vector<const AnalysisRow*>& rows, Aggregation aggregation) {
    std::map<std::string, std::pair<UnitGaps, std::size_t>> acc;
    for (const AnalysisRow* r : rows) {
        if (r->comp.is_tie()) continue;
        const RelativeShares rel = shares_by_relative_achievement(r->shares, r->comp);
        const std::string& unit = aggregation == Aggregation::pair_mean ? r->pair_id : r->session_id;
        auto& [g, n] = acc[unit];
        g.unit = unit;
        g.lower[0] += rel.lower;
        g.higher[0] += rel.higher;
        for (std::size_t k = 0; k < 3; ++k) {
            g.lower[k + 1] += rel.lower_by_nature[k];
            g.higher[k + 1] += rel.higher_by_nature[k];
        }
        ++n;
    }
    std::vector<UnitGaps> out;
    out.reserve(acc.size());
    for (auto& [_, gn] : acc) {
        auto& [g, n] = gn;
        for (std::size_t k = 0; k < 4; ++k) {
            g.lower[k] /= static_cast<double>(n);
            g.higher[k] /= static_cast<double>(n);
        }
        out.push_back(std::move(g));
    }
    return out;
}

StudyReport run_study1(const StudyInput& in, const Config& cfg) {
    StudyReport r = blank("study1", in, cfg);
    std::vector<const AnalysisRow*> rows;
    for (const auto& row : in.rows) rows.push_back(&row);
    const auto units = unit_gaps(rows, cfg.aggregation);
    if (units.size() < 2) throw data_error("study1: fewer than 2 non-tied units");
    r.tests = lower_higher_tests("study1", units, cfg);
    if (in.fingerprint.tie_pairs > 0)
        r.notices.push_back(std::to_string(in.fingerprint.tie_pairs) + " tied pair(s) excluded");
    return r;
}

stats::Design build_study2_design(const std::vector<AnalysisRow>& rows, Axis axis, std::optional<Nature> outcome,
                                  bool strict) {
    const std::string ref = reference_category(axis);
    std::vector<std::string> dummies = dummy_categories(axis);
    std::map<std::string, std::size_t> counts;
    for (const auto& r : rows)
        for (Slot slot : {Slot::a, Slot::b})
            ++counts[student_category(axis, slot == Slot::a ? r.a : r.b, r.comp, slot)];
    if (strict) {
        for (const auto& c : std::vector<std::string>{ref, dummies[0], dummies[1], dummies[2]})
            if (counts[c] == 0)
                throw data_error("study2 " + std::string(to_string(axis)) + ": empty pairing category '" + c + "'");
    } else {
        std::erase_if(dummies, [&](const std::string& d) { return counts[d] == 0; });
    }

    stats::Design d;
    d.names.push_back("intercept");
    for (const auto& c : dummies) d.names.push_back(c);
    d.names.insert(d.names.end(), {"own_achievement", "partner_achievement", "lower_achiever"});
    const auto K = static_cast<Eigen::Index>(d.names.size());
    d.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size() * 2), K);
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        for (Slot slot : {Slot::a, Slot::b}) {
            const StudentRecord& self = slot == Slot::a ? r.a : r.b;
            const StudentRecord& partner = slot == Slot::a ? r.b : r.a;
            const std::string cat = student_category(axis, self, r.comp, slot);
            d.X(i, 0) = 1.0;
            for (std::size_t j = 0; j < dummies.size(); ++j)
                if (dummies[j] == cat) d.X(i, static_cast<Eigen::Index>(j + 1)) = 1.0;
            d.X(i, K - 3) = *self.baseline_z;
            d.X(i, K - 2) = *partner.baseline_z;
            d.X(i, K - 1) = r.comp.relative(slot) == RelativeAchievement::lower ? 1.0 : 0.0;
            d.y.push_back(outcome ? r.shares.student(slot, *outcome) : r.shares.student(slot));
            d.clusters.push_back(r.pair_id);
            ++i;
        }
    }
    return d;
}

StudyReport run_study2(const StudyInput& in, const Config& cfg) {
    StudyReport r = blank("study2", in, cfg);
    for (Axis axis : kAxes) {
        for (std::size_t o = 0; o < kOutcomes.size(); ++o) {
            const auto design = build_study2_design(in.rows, axis, outcome_nature(o), true);
            FitEntry f;
            f.key = "study2/" + std::string(to_string(axis)) + "/" + std::string(kOutcomes[o]);
            f.outcome = kOutcomes[o];
            f.fit = stats::ols_clustered(design, cfg.level);
            r.fits.push_back(std::move(f));
        }
    }
    if (in.fingerprint.tie_pairs > 0)
        r.notices.push_back(std::to_string(in.fingerprint.tie_pairs) +
                            " tied pair(s) retained with lower_achiever = 0 for both students");
    return r;
}

StudyReport run_study3(const StudyInput& in, const Config& cfg) {
    StudyReport r = blank("study3", in, cfg);
    for (Axis axis : kAxes) {
        std::map<std::string, std::vector<const AnalysisRow*>> by_cell;
        for (const auto& row : in.rows)
            if (!row.comp.is_tie()) by_cell[pair_cell(axis, row.a, row.b, row.comp)].push_back(&row);
        for (const auto& cell : pair_cells(axis)) {
            auto it = by_cell.find(cell);
            if (it == by_cell.end()) continue;
            const auto units = unit_gaps(it->second, cfg.aggregation);
            const std::string prefix = "study3/" + std::string(to_string(axis)) + "/" + cell;
            if (units.size() < 2) {
                r.notices.push_back(prefix + ": " + std::to_string(units.size()) + " unit(s), skipped");
                continue;
            }
            for (auto& t : lower_higher_tests(prefix, units, cfg)) r.tests.push_back(std::move(t));
        }
    }
    return r;
}

StudyReport run_robustness(const StudyInput& in, const Config& cfg) {
    StudyReport r = blank("robustness", in, cfg);
    if (in.rows.empty()) {
        r.notices.push_back("no sessions");
        return r;
    }

    // Session-level one_of share on homogeneous-pairing dummies; mixed pairings are the baseline.
    std::vector<std::string> names{"intercept"};
    std::vector<std::pair<Axis, std::string>> cols;
    for (Axis axis : kAxes) {
        std::map<std::string, std::size_t> counts;
        std::size_t mixed = 0;
        for (const auto& row : in.rows) {
            const std::string c = student_category(axis, row.a, row.comp, Slot::a);
            if (c.find("_mixed") != std::string::npos)
                ++mixed;
            else
                ++counts[c];
        }
        const std::string ax(to_string(axis));
        if (mixed == 0) {
            r.notices.push_back("robustness: no mixed " + ax + " sessions; " + ax + " dummies dropped");
            continue;
        }
        for (const auto& d : session_dummies(axis)) {
            if (counts[d] == 0) {
                r.notices.push_back("robustness: no " + d + " sessions; dummy dropped");
                continue;
            }
            names.push_back(d);
            cols.emplace_back(axis, d);
        }
    }
    stats::Design d;
    d.names = names;
    d.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(in.rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < in.rows.size(); ++i) {
        const auto& row = in.rows[i];
        const auto ii = static_cast<Eigen::Index>(i);
        d.X(ii, 0) = 1.0;
        for (std::size_t j = 0; j < cols.size(); ++j)
            if (student_category(cols[j].first, row.a, row.comp, Slot::a) == cols[j].second)
                d.X(ii, static_cast<Eigen::Index>(j + 1)) = 1.0;
        d.y.push_back(row.shares.one_of);
        d.clusters.push_back(row.pair_id);
    }
    FitEntry f;
    f.key = "robustness/one_of";
    f.outcome = "one_of";
    try {
        f.fit = stats::ols_clustered(d, cfg.level);
    } catch (const stats_error& e) {
        r.notices.push_back(std::string("robustness: regression not estimable: ") + e.what());
        return r;
    }

    for (Axis axis : kAxes) {
        const std::string ax(to_string(axis));
        double differential = 0.0;
        for (const auto& h : session_dummies(axis)) {
            auto it = std::find(f.fit.names.begin(), f.fit.names.end(), h);
            if (it != f.fit.names.end())
                differential = std::max(differential, -f.fit.coefficients[static_cast<std::size_t>(it - f.fit.names.begin())]);
        }
        const std::string mixed_dummy = dummy_categories(axis)[0];
        stats::RegressionFit s2;
        try {
            s2 = stats::ols_clustered(build_study2_design(in.rows, axis, std::nullopt, false), cfg.level);
        } catch (const stats_error& e) {
            r.notices.push_back("robustness: study2 " + ax + " fit not estimable: " + e.what());
            continue;
        }
        auto it = std::find(s2.names.begin(), s2.names.end(), mixed_dummy);
        if (it == s2.names.end()) {
            r.notices.push_back("robustness: no " + mixed_dummy + " students; no bound for " + ax);
            continue;
        }
        const double beta = s2.coefficients[static_cast<std::size_t>(it - s2.names.begin())];
        BoundEntry b;
        b.key = "robustness/bound/" + ax + "/" + mixed_dummy;
        b.study2_gap = round_bound(beta);
        b.ambiguity_differential = round_bound(differential);
        b.residual_gap = std::copysign(std::max(0.0, std::abs(b.study2_gap) - b.ambiguity_differential), beta);
        b.residual_gap = round_bound(b.residual_gap);
        r.bounds.push_back(std::move(b));
    }
    r.fits.push_back(std::move(f));
    return r;
}

std::vector<Estimate> estimates(const StudyReport& report) {
    std::vector<Estimate> out;
    for (const auto& t : report.tests)
        out.push_back({t.key, t.test.mean_difference, t.test.ci_low, t.test.ci_high, true});
    for (const auto& f : report.fits)
        for (std::size_t j = 0; j < f.fit.names.size(); ++j)
            out.push_back({f.key + "/" + f.fit.names[j], f.fit.coefficients[j], f.fit.ci_low[j], f.fit.ci_high[j], true});
    for (const auto& b : report.bounds) out.push_back({b.key, b.residual_gap, 0.0, 0.0, false});
    return out;
}

std::string render_report(const StudyReport& report) {
    std::ostringstream os;
    auto pp = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%+.2f", 100.0 * v);
        return std::string(buf);
    };
    os << "== " << report.study << " (run " << report.run_id << ") ==\n";
    for (const auto& t : report.tests) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-48s n=%-6zu gap=%s pp  t(%g)=%.2f  p=%.4f%s\n", t.key.c_str(), t.n_units,
                      pp(t.test.mean_difference).c_str(), t.test.degrees_of_freedom, t.test.statistic, t.test.p_value,
                      t.low_n ? "  [low n]" : "");
        os << buf;
    }
    for (const auto& f : report.fits) os << '\n' << stats::render_fit_table(f.fit, f.key);
    for (const auto& b : report.bounds)
        os << b.key << ": gap " << pp(b.study2_gap) << " pp, ambiguity differential " << pp(b.ambiguity_differential)
           << " pp, residual " << pp(b.residual_gap) << " pp\n";
    for (const auto& n : report.notices) os << "note: " << n << '\n';
    return os.str();
}

} // namespace attn::studies
