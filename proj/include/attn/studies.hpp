#pragma once

#include "attn/classify.hpp"
#include "attn/corpus.hpp"
#include "attn/metrics.hpp"
#include "attn/stats.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace attn::studies {

enum class Aggregation : std::uint8_t {
    pair_mean,       ///< unweighted mean over a pair's sessions, one unit per pair
    pooled_sessions, ///< every session is its own unit
};

enum class Axis : std::uint8_t { gender, race, el };
inline constexpr std::array<Axis, 3> kAxes{Axis::gender, Axis::race, Axis::el};

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view s);
std::string_view to_string(Axis a);

/// Pairing category of one student on one axis, e.g. "female_mixed".
/// The reference categories are male_mixed, nonblack_mixed and nonel_mixed.
std::string student_category(Axis axis, const StudentRecord& self, const PairComposition& comp, Slot slot);
std::string reference_category(Axis axis);
/// The three non-reference categories of an axis, in column order.
std::vector<std::string> dummy_categories(Axis axis);
/// Study 3 cell of a non-tied pair on an axis, e.g. "mixed_female_lower".
std::string pair_cell(Axis axis, const StudentRecord& a, const StudentRecord& b, const PairComposition& comp);
std::vector<std::string> pair_cells(Axis axis);
/// Homogeneous session-level dummies used by the robustness regression.
std::vector<std::string> session_dummies(Axis axis);

struct AnalysisRow {
    std::string session_id;
    std::string pair_id;
    StudentRecord a;
    StudentRecord b;
    PairComposition comp;
    AttentionShares shares;
};

struct Fingerprint {
    std::string corpus_digest;
    std::size_t sessions_total = 0;
    std::size_t sessions_kept = 0;
    std::map<std::string, std::size_t> exclusions;
    std::size_t pairs = 0;
    std::size_t tie_pairs = 0;
    std::size_t utterances = 0;

    bool operator==(const Fingerprint&) const = default;
};

struct StudyInput {
    std::vector<AnalysisRow> rows; ///< kept sessions, sorted by session_id
    Fingerprint fingerprint;
};

/// Joins preprocessed sessions (students linked and standardized) with
/// labels and computes shares for every kept session.
StudyInput prepare(const std::vector<SessionRecord>& sessions, const std::vector<LabeledUtterance>& labels,
                   Denominator denominator = Denominator::talk_time);

/// Raw transcripts and roster in, analysis rows out: standardize within
/// grade, link, trim, exclude, then prepare().
StudyInput ingest(std::vector<SessionRecord> transcripts, const Roster& roster,
                  const std::vector<LabeledUtterance>& labels, Denominator denominator = Denominator::talk_time);

struct Config {
    Aggregation aggregation = Aggregation::pair_mean;
    std::size_t min_cell_pairs = 10;
    double level = 0.95;
    Denominator denominator = Denominator::talk_time;
};

std::map<std::string, std::string> echo(const Config& c);

/// Lower-minus-higher comparison (shares as fractions, not pp).
struct TestEntry {
    std::string key;
    std::string outcome; ///< overall | content | relationship | management
    std::size_t n_units = 0;
    double lower_mean = 0.0;
    double higher_mean = 0.0;
    double lower_se = 0.0;
    double higher_se = 0.0;
    bool low_n = false;
    stats::TestResult test;

    bool operator==(const TestEntry&) const = default;
};

struct FitEntry {
    std::string key;
    std::string outcome;
    stats::RegressionFit fit;

    bool operator==(const FitEntry&) const = default;
};

/// Worst-case reattribution of extra ambiguous time in mixed sessions.
struct BoundEntry {
    std::string key;
    double study2_gap = 0.0;              ///< Study 2 coefficient
    double ambiguity_differential = 0.0;  ///< max(0, largest mixed-minus-homogeneous one_of gap)
    double residual_gap = 0.0;            ///< signed; |residual| <= |study2_gap|

    bool operator==(const BoundEntry&) const = default;
};

struct StudyReport {
    std::string study; ///< study1 | study2 | study3 | robustness
    std::string run_id;
    Fingerprint fingerprint;
    std::map<std::string, std::string> config;
    std::vector<TestEntry> tests;
    std::vector<FitEntry> fits;
    std::vector<BoundEntry> bounds;
    std::vector<std::string> notices;

    bool operator==(const StudyReport&) const = default;
};

/// Unit-level lower-minus-higher differences per outcome (index 0 overall,
/// then natures), tie pairs excluded. Exposed for tests.
struct UnitGaps {
    std::string unit; ///< pair_id or session_id
    std::array<double, 4> lower{};
    std::array<double, 4> higher{};
};
std::vector<UnitGaps> unit_gaps(const std::vector<const AnalysisRow*>& rows, Aggregation aggregation);

StudyReport run_study1(const StudyInput& in, const Config& cfg = {});

/// Rows per (student, session) for one axis and outcome. With strict=true an
/// empty pairing category throws data_error.
stats::Design build_study2_design(const std::vector<AnalysisRow>& rows, Axis axis,
                                  std::optional<Nature> outcome = std::nullopt, bool strict = true);

StudyReport run_study2(const StudyInput& in, const Config& cfg = {});
StudyReport run_study3(const StudyInput& in, const Config& cfg = {});
StudyReport run_robustness(const StudyInput& in, const Config& cfg = {});

struct Estimate {
    std::string key;
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool has_ci = false;
};

/// Flattened estimates with stable keys such as "study1/overall",
/// "study2/gender/overall/female_mixed", "study3/el/el_el/content",
/// "robustness/one_of/male_male", "robustness/bound/gender/female_mixed".
std::vector<Estimate> estimates(const StudyReport& report);

// --- serialization (report_io.cpp) -----------------------------------------

std::string report_to_json(const std::vector<StudyReport>& reports, const std::string& run_id);
std::vector<StudyReport> reports_from_json(std::string_view text);
std::vector<StudyReport> read_report(const std::filesystem::path& path);

/// Writes {run_id}.report.json plus one delimited file per figure,
/// {run_id}.{study}.{figure}.csv. Returns the paths written.
std::vector<std::filesystem::path> emit_report(const std::vector<StudyReport>& reports,
                                               const std::filesystem::path& dir, const std::string& run_id);

/// Figure tables keyed by figure name ("fig2a", ...); first line is the schema header.
std::map<std::string, std::string> figure_tables(const StudyReport& report);

/// Human-readable rendering (Table-5 style for fits).
std::string render_report(const StudyReport& report);

} // namespace attn::studies
