#pragma once

#include "attn/classify.hpp"
#include "attn/corpus.hpp"
#include "attn/studies.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace attn::synth {

/// Effects on one demographic axis, in percentage points.
struct AxisEffects {
    /// Individual-share offset per student category, ordered as
    /// studies::dummy_categories(axis); the reference category sits at 0.
    std::array<double, 3> level{};
    /// Added to the lower-achiever bonus, per pair composition
    /// [mixed, first homogeneous, second homogeneous].
    std::array<double, 3> gap{};
    /// one_of offset of the two homogeneous compositions against mixed.
    std::array<double, 2> ambiguity{};
};

struct Noise {
    // Normal draws truncated at +-3 sd, in pp.
    double student_sd = 0.4; ///< persistent per student
    double session_sd = 0.4; ///< per student and session
    double pair_sd = 0.4;    ///< splits the within-pair gap
    double one_of_sd = 0.4;  ///< per session
    /// Draw every recipient/nature label independently. When false, label
    /// counts are stratified and durations rescaled so each session hits its
    /// target shares exactly.
    bool iid_labels = true;
};

struct GeneratorConfig {
    std::size_t n_pairs = 200;
    std::size_t sessions_per_pair = 1;

    double planned_duration_s = 1200.0;
    double mean_span_s = 1068.0;
    double sd_span_s = 180.0;
    double min_span_fraction = 0.55; ///< of planned; keeps sessions above the exclusion line
    double mean_utterances = 220.0;
    double sd_utterances = 40.0;
    double median_utterance_s = 2.5; ///< log-normal, clipped to [1, 60]
    double log_sd_utterance = 0.8;
    double max_entry_gap_s = 30.0;

    double p_female = 0.5;
    double p_black = 0.5;
    double p_el = 0.5;
    std::array<double, 3> grade_weights{1.0, 1.0, 1.0};
    std::array<double, 3> grade_mean{40.0, 80.0, 120.0};
    std::array<double, 3> grade_sd{15.0, 25.0, 35.0};

    double base_both = 30.0;   ///< pp, all-mixed session
    double base_one_of = 15.0; ///< pp, all-mixed session
    double lower_bonus = 0.0;  ///< pp
    std::array<double, 3> lower_bonus_by_nature{}; ///< pp, must sum to lower_bonus
    AxisEffects gender, race, el;
    std::array<double, 3> nature_mix{0.6, 0.15, 0.25};        ///< individual attention
    std::array<double, 3> shared_nature_mix{0.6, 0.15, 0.25}; ///< both and one_of

    Noise noise;
    double name_rate = 0.6; ///< chance an addressed utterance names its recipient
    bool emit_text = true;
    std::uint64_t seed = 1;

    /// Effect sizes taken from the published results, with 0.5 marginals for power.
    static GeneratorConfig paper();
    /// All planted effects zero.
    static GeneratorConfig null();
};

/// Planted estimands keyed like studies::estimates(), as fractions.
struct TruthRecord {
    std::string run_id;
    std::map<std::string, double> estimands;
};

struct SyntheticCorpus {
    std::vector<SessionRecord> sessions; ///< transcript fields only, sorted by session_id
    Roster roster;                       ///< baseline_raw only
    std::vector<LabeledUtterance> labels;
    TruthRecord truth;
};

/// Throws data_error if any share can leave [0, 1] or a mixture is not a simplex.
void validate(const GeneratorConfig& c);

/// Deterministic for fixed config; `jobs` never changes the output.
SyntheticCorpus generate(const GeneratorConfig& c, unsigned jobs = 1);

/// Expected value of every estimand under the generating model.
std::map<std::string, double> expected_estimands(const GeneratorConfig& c);

struct Verdict {
    std::string key;
    double truth = 0.0;
    double estimate = 0.0;
    double deviation = 0.0; ///< estimate - truth
    double tolerance = 0.0;
    bool pass = false;
    bool found = false;
    bool has_ci = false;
    bool covered = false;
};

/// Compares every planted estimand with the reports. Tolerances are fractions;
/// `overrides` maps key prefixes to tolerances (longest prefix wins).
/// Throws data_error if a report's run_id differs from the truth's.
std::vector<Verdict> truth_check(const TruthRecord& truth, const std::vector<studies::StudyReport>& reports,
                                 double tolerance, const std::map<std::string, double>& overrides = {});

std::string config_to_json(const GeneratorConfig& c);
/// Fields absent from `text` keep their value in `base`.
GeneratorConfig config_from_json(std::string_view text, GeneratorConfig base = GeneratorConfig::paper());

std::string truth_to_json(const TruthRecord& t, const GeneratorConfig& c);
TruthRecord truth_from_json(std::string_view text);

/// Writes transcripts.jsonl, roster.csv, gold.csv and truth.json into dir.
void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus, const GeneratorConfig& c);

} // namespace attn::synth
