#pragma once

#include "attn/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace attn {

inline constexpr std::string_view kStudentA = "[Student A]";
inline constexpr std::string_view kStudentB = "[Student B]";

struct Utterance {
    std::size_t index = 0; ///< ordinal within the session as recorded in the transcript
    double start_s = 0.0;
    double end_s = 0.0;
    std::string text;

    double duration() const { return end_s - start_s; }
    bool operator==(const Utterance&) const = default;
};

struct StudentRecord {
    std::string student_id;
    Gender gender = Gender::female;
    Race race = Race::non_black;
    std::string race_detail; ///< optional finer label, empty when absent
    ElStatus el_status = ElStatus::non_el;
    Grade grade = Grade::K;
    std::optional<double> baseline_raw;
    std::optional<double> baseline_z;

    bool operator==(const StudentRecord&) const = default;
};

struct SessionRecord {
    std::string session_id;
    std::string pair_id;
    std::string student_a_id;
    std::string student_b_id;
    double planned_duration_s = 0.0;
    double entry_a_s = 0.0;
    double entry_b_s = 0.0;
    std::vector<Utterance> utterances;

    std::optional<StudentRecord> student_a;
    std::optional<StudentRecord> student_b;
    bool kept = true;
    std::string exclusion_reason; ///< empty iff kept

    /// Last utterance end minus first utterance start; 0 without utterances.
    double observed_duration() const;
    bool operator==(const SessionRecord&) const = default;
};

enum class GenderPair : std::uint8_t { mixed, female_female, male_male };
enum class RacePair : std::uint8_t { mixed, black_black, other_other };
enum class ElPair : std::uint8_t { mixed, el_el, nonel_nonel };
enum class RelativeAchievement : std::uint8_t { lower, higher, tie };

std::string_view to_string(GenderPair p);
std::string_view to_string(RacePair p);
std::string_view to_string(ElPair p);
std::string_view to_string(RelativeAchievement r);

struct PairComposition {
    GenderPair gender_pair = GenderPair::mixed;
    RacePair race_pair = RacePair::mixed;
    ElPair el_pair = ElPair::mixed;
    RelativeAchievement relative_a = RelativeAchievement::tie;
    RelativeAchievement relative_b = RelativeAchievement::tie;

    bool is_tie() const { return relative_a == RelativeAchievement::tie; }
    /// Slot of the lower-achieving student; only valid when !is_tie().
    Slot lower_slot() const { return relative_a == RelativeAchievement::lower ? Slot::a : Slot::b; }
    RelativeAchievement relative(Slot s) const { return s == Slot::a ? relative_a : relative_b; }
    bool operator==(const PairComposition&) const = default;
};

/// Requires baseline_z on both students.
PairComposition compose(const StudentRecord& a, const StudentRecord& b);

/// Canonical cluster key for a dyad: the two ids sorted and joined by '+'.
std::string canonical_pair_id(std::string_view id1, std::string_view id2);

// --- transcript file -------------------------------------------------------

/// Parse one transcript line. Throws parse_error with `line_no`.
SessionRecord parse_transcript_line(std::string_view line, std::size_t line_no,
                                    const std::string& source = "<memory>");
/// Canonical single-line encoding of the transcript fields (no roster data,
/// no kept flag). Parsing the result yields an equal transcript.
std::string serialize_transcript(const SessionRecord& s);

std::vector<SessionRecord> load_transcripts(const std::filesystem::path& path);
std::vector<SessionRecord> parse_transcripts(std::string_view text,
                                             const std::string& source = "<memory>");
void write_transcripts(const std::filesystem::path& path, const std::vector<SessionRecord>& sessions);

/// 64-bit FNV-1a over the canonical transcript lines of `sessions` sorted by
/// session_id, rendered as 16 hex digits.
std::string corpus_digest(const std::vector<SessionRecord>& sessions);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// --- roster ----------------------------------------------------------------

using Roster = std::map<std::string, StudentRecord>;

Roster load_roster(const std::filesystem::path& path);
Roster parse_roster(std::string_view text, const std::string& source = "<memory>");
void write_roster(const std::filesystem::path& path, const Roster& roster);

/// Attaches student records. Sessions missing either student are marked
/// kept=false with reason "unmatched_metadata".
std::vector<SessionRecord> link_roster(std::vector<SessionRecord> sessions, const Roster& roster);

// --- preprocessing ---------------------------------------------------------

/// Drops utterances that start before both students have entered.
SessionRecord trim_to_copresence(SessionRecord session);

/// Marks sessions whose observed duration is below half the planned length.
SessionRecord apply_exclusions(SessionRecord session);

struct ExclusionTally {
    std::size_t total = 0;
    std::size_t kept = 0;
    std::map<std::string, std::size_t> by_reason;
};

ExclusionTally tally_exclusions(const std::vector<SessionRecord>& sessions);

/// link -> trim -> exclusions, sorted by session_id.
std::vector<SessionRecord> preprocess(std::vector<SessionRecord> sessions, const Roster& roster);

// --- splits and summaries --------------------------------------------------

struct SplitSizes {
    std::size_t train = 0, validation = 0, test = 0;
};

/// Sizes by largest-remainder rounding of n * ratios.
SplitSizes split_sizes(std::size_t n, const std::array<double, 3>& ratios);

template <typename T>
struct Split {
    std::vector<T> train, validation, test;
};

/// Deterministic shuffled partition; throws data_error if ratios do not sum to 1.
template <typename T>
Split<T> split_dataset(const std::vector<T>& items, const std::array<double, 3>& ratios,
                       std::uint64_t seed);

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

std::size_t word_count(std::string_view text);

struct MeasureSummary {
    std::string measure;
    std::size_t n = 0;
    double total = 0.0;
    double mean = 0.0;
    std::optional<double> sd; ///< sample sd, absent when n < 2
};

struct CorpusSummary {
    MeasureSummary duration_s;
    MeasureSummary words;
    MeasureSummary utterances;
};

/// Summary over the given sessions (callers filter on `kept`). Throws on empty input.
CorpusSummary describe_corpus(const std::vector<SessionRecord>& sessions);

// --- implementation of the template ----------------------------------------

template <typename T>
Split<T> split_dataset(const std::vector<T>& items, const std::array<double, 3>& ratios,
                       std::uint64_t seed) {
    const SplitSizes sizes = split_sizes(items.size(), ratios);
    const auto order = shuffled_indices(items.size(), seed);
    Split<T> out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const T& item = items[order[i]];
        if (i < sizes.train)
            out.train.push_back(item);
        else if (i < sizes.train + sizes.validation)
            out.validation.push_back(item);
        else
            out.test.push_back(item);
    }
    return out;
}

} // namespace attn
