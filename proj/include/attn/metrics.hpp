#pragma once

#include "attn/classify.hpp"
#include "attn/corpus.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace attn {

/// What the recipient time is divided by.
enum class Denominator : std::uint8_t {
    talk_time,    ///< total labeled tutor-utterance time (shares sum to 1)
    session_span, ///< observed session duration (shares sum to talk ratio <= 1)
};

std::string_view to_string(Denominator d);
Denominator parse_denominator(std::string_view s);

struct AttentionShares {
    std::string session_id;
    std::string pair_id;
    double a = 0.0;
    double b = 0.0;
    double both = 0.0;
    double one_of = 0.0;
    /// [recipient][nature] shares; each recipient row sums to its share.
    std::array<std::array<double, 3>, 4> by_nature{};
    double total_labeled_time_s = 0.0;
    double denominator_s = 0.0;

    double share(Recipient r) const;
    double student(Slot s) const { return s == Slot::a ? a : b; }
    double student(Slot s, Nature n) const {
        return by_nature[index_of(s == Slot::a ? Recipient::student_a : Recipient::student_b)][index_of(n)];
    }
};

/// Duration-weighted shares. Labels for utterances not present in the session
/// (e.g. trimmed away) are ignored. Throws data_error on a missing or
/// duplicate label, an NA recipient, or zero total duration.
AttentionShares compute_shares(const SessionRecord& session, std::span<const LabeledUtterance> labels,
                               Denominator denominator = Denominator::talk_time);

struct RelativeShares {
    double lower = 0.0;
    double higher = 0.0;
    double lower_minus_higher_pp = 0.0;
    std::array<double, 3> lower_by_nature{};
    std::array<double, 3> higher_by_nature{};
};

/// Throws data_error for a tied pair.
RelativeShares shares_by_relative_achievement(const AttentionShares& shares, const PairComposition& comp);

/// One row per (session, student). Column order:
/// session_id,pair_id,slot,student_id,share,content,relationship,management,
/// both,one_of,total_labeled_time_s,denominator_s
std::string serialize_shares(const std::vector<AttentionShares>& shares,
                             const std::vector<SessionRecord>& sessions);
void write_shares(const std::filesystem::path& path, const std::vector<AttentionShares>& shares,
                  const std::vector<SessionRecord>& sessions);

} // namespace attn
