#include "attn/metrics.hpp"

#include "attn/csv.hpp"
#include "attn/error.hpp"

#include <cstdio>
#include <fstream>
#include <map>

namespace attn {

std::string_view to_string(Denominator d) { return d == Denominator::talk_time ? "talk_time" : "session_span"; }

Denominator parse_denominator(std::string_view s) {
    if (s == "talk_time") return Denominator::talk_time;
    if (s == "session_span") return Denominator::session_span;
    throw data_error("unknown denominator '" + std::string(s) + "'");
}

double AttentionShares::share(Recipient r) const {
    switch (r) {
    case Recipient::both: return both;
    case Recipient::student_a: return a;
    case Recipient::student_b: return b;
    case Recipient::one_of: return one_of;
    case Recipient::na: break;
    }
    throw std::invalid_argument("AttentionShares::share: NA has no share");
}

AttentionShares compute_shares(const SessionRecord& session, std::span<const LabeledUtterance> labels,
                               Denominator denominator) {
    std::map<std::size_t, const LabeledUtterance*> by_index;
    for (const auto& l : labels) {
        if (l.session_id != session.session_id) continue;
        if (!by_index.emplace(l.utterance_index, &l).second)
            throw data_error("session " + session.session_id + ": utterance " +
                             std::to_string(l.utterance_index) + " labeled more than once");
    }

    std::array<std::array<double, 3>, 4> time{};
    double total = 0.0;
    for (const auto& u : session.utterances) {
        auto it = by_index.find(u.index);
        if (it == by_index.end())
            throw data_error("session " + session.session_id + ": utterance " + std::to_string(u.index) +
                             " has no label");
        const LabeledUtterance& l = *it->second;
        if (l.recipient == Recipient::na)
            throw data_error("session " + session.session_id + ": utterance " + std::to_string(u.index) +
                             " has recipient NA; adjudicate first");
        const double d = u.duration();
        if (d < 0.0) throw data_error("session " + session.session_id + ": negative duration");
        time[index_of(l.recipient)][index_of(l.nature)] += d;
        total += d;
    }
    if (!(total > 0.0)) throw data_error("session " + session.session_id + ": zero total labeled duration");

    AttentionShares s;
    s.session_id = session.session_id;
    s.pair_id = session.pair_id;
    s.total_labeled_time_s = total;
    s.denominator_s = denominator == Denominator::talk_time ? total : session.observed_duration();
    if (!(s.denominator_s > 0.0)) throw data_error("session " + session.session_id + ": zero denominator");

    std::array<double, 4> row_time{};
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t n = 0; n < 3; ++n) {
            row_time[r] += time[r][n];
            s.by_nature[r][n] = time[r][n] / s.denominator_s;
        }
    }
    // Row shares from row time so a == sum of its nature parts up to one rounding.
    s.both = row_time[index_of(Recipient::both)] / s.denominator_s;
    s.a = row_time[index_of(Recipient::student_a)] / s.denominator_s;
    s.b = row_time[index_of(Recipient::student_b)] / s.denominator_s;
    s.one_of = row_time[index_of(Recipient::one_of)] / s.denominator_s;
    return s;
}

RelativeShares shares_by_relative_achievement(const AttentionShares& shares, const PairComposition& comp) {
    if (comp.is_tie()) throw data_error("session " + shares.session_id + ": tied pair has no lower/higher student");
    const Slot lo = comp.lower_slot();
    const Slot hi = lo == Slot::a ? Slot::b : Slot::a;
    RelativeShares r;
    r.lower = shares.student(lo);
    r.higher = shares.student(hi);
    r.lower_minus_higher_pp = 100.0 * (r.lower - r.higher);
    for (Nature n : kNatures) {
        r.lower_by_nature[index_of(n)] = shares.student(lo, n);
        r.higher_by_nature[index_of(n)] = shares.student(hi, n);
    }
    return r;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string serialize_shares(const std::vector<AttentionShares>& shares, const std::vector<SessionRecord>& sessions) {
    std::map<std::string, const SessionRecord*> by_id;
    for (const auto& s : sessions) by_id[s.session_id] = &s;
    std::string out =
        "session_id,pair_id,slot,student_id,share,content,relationship,management,both,one_of,"
        "total_labeled_time_s,denominator_s\n";
    for (const auto& sh : shares) {
        auto it = by_id.find(sh.session_id);
        for (Slot slot : {Slot::a, Slot::b}) {
            std::string sid;
            if (it != by_id.end()) sid = slot == Slot::a ? it->second->student_a_id : it->second->student_b_id;
            out += csv::join_row({sh.session_id, sh.pair_id, slot == Slot::a ? "A" : "B", sid, num(sh.student(slot)),
                                  num(sh.student(slot, Nature::content)), num(sh.student(slot, Nature::relationship)),
                                  num(sh.student(slot, Nature::management)), num(sh.both), num(sh.one_of),
                                  num(sh.total_labeled_time_s), num(sh.denominator_s)});
            out += '\n';
        }
    }
    return out;
}

void write_shares(const std::filesystem::path& path, const std::vector<AttentionShares>& shares,
                  const std::vector<SessionRecord>& sessions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << serialize_shares(shares, sessions);
}

} // namespace attn
