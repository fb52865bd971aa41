#include "attn/corpus.hpp"

#include "attn/csv.hpp"
#include "attn/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace attn {

using ordered_json = nlohmann::ordered_json;

double SessionRecord::observed_duration() const {
    if (utterances.empty()) return 0.0;
    return utterances.back().end_s - utterances.front().start_s;
}

std::string_view to_string(GenderPair p) {
    switch (p) {
    case GenderPair::mixed: return "mixed";
    case GenderPair::female_female: return "female_female";
    case GenderPair::male_male: return "male_male";
    }
    return "?";
}

std::string_view to_string(RacePair p) {
    switch (p) {
    case RacePair::mixed: return "mixed";
    case RacePair::black_black: return "black_black";
    case RacePair::other_other: return "other_other";
    }
    return "?";
}

std::string_view to_string(ElPair p) {
    switch (p) {
    case ElPair::mixed: return "mixed";
    case ElPair::el_el: return "el_el";
    case ElPair::nonel_nonel: return "nonel_nonel";
    }
    return "?";
}

std::string_view to_string(RelativeAchievement r) {
    switch (r) {
    case RelativeAchievement::lower: return "lower";
    case RelativeAchievement::higher: return "higher";
    case RelativeAchievement::tie: return "tie";
    }
    return "?";
}

PairComposition compose(const StudentRecord& a, const StudentRecord& b) {
    if (!a.baseline_z || !b.baseline_z)
        throw data_error("compose: baseline_z missing for " +
                         (a.baseline_z ? b.student_id : a.student_id));
    PairComposition c;
    if (a.gender != b.gender)
        c.gender_pair = GenderPair::mixed;
    else
        c.gender_pair = a.gender == Gender::female ? GenderPair::female_female : GenderPair::male_male;
    if (a.race != b.race)
        c.race_pair = RacePair::mixed;
    else
        c.race_pair = a.race == Race::black ? RacePair::black_black : RacePair::other_other;
    if (a.el_status != b.el_status)
        c.el_pair = ElPair::mixed;
    else
        c.el_pair = a.el_status == ElStatus::el ? ElPair::el_el : ElPair::nonel_nonel;

    const double za = *a.baseline_z, zb = *b.baseline_z;
    if (za < zb) {
        c.relative_a = RelativeAchievement::lower;
        c.relative_b = RelativeAchievement::higher;
    } else if (zb < za) {
        c.relative_a = RelativeAchievement::higher;
        c.relative_b = RelativeAchievement::lower;
    }
    return c;
}

std::string canonical_pair_id(std::string_view id1, std::string_view id2) {
    if (id2 < id1) std::swap(id1, id2);
    std::string out(id1);
    out += '+';
    out += id2;
    return out;
}

// --- transcript ------------------------------------------------------------

namespace {

double required_number(const ordered_json& obj, const char* key, const std::string& where,
                       const std::string& source, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null())
        throw parse_error(source, line_no, where + ": missing field '" + key + "'");
    if (!it->is_number())
        throw parse_error(source, line_no, where + ": field '" + key + "' is not a number");
    const double v = it->get<double>();
    if (!std::isfinite(v))
        throw parse_error(source, line_no, where + ": field '" + key + "' is not finite");
    return v;
}

std::string required_string(const ordered_json& obj, const char* key, const std::string& where,
                            const std::string& source, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        throw parse_error(source, line_no, where + ": missing string field '" + key + "'");
    return it->get<std::string>();
}

} // namespace

SessionRecord parse_transcript_line(std::string_view line, std::size_t line_no,
                                    const std::string& source) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(source, line_no, std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) throw parse_error(source, line_no, "record is not an object");

    SessionRecord s;
    s.session_id = required_string(j, "session_id", "record", source, line_no);
    const std::string where = "session " + s.session_id;
    s.student_a_id = required_string(j, "student_a", where, source, line_no);
    s.student_b_id = required_string(j, "student_b", where, source, line_no);
    if (s.student_a_id == s.student_b_id)
        throw parse_error(source, line_no, where + ": student_a and student_b are identical");
    if (auto it = j.find("pair_id"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw parse_error(source, line_no, where + ": pair_id is not a string");
        s.pair_id = it->get<std::string>();
    } else {
        s.pair_id = canonical_pair_id(s.student_a_id, s.student_b_id);
    }
    s.planned_duration_s = required_number(j, "planned_duration_s", where, source, line_no);
    s.entry_a_s = required_number(j, "entry_a_s", where, source, line_no);
    s.entry_b_s = required_number(j, "entry_b_s", where, source, line_no);

    auto ut = j.find("utterances");
    if (ut == j.end() || !ut->is_array())
        throw parse_error(source, line_no, where + ": missing array 'utterances'");
    s.utterances.reserve(ut->size());
    std::size_t pos = 0;
    for (const auto& u : *ut) {
        const std::string uwhere = where + " utterance " + std::to_string(pos);
        if (!u.is_object()) throw parse_error(source, line_no, uwhere + ": not an object");
        Utterance x;
        x.start_s = required_number(u, "start_s", uwhere, source, line_no);
        x.end_s = required_number(u, "end_s", uwhere, source, line_no);
        x.text = required_string(u, "text", uwhere, source, line_no);
        if (x.start_s < 0.0) throw parse_error(source, line_no, uwhere + ": negative start_s");
        if (x.end_s < x.start_s) throw parse_error(source, line_no, uwhere + ": end_s < start_s");
        x.index = pos++;
        s.utterances.push_back(std::move(x));
    }
    std::stable_sort(s.utterances.begin(), s.utterances.end(),
                     [](const Utterance& l, const Utterance& r) { return l.start_s < r.start_s; });
    for (std::size_t i = 0; i < s.utterances.size(); ++i) {
        if (i > 0 && s.utterances[i].start_s < s.utterances[i - 1].end_s)
            throw parse_error(source, line_no,
                              where + ": utterances " + std::to_string(s.utterances[i - 1].index) +
                                  " and " + std::to_string(s.utterances[i].index) + " overlap");
    }
    for (std::size_t i = 0; i < s.utterances.size(); ++i) s.utterances[i].index = i;
    return s;
}

std::string serialize_transcript(const SessionRecord& s) {
    ordered_json j;
    j["session_id"] = s.session_id;
    j["pair_id"] = s.pair_id;
    j["student_a"] = s.student_a_id;
    j["student_b"] = s.student_b_id;
    j["planned_duration_s"] = s.planned_duration_s;
    j["entry_a_s"] = s.entry_a_s;
    j["entry_b_s"] = s.entry_b_s;
    auto& arr = j["utterances"] = ordered_json::array();
    for (const auto& u : s.utterances)
        arr.push_back(ordered_json{{"start_s", u.start_s}, {"end_s", u.end_s}, {"text", u.text}});
    return j.dump();
}

std::vector<SessionRecord> parse_transcripts(std::string_view text, const std::string& source) {
    std::vector<SessionRecord> out;
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = (nl == std::string_view::npos) ? text.size() : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        out.push_back(parse_transcript_line(line, line_no, source));
    }
    return out;
}

std::vector<SessionRecord> load_transcripts(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_transcripts(ss.str(), path.string());
}

void write_transcripts(const std::filesystem::path& path, const std::vector<SessionRecord>& sessions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    for (const auto& s : sessions) out << serialize_transcript(s) << '\n';
    if (!out) throw data_error("write failed: " + path.string());
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string corpus_digest(const std::vector<SessionRecord>& sessions) {
    std::vector<const SessionRecord*> order;
    order.reserve(sessions.size());
    for (const auto& s : sessions) order.push_back(&s);
    std::sort(order.begin(), order.end(),
              [](const SessionRecord* l, const SessionRecord* r) { return l->session_id < r->session_id; });
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* s : order) {
        h = fnv1a64(serialize_transcript(*s), h);
        h = fnv1a64("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// --- roster ----------------------------------------------------------------

Roster parse_roster(std::string_view text, const std::string& source) {
    const auto t = csv::parse(text, source);
    const auto c_id = t.column("student_id"), c_gender = t.column("gender"), c_race = t.column("race"),
               c_el = t.column("el_status"), c_grade = t.column("grade"),
               c_raw = t.column("baseline_raw");
    const bool has_detail = t.has_column("race_detail");
    const std::size_t c_detail = has_detail ? t.column("race_detail") : 0;

    Roster roster;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.line_numbers[r];
        StudentRecord s;
        try {
            s.student_id = row[c_id];
            if (s.student_id.empty()) throw data_error("empty student_id");
            s.gender = parse_gender(row[c_gender]);
            s.race = parse_race(row[c_race]);
            s.el_status = parse_el_status(row[c_el]);
            s.grade = parse_grade(row[c_grade]);
            if (has_detail) s.race_detail = row[c_detail];
            if (!row[c_raw].empty()) {
                std::size_t used = 0;
                const double v = std::stod(row[c_raw], &used);
                if (used != row[c_raw].size() || !std::isfinite(v))
                    throw data_error("bad baseline_raw '" + row[c_raw] + "'");
                s.baseline_raw = v;
            }
        } catch (const parse_error&) {
            throw;
        } catch (const std::exception& e) {
            throw parse_error(source, line, e.what());
        }
        if (roster.count(s.student_id))
            throw parse_error(source, line, "duplicate student_id '" + s.student_id + "'");
        roster.emplace(s.student_id, std::move(s));
    }
    return roster;
}

Roster load_roster(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_roster(ss.str(), path.string());
}

void write_roster(const std::filesystem::path& path, const Roster& roster) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << "student_id,gender,race,el_status,grade,baseline_raw,race_detail\n";
    for (const auto& [id, s] : roster) {
        std::string raw;
        if (s.baseline_raw) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", *s.baseline_raw);
            raw = buf;
        }
        out << csv::join_row({id, std::string(to_string(s.gender)), std::string(to_string(s.race)),
                              std::string(to_string(s.el_status)), std::string(to_string(s.grade)), raw,
                              s.race_detail})
            << '\n';
    }
}

std::vector<SessionRecord> link_roster(std::vector<SessionRecord> sessions, const Roster& roster) {
    for (auto& s : sessions) {
        auto ia = roster.find(s.student_a_id);
        auto ib = roster.find(s.student_b_id);
        if (ia == roster.end() || ib == roster.end()) {
            s.student_a.reset();
            s.student_b.reset();
            s.kept = false;
            s.exclusion_reason = "unmatched_metadata";
            continue;
        }
        s.student_a = ia->second;
        s.student_b = ib->second;
    }
    return sessions;
}

// --- preprocessing ---------------------------------------------------------

SessionRecord trim_to_copresence(SessionRecord session) {
    const double both_present = std::max(session.entry_a_s, session.entry_b_s);
    std::erase_if(session.utterances, [&](const Utterance& u) { return u.start_s < both_present; });
    return session;
}

SessionRecord apply_exclusions(SessionRecord session) {
    if (!(session.planned_duration_s > 0.0))
        throw data_error("session " + session.session_id + ": planned_duration_s must be > 0");
    if (!session.kept) return session;
    if (session.observed_duration() < session.planned_duration_s / 2.0) {
        session.kept = false;
        session.exclusion_reason = "too_short";
    }
    return session;
}

ExclusionTally tally_exclusions(const std::vector<SessionRecord>& sessions) {
    ExclusionTally t;
    t.total = sessions.size();
    for (const auto& s : sessions) {
        if (s.kept)
            ++t.kept;
        else
            ++t.by_reason[s.exclusion_reason];
    }
    return t;
}

std::vector<SessionRecord> preprocess(std::vector<SessionRecord> sessions, const Roster& roster) {
    sessions = link_roster(std::move(sessions), roster);
    for (auto& s : sessions) s = apply_exclusions(trim_to_copresence(std::move(s)));
    std::sort(sessions.begin(), sessions.end(),
              [](const SessionRecord& l, const SessionRecord& r) { return l.session_id < r.session_id; });
    return sessions;
}

// --- splits and summaries --------------------------------------------------

SplitSizes split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) throw data_error("split ratios must be non-negative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw data_error("split ratios must sum to 1");

    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double q = static_cast<double>(n) * ratios[i];
        counts[i] = static_cast<std::size_t>(std::floor(q + 1e-9));
        remainder[i] = q - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned > n) { // only reachable through the epsilon above
        auto it = std::max_element(counts.begin(), counts.end());
        --*it;
        --assigned;
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i)
            if (remainder[i] > remainder[best]) best = i;
        ++counts[best];
        remainder[best] = -1.0;
        ++assigned;
    }
    return {counts[0], counts[1], counts[2]};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

std::size_t word_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

namespace {

MeasureSummary summarize(std::string name, const std::vector<double>& xs) {
    MeasureSummary m;
    m.measure = std::move(name);
    m.n = xs.size();
    for (double x : xs) m.total += x;
    m.mean = m.total / static_cast<double>(m.n);
    if (m.n >= 2) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.sd = std::sqrt(ss / static_cast<double>(m.n - 1));
    }
    return m;
}

} // namespace

CorpusSummary describe_corpus(const std::vector<SessionRecord>& sessions) {
    if (sessions.empty()) throw data_error("describe_corpus: no sessions");
    std::vector<double> dur, words, utts;
    for (const auto& s : sessions) {
        dur.push_back(s.observed_duration());
        std::size_t w = 0;
        for (const auto& u : s.utterances) w += word_count(u.text);
        words.push_back(static_cast<double>(w));
        utts.push_back(static_cast<double>(s.utterances.size()));
    }
    return {summarize("session_duration_s", dur), summarize("words", words),
            summarize("utterances", utts)};
}

} // namespace attn
