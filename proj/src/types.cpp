#include "attn/types.hpp"

#include "attn/error.hpp"

#include <string>

namespace attn {

namespace {

[[noreturn]] void unknown(std::string_view what, std::string_view token) {
    throw data_error("unknown " + std::string(what) + " value '" + std::string(token) + "'");
}

} // namespace

std::string_view to_string(Gender g) { return g == Gender::female ? "female" : "male"; }
std::string_view to_string(Race r) { return r == Race::black ? "black" : "non_black"; }
std::string_view to_string(ElStatus e) { return e == ElStatus::el ? "el" : "non_el"; }

std::string_view to_string(Grade g) {
    switch (g) {
    case Grade::K: return "K";
    case Grade::first: return "1";
    case Grade::second: return "2";
    }
    return "?";
}

std::string_view to_string(Nature n) {
    switch (n) {
    case Nature::content: return "content";
    case Nature::relationship: return "relationship";
    case Nature::management: return "management";
    }
    return "?";
}

std::string_view to_string(Recipient r) {
    switch (r) {
    case Recipient::both: return "0";
    case Recipient::student_a: return "1";
    case Recipient::student_b: return "2";
    case Recipient::one_of: return "3";
    case Recipient::na: return "NA";
    }
    return "?";
}

Gender parse_gender(std::string_view s) {
    if (s == "female") return Gender::female;
    if (s == "male") return Gender::male;
    unknown("gender", s);
}

Race parse_race(std::string_view s) {
    if (s == "black") return Race::black;
    if (s == "non_black") return Race::non_black;
    unknown("race", s);
}

ElStatus parse_el_status(std::string_view s) {
    if (s == "el") return ElStatus::el;
    if (s == "non_el") return ElStatus::non_el;
    unknown("el_status", s);
}

Grade parse_grade(std::string_view s) {
    if (s == "K") return Grade::K;
    if (s == "1") return Grade::first;
    if (s == "2") return Grade::second;
    unknown("grade", s);
}

Nature parse_nature(std::string_view s) {
    if (s == "content") return Nature::content;
    if (s == "relationship") return Nature::relationship;
    if (s == "management") return Nature::management;
    unknown("nature", s);
}

Recipient parse_recipient(std::string_view s) {
    if (s == "NA") return Recipient::na;
    if (s.size() == 1 && s[0] >= '0' && s[0] <= '3') return *recipient_from_code(s[0] - '0');
    unknown("recipient", s);
}

std::optional<Recipient> recipient_from_code(int code) {
    if (code < 0 || code > 3) return std::nullopt;
    return static_cast<Recipient>(code);
}

} // namespace attn
