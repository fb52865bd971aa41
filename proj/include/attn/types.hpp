#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace attn {

enum class Gender : std::uint8_t { female, male };
enum class Race : std::uint8_t { black, non_black };
enum class ElStatus : std::uint8_t { el, non_el };
enum class Grade : std::uint8_t { K, first, second };

// Numeric codes match the prompt label numbers (0..3). NA only appears in
// human annotation files.
enum class Recipient : std::uint8_t { both = 0, student_a = 1, student_b = 2, one_of = 3, na = 4 };

enum class Nature : std::uint8_t { content = 0, relationship = 1, management = 2 };

inline constexpr std::array<Nature, 3> kNatures{Nature::content, Nature::relationship,
                                                 Nature::management};
inline constexpr std::array<Recipient, 4> kRecipients{Recipient::both, Recipient::student_a,
                                                       Recipient::student_b, Recipient::one_of};

enum class Slot : std::uint8_t { a, b };

std::string_view to_string(Gender g);
std::string_view to_string(Race r);
std::string_view to_string(ElStatus e);
std::string_view to_string(Grade g);
std::string_view to_string(Nature n);
/// "0".."3" or "NA".
std::string_view to_string(Recipient r);

// Parsers throw attn::data_error on unknown tokens.
Gender parse_gender(std::string_view s);
Race parse_race(std::string_view s);
ElStatus parse_el_status(std::string_view s);
Grade parse_grade(std::string_view s);
Nature parse_nature(std::string_view s);
Recipient parse_recipient(std::string_view s);
std::optional<Recipient> recipient_from_code(int code);

inline constexpr std::size_t index_of(Nature n) { return static_cast<std::size_t>(n); }
inline constexpr std::size_t index_of(Recipient r) { return static_cast<std::size_t>(r); }

} // namespace attn
