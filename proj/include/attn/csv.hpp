#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace attn::csv {

// Plain comma-delimited tables: first line is the header, no quoting, no
// embedded commas or newlines. Blank lines are skipped; a trailing '\r' is
// stripped so CRLF files load.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; ///< 1-based source line of each row

    /// Index of a header column, or throws data_error naming the file.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
    std::string source;
};

std::vector<std::string> split_line(std::string_view line);

Table read(const std::filesystem::path& path);
Table parse(std::string_view text, std::string source = "<memory>");

/// Fields must not contain ',' or newlines; throws data_error otherwise.
std::string join_row(const std::vector<std::string>& fields);

} // namespace attn::csv
