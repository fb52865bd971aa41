#include "attn/csv.hpp"

#include "attn/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace attn::csv {

std::size_t Table::column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw data_error(source + ": missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

Table parse(std::string_view text, std::string source) {
    Table t;
    t.source = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.find('"') != std::string_view::npos)
            throw parse_error(t.source, line_no, "quoted fields are not supported");
        auto fields = split_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw parse_error(t.source, line_no,
                              "expected " + std::to_string(t.header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (!have_header) throw data_error(t.source + ": empty table (no header)");
    return t;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string join_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].find_first_of(",\n\r\"") != std::string::npos)
            throw data_error("field not representable in table: '" + fields[i] + "'");
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

} // namespace attn::csv
