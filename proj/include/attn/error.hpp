#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace attn {

/// Invalid or inconsistent input data (bad roster value, missing label, ...).
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record in a line-delimited or tabular file could not be parsed.
class parse_error : public data_error {
public:
    parse_error(std::string file, std::size_t line, const std::string& what)
        : data_error(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Numerical preconditions violated (rank deficiency, degenerate variance).
class stats_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Remote classifier returned something outside the wire contract.
class protocol_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Remote classifier unreachable after all retries.
class transport_error : public std::runtime_error {
public:
    transport_error(const std::string& what, int attempts)
        : std::runtime_error(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

} // namespace attn
