#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace citynet::csv {

/// Minimal RFC 4180 reader: comma separated, double-quoted fields may
/// contain commas, quotes ("") and newlines. Lines starting with '#'
/// outside a record are skipped as comments.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Reads the next record. Returns false at end of input.
    bool next(std::vector<std::string>& fields);

    /// Line number on which the last returned record started (1-based).
    std::size_t line() const noexcept { return record_line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
    std::size_t record_line_ = 0;
};

/// Quotes a field when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

std::string_view trim(std::string_view s);

} // namespace citynet::csv
