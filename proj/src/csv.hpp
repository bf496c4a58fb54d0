#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace actigeo::csv {

// RFC 4180 record reader: quoted fields, embedded commas/quotes/newlines,
// LF or CRLF line endings.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Reads the next record into `fields`; returns false at end of input.
    bool next(std::vector<std::string>& fields);

    // 1-based physical line on which the last record started.
    std::size_t record_line() const { return record_line_; }

private:
    std::istream& in_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
};

std::string quote_field(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// 17 significant digits, shortest form ("%.17g").
std::string format_full(double v);

}  // namespace actigeo::csv
