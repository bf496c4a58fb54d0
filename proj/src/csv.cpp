#include "csv.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

namespace actigeo::csv {

bool Reader::next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    if (c == EOF) return false;
    record_line_ = line_;

    std::string field;
    bool quoted = false;
    for (;;) {
        if (quoted) {
            if (c == EOF) break;  // unterminated quote: accept what we have
            if (c == '"') {
                const int peek = in_.peek();
                if (peek == '"') {
                    field.push_back('"');
                    in_.get();
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line_;
                field.push_back(static_cast<char>(c));
            }
        } else {
            if (c == EOF || c == '\n') {
                if (c == '\n') ++line_;
                break;
            }
            if (c == '\r' && in_.peek() == '\n') {
                in_.get();
                ++line_;
                break;
            }
            if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
            } else if (c == '"' && field.empty()) {
                quoted = true;
            } else {
                field.push_back(static_cast<char>(c));
            }
        }
        c = in_.get();
    }
    fields.push_back(std::move(field));
    return true;
}

std::string quote_field(const std::string& field) {
    const bool needs = field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(',');
        out << quote_field(fields[i]);
    }
    out.put('\n');
}

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace actigeo::csv
