#include "csv.hpp"

#include "rng.hpp"

#include "doctest.h"

#include <sstream>

using namespace actigeo;

TEST_CASE("csv reader handles quoting and line endings") {
    std::istringstream in(
        "a,b,c\r\n"
        "plain,\"with,comma\",\"with \"\"quote\"\"\"\n"
        "\"multi\nline\",2,3\n");
    csv::Reader reader(in);
    std::vector<std::string> f;

    REQUIRE(reader.next(f));
    CHECK(f == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(reader.next(f));
    CHECK(f == std::vector<std::string>{"plain", "with,comma", "with \"quote\""});
    CHECK(reader.record_line() == 2);
    REQUIRE(reader.next(f));
    CHECK(f == std::vector<std::string>{"multi\nline", "2", "3"});
    CHECK(reader.record_line() == 3);
    CHECK(!reader.next(f));
}

TEST_CASE("csv write/read round trip on awkward fields") {
    Rng rng(2024);
    const std::string alphabet = "ab,\"\n\r x";
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::string> row;
        const int n_fields = 1 + static_cast<int>(rng.integer(5));
        for (int j = 0; j < n_fields; ++j) {
            std::string field;
            const int len = static_cast<int>(rng.integer(8));
            for (int k = 0; k < len; ++k) {
                field.push_back(alphabet[rng.integer(alphabet.size())]);
            }
            row.push_back(field);
        }
        std::ostringstream out;
        csv::write_row(out, row);
        std::istringstream in(out.str());
        csv::Reader reader(in);
        std::vector<std::string> back;
        REQUIRE(reader.next(back));
        CHECK(back == row);
    }
}

TEST_CASE("full-precision formatting round-trips doubles") {
    Rng rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.integer(8));
        CHECK(std::stod(csv::format_full(v)) == v);
    }
}
