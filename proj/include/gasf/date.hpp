#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace gasf {

// Calendar date. Dataset rows always carry day = 1 (first of month), but the
// type handles arbitrary valid dates so temporal feature extraction works on
// any input.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    // Months since year 0; adjacent months differ by exactly 1.
    int month_index() const { return year * 12 + (month - 1); }

    Date add_months(int n) const;

    // Monday = 0 ... Sunday = 6.
    int day_of_week() const;

    static Date parse_iso(const std::string& text);
    static bool try_parse_iso(const std::string& text, Date& out);
    static bool is_valid(int year, int month, int day);

    std::string to_string() const;  // YYYY-MM-DD
};

}  // namespace gasf
