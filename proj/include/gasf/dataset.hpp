#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gasf/date.hpp"
#include "gasf/errors.hpp"

namespace gasf {

inline constexpr int kWeatherFieldCount = 10;

// Column order is fixed; it matches the weather CSV header and the engineered
// feature vector prefix.
const std::array<std::string, kWeatherFieldCount>& weather_field_names();

struct ConsumptionRecord {
    Date date;
    std::string city;
    std::optional<double> usage;  // m^3 per month; empty cell = missing
};

struct WeatherRecord {
    Date date;
    std::string city;
    std::array<std::optional<double>, kWeatherFieldCount> fields;
};

struct MergedRow {
    std::string city;
    Date date;
    std::optional<double> usage;
    std::array<std::optional<double>, kWeatherFieldCount> weather;
};

struct MergedDataset {
    std::vector<MergedRow> rows;  // sorted by (city, date), unique
    std::vector<std::string> cities;
    Date min_date;
    Date max_date;
    std::vector<std::string> report;  // drop/repair notes, plain text lines

    // Row index range [first, last) for one city.
    std::pair<std::size_t, std::size_t> city_span(const std::string& city) const;
};

std::vector<ConsumptionRecord> parse_consumption_csv(const std::string& path);
std::vector<WeatherRecord> parse_weather_csv(const std::string& path);

MergedDataset merge_by_city_month(const std::vector<ConsumptionRecord>& consumption,
                                  const std::vector<WeatherRecord>& weather);

// Expands each city to a contiguous monthly grid, then fills missing cells by
// linear interpolation in time (nearest-value extension at the edges). Cities
// with more than half their usage values missing are dropped with a report
// line. Idempotent; never touches a present cell.
MergedDataset interpolate_missing(const MergedDataset& ds);

}  // namespace gasf
