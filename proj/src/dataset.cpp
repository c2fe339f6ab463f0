#include "gasf/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace gasf {

// ---------------------------------------------------------------------------
// Date

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : d[m - 1];
}

// Days since 1970-01-01 (proleptic Gregorian).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int yoe = static_cast<int>(y - era * 400);
    const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

}  // namespace

bool Date::is_valid(int year, int month, int day) {
    return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
}

Date Date::add_months(int n) const {
    int idx = month_index() + n;
    int y = idx >= 0 ? idx / 12 : (idx - 11) / 12;
    int m = idx - y * 12 + 1;
    int d = std::min(day, days_in_month(y, m));
    return Date{y, m, d};
}

int Date::day_of_week() const {
    // 1970-01-01 was a Thursday; Monday = 0.
    std::int64_t days = days_from_civil(year, month, day);
    return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

bool Date::try_parse_iso(const std::string& text, Date& out) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
    auto digits = [&](int from, int to, int& v) {
        v = 0;
        for (int i = from; i < to; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
            v = v * 10 + (text[i] - '0');
        }
        return true;
    };
    int y, m, d;
    if (!digits(0, 4, y) || !digits(5, 7, m) || !digits(8, 10, d)) return false;
    if (!is_valid(y, m, d)) return false;
    out = Date{y, m, d};
    return true;
}

Date Date::parse_iso(const std::string& text) {
    Date d;
    if (!try_parse_iso(text, d)) throw DataError("invalid ISO date: '" + text + "'");
    return d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

// ---------------------------------------------------------------------------
// CSV parsing

const std::array<std::string, kWeatherFieldCount>& weather_field_names() {
    static const std::array<std::string, kWeatherFieldCount> names = {
        "mean_rh",       "max_rh",       "min_rh",       "mean_temp",
        "max_temp",      "min_temp",     "max_abs_temp", "min_abs_temp",
        "rain_mm",       "freezing_days"};
    return names;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

[[noreturn]] void row_error(const std::string& path, std::size_t row, const std::string& what) {
    throw DataError(path + " row " + std::to_string(row) + ": " + what);
}

std::optional<double> parse_cell(const std::string& cell, const std::string& path, std::size_t row,
                                 const std::string& col) {
    if (cell.empty()) return std::nullopt;
    try {
        std::size_t pos = 0;
        double v = std::stod(cell, &pos);
        if (pos != cell.size() || !std::isfinite(v))
            row_error(path, row, "malformed number in " + col + ": '" + cell + "'");
        return v;
    } catch (const DataError&) {
        throw;
    } catch (const std::exception&) {
        row_error(path, row, "malformed number in " + col + ": '" + cell + "'");
    }
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header)
        throw DataError(path + ": expected header '" + expected_header + "', got '" + line + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

Date parse_month_date(const std::string& cell, const std::string& path, std::size_t row) {
    Date d;
    if (!Date::try_parse_iso(cell, d)) row_error(path, row, "malformed date '" + cell + "'");
    if (d.day != 1) row_error(path, row, "day-of-month must be 1, got " + cell);
    return d;
}

}  // namespace

std::vector<ConsumptionRecord> parse_consumption_csv(const std::string& path) {
    auto rows = read_csv(path, "date,city,usage_m3");
    std::vector<ConsumptionRecord> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t row = i + 2;  // 1-based, after header
        const auto& f = rows[i];
        if (f.size() != 3) row_error(path, row, "expected 3 fields, got " + std::to_string(f.size()));
        ConsumptionRecord rec;
        rec.date = parse_month_date(f[0], path, row);
        rec.city = f[1];
        if (rec.city.empty()) row_error(path, row, "empty city");
        rec.usage = parse_cell(f[2], path, row, "usage_m3");
        if (rec.usage && *rec.usage < 0) row_error(path, row, "negative usage");
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<WeatherRecord> parse_weather_csv(const std::string& path) {
    std::string header = "date,city";
    for (const auto& n : weather_field_names()) header += "," + n;
    auto rows = read_csv(path, header);
    std::vector<WeatherRecord> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t row = i + 2;
        const auto& f = rows[i];
        if (f.size() != 2 + kWeatherFieldCount)
            row_error(path, row, "expected " + std::to_string(2 + kWeatherFieldCount) + " fields");
        WeatherRecord rec;
        rec.date = parse_month_date(f[0], path, row);
        rec.city = f[1];
        if (rec.city.empty()) row_error(path, row, "empty city");
        for (int k = 0; k < kWeatherFieldCount; ++k)
            rec.fields[k] = parse_cell(f[2 + k], path, row, weather_field_names()[k]);

        auto check = [&](bool ok, const std::string& what) {
            if (!ok) row_error(path, row, what);
        };
        auto both = [&](int a, int b) { return rec.fields[a] && rec.fields[b]; };
        const auto& v = rec.fields;
        if (both(2, 0)) check(*v[2] <= *v[0], "min_rh > mean_rh");
        if (both(0, 1)) check(*v[0] <= *v[1], "mean_rh > max_rh");
        if (both(5, 3)) check(*v[5] <= *v[3], "min_temp > mean_temp");
        if (both(3, 4)) check(*v[3] <= *v[4], "mean_temp > max_temp");
        if (both(7, 5)) check(*v[7] <= *v[5], "min_abs_temp > min_temp");
        if (both(6, 4)) check(*v[6] >= *v[4], "max_abs_temp < max_temp");
        if (v[8]) check(*v[8] >= 0, "negative rain_mm");
        if (v[9]) check(*v[9] >= 0 && *v[9] <= 31 && *v[9] == std::floor(*v[9]),
                        "freezing_days must be an integer in [0,31]");
        out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Merge + interpolation

std::pair<std::size_t, std::size_t> MergedDataset::city_span(const std::string& city) const {
    auto lo = std::lower_bound(rows.begin(), rows.end(), city,
                               [](const MergedRow& r, const std::string& c) { return r.city < c; });
    auto hi = std::upper_bound(rows.begin(), rows.end(), city,
                               [](const std::string& c, const MergedRow& r) { return c < r.city; });
    return {static_cast<std::size_t>(lo - rows.begin()), static_cast<std::size_t>(hi - rows.begin())};
}

MergedDataset merge_by_city_month(const std::vector<ConsumptionRecord>& consumption,
                                  const std::vector<WeatherRecord>& weather) {
    if (consumption.empty() || weather.empty())
        throw DataError("merge requires non-empty consumption and weather inputs");

    std::map<std::pair<std::string, Date>, const ConsumptionRecord*> cons;
    for (const auto& r : consumption) {
        auto key = std::make_pair(r.city, r.date);
        if (!cons.emplace(key, &r).second)
            throw DataError("duplicate consumption row for " + r.city + " " + r.date.to_string());
    }
    std::map<std::pair<std::string, Date>, const WeatherRecord*> wx;
    for (const auto& r : weather) {
        auto key = std::make_pair(r.city, r.date);
        if (!wx.emplace(key, &r).second)
            throw DataError("duplicate weather row for " + r.city + " " + r.date.to_string());
    }

    MergedDataset ds;
    std::set<std::string> matched_cities, cons_cities, wx_cities;
    for (const auto& [key, c] : cons) cons_cities.insert(key.first);
    for (const auto& [key, w] : wx) wx_cities.insert(key.first);

    for (const auto& [key, c] : cons) {
        auto it = wx.find(key);
        if (it == wx.end()) continue;
        MergedRow row;
        row.city = key.first;
        row.date = key.second;
        row.usage = c->usage;
        row.weather = it->second->fields;
        ds.rows.push_back(std::move(row));
        matched_cities.insert(key.first);
    }
    if (ds.rows.empty()) throw DataError("join produced zero rows");

    for (const auto& c : cons_cities)
        if (!matched_cities.count(c))
            ds.report.push_back("dropped city '" + c + "': present only in consumption data");
    for (const auto& c : wx_cities)
        if (!matched_cities.count(c))
            ds.report.push_back("dropped city '" + c + "': present only in weather data");

    // map iteration is already (city, date) ordered
    ds.cities.assign(matched_cities.begin(), matched_cities.end());
    ds.min_date = ds.rows.front().date;
    ds.max_date = ds.rows.front().date;
    for (const auto& r : ds.rows) {
        ds.min_date = std::min(ds.min_date, r.date);
        ds.max_date = std::max(ds.max_date, r.date);
    }
    return ds;
}

namespace {

// Linear interpolation over the monthly index, nearest-value at the edges.
// `xs` holds month indices, `vals` the (possibly missing) column values.
void fill_column(const std::vector<int>& xs, std::vector<std::optional<double>>& vals,
                 const std::string& city, const std::string& column) {
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i]) present.push_back(i);
    if (present.empty())
        throw DataError("city '" + city + "': column '" + column + "' is entirely missing");
    if (present.size() == vals.size()) return;

    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i]) continue;
        auto it = std::lower_bound(present.begin(), present.end(), i);
        if (it == present.begin()) {
            vals[i] = vals[present.front()];
        } else if (it == present.end()) {
            vals[i] = vals[present.back()];
        } else {
            std::size_t hi = *it, lo = *(it - 1);
            double t = double(xs[i] - xs[lo]) / double(xs[hi] - xs[lo]);
            vals[i] = *vals[lo] + t * (*vals[hi] - *vals[lo]);
        }
    }
}

}  // namespace

MergedDataset interpolate_missing(const MergedDataset& ds) {
    MergedDataset out;
    out.report = ds.report;

    for (const auto& city : ds.cities) {
        auto [lo, hi] = ds.city_span(city);
        if (lo == hi) continue;

        // Expand to a contiguous monthly grid.
        Date first = ds.rows[lo].date, last = ds.rows[hi - 1].date;
        int n = last.month_index() - first.month_index() + 1;
        std::vector<MergedRow> grid(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            grid[i].city = city;
            grid[i].date = first.add_months(i);
        }
        std::size_t inserted = 0;
        for (std::size_t r = lo; r < hi; ++r) {
            int i = ds.rows[r].date.month_index() - first.month_index();
            grid[i].usage = ds.rows[r].usage;
            grid[i].weather = ds.rows[r].weather;
        }
        inserted = grid.size() - (hi - lo);
        if (inserted > 0)
            out.report.push_back("city '" + city + "': inserted " + std::to_string(inserted) +
                                 " missing month rows");

        std::size_t missing_usage = 0;
        for (const auto& r : grid)
            if (!r.usage) ++missing_usage;
        if (missing_usage * 2 > grid.size()) {
            out.report.push_back("dropped city '" + city + "': " + std::to_string(missing_usage) +
                                 " of " + std::to_string(grid.size()) + " usage values missing");
            continue;
        }

        std::vector<int> xs(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) xs[i] = grid[i].date.month_index();

        std::vector<std::optional<double>> col(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) col[i] = grid[i].usage;
        fill_column(xs, col, city, "usage");
        for (std::size_t i = 0; i < grid.size(); ++i) grid[i].usage = col[i];

        for (int k = 0; k < kWeatherFieldCount; ++k) {
            for (std::size_t i = 0; i < grid.size(); ++i) col[i] = grid[i].weather[k];
            fill_column(xs, col, city, weather_field_names()[k]);
            for (std::size_t i = 0; i < grid.size(); ++i) grid[i].weather[k] = col[i];
        }

        out.cities.push_back(city);
        for (auto& r : grid) out.rows.push_back(std::move(r));
    }
    if (out.rows.empty()) throw DataError("all cities dropped during repair");

    out.min_date = out.rows.front().date;
    out.max_date = out.rows.front().date;
    for (const auto& r : out.rows) {
        out.min_date = std::min(out.min_date, r.date);
        out.max_date = std::max(out.max_date, r.date);
    }
    return out;
}

}  // namespace gasf
