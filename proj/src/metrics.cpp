#include "gasf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace gasf {

namespace {

void check_series(const MetricSeries& s) {
    if (s.actual.empty()) throw DataError("empty metric series");
    if (s.actual.size() != s.predicted.size())
        throw DataError("actual/predicted length mismatch");
}

}  // namespace

double rmse(const MetricSeries& s) {
    check_series(s);
    double sse = 0.0;
    for (std::size_t i = 0; i < s.actual.size(); ++i) {
        const double e = s.predicted[i] - s.actual[i];
        sse += e * e;
    }
    return std::sqrt(sse / double(s.actual.size()));
}

double mape(const MetricSeries& s) {
    check_series(s);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.actual.size(); ++i) {
        if (s.actual[i] == 0.0) throw DataError("MAPE undefined: actual value is zero");
        sum += std::abs((s.actual[i] - s.predicted[i]) / s.actual[i]);
    }
    return sum / double(s.actual.size()) * 100.0;
}

double mpe(const MetricSeries& s) {
    check_series(s);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.actual.size(); ++i) {
        if (s.actual[i] == 0.0) throw DataError("MPE undefined: actual value is zero");
        sum += (s.actual[i] - s.predicted[i]) / s.actual[i];
    }
    return sum / double(s.actual.size()) * 100.0;
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "city,model,split,rmse,mape_pct,mpe_pct\n";
    out.precision(17);
    for (const auto& c : cells)
        out << c.city << ',' << c.model << ',' << c.split << ',' << c.rmse << ',' << c.mape_pct
            << ',' << c.mpe_pct << '\n';
    return out.str();
}

std::string EvalReport::to_text() const {
    // City rows, one block of RMSE/MAPE/MPE columns per model, split sections.
    std::set<std::string> models, splits;
    for (const auto& c : cells) {
        models.insert(c.model);
        splits.insert(c.split);
    }
    std::ostringstream out;
    for (const auto& split : splits) {
        out << "== " << split << " ==\n";
        out << "city";
        for (const auto& m : models)
            out << " | " << m << " RMSE | " << m << " MAPE% | " << m << " MPE%";
        out << '\n';
        std::set<std::string> cities;
        for (const auto& c : cells)
            if (c.split == split) cities.insert(c.city);
        for (const auto& city : cities) {
            out << city;
            for (const auto& m : models) {
                auto it = std::find_if(cells.begin(), cells.end(), [&](const EvalCell& c) {
                    return c.city == city && c.model == m && c.split == split;
                });
                char buf[96];
                std::snprintf(buf, sizeof(buf), " | %.1f | %.2f | %.2f", it->rmse, it->mape_pct,
                              it->mpe_pct);
                out << buf;
            }
            out << '\n';
        }
    }
    return out.str();
}

EvalReport evaluate(const std::vector<PredictionEntry>& entries) {
    if (entries.empty()) throw DataError("nothing to evaluate");

    // Alignment: every model must cover the same (city, split) cells with the
    // same series lengths.
    std::set<std::string> models;
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::size_t>> coverage;
    for (const auto& e : entries) {
        models.insert(e.model);
        auto& cell = coverage[{e.city, e.split}];
        if (cell.count(e.model)) throw DataError("duplicate prediction entry");
        cell[e.model] = e.series.actual.size();
    }
    for (const auto& [key, per_model] : coverage) {
        if (per_model.size() != models.size())
            throw DataError("misaligned prediction sets: " + key.first + "/" + key.second +
                            " missing some model");
        std::size_t n = per_model.begin()->second;
        for (const auto& [m, len] : per_model)
            if (len != n)
                throw DataError("misaligned prediction sets: unequal lengths in " + key.first +
                                "/" + key.second);
    }

    EvalReport report;
    for (const auto& e : entries) {
        EvalCell c;
        c.city = e.city;
        c.model = e.model;
        c.split = e.split;
        c.rmse = rmse(e.series);
        c.mape_pct = mape(e.series);
        c.mpe_pct = mpe(e.series);
        report.cells.push_back(std::move(c));
    }
    std::stable_sort(report.cells.begin(), report.cells.end(),
                     [](const EvalCell& a, const EvalCell& b) {
                         return std::tie(a.split, a.city, a.model) <
                                std::tie(b.split, b.city, b.model);
                     });
    return report;
}

}  // namespace gasf
