#include "gasf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gasf {

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n(weather_field_names().begin(), weather_field_names().end());
        n.insert(n.end(), {"month", "day", "day_of_week", "quarter", "lag_usage"});
        return n;
    }();
    return names;
}

TemporalFeatures engineer_temporal_features(const Date& date) {
    return TemporalFeatures{date.month, date.day, date.day_of_week(), (date.month + 2) / 3};
}

double log_transform_target(double usage) {
    if (usage < 0) throw DataError("log transform requires usage >= 0");
    return std::log1p(usage);
}

double inverse_log_transform(double value) { return std::expm1(value); }

namespace {

double scale_with(ScalerMode mode, const FeatureScale& s, double x) {
    if (s.constant) return 0.0;
    return mode == ScalerMode::MinMax ? (x - s.a) / (s.b - s.a) : (x - s.a) / s.b;
}

double unscale_with(ScalerMode mode, const FeatureScale& s, double y) {
    if (s.constant) return s.a;
    return mode == ScalerMode::MinMax ? s.a + y * (s.b - s.a) : s.a + y * s.b;
}

FeatureScale fit_one(ScalerMode mode, const std::vector<double>& xs) {
    FeatureScale s;
    if (mode == ScalerMode::MinMax) {
        s.a = *std::min_element(xs.begin(), xs.end());
        s.b = *std::max_element(xs.begin(), xs.end());
        s.constant = s.a == s.b;
        if (s.constant) s.b = s.a;
    } else {
        double mean = 0;
        for (double x : xs) mean += x;
        mean /= double(xs.size());
        double var = 0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= double(xs.size());
        s.a = mean;
        s.b = std::sqrt(var);
        s.constant = s.b == 0.0;
    }
    return s;
}

}  // namespace

double ScalerParams::scale_target(double usage) const {
    double y = target_log ? log_transform_target(usage) : usage;
    return scale_with(mode, target, y);
}

double ScalerParams::unscale_target(double y) const {
    double v = unscale_with(mode, target, y);
    return target_log ? inverse_log_transform(v) : v;
}

double ScalerParams::scale_feature(std::size_t index, double x) const {
    if (index >= per_feature.size()) throw DataError("unknown feature index");
    return scale_with(mode, per_feature[index], x);
}

double ScalerParams::unscale_feature(std::size_t index, double y) const {
    if (index >= per_feature.size()) throw DataError("unknown feature index");
    return unscale_with(mode, per_feature[index], y);
}

ScalerParams fit_scaler(const std::vector<FeatureRow>& train_rows, ScalerMode mode,
                        bool target_log) {
    if (train_rows.size() < 2) throw DataError("scaler fit requires at least 2 rows");
    ScalerParams p;
    p.mode = mode;
    p.names = feature_names();
    p.target_log = target_log;

    std::vector<double> col(train_rows.size());
    for (int f = 0; f < kFeatureCount; ++f) {
        for (std::size_t i = 0; i < train_rows.size(); ++i) col[i] = train_rows[i].features[f];
        p.per_feature.push_back(fit_one(mode, col));
    }
    for (std::size_t i = 0; i < train_rows.size(); ++i)
        col[i] = target_log ? log_transform_target(train_rows[i].target) : train_rows[i].target;
    p.target = fit_one(mode, col);
    return p;
}

std::vector<FeatureRow> transform(const ScalerParams& params, const std::vector<FeatureRow>& rows) {
    if (params.per_feature.size() != std::size_t(kFeatureCount))
        throw DataError("scaler not fitted");
    std::vector<FeatureRow> out = rows;
    for (auto& r : out) {
        if (r.features.size() != std::size_t(kFeatureCount))
            throw DataError("feature width mismatch in transform");
        for (int f = 0; f < kFeatureCount; ++f)
            r.features[f] = scale_with(params.mode, params.per_feature[f], r.features[f]);
        r.target = params.scale_target(r.target);
    }
    return out;
}

std::vector<FeatureRow> add_lag_feature(const MergedDataset& ds, int lag) {
    if (lag < 1) throw DataError("lag must be >= 1");
    std::vector<FeatureRow> out;
    for (const auto& city : ds.cities) {
        auto [lo, hi] = ds.city_span(city);
        std::size_t n = hi - lo;
        if (std::size_t(lag) >= n)
            throw DataError("city '" + city + "': lag " + std::to_string(lag) +
                            " >= series length " + std::to_string(n));
        for (std::size_t i = lo + std::size_t(lag); i < hi; ++i) {
            const MergedRow& row = ds.rows[i];
            const MergedRow& prev = ds.rows[i - std::size_t(lag)];
            if (!row.usage || !prev.usage)
                throw DataError("city '" + city + "': missing usage; run repair first");
            FeatureRow fr;
            fr.city = city;
            fr.date = row.date;
            fr.features.reserve(kFeatureCount);
            for (int k = 0; k < kWeatherFieldCount; ++k) {
                if (!row.weather[k])
                    throw DataError("city '" + city + "': missing " + weather_field_names()[k]);
                fr.features.push_back(*row.weather[k]);
            }
            auto t = engineer_temporal_features(row.date);
            fr.features.push_back(double(t.month));
            fr.features.push_back(double(t.day));
            fr.features.push_back(double(t.day_of_week));
            fr.features.push_back(double(t.quarter));
            fr.features.push_back(*prev.usage);
            fr.target = *row.usage;
            out.push_back(std::move(fr));
        }
    }
    return out;
}

std::vector<SequenceWindow> make_windows(const std::vector<FeatureRow>& rows, int window_length) {
    if (window_length < 1) throw DataError("window length must be >= 1");
    std::map<std::string, std::vector<const FeatureRow*>> by_city;
    for (const auto& r : rows) by_city[r.city].push_back(&r);

    std::vector<SequenceWindow> out;
    const std::size_t L = std::size_t(window_length);
    for (auto& [city, rs] : by_city) {
        if (rs.size() <= L) continue;
        for (std::size_t k = 0; k + L < rs.size(); ++k) {
            // Contiguity check: the window and its target must be consecutive months.
            bool contiguous = true;
            for (std::size_t t = 0; t + 1 <= L; ++t)
                if (rs[k + t + 1]->date.month_index() != rs[k + t]->date.month_index() + 1)
                    contiguous = false;
            if (!contiguous) continue;
            SequenceWindow w;
            w.city = city;
            w.target_date = rs[k + L]->date;
            w.target = rs[k + L]->target;
            w.inputs.reserve(L);
            for (std::size_t t = 0; t < L; ++t) w.inputs.push_back(rs[k + t]->features);
            out.push_back(std::move(w));
        }
    }
    if (out.empty())
        throw DataError("window length " + std::to_string(window_length) +
                        " leaves no windows for any city");
    return out;
}

std::pair<std::vector<FeatureRow>, std::vector<FeatureRow>>
chronological_split(const std::vector<FeatureRow>& rows, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw DataError("train fraction must lie in (0,1)");
    std::map<std::string, std::vector<FeatureRow>> by_city;
    for (const auto& r : rows) by_city[r.city].push_back(r);

    std::vector<FeatureRow> train, test;
    for (auto& [city, rs] : by_city) {
        std::sort(rs.begin(), rs.end(),
                  [](const FeatureRow& a, const FeatureRow& b) { return a.date < b.date; });
        std::size_t k = std::size_t(std::floor(spec.train_fraction * double(rs.size())));
        if (k == 0 || k == rs.size())
            throw DataError("city '" + city + "': split leaves an empty train or test partition");
        train.insert(train.end(), rs.begin(), rs.begin() + k);
        test.insert(test.end(), rs.begin() + k, rs.end());
    }
    return {train, test};
}

}  // namespace gasf
