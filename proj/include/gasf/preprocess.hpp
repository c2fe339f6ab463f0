#pragma once

#include <string>
#include <vector>

#include "gasf/dataset.hpp"

namespace gasf {

// Fixed feature ordering: the ten weather fields, then month, day,
// day_of_week, quarter, then lag_usage.
const std::vector<std::string>& feature_names();
inline constexpr int kFeatureCount = kWeatherFieldCount + 5;

struct TemporalFeatures {
    int month;        // 1..12
    int day;          // 1..31
    int day_of_week;  // Monday = 0
    int quarter;      // 1..4
};

TemporalFeatures engineer_temporal_features(const Date& date);

// ln(1 + usage); inverse is expm1.
double log_transform_target(double usage);
double inverse_log_transform(double value);

struct FeatureRow {
    std::string city;
    Date date;
    std::vector<double> features;  // kFeatureCount entries, feature_names() order
    double target = 0.0;           // usage, raw m^3 before scaling
};

enum class ScalerMode { MinMax, ZScore };

struct FeatureScale {
    double a = 0.0;  // min-max: min; z-score: mean
    double b = 0.0;  // min-max: max; z-score: std (population)
    bool constant = false;
};

struct ScalerParams {
    ScalerMode mode = ScalerMode::MinMax;
    std::vector<std::string> names;  // == feature_names()
    std::vector<FeatureScale> per_feature;
    bool target_log = true;
    FeatureScale target;  // fitted on the (log-transformed) target

    // Raw usage -> model space and back.
    double scale_target(double usage) const;
    double unscale_target(double y) const;

    double scale_feature(std::size_t index, double x) const;
    double unscale_feature(std::size_t index, double y) const;
};

// Statistics from training rows only.
ScalerParams fit_scaler(const std::vector<FeatureRow>& train_rows, ScalerMode mode,
                        bool target_log = true);

// Scales features and target; no clipping of out-of-range values.
std::vector<FeatureRow> transform(const ScalerParams& params, const std::vector<FeatureRow>& rows);

// Builds feature rows from a repaired dataset; drops the first `lag` rows per
// city and attaches lag_usage.
std::vector<FeatureRow> add_lag_feature(const MergedDataset& ds, int lag = 1);

struct SequenceWindow {
    std::vector<std::vector<double>> inputs;  // L x F
    double target = 0.0;                      // scaled usage of the next month
    std::string city;
    Date target_date;
};

std::vector<SequenceWindow> make_windows(const std::vector<FeatureRow>& rows, int window_length);

struct SplitSpec {
    double train_fraction = 0.8;
    bool per_city = true;
};

std::pair<std::vector<FeatureRow>, std::vector<FeatureRow>>
chronological_split(const std::vector<FeatureRow>& rows, const SplitSpec& spec);

}  // namespace gasf
