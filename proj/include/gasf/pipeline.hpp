#pragma once

#include <optional>

#include "gasf/dataset.hpp"
#include "gasf/gbt.hpp"
#include "gasf/metrics.hpp"
#include "gasf/preprocess.hpp"
#include "gasf/recurrent.hpp"

namespace gasf {

enum class ModelKind { Lstm, Gru, Hybrid };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct PipelineConfig {
    SplitSpec split;
    int window_length = 12;
    int lag = 1;
    ScalerMode scaler_mode = ScalerMode::MinMax;
    bool target_log = true;
    bool average_raw_space = false;  // hybrid: average after the inverse transform
};

struct NetArchConfig {
    int hidden = 64;
    int num_layers = 2;
    double dropout = 0.2;
};

// Scaled + split view of a repaired dataset. Windows and tabular rows are
// aligned: both branches predict exactly the same (city, date) sets.
struct PreparedData {
    ScalerParams scaler;
    std::vector<FeatureRow> train_rows;  // scaled, per-city chronological
    std::vector<FeatureRow> test_rows;
    std::vector<SequenceWindow> train_windows;
    std::vector<SequenceWindow> test_windows;
    std::vector<FeatureRow> train_tabular;  // train rows with a full preceding window
    std::vector<FeatureRow> test_tabular;   // == test_rows
};

PreparedData prepare(const MergedDataset& repaired, const PipelineConfig& cfg);

struct ForecastModel {
    ModelKind kind = ModelKind::Hybrid;
    RecurrentNetwork neural;
    std::optional<GbtModel> trees;  // present for hybrid
    ScalerParams scaler;
    PipelineConfig pipeline;
    std::vector<std::string> feature_names;
    std::uint64_t seed = 0;
};

struct FitResult {
    ForecastModel model;
    TrainHistory history;
};

FitResult fit_model(const MergedDataset& repaired, ModelKind kind, const PipelineConfig& pcfg,
                    const NetArchConfig& arch, TrainConfig tcfg, const GbtParams& gbt_params,
                    std::uint64_t seed);

// Scaled-target-space prediction for an aligned window/tabular pair.
double predict_scaled(const ForecastModel& model, const SequenceWindow& window,
                      const FeatureRow& tabular);

// Raw cubic meters, clamped at zero.
double predict_raw(const ForecastModel& model, const SequenceWindow& window,
                   const FeatureRow& tabular);

struct PredictionItem {
    std::string city;
    Date date;
    std::string split;  // "train" | "test"
    double actual_raw = 0.0;
    double predicted_raw = 0.0;
    double actual_scaled = 0.0;
    double predicted_scaled = 0.0;
};

// Teacher-forced one-step-ahead predictions over both splits.
std::vector<PredictionItem> predict_all(const ForecastModel& model, const MergedDataset& repaired);

std::vector<PredictionEntry> to_entries(const std::vector<PredictionItem>& items,
                                        const std::string& model_name);

// One-step-ahead forecast for one city/date using actual history.
double predict_for_date(const ForecastModel& model, const MergedDataset& repaired,
                        const std::string& city, const Date& target_date);

}  // namespace gasf
