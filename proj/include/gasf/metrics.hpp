#pragma once

#include <string>
#include <vector>

#include "gasf/errors.hpp"

namespace gasf {

struct MetricSeries {
    std::vector<double> actual;
    std::vector<double> predicted;
};

double rmse(const MetricSeries& s);
double mape(const MetricSeries& s);  // percent; requires all actuals nonzero
double mpe(const MetricSeries& s);   // percent; negative = systematic overprediction

struct EvalCell {
    std::string city;
    std::string model;
    std::string split;  // "train" | "test"
    double rmse = 0.0;
    double mape_pct = 0.0;
    double mpe_pct = 0.0;
};

struct EvalReport {
    std::vector<EvalCell> cells;

    std::string to_csv() const;   // header city,model,split,rmse,mape_pct,mpe_pct
    std::string to_text() const;  // aligned table, city rows, metric columns per model
};

// One entry per (city, model, split); series must be aligned across models
// (same cities/splits, same lengths per cell).
struct PredictionEntry {
    std::string city;
    std::string model;
    std::string split;
    MetricSeries series;  // raw cubic meters
};

EvalReport evaluate(const std::vector<PredictionEntry>& entries);

}  // namespace gasf
