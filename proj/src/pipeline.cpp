#include "gasf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gasf {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Lstm: return "lstm";
        case ModelKind::Gru: return "gru";
        case ModelKind::Hybrid: return "hybrid";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "lstm") return ModelKind::Lstm;
    if (name == "gru") return ModelKind::Gru;
    if (name == "hybrid") return ModelKind::Hybrid;
    throw DataError("unknown model kind '" + name + "' (expected lstm|gru|hybrid)");
}

PreparedData prepare(const MergedDataset& repaired, const PipelineConfig& cfg) {
    if (cfg.window_length < 1) throw DataError("window length must be >= 1");
    auto rows = add_lag_feature(repaired, cfg.lag);
    auto [train_raw, test_raw] = chronological_split(rows, cfg.split);

    // Guard: every city needs enough training months to form windows.
    std::map<std::string, int> train_count;
    for (const auto& r : train_raw) ++train_count[r.city];
    for (const auto& [city, n] : train_count)
        if (n <= cfg.window_length + 1)
            throw DataError("city '" + city + "': train partition of " + std::to_string(n) +
                            " rows is too short for window length " +
                            std::to_string(cfg.window_length));

    PreparedData out;
    out.scaler = fit_scaler(train_raw, cfg.scaler_mode, cfg.target_log);
    out.train_rows = transform(out.scaler, train_raw);
    out.test_rows = transform(out.scaler, test_raw);

    out.train_windows = make_windows(out.train_rows, cfg.window_length);

    // Test windows come from the full series so the first test targets still
    // see their training history (teacher-forced one-step-ahead).
    std::map<std::string, Date> first_test_date;
    for (const auto& r : out.test_rows) {
        auto it = first_test_date.find(r.city);
        if (it == first_test_date.end() || r.date < it->second) first_test_date[r.city] = r.date;
    }
    std::vector<FeatureRow> all_rows = out.train_rows;
    all_rows.insert(all_rows.end(), out.test_rows.begin(), out.test_rows.end());
    for (const auto& w : make_windows(all_rows, cfg.window_length))
        if (w.target_date >= first_test_date.at(w.city)) out.test_windows.push_back(w);

    // Tabular rows aligned with the window target sets.
    std::map<std::string, std::vector<const FeatureRow*>> by_city;
    for (const auto& r : out.train_rows) by_city[r.city].push_back(&r);
    for (auto& [city, rs] : by_city)
        for (std::size_t i = std::size_t(cfg.window_length); i < rs.size(); ++i)
            out.train_tabular.push_back(*rs[i]);
    out.test_tabular = out.test_rows;

    if (out.train_windows.size() != out.train_tabular.size() ||
        out.test_windows.size() != out.test_tabular.size())
        throw DataError("internal alignment failure between window and tabular sets");
    return out;
}

FitResult fit_model(const MergedDataset& repaired, ModelKind kind, const PipelineConfig& pcfg,
                    const NetArchConfig& arch, TrainConfig tcfg, const GbtParams& gbt_params,
                    std::uint64_t seed) {
    PreparedData data = prepare(repaired, pcfg);

    FitResult result;
    result.model.kind = kind;
    result.model.scaler = data.scaler;
    result.model.pipeline = pcfg;
    result.model.feature_names = feature_names();
    result.model.seed = seed;

    NetworkKind nk = kind == ModelKind::Lstm   ? NetworkKind::Lstm
                     : kind == ModelKind::Gru  ? NetworkKind::Gru
                                               : NetworkKind::BiLstm;
    result.model.neural =
        make_network(nk, kFeatureCount, arch.hidden, arch.num_layers, arch.dropout, seed);
    tcfg.seed = seed;
    result.history = train(result.model.neural, data.train_windows, tcfg);

    if (kind == ModelKind::Hybrid) {
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        for (const auto& r : data.train_tabular) {
            X.push_back(r.features);
            y.push_back(r.target);
        }
        result.model.trees = fit_gbt(X, y, feature_names(), gbt_params);
    }
    return result;
}

double predict_scaled(const ForecastModel& model, const SequenceWindow& window,
                      const FeatureRow& tabular) {
    const double neural = forward(model.neural, window.inputs, false, nullptr);
    if (model.kind != ModelKind::Hybrid) return neural;
    if (!model.trees) throw DataError("hybrid model is missing its tree branch");
    return 0.5 * (neural + model.trees->predict(tabular.features));
}

double predict_raw(const ForecastModel& model, const SequenceWindow& window,
                   const FeatureRow& tabular) {
    double raw;
    if (model.kind == ModelKind::Hybrid && model.pipeline.average_raw_space) {
        if (!model.trees) throw DataError("hybrid model is missing its tree branch");
        const double neural = model.scaler.unscale_target(forward(model.neural, window.inputs));
        const double tree = model.scaler.unscale_target(model.trees->predict(tabular.features));
        raw = 0.5 * (neural + tree);
    } else {
        raw = model.scaler.unscale_target(predict_scaled(model, window, tabular));
    }
    return std::max(0.0, raw);
}

std::vector<PredictionItem> predict_all(const ForecastModel& model,
                                        const MergedDataset& repaired) {
    PreparedData data = prepare(repaired, model.pipeline);

    auto run = [&](const std::vector<SequenceWindow>& windows,
                   const std::vector<FeatureRow>& tabular, const std::string& split,
                   std::vector<PredictionItem>& out) {
        for (std::size_t i = 0; i < windows.size(); ++i) {
            if (windows[i].city != tabular[i].city || windows[i].target_date != tabular[i].date)
                throw DataError("branch alignment mismatch at " + windows[i].city + " " +
                                windows[i].target_date.to_string());
            PredictionItem item;
            item.city = windows[i].city;
            item.date = windows[i].target_date;
            item.split = split;
            item.actual_scaled = windows[i].target;
            item.predicted_scaled = predict_scaled(model, windows[i], tabular[i]);
            item.actual_raw = model.scaler.unscale_target(windows[i].target);
            item.predicted_raw = predict_raw(model, windows[i], tabular[i]);
            out.push_back(std::move(item));
        }
    };

    std::vector<PredictionItem> items;
    run(data.train_windows, data.train_tabular, "train", items);
    run(data.test_windows, data.test_tabular, "test", items);
    return items;
}

std::vector<PredictionEntry> to_entries(const std::vector<PredictionItem>& items,
                                        const std::string& model_name) {
    std::map<std::pair<std::string, std::string>, PredictionEntry> cells;
    for (const auto& it : items) {
        auto& e = cells[{it.city, it.split}];
        e.city = it.city;
        e.model = model_name;
        e.split = it.split;
        e.series.actual.push_back(it.actual_raw);
        e.series.predicted.push_back(it.predicted_raw);
    }
    std::vector<PredictionEntry> out;
    for (auto& [key, e] : cells) out.push_back(std::move(e));
    return out;
}

double predict_for_date(const ForecastModel& model, const MergedDataset& repaired,
                        const std::string& city, const Date& target_date) {
    auto [lo, hi] = repaired.city_span(city);
    if (lo == hi) throw DataError("unknown city '" + city + "'");

    auto rows = add_lag_feature(repaired, model.pipeline.lag);
    std::vector<const FeatureRow*> city_rows;
    for (const auto& r : rows)
        if (r.city == city) city_rows.push_back(&r);

    const FeatureRow* tabular = nullptr;
    std::vector<const FeatureRow*> history;
    for (const auto* r : city_rows) {
        if (r->date == target_date) tabular = r;
        if (r->date < target_date) history.push_back(r);
    }
    const int L = model.pipeline.window_length;
    if (int(history.size()) < L)
        throw DataError("city '" + city + "': fewer than " + std::to_string(L) +
                        " months of history before " + target_date.to_string());
    history.erase(history.begin(), history.end() - L);
    if (history.back()->date.add_months(1) != target_date)
        throw DataError("city '" + city + "': history does not reach " + target_date.to_string());
    if (!tabular && model.kind == ModelKind::Hybrid)
        throw DataError("city '" + city + "': no feature row for " + target_date.to_string() +
                        " (the tree branch needs weather and lag usage for the target month)");

    std::vector<FeatureRow> raw;
    raw.reserve(history.size() + 1);
    for (const auto* r : history) raw.push_back(*r);
    if (tabular) raw.push_back(*tabular);
    auto scaled = transform(model.scaler, raw);

    SequenceWindow w;
    w.city = city;
    w.target_date = target_date;
    const std::size_t nwin = tabular ? scaled.size() - 1 : scaled.size();
    for (std::size_t i = 0; i < nwin; ++i) w.inputs.push_back(scaled[i].features);
    return predict_raw(model, w, tabular ? scaled.back() : scaled.front());
}

}  // namespace gasf
