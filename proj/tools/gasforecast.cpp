#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gasf/model_io.hpp"
#include "gasf/pipeline.hpp"
#include "gasf/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gasf;

namespace {

struct CommonOpts {
    std::string consumption;
    std::string weather;
    std::vector<std::string> model_files;
    std::string out_dir = "out";
    std::uint64_t seed = 7;
};

struct TrainOpts {
    std::string model = "hybrid";
    double split = 0.8;
    int window = 12;
    int lag = 1;
    std::string scaler = "minmax";
    bool no_target_log = false;
    bool average_raw_space = false;
    int epochs = 500;
    int batch = 32;
    double lr = 1e-3;
    int hidden = 64;
    int layers = 2;
    double dropout = 0.2;
    int trees = 200;
    int depth = 4;
    double eta = 0.1;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
    std::string grid;
};

MergedDataset load_repaired(const CommonOpts& c) {
    auto cons = parse_consumption_csv(c.consumption);
    auto wx = parse_weather_csv(c.weather);
    auto merged = merge_by_city_month(cons, wx);
    auto repaired = interpolate_missing(merged);
    for (const auto& line : repaired.report) std::cerr << "note: " << line << '\n';
    return repaired;
}

PipelineConfig pipeline_config(const TrainOpts& t) {
    PipelineConfig p;
    p.split.train_fraction = t.split;
    p.window_length = t.window;
    p.lag = t.lag;
    p.scaler_mode = t.scaler == "zscore" ? ScalerMode::ZScore : ScalerMode::MinMax;
    p.target_log = !t.no_target_log;
    p.average_raw_space = t.average_raw_space;
    return p;
}

json resolved_config(const CommonOpts& c, const TrainOpts& t) {
    return json{{"consumption", c.consumption},
                {"weather", c.weather},
                {"out", c.out_dir},
                {"seed", c.seed},
                {"model", t.model},
                {"split", t.split},
                {"window", t.window},
                {"lag", t.lag},
                {"scaler", t.scaler},
                {"target_log", !t.no_target_log},
                {"average_raw_space", t.average_raw_space},
                {"epochs", t.epochs},
                {"batch", t.batch},
                {"lr", t.lr},
                {"hidden", t.hidden},
                {"layers", t.layers},
                {"dropout", t.dropout},
                {"trees", t.trees},
                {"depth", t.depth},
                {"eta", t.eta},
                {"lambda", t.lambda},
                {"gamma", t.gamma},
                {"min_child_weight", t.min_child_weight}};
}

FitResult run_fit(const MergedDataset& repaired, const TrainOpts& t, std::uint64_t seed) {
    NetArchConfig arch{t.hidden, t.layers, t.dropout};
    TrainConfig tcfg;
    tcfg.epochs = t.epochs;
    tcfg.batch_size = t.batch;
    tcfg.learning_rate = t.lr;
    GbtParams gp;
    gp.n_trees = t.trees;
    gp.max_depth = t.depth;
    gp.learning_rate = t.eta;
    gp.lambda = t.lambda;
    gp.gamma = t.gamma;
    gp.min_child_weight = t.min_child_weight;
    return fit_model(repaired, model_kind_from_string(t.model), pipeline_config(t), arch, tcfg, gp,
                     seed);
}

std::string history_csv(const TrainHistory& h) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,train_loss\n";
    for (std::size_t i = 0; i < h.epoch_loss.size(); ++i)
        out << (i + 1) << ',' << h.epoch_loss[i] << '\n';
    out << "final_eval," << h.final_train_loss << '\n';
    return out.str();
}

double mean_test_rmse(const EvalReport& report) {
    double sum = 0;
    int n = 0;
    for (const auto& c : report.cells)
        if (c.split == "test") {
            sum += c.rmse;
            ++n;
        }
    return n ? sum / n : 0.0;
}

int cmd_train(const CommonOpts& c, const TrainOpts& t) {
    auto repaired = load_repaired(c);
    fs::create_directories(c.out_dir);

    if (!t.grid.empty()) {
        std::ifstream in(t.grid);
        if (!in) throw DataError("cannot open grid file: " + t.grid);
        std::string line;
        if (!std::getline(in, line)) throw DataError("empty grid file");
        std::istringstream hdr(line);
        std::vector<std::string> cols;
        std::string cell;
        while (std::getline(hdr, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            cols.push_back(cell);
        }
        struct Row {
            TrainOpts opts;
            double test_rmse = 0;
            std::string desc;
        };
        std::vector<Row> rows;
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line == "\r") continue;
            std::istringstream ls(line);
            Row row;
            row.opts = t;
            std::size_t i = 0;
            while (std::getline(ls, cell, ',')) {
                if (!cell.empty() && cell.back() == '\r') cell.pop_back();
                if (i >= cols.size()) throw DataError("grid row has too many fields");
                const std::string& key = cols[i++];
                const double v = std::stod(cell);
                if (key == "hidden") row.opts.hidden = int(v);
                else if (key == "layers") row.opts.layers = int(v);
                else if (key == "dropout") row.opts.dropout = v;
                else if (key == "lr") row.opts.lr = v;
                else if (key == "epochs") row.opts.epochs = int(v);
                else if (key == "batch") row.opts.batch = int(v);
                else if (key == "window") row.opts.window = int(v);
                else if (key == "split") row.opts.split = v;
                else if (key == "trees") row.opts.trees = int(v);
                else if (key == "depth") row.opts.depth = int(v);
                else if (key == "eta") row.opts.eta = v;
                else if (key == "lambda") row.opts.lambda = v;
                else if (key == "gamma") row.opts.gamma = v;
                else if (key == "min_child_weight") row.opts.min_child_weight = v;
                else if (key == "lag") row.opts.lag = int(v);
                else throw DataError("unknown grid column '" + key + "'");
                row.desc += (row.desc.empty() ? "" : ";") + key + "=" + cell;
            }
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw DataError("grid file has no entries");

        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::uint64_t seed = c.seed + i;  // derived seed per grid row
            auto fit = run_fit(repaired, rows[i].opts, seed);
            auto report = evaluate(to_entries(predict_all(fit.model, repaired), rows[i].opts.model));
            rows[i].test_rmse = mean_test_rmse(report);
            std::cout << "grid row " << (i + 1) << " [" << rows[i].desc
                      << "]: mean test RMSE = " << rows[i].test_rmse << '\n';
        }
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.test_rmse < b.test_rmse; });
        std::ostringstream out;
        out.precision(17);
        out << "params,mean_test_rmse\n";
        for (const auto& r : rows) out << '"' << r.desc << "\"," << r.test_rmse << '\n';
        write_file_atomic((fs::path(c.out_dir) / "grid_results.csv").string(), out.str());
        std::cout << "wrote " << (fs::path(c.out_dir) / "grid_results.csv").string() << '\n';
        return 0;
    }

    auto fit = run_fit(repaired, t, c.seed);
    const json cfg = resolved_config(c, t);
    const std::string model_path = c.model_files.empty()
                                       ? (fs::path(c.out_dir) / "model.json").string()
                                       : c.model_files.front();
    // The echo inside the model file drops the output directory so identical
    // training runs into different directories stay byte-identical.
    json model_cfg = cfg;
    model_cfg.erase("out");
    save_model(fit.model, model_path, model_cfg.dump());
    write_file_atomic((fs::path(c.out_dir) / "history.csv").string(), history_csv(fit.history));
    write_file_atomic((fs::path(c.out_dir) / "config.json").string(), cfg.dump(1) + "\n");
    std::cout << "trained " << t.model << " model -> " << model_path << '\n'
              << "final train loss (scaled space): " << fit.history.final_train_loss << '\n';
    return 0;
}

int cmd_evaluate(const CommonOpts& c) {
    if (c.model_files.empty()) throw DataError("evaluate requires --model-file");
    auto repaired = load_repaired(c);
    fs::create_directories(c.out_dir);

    std::vector<PredictionEntry> entries;
    for (const auto& path : c.model_files) {
        auto model = load_model(path);
        auto name = to_string(model.kind);
        auto items = predict_all(model, repaired);
        auto sub = to_entries(items, name);
        entries.insert(entries.end(), sub.begin(), sub.end());
    }
    auto report = evaluate(entries);
    write_file_atomic((fs::path(c.out_dir) / "eval.csv").string(), report.to_csv());
    write_file_atomic((fs::path(c.out_dir) / "eval.txt").string(), report.to_text());
    std::cout << report.to_text();
    return 0;
}

int cmd_predict(const CommonOpts& c, const std::string& city, const std::string& date_str) {
    if (c.model_files.empty()) throw DataError("predict requires --model-file");
    auto repaired = load_repaired(c);
    auto model = load_model(c.model_files.front());
    const Date date = Date::parse_iso(date_str);
    const double usage = predict_for_date(model, repaired, city, date);
    std::cout.precision(17);
    std::cout << date.to_string() << ' ' << usage << '\n';
    return 0;
}

int cmd_importance(const CommonOpts& c) {
    if (c.model_files.empty()) throw DataError("importance requires --model-file");
    auto model = load_model(c.model_files.front());
    if (!model.trees)
        throw DataError("feature importance requires the tree branch; this is a pure " +
                        to_string(model.kind) + " model");
    fs::create_directories(c.out_dir);

    auto ranked = model.trees->feature_importance();
    // List unused features too, with zero share.
    for (const auto& name : model.feature_names) {
        bool found = false;
        for (const auto& [n, v] : ranked) found |= n == name;
        if (!found) ranked.emplace_back(name, 0.0);
    }
    std::ostringstream out;
    out.precision(17);
    out << "feature,importance\n";
    for (const auto& [name, share] : ranked) out << name << ',' << share << '\n';
    write_file_atomic((fs::path(c.out_dir) / "importance.csv").string(), out.str());
    for (const auto& [name, share] : ranked) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-14s %.4f ", name.c_str(), share);
        std::cout << buf << std::string(std::size_t(share * 40), '#') << '\n';
    }
    return 0;
}

int cmd_synth(const CommonOpts& c, int cities, int months, bool freezing_driven) {
    SynthParams p;
    p.cities = cities;
    p.months = months;
    p.freezing_driven = freezing_driven;
    p.seed = c.seed;
    auto csvs = generate_synthetic(p);
    fs::create_directories(c.out_dir);
    write_file_atomic((fs::path(c.out_dir) / "consumption.csv").string(), csvs.consumption_csv);
    write_file_atomic((fs::path(c.out_dir) / "weather.csv").string(), csvs.weather_csv);
    std::cout << "wrote " << (fs::path(c.out_dir) / "consumption.csv").string() << " and "
              << (fs::path(c.out_dir) / "weather.csv").string() << '\n';
    return 0;
}

int cmd_ingest(const CommonOpts& c) {
    auto repaired = load_repaired(c);
    std::cout << "cities: " << repaired.cities.size() << ", rows: " << repaired.rows.size()
              << ", range: " << repaired.min_date.to_string() << " .. "
              << repaired.max_date.to_string() << '\n';
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    SequenceWindow w;
    Rng rng(seed);
    const int L = 5, F = 3;
    for (int t = 0; t < L; ++t) {
        std::vector<double> row(F);
        for (auto& x : row) x = rng.uniform(-1.0, 1.0);
        w.inputs.push_back(row);
    }
    w.target = rng.uniform(-1.0, 1.0);

    bool ok = true;
    for (auto kind : {NetworkKind::Lstm, NetworkKind::Gru, NetworkKind::BiLstm}) {
        auto net = make_network(kind, F, 4, 1, 0.0, seed);
        auto report = gradient_check(net, w);
        const char* name = kind == NetworkKind::Lstm  ? "lstm"
                           : kind == NetworkKind::Gru ? "gru"
                                                      : "bilstm";
        std::cout << name << ": max relative error " << report.max_rel_error << " over "
                  << report.params_checked << " parameters\n";
        ok &= report.max_rel_error <= 1e-4;
    }
    std::cout << (ok ? "gradients match finite differences\n"
                     : "warning: gradient mismatch above 1e-4\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Residential natural-gas consumption forecasting"};
    app.require_subcommand(1);

    CommonOpts c;
    TrainOpts t;
    std::string city, date;
    int synth_cities = 5, synth_months = 72;
    bool freezing_driven = false;

    auto add_data = [&](CLI::App* sub) {
        sub->add_option("--consumption", c.consumption, "consumption CSV path")->required();
        sub->add_option("--weather", c.weather, "weather CSV path")->required();
    };
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", c.out_dir, "output directory");
        sub->add_option("--seed", c.seed, "random seed");
    };

    auto* ingest = app.add_subcommand("ingest", "parse, merge and repair the input CSVs");
    add_data(ingest);

    auto* train = app.add_subcommand("train", "train a model");
    add_data(train);
    add_common(train);
    train->add_option("--model", t.model, "lstm|gru|hybrid");
    train->add_option("--model-file", c.model_files, "model output path");
    train->add_option("--split", t.split, "train fraction");
    train->add_option("--window", t.window, "window length (months)");
    train->add_option("--lag", t.lag, "usage lag (months)");
    train->add_option("--scaler", t.scaler, "minmax|zscore");
    train->add_flag("--no-target-log", t.no_target_log, "disable target log transform");
    train->add_flag("--average-raw-space", t.average_raw_space,
                    "hybrid: average branch outputs after inverse transform");
    train->add_option("--epochs", t.epochs);
    train->add_option("--batch", t.batch);
    train->add_option("--lr", t.lr, "learning rate");
    train->add_option("--hidden", t.hidden, "hidden units per direction");
    train->add_option("--layers", t.layers, "recurrent layer count");
    train->add_option("--dropout", t.dropout);
    train->add_option("--trees", t.trees, "boosting rounds");
    train->add_option("--depth", t.depth, "tree max depth");
    train->add_option("--eta", t.eta, "tree learning rate");
    train->add_option("--lambda", t.lambda, "leaf L2 regularization");
    train->add_option("--gamma", t.gamma, "split penalty");
    train->add_option("--min-child-weight", t.min_child_weight);
    train->add_option("--grid", t.grid, "grid CSV for a hyperparameter sweep");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "per-city train/test RMSE/MAPE/MPE");
    add_data(evaluate_cmd);
    add_common(evaluate_cmd);
    evaluate_cmd->add_option("--model-file", c.model_files, "model file(s)")->required();

    auto* predict = app.add_subcommand("predict", "one-step-ahead forecast for a city/date");
    add_data(predict);
    predict->add_option("--model-file", c.model_files, "model file")->required();
    predict->add_option("--city", city)->required();
    predict->add_option("--date", date, "target month, YYYY-MM-01")->required();

    auto* importance = app.add_subcommand("importance", "normalized gain-based feature ranking");
    add_common(importance);
    importance->add_option("--model-file", c.model_files, "model file")->required();

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset pair");
    add_common(synth);
    synth->add_option("--cities", synth_cities);
    synth->add_option("--months", synth_months);
    synth->add_flag("--freezing-driven", freezing_driven,
                    "usage driven solely by freezing days");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gradcheck->add_option("--seed", c.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(c);
        if (train->parsed()) return cmd_train(c, t);
        if (evaluate_cmd->parsed()) return cmd_evaluate(c);
        if (predict->parsed()) return cmd_predict(c, city, date);
        if (importance->parsed()) return cmd_importance(c);
        if (synth->parsed()) return cmd_synth(c, synth_cities, synth_months, freezing_driven);
        if (gradcheck->parsed()) return cmd_gradcheck(c.seed);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
