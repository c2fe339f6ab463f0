// Acceptance suite: one self-contained check per release criterion, one
// PASS/FAIL line each, nonzero exit if anything fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gasf/model_io.hpp"
#include "gasf/pipeline.hpp"
#include "gasf/synth.hpp"

namespace fs = std::filesystem;
using namespace gasf;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/gasf_accept_" + name;
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << content;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GASF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Check {
    std::string name;
    std::function<bool(std::string&)> fn;  // fills a failure detail message
};

// --------------------------------------------------------------------------
// 1. Gradient fidelity

bool check_gradients(std::string& detail) {
    const auto start = Clock::now();
    SequenceWindow w;
    Rng rng(77);
    for (int t = 0; t < 5; ++t) {
        std::vector<double> row(3);
        for (auto& x : row) x = rng.uniform(-1.0, 1.0);
        w.inputs.push_back(row);
    }
    w.target = rng.uniform(-1.0, 1.0);

    const char* names[] = {"lstm", "gru", "bilstm"};
    int k = 0;
    for (auto kind : {NetworkKind::Lstm, NetworkKind::Gru, NetworkKind::BiLstm}) {
        auto net = make_network(kind, 3, 4, 1, 0.0, 1234);
        auto report = gradient_check(net, w, 1e-5);
        if (report.max_rel_error > 1e-4 || report.params_checked == 0) {
            detail = std::string(names[k]) + " max relative error " +
                     std::to_string(report.max_rel_error);
            return false;
        }
        ++k;
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 60.0) {
        detail = "took " + std::to_string(elapsed) + " s";
        return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 2. Split oracle

std::optional<SplitResult> brute_split(const std::vector<std::vector<double>>& X,
                                       const std::vector<GradHessPair>& gh,
                                       const std::vector<std::size_t>& idx, const GbtParams& p) {
    const std::size_t nf = X.front().size();
    double G = 0, H = 0;
    for (auto i : idx) {
        G += gh[i].g;
        H += gh[i].h;
    }
    const double parent = G * G / (H + p.lambda);
    std::optional<SplitResult> best;
    for (std::size_t f = 0; f < nf; ++f) {
        std::vector<double> vals;
        for (auto i : idx) vals.push_back(X[i][f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double thr = vals[k] + 0.5 * (vals[k + 1] - vals[k]);
            double GL = 0, HL = 0;
            for (auto i : idx)
                if (X[i][f] < thr) {
                    GL += gh[i].g;
                    HL += gh[i].h;
                }
            const double GR = G - GL, HR = H - HL;
            if (HL < p.min_child_weight || HR < p.min_child_weight) continue;
            const double gain =
                0.5 * (GL * GL / (HL + p.lambda) + GR * GR / (HR + p.lambda) - parent) - p.gamma;
            if (gain <= 0) continue;
            if (!best || gain > best->gain ||
                (gain == best->gain &&
                 (int(f) < best->feature ||
                  (int(f) == best->feature && thr < best->threshold))))
                best = SplitResult{int(f), thr, gain};
        }
    }
    return best;
}

bool check_split_oracle(std::string& detail) {
    Rng rng(31337);
    int with_split = 0;
    for (int iter = 0; iter < 240; ++iter) {
        const std::size_t n = 2 + rng.bounded(63);
        const std::size_t nf = 1 + rng.bounded(6);
        std::vector<std::vector<double>> X(n, std::vector<double>(nf, 0.0));
        std::vector<GradHessPair> gh(n);
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : X[i]) v = rng.uniform(-4.0, 4.0);
            // gradients on a 1/8 grid: partial sums are exact in binary64, so
            // gains depend only on the induced partition, never on summation
            // order, and tie-breaking is well defined
            gh[i] = {0.125 * double(int(rng.uniform(-24.0, 24.0))), 1.0};
            idx[i] = i;
        }
        GbtParams p;
        p.lambda = (iter % 2 == 0) ? 0.0 : 1.0;
        p.gamma = (iter % 3 == 0) ? 0.5 : 0.0;

        auto got = find_best_split(X, gh, idx, p);
        auto want = brute_split(X, gh, idx, p);
        if (got.has_value() != want.has_value()) {
            detail = "presence mismatch on dataset " + std::to_string(iter);
            return false;
        }
        if (!got) continue;
        ++with_split;
        const bool ok = got->feature == want->feature &&
                        std::abs(got->threshold - want->threshold) <=
                            1e-12 * std::max(1.0, std::abs(want->threshold)) &&
                        std::abs(got->gain - want->gain) <=
                            1e-12 * std::max(1.0, std::abs(want->gain));
        if (!ok) {
            detail = "dataset " + std::to_string(iter) + ": got (f=" +
                     std::to_string(got->feature) + ", thr=" + std::to_string(got->threshold) +
                     ", gain=" + std::to_string(got->gain) + ") want (f=" +
                     std::to_string(want->feature) + ", thr=" + std::to_string(want->threshold) +
                     ", gain=" + std::to_string(want->gain) + ")";
            return false;
        }
    }
    if (with_split < 200) {
        detail = "only " + std::to_string(with_split) + " datasets produced a split";
        return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 3. Exact-fit property

bool check_exact_fit(std::string& detail) {
    Rng rng(404);
    for (int iter = 0; iter < 10; ++iter) {
        const std::size_t n = 4 + rng.bounded(29);  // <= 32
        std::vector<std::vector<double>> X(n, std::vector<double>(2, 0.0));
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            X[i][0] = double(i) + rng.uniform(0.0, 0.25);  // distinct
            X[i][1] = rng.uniform(-1.0, 1.0);
            y[i] = rng.uniform(-100.0, 100.0);
        }
        GbtParams p;
        p.n_trees = 4;
        p.max_depth = 8;
        p.learning_rate = 1.0;
        p.lambda = 0.0;
        p.gamma = 0.0;
        auto model = fit_gbt(X, y, {"f0", "f1"}, p);
        double se = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = model.predict(X[i]) - y[i];
            se += d * d;
        }
        const double train_rmse = std::sqrt(se / double(n));
        if (!(train_rmse < 1e-9)) {
            detail = "dataset " + std::to_string(iter) + ": training RMSE " +
                     std::to_string(train_rmse);
            return false;
        }
    }
    return true;
}

// --------------------------------------------------------------------------
// 4. Metric formula suite

bool check_metrics(std::string& detail) {
    MetricSeries s{{10.0, 20.0}, {14.0, 17.0}};
    if (std::abs(rmse(s) - std::sqrt(12.5)) > 1e-12) {
        detail = "RMSE([10,20],[14,17]) = " + std::to_string(rmse(s));
        return false;
    }
    if (std::abs(mape(s) - 27.5) > 1e-12 || std::abs(mpe(s) + 12.5) > 1e-12) {
        detail = "MAPE/MPE example mismatch";
        return false;
    }
    // systematic overprediction must give a negative MPE
    MetricSeries over{{100.0, 100.0}, {110.0, 110.0}};
    if (!(mpe(over) < 0.0)) {
        detail = "MPE sign convention violated";
        return false;
    }
    Rng rng(5);
    for (int iter = 0; iter < 200; ++iter) {
        MetricSeries t;
        for (int i = 0; i < 8; ++i) {
            t.actual.push_back(rng.uniform(1.0, 1e6));
            t.predicted.push_back(rng.uniform(1.0, 1e6));
        }
        MetricSeries scaled;
        for (std::size_t i = 0; i < t.actual.size(); ++i) {
            scaled.actual.push_back(977.0 * t.actual[i]);
            scaled.predicted.push_back(977.0 * t.predicted[i]);
        }
        if (std::abs(mape(scaled) - mape(t)) > 1e-9 * mape(t)) {
            detail = "MAPE is not scale invariant";
            return false;
        }
        if (std::abs(mpe(t)) > mape(t) + 1e-9) {
            detail = "|MPE| > MAPE";
            return false;
        }
    }
    return true;
}

// --------------------------------------------------------------------------
// 5. Hybrid Jensen property

bool check_jensen(std::string& detail) {
    Rng rng(606);
    double se_a = 0, se_b = 0, se_avg = 0;
    for (int i = 0; i < 1000; ++i) {
        const double t = rng.uniform(-10.0, 10.0);
        const double a = t + rng.uniform(-5.0, 5.0);
        const double b = t + rng.uniform(-5.0, 5.0);
        const double avg = 0.5 * (a + b);
        if (std::abs(avg - t) > std::max(std::abs(a - t), std::abs(b - t)) + 1e-12) {
            detail = "pointwise violation at triple " + std::to_string(i);
            return false;
        }
        se_a += (a - t) * (a - t);
        se_b += (b - t) * (b - t);
        se_avg += (avg - t) * (avg - t);
    }
    if (!(std::sqrt(se_avg) <= std::max(std::sqrt(se_a), std::sqrt(se_b)) + 1e-12)) {
        detail = "aggregate RMSE violation";
        return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 6. Preprocessing round trips

bool check_preprocessing(std::string& detail) {
    // ln(1+x) round trip over [0, 1e8]
    for (int i = 0; i <= 1000; ++i) {
        const double x = 1e8 * double(i) / 1000.0;
        const double rt = inverse_log_transform(log_transform_target(x));
        if (std::abs(rt - x) > 1e-9 * std::max(1.0, x)) {
            detail = "log1p round trip failed at x=" + std::to_string(x);
            return false;
        }
    }

    // scaler transform/inverse identity for both modes
    Rng rng(8);
    for (auto mode : {ScalerMode::MinMax, ScalerMode::ZScore}) {
        std::vector<FeatureRow> rows;
        for (int i = 0; i < 24; ++i) {
            FeatureRow r;
            r.city = "a";
            r.date = Date{2017, 1, 1}.add_months(i);
            r.features.assign(std::size_t(kFeatureCount), 0.0);
            for (auto& f : r.features) f = rng.uniform(-50.0, 50.0);
            r.target = rng.uniform(1e3, 1e7);
            rows.push_back(std::move(r));
        }
        auto params = fit_scaler(rows, mode);
        auto scaled = transform(params, rows);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (int f = 0; f < kFeatureCount; ++f) {
                const double back = params.unscale_feature(std::size_t(f), scaled[i].features[f]);
                if (std::abs(back - rows[i].features[f]) >
                    1e-9 * std::max(1.0, std::abs(rows[i].features[f]))) {
                    detail = "feature round trip failed";
                    return false;
                }
            }
            const double back = params.unscale_target(scaled[i].target);
            if (std::abs(back - rows[i].target) > 1e-9 * rows[i].target) {
                detail = "target round trip failed";
                return false;
            }
        }
    }

    // interpolation idempotence and neighbor bounds on 100 random gap patterns
    int patterns = 0;
    Rng grng(909);
    while (patterns < 100) {
        const int n = 6 + int(grng.bounded(24));
        std::vector<std::optional<double>> usage(std::size_t(n), std::nullopt);
        int present = 0;
        for (auto& u : usage)
            if (grng.uniform() < 0.7) {
                u = grng.uniform(10.0, 100.0);
                ++present;
            }
        if (present * 2 <= n || present < 2) continue;
        ++patterns;

        MergedDataset ds;
        ds.cities = {"a"};
        for (int i = 0; i < n; ++i) {
            MergedRow r;
            r.city = "a";
            r.date = Date{2017, 1, 1}.add_months(i);
            r.usage = usage[std::size_t(i)];
            for (int k = 0; k < kWeatherFieldCount; ++k) r.weather[k] = double(k + 1);
            ds.rows.push_back(std::move(r));
        }
        ds.min_date = ds.rows.front().date;
        ds.max_date = ds.rows.back().date;

        auto fixed = interpolate_missing(ds);
        auto twice = interpolate_missing(fixed);
        for (int i = 0; i < n; ++i) {
            if (*twice.rows[std::size_t(i)].usage != *fixed.rows[std::size_t(i)].usage) {
                detail = "interpolation is not idempotent";
                return false;
            }
            if (usage[std::size_t(i)]) {
                if (*fixed.rows[std::size_t(i)].usage != *usage[std::size_t(i)]) {
                    detail = "interpolation modified a present value";
                    return false;
                }
                continue;
            }
            double lo = 1e300, hi = -1e300;
            for (int j = i - 1; j >= 0; --j)
                if (usage[std::size_t(j)]) {
                    lo = std::min(lo, *usage[std::size_t(j)]);
                    hi = std::max(hi, *usage[std::size_t(j)]);
                    break;
                }
            for (int j = i + 1; j < n; ++j)
                if (usage[std::size_t(j)]) {
                    lo = std::min(lo, *usage[std::size_t(j)]);
                    hi = std::max(hi, *usage[std::size_t(j)]);
                    break;
                }
            const double v = *fixed.rows[std::size_t(i)].usage;
            if (v < lo - 1e-9 || v > hi + 1e-9) {
                detail = "interpolated value escapes its neighbor bounds";
                return false;
            }
        }
    }
    return true;
}

// --------------------------------------------------------------------------
// 7. End-to-end synthetic ordering

MergedDataset make_synth_dataset(bool freezing_driven, std::uint64_t seed) {
    SynthParams sp;
    sp.freezing_driven = freezing_driven;
    sp.seed = seed;
    auto csvs = generate_synthetic(sp);  // 5 cities x 72 months
    auto cons = parse_consumption_csv(write_temp("cons.csv", csvs.consumption_csv));
    auto wx = parse_weather_csv(write_temp("wx.csv", csvs.weather_csv));
    return interpolate_missing(merge_by_city_month(cons, wx));
}

bool check_end_to_end(std::string& detail) {
    const auto start = Clock::now();
    auto ds = make_synth_dataset(false, 1);

    const PipelineConfig pcfg;   // window 12, 0.8 split, min-max, log target
    const NetArchConfig arch;    // 64 hidden, 2 layers, 0.2 dropout
    const TrainConfig tcfg;      // 500 epochs, batch 32, Adam defaults
    const GbtParams gbt;         // 200 trees, depth 4, eta 0.1

    std::vector<PredictionEntry> entries;
    std::map<std::string, double> mean_test_rmse;
    for (auto kind : {ModelKind::Lstm, ModelKind::Gru, ModelKind::Hybrid}) {
        auto fit = fit_model(ds, kind, pcfg, arch, tcfg, gbt, 7);
        auto sub = to_entries(predict_all(fit.model, ds), to_string(kind));
        entries.insert(entries.end(), sub.begin(), sub.end());
    }
    auto report = evaluate(entries);
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& c : report.cells) {
        if (c.split != "test") continue;
        acc[c.model].first += c.rmse;
        acc[c.model].second += 1;
        if (!(c.mape_pct < 35.0)) {
            detail = c.model + " test MAPE for " + c.city + " is " + std::to_string(c.mape_pct) +
                     "%";
            return false;
        }
    }
    for (const auto& [model, sum_n] : acc) mean_test_rmse[model] = sum_n.first / sum_n.second;

    const double best_single = std::min(mean_test_rmse["lstm"], mean_test_rmse["gru"]);
    std::ostringstream summary;
    summary.precision(6);
    summary << "      mean test RMSE: lstm=" << mean_test_rmse["lstm"]
            << " gru=" << mean_test_rmse["gru"] << " hybrid=" << mean_test_rmse["hybrid"];
    std::cout << summary.str() << '\n';
    if (!(mean_test_rmse["hybrid"] <= best_single * 1.05)) {
        detail = "hybrid mean test RMSE " + std::to_string(mean_test_rmse["hybrid"]) +
                 " exceeds best single " + std::to_string(best_single) + " x 1.05";
        return false;
    }
    const double elapsed = seconds_since(start);
    std::cout << "      trained 3 models in " << int(elapsed) << " s\n";
    if (elapsed >= 600.0) {
        detail = "took " + std::to_string(elapsed) + " s (budget 600)";
        return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 8. Feature-importance sanity

bool check_importance(std::string& detail) {
    auto ds = make_synth_dataset(true, 2);  // usage driven solely by freezing days

    PipelineConfig pcfg;
    NetArchConfig arch{16, 1, 0.0};
    TrainConfig tcfg;
    tcfg.epochs = 40;  // the tree branch alone determines importance
    GbtParams gbt;     // default 200 trees, depth 4
    auto fit = fit_model(ds, ModelKind::Hybrid, pcfg, arch, tcfg, gbt, 7);
    auto ranked = fit.model.trees->feature_importance();
    if (ranked.empty()) {
        detail = "model never split";
        return false;
    }
    std::cout << "      top feature: " << ranked.front().first << " (share "
              << ranked.front().second << ")\n";
    if (ranked.front().first != "freezing_days") {
        detail = "top feature is " + ranked.front().first;
        return false;
    }
    if (!(ranked.front().second > 0.5)) {
        detail = "freezing_days share is only " + std::to_string(ranked.front().second);
        return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// 9. Determinism through the CLI

bool check_determinism(std::string& detail) {
    const std::string root = "/tmp/gasf_accept_det";
    fs::remove_all(root);
    fs::create_directories(root);
    if (run_cli("synth --seed 1 --out " + root + "/data") != 0) {
        detail = "synth failed";
        return false;
    }
    const std::string data = " --consumption " + root + "/data/consumption.csv --weather " + root +
                             "/data/weather.csv";
    // Reduced epochs/trees keep the acceptance run short; determinism does not
    // depend on the training length.
    const std::string train = "train" + data +
                              " --model hybrid --seed 7 --epochs 30 --hidden 16 --layers 1 "
                              "--dropout 0 --trees 50 --out ";
    for (const char* run : {"run1", "run2"}) {
        if (run_cli(train + root + "/" + run) != 0) {
            detail = std::string("train failed (") + run + ")";
            return false;
        }
        if (run_cli("evaluate" + data + " --model-file " + root + "/" + run + "/model.json --out " +
                    root + "/" + run + "_eval") != 0) {
            detail = std::string("evaluate failed (") + run + ")";
            return false;
        }
    }
    if (slurp(root + "/run1/model.json") != slurp(root + "/run2/model.json") ||
        slurp(root + "/run1/model.json").empty()) {
        detail = "model files differ";
        return false;
    }
    if (slurp(root + "/run1_eval/eval.csv") != slurp(root + "/run2_eval/eval.csv") ||
        slurp(root + "/run1_eval/eval.csv").empty()) {
        detail = "evaluation CSVs differ";
        return false;
    }
    return true;
}

}  // namespace

int main() {
    std::vector<Check> checks = {
        {"gradient fidelity (LSTM/GRU/BiLSTM vs central differences)", check_gradients},
        {"exact-greedy split matches brute force on 200+ random datasets", check_split_oracle},
        {"unregularized boosting fits small datasets exactly", check_exact_fit},
        {"metric formulas and invariants", check_metrics},
        {"hybrid averaging Jensen property on 1000 random triples", check_jensen},
        {"preprocessing round trips and interpolation properties", check_preprocessing},
        {"end-to-end synthetic run: hybrid competitive, MAPE within range", check_end_to_end},
        {"freezing-driven scenario ranks freezing_days first", check_importance},
        {"seeded CLI runs are byte-identical", check_determinism},
    };

    int failures = 0;
    for (auto& check : checks) {
        std::string detail;
        bool ok = false;
        try {
            ok = check.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (ok) {
            std::cout << "PASS: " << check.name << '\n';
        } else {
            std::cout << "FAIL: " << check.name << (detail.empty() ? "" : " — " + detail) << '\n';
            ++failures;
        }
        std::cout.flush();
    }
    if (failures) std::cout << failures << " of " << checks.size() << " checks failed\n";
    return failures == 0 ? 0 : 1;
}
