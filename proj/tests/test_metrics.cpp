#include <doctest.h>

#include <cmath>

#include "gasf/metrics.hpp"
#include "gasf/rng.hpp"

using namespace gasf;

TEST_CASE("metric formulas") {
    MetricSeries s{{10.0, 20.0}, {14.0, 17.0}};
    CHECK(rmse(s) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
    // |10-14|/10 = 40%, |20-17|/20 = 15% -> mean 27.5%
    CHECK(mape(s) == doctest::Approx(27.5).epsilon(1e-12));
    // (10-14)/10 = -40%, (20-17)/20 = +15% -> mean -12.5%
    CHECK(mpe(s) == doctest::Approx(-12.5).epsilon(1e-12));
}

TEST_CASE("mape and mpe signs") {
    MetricSeries over{{100.0, 100.0}, {110.0, 110.0}};
    CHECK(mape(over) == doctest::Approx(10.0));
    CHECK(mpe(over) == doctest::Approx(-10.0));  // overprediction is negative

    MetricSeries under{{100.0, 100.0}, {90.0, 90.0}};
    CHECK(mpe(under) == doctest::Approx(10.0));
}

TEST_CASE("metric properties") {
    Rng rng(12);
    for (int iter = 0; iter < 30; ++iter) {
        MetricSeries s;
        const int n = 3 + int(rng.bounded(20));
        for (int i = 0; i < n; ++i) {
            s.actual.push_back(rng.uniform(10.0, 1e6));
            s.predicted.push_back(rng.uniform(10.0, 1e6));
        }
        // |MPE| <= MAPE by the triangle inequality
        CHECK(std::abs(mpe(s)) <= mape(s) + 1e-9);
        // percentage metrics are scale invariant; rmse scales linearly
        MetricSeries scaled;
        for (std::size_t i = 0; i < s.actual.size(); ++i) {
            scaled.actual.push_back(1000.0 * s.actual[i]);
            scaled.predicted.push_back(1000.0 * s.predicted[i]);
        }
        CHECK(mape(scaled) == doctest::Approx(mape(s)).epsilon(1e-9));
        CHECK(mpe(scaled) == doctest::Approx(mpe(s)).epsilon(1e-9));
        CHECK(rmse(scaled) == doctest::Approx(1000.0 * rmse(s)).epsilon(1e-9));
        // perfect prediction zeroes everything
        MetricSeries perfect{s.actual, s.actual};
        CHECK(rmse(perfect) == 0.0);
        CHECK(mape(perfect) == 0.0);
        CHECK(mpe(perfect) == 0.0);
    }
}

TEST_CASE("metric guards") {
    CHECK_THROWS_AS(rmse(MetricSeries{{}, {}}), DataError);
    CHECK_THROWS_AS(rmse(MetricSeries{{1.0, 2.0}, {1.0}}), DataError);
    CHECK_THROWS_AS(mape(MetricSeries{{0.0}, {1.0}}), DataError);
    CHECK_THROWS_AS(mpe(MetricSeries{{0.0}, {1.0}}), DataError);
}

namespace {

PredictionEntry entry(const std::string& city, const std::string& model, const std::string& split,
                      std::vector<double> actual, std::vector<double> predicted) {
    return PredictionEntry{city, model, split, MetricSeries{std::move(actual), std::move(predicted)}};
}

}  // namespace

TEST_CASE("evaluate builds one cell per (city, model, split)") {
    std::vector<PredictionEntry> entries;
    for (const std::string& city : {"a", "b", "c", "d", "e"})
        for (const std::string& model : {"lstm", "gru", "hybrid"})
            for (const std::string& split : {"train", "test"})
                entries.push_back(entry(city, model, split, {100.0, 200.0}, {110.0, 190.0}));
    auto report = evaluate(entries);
    CHECK(report.cells.size() == 30);
    for (const auto& c : report.cells) {
        CHECK(c.rmse == doctest::Approx(10.0));
        CHECK(c.mape_pct == doctest::Approx(7.5));
    }

    auto csv = report.to_csv();
    CHECK(csv.rfind("city,model,split,rmse,mape_pct,mpe_pct\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 31);  // header + 30 cells

    auto text = report.to_text();
    CHECK(text.find("lstm") != std::string::npos);
    CHECK(text.find("hybrid") != std::string::npos);
    CHECK(text.find("test") != std::string::npos);
}

TEST_CASE("evaluate rejects misaligned series") {
    SUBCASE("model missing a city") {
        std::vector<PredictionEntry> entries{
            entry("a", "lstm", "test", {1.0}, {1.0}),
            entry("a", "gru", "test", {1.0}, {1.0}),
            entry("b", "lstm", "test", {1.0}, {1.0}),
        };
        CHECK_THROWS_AS(evaluate(entries), DataError);
    }
    SUBCASE("length mismatch between models") {
        std::vector<PredictionEntry> entries{
            entry("a", "lstm", "test", {1.0, 2.0}, {1.0, 2.0}),
            entry("a", "gru", "test", {1.0}, {1.0}),
        };
        CHECK_THROWS_AS(evaluate(entries), DataError);
    }
    SUBCASE("duplicate cell rejected") {
        std::vector<PredictionEntry> entries{
            entry("a", "lstm", "test", {1.0}, {1.0}),
            entry("a", "lstm", "test", {1.0}, {1.0}),
        };
        CHECK_THROWS_AS(evaluate(entries), DataError);
    }
    SUBCASE("empty input rejected") { CHECK_THROWS_AS(evaluate({}), DataError); }
}
