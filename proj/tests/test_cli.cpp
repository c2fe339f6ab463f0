#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gasf/dataset.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = GASF_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct Workspace {
    fs::path root;
    explicit Workspace(const std::string& name) : root(fs::path("/tmp") / ("gasf_cli_" + name)) {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    std::string dir(const std::string& sub) const { return (root / sub).string(); }
};

// Shared small dataset, generated once per binary run.
const Workspace& data_ws() {
    static Workspace ws("data");
    static bool made = [] {
        REQUIRE(run("synth --cities 2 --months 48 --seed 3 --out " +
                    (ws.root / "data").string()) == 0);
        return true;
    }();
    (void)made;
    return ws;
}

std::string data_args() {
    const auto& ws = data_ws();
    return "--consumption " + ws.dir("data") + "/consumption.csv --weather " + ws.dir("data") +
           "/weather.csv";
}

const std::string kQuickTrain =
    " --window 6 --epochs 5 --hidden 4 --layers 1 --dropout 0 --trees 10 ";

}  // namespace

TEST_CASE("cli synth is deterministic and round-trips through the parsers") {
    Workspace ws("synth");
    REQUIRE(run("synth --cities 3 --months 30 --seed 9 --out " + ws.dir("a")) == 0);
    REQUIRE(run("synth --cities 3 --months 30 --seed 9 --out " + ws.dir("b")) == 0);
    CHECK(slurp(ws.root / "a/consumption.csv") == slurp(ws.root / "b/consumption.csv"));
    CHECK(slurp(ws.root / "a/weather.csv") == slurp(ws.root / "b/weather.csv"));

    auto cons = gasf::parse_consumption_csv((ws.root / "a/consumption.csv").string());
    auto wx = gasf::parse_weather_csv((ws.root / "a/weather.csv").string());
    CHECK(cons.size() == 90);
    CHECK(wx.size() == 90);
    auto merged = gasf::merge_by_city_month(cons, wx);
    CHECK(merged.rows.size() == 90);
    CHECK(merged.cities.size() == 3);

    SUBCASE("different seed changes the data") {
        REQUIRE(run("synth --cities 3 --months 30 --seed 10 --out " + ws.dir("c")) == 0);
        CHECK(slurp(ws.root / "a/consumption.csv") != slurp(ws.root / "c/consumption.csv"));
    }
}

TEST_CASE("cli ingest summarizes the dataset") {
    CHECK(run("ingest " + data_args()) == 0);
}

TEST_CASE("cli train, evaluate, predict, importance") {
    Workspace ws("train");
    const std::string train_cmd = "train " + data_args() + kQuickTrain + "--model hybrid --seed 7 --out ";

    REQUIRE(run(train_cmd + ws.dir("run1")) == 0);
    REQUIRE(fs::exists(ws.root / "run1/model.json"));
    REQUIRE(fs::exists(ws.root / "run1/history.csv"));
    REQUIRE(fs::exists(ws.root / "run1/config.json"));

    SUBCASE("identical reruns are byte-identical") {
        REQUIRE(run(train_cmd + ws.dir("run2")) == 0);
        CHECK(slurp(ws.root / "run1/model.json") == slurp(ws.root / "run2/model.json"));
        CHECK(slurp(ws.root / "run1/history.csv") == slurp(ws.root / "run2/history.csv"));
    }
    SUBCASE("history has one row per epoch plus a final evaluation row") {
        auto hist = slurp(ws.root / "run1/history.csv");
        std::size_t lines = 0;
        for (char ch : hist)
            if (ch == '\n') ++lines;
        CHECK(lines == 7);  // header + 5 epochs + final_eval
        CHECK(hist.find("final_eval,") != std::string::npos);
    }
    SUBCASE("evaluate writes a csv and is deterministic") {
        REQUIRE(run("evaluate " + data_args() + " --model-file " + ws.dir("run1") +
                    "/model.json --out " + ws.dir("eval1")) == 0);
        REQUIRE(run("evaluate " + data_args() + " --model-file " + ws.dir("run1") +
                    "/model.json --out " + ws.dir("eval2")) == 0);
        auto csv = slurp(ws.root / "eval1/eval.csv");
        CHECK(csv.rfind("city,model,split,rmse,", 0) == 0);
        CHECK(csv == slurp(ws.root / "eval2/eval.csv"));
        CHECK(fs::exists(ws.root / "eval1/eval.txt"));
    }
    SUBCASE("predict emits a forecast for a known city") {
        CHECK(run("predict " + data_args() + " --model-file " + ws.dir("run1") +
                  "/model.json --city city_a --date 2020-06-01") == 0);
    }
    SUBCASE("predict rejects an unknown city with a data error") {
        CHECK(run("predict " + data_args() + " --model-file " + ws.dir("run1") +
                  "/model.json --city atlantis --date 2020-06-01") == 2);
    }
    SUBCASE("importance works for hybrid models") {
        Workspace iws("imp");
        REQUIRE(run("importance --model-file " + ws.dir("run1") + "/model.json --out " +
                    iws.dir("out")) == 0);
        auto csv = slurp(iws.root / "out/importance.csv");
        CHECK(csv.rfind("feature,importance\n", 0) == 0);
    }
    SUBCASE("importance refuses a pure neural model") {
        REQUIRE(run("train " + data_args() + kQuickTrain + "--model lstm --seed 7 --out " +
                    ws.dir("lstm")) == 0);
        CHECK(run("importance --model-file " + ws.dir("lstm") + "/model.json") == 2);
    }
}

TEST_CASE("cli error handling") {
    SUBCASE("missing input file is a data error without partial outputs") {
        Workspace ws("missing");
        CHECK(run("train --consumption /tmp/gasf_nope.csv --weather /tmp/gasf_nope2.csv" +
                  kQuickTrain + "--out " + ws.dir("out")) == 2);
        CHECK(!fs::exists(ws.root / "out/model.json"));
    }
    SUBCASE("usage errors exit with 1") {
        CHECK(run("") == 1);                      // missing subcommand
        CHECK(run("train") == 1);                 // missing required options
        CHECK(run("frobnicate") == 1);            // unknown subcommand
    }
    SUBCASE("corrupt model file is a data error") {
        Workspace ws("corrupt");
        std::ofstream(ws.dir("bad.json")) << "{nope";
        CHECK(run("evaluate " + data_args() + " --model-file " + ws.dir("bad.json")) == 2);
    }
}

TEST_CASE("cli gradcheck") { CHECK(run("gradcheck --seed 5") == 0); }

TEST_CASE("cli grid sweep") {
    Workspace ws("grid");
    std::ofstream(ws.dir("grid.csv")) << "hidden,epochs\n4,3\n6,3\n";
    REQUIRE(run("train " + data_args() + kQuickTrain + "--model hybrid --grid " + ws.dir("grid.csv") +
                " --out " + ws.dir("out")) == 0);
    auto csv = slurp(ws.root / "out/grid_results.csv");
    CHECK(csv.rfind("params,mean_test_rmse\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 3);  // header + 2 rows
    CHECK(csv.find("hidden=4") != std::string::npos);
    CHECK(csv.find("hidden=6") != std::string::npos);
}
