#include "gasf/model_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace gasf {

using json = nlohmann::ordered_json;

namespace {

json tensor(const std::vector<double>& data, std::initializer_list<int> shape) {
    json t;
    t["shape"] = std::vector<int>(shape);
    t["data"] = data;
    return t;
}

std::vector<double> read_tensor(const json& t, std::initializer_list<int> shape) {
    std::size_t expect = 1;
    std::vector<int> s = t.at("shape").get<std::vector<int>>();
    std::vector<int> want(shape);
    if (s != want) throw DataError("model file: tensor shape mismatch");
    for (int d : s) expect *= std::size_t(d);
    auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != expect) throw DataError("model file: tensor data size mismatch");
    return data;
}

json scale_json(const FeatureScale& s) {
    return json{{"a", s.a}, {"b", s.b}, {"constant", s.constant}};
}

FeatureScale scale_from(const json& j) {
    return FeatureScale{j.at("a").get<double>(), j.at("b").get<double>(),
                        j.at("constant").get<bool>()};
}

json lstm_cell_json(const LstmCellParams& c) {
    json j;
    j["input"] = c.input;
    j["hidden"] = c.hidden;
    j["w_x"] = tensor(c.w_x, {4 * c.hidden, c.input});
    j["w_h"] = tensor(c.w_h, {4 * c.hidden, c.hidden});
    j["b"] = tensor(c.b, {4 * c.hidden});
    return j;
}

LstmCellParams lstm_cell_from(const json& j) {
    LstmCellParams c;
    c.input = j.at("input").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.w_x = read_tensor(j.at("w_x"), {4 * c.hidden, c.input});
    c.w_h = read_tensor(j.at("w_h"), {4 * c.hidden, c.hidden});
    c.b = read_tensor(j.at("b"), {4 * c.hidden});
    return c;
}

json gru_cell_json(const GruCellParams& c) {
    json j;
    j["input"] = c.input;
    j["hidden"] = c.hidden;
    j["w_x"] = tensor(c.w_x, {3 * c.hidden, c.input});
    j["w_h"] = tensor(c.w_h, {3 * c.hidden, c.hidden});
    j["b"] = tensor(c.b, {3 * c.hidden});
    return j;
}

GruCellParams gru_cell_from(const json& j) {
    GruCellParams c;
    c.input = j.at("input").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.w_x = read_tensor(j.at("w_x"), {3 * c.hidden, c.input});
    c.w_h = read_tensor(j.at("w_h"), {3 * c.hidden, c.hidden});
    c.b = read_tensor(j.at("b"), {3 * c.hidden});
    return c;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write file: " + tmp);
        out << content;
        if (!out.good()) throw DataError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw DataError("cannot rename " + tmp + " to " + path);
    }
}

void save_model(const ForecastModel& model, const std::string& path,
                const std::string& config_echo_json) {
    json j;
    j["schema_version"] = kModelSchemaVersion;
    j["kind"] = to_string(model.kind);
    j["seed"] = model.seed;

    j["pipeline"] = {
        {"train_fraction", model.pipeline.split.train_fraction},
        {"per_city", model.pipeline.split.per_city},
        {"window_length", model.pipeline.window_length},
        {"lag", model.pipeline.lag},
        {"scaler_mode", model.pipeline.scaler_mode == ScalerMode::MinMax ? "minmax" : "zscore"},
        {"target_log", model.pipeline.target_log},
        {"average_raw_space", model.pipeline.average_raw_space},
    };

    j["feature_names"] = model.feature_names;

    json sc;
    sc["mode"] = model.scaler.mode == ScalerMode::MinMax ? "minmax" : "zscore";
    sc["target_log"] = model.scaler.target_log;
    sc["target"] = scale_json(model.scaler.target);
    json per;
    for (std::size_t i = 0; i < model.scaler.per_feature.size(); ++i)
        per[model.scaler.names[i]] = scale_json(model.scaler.per_feature[i]);
    sc["features"] = per;
    j["scaler"] = sc;

    json layers = json::array();
    for (const auto& layer : model.neural.layers) {
        json lj;
        if (const auto* l = std::get_if<LstmLayer>(&layer)) {
            lj["type"] = "lstm";
            lj["dropout"] = l->dropout;
            lj["cell"] = lstm_cell_json(l->cell);
        } else if (const auto* l = std::get_if<GruLayer>(&layer)) {
            lj["type"] = "gru";
            lj["dropout"] = l->dropout;
            lj["cell"] = gru_cell_json(l->cell);
        } else {
            const auto& bl = std::get<BiLstmLayer>(layer);
            lj["type"] = "bilstm";
            lj["dropout"] = bl.dropout;
            lj["forward_cell"] = lstm_cell_json(bl.forward_cell);
            lj["backward_cell"] = lstm_cell_json(bl.backward_cell);
        }
        layers.push_back(std::move(lj));
    }
    json neural;
    neural["layers"] = std::move(layers);
    neural["head"] = {{"w", tensor(model.neural.head.w, {int(model.neural.head.w.size())})},
                      {"b", model.neural.head.b[0]}};
    neural["rng_seed"] = model.neural.rng_seed;
    j["neural"] = std::move(neural);

    if (model.trees) {
        const GbtModel& g = *model.trees;
        json gj;
        gj["params"] = {{"n_trees", g.params.n_trees},
                        {"max_depth", g.params.max_depth},
                        {"learning_rate", g.params.learning_rate},
                        {"lambda", g.params.lambda},
                        {"gamma", g.params.gamma},
                        {"min_child_weight", g.params.min_child_weight}};
        gj["base_score"] = g.base_score;
        gj["importance_gain"] = g.importance_gain;
        json trees = json::array();
        for (const auto& tree : g.trees) {
            json nodes = json::array();
            for (const auto& n : tree.nodes)
                nodes.push_back(json{{"feature", n.feature},
                                     {"threshold", n.threshold},
                                     {"left", n.left},
                                     {"right", n.right},
                                     {"gain", n.gain},
                                     {"weight", n.weight}});
            trees.push_back(std::move(nodes));
        }
        gj["trees"] = std::move(trees);
        j["gbt"] = std::move(gj);
    }

    j["config_echo"] = json::parse(config_echo_json);
    write_file_atomic(path, j.dump(1) + "\n");
}

ForecastModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("corrupted model file " + path + ": " + e.what());
    }
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kModelSchemaVersion)
            throw DataError("model schema version " + std::to_string(version) +
                            " unsupported (expected " + std::to_string(kModelSchemaVersion) + ")");

        ForecastModel m;
        m.kind = model_kind_from_string(j.at("kind").get<std::string>());
        m.seed = j.at("seed").get<std::uint64_t>();

        const json& pj = j.at("pipeline");
        m.pipeline.split.train_fraction = pj.at("train_fraction").get<double>();
        m.pipeline.split.per_city = pj.at("per_city").get<bool>();
        m.pipeline.window_length = pj.at("window_length").get<int>();
        m.pipeline.lag = pj.at("lag").get<int>();
        m.pipeline.scaler_mode = pj.at("scaler_mode").get<std::string>() == "minmax"
                                     ? ScalerMode::MinMax
                                     : ScalerMode::ZScore;
        m.pipeline.target_log = pj.at("target_log").get<bool>();
        m.pipeline.average_raw_space = pj.at("average_raw_space").get<bool>();

        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();

        const json& sc = j.at("scaler");
        m.scaler.mode = m.pipeline.scaler_mode;
        m.scaler.target_log = sc.at("target_log").get<bool>();
        m.scaler.target = scale_from(sc.at("target"));
        m.scaler.names = m.feature_names;
        for (const auto& name : m.feature_names)
            m.scaler.per_feature.push_back(scale_from(sc.at("features").at(name)));

        const json& nj = j.at("neural");
        for (const auto& lj : nj.at("layers")) {
            const std::string type = lj.at("type").get<std::string>();
            if (type == "lstm") {
                LstmLayer l;
                l.dropout = lj.at("dropout").get<double>();
                l.cell = lstm_cell_from(lj.at("cell"));
                m.neural.layers.emplace_back(std::move(l));
            } else if (type == "gru") {
                GruLayer l;
                l.dropout = lj.at("dropout").get<double>();
                l.cell = gru_cell_from(lj.at("cell"));
                m.neural.layers.emplace_back(std::move(l));
            } else if (type == "bilstm") {
                BiLstmLayer l;
                l.dropout = lj.at("dropout").get<double>();
                l.forward_cell = lstm_cell_from(lj.at("forward_cell"));
                l.backward_cell = lstm_cell_from(lj.at("backward_cell"));
                m.neural.layers.emplace_back(std::move(l));
            } else {
                throw DataError("unknown layer type '" + type + "'");
            }
        }
        const json& hj = nj.at("head");
        const int width = layer_output_width(m.neural.layers.back());
        m.neural.head.w = read_tensor(hj.at("w"), {width});
        m.neural.head.b = {hj.at("b").get<double>()};
        m.neural.rng_seed = nj.at("rng_seed").get<std::uint64_t>();

        if (j.contains("gbt")) {
            const json& gj = j.at("gbt");
            GbtModel g;
            const json& gp = gj.at("params");
            g.params.n_trees = gp.at("n_trees").get<int>();
            g.params.max_depth = gp.at("max_depth").get<int>();
            g.params.learning_rate = gp.at("learning_rate").get<double>();
            g.params.lambda = gp.at("lambda").get<double>();
            g.params.gamma = gp.at("gamma").get<double>();
            g.params.min_child_weight = gp.at("min_child_weight").get<double>();
            g.base_score = gj.at("base_score").get<double>();
            g.importance_gain = gj.at("importance_gain").get<std::vector<double>>();
            g.feature_names = m.feature_names;
            for (const auto& tj : gj.at("trees")) {
                RegressionTree tree;
                for (const auto& node : tj) {
                    TreeNode n;
                    n.feature = node.at("feature").get<int>();
                    n.threshold = node.at("threshold").get<double>();
                    n.left = node.at("left").get<int>();
                    n.right = node.at("right").get<int>();
                    n.gain = node.at("gain").get<double>();
                    n.weight = node.at("weight").get<double>();
                    tree.nodes.push_back(n);
                }
                g.trees.push_back(std::move(tree));
            }
            m.trees = std::move(g);
        }
        if (m.kind == ModelKind::Hybrid && !m.trees)
            throw DataError("hybrid model file is missing the gbt section");
        return m;
    } catch (const DataError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError("corrupted model file " + path + ": " + e.what());
    }
}

}  // namespace gasf
