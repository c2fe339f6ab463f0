#include "gasf/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gasf {

GradHessPair squared_loss_grad_hess(double pred, double target) {
    if (!std::isfinite(pred) || !std::isfinite(target))
        throw NumericError("non-finite value in loss derivatives");
    return {pred - target, 1.0};
}

double RegressionTree::predict(const std::vector<double>& features) const {
    if (nodes.empty()) throw DataError("empty tree");
    int i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& n = nodes[i];
        if (n.feature >= int(features.size())) throw DataError("feature width mismatch");
        i = features[n.feature] < n.threshold ? n.left : n.right;
    }
    return nodes[i].weight;
}

namespace {

double structure_score(double G, double H, double lambda) { return G * G / (H + lambda); }

void validate_params(const GbtParams& p) {
    if (p.n_trees < 0 || p.max_depth < 1 || !(p.learning_rate > 0 && p.learning_rate <= 1) ||
        p.lambda < 0 || p.gamma < 0 || p.min_child_weight < 0)
        throw DataError("invalid boosting parameters");
}

}  // namespace

std::optional<SplitResult> find_best_split(const std::vector<std::vector<double>>& features,
                                           const std::vector<GradHessPair>& gh,
                                           const std::vector<std::size_t>& indices,
                                           const GbtParams& params) {
    if (indices.size() < 2) return std::nullopt;
    const std::size_t n_features = features[indices.front()].size();

    double G = 0, H = 0;
    for (std::size_t i : indices) {
        G += gh[i].g;
        H += gh[i].h;
    }
    const double parent_score = structure_score(G, H, params.lambda);

    std::optional<SplitResult> best;
    std::vector<std::size_t> order(indices);
    for (std::size_t f = 0; f < n_features; ++f) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return features[a][f] < features[b][f];
        });
        double GL = 0, HL = 0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            GL += gh[order[k]].g;
            HL += gh[order[k]].h;
            const double lo = features[order[k]][f], hi = features[order[k + 1]][f];
            if (lo == hi) continue;  // boundary only between distinct values
            const double HR = H - HL;
            if (HL < params.min_child_weight || HR < params.min_child_weight) continue;
            const double GR = G - GL;
            const double gain = 0.5 * (structure_score(GL, HL, params.lambda) +
                                       structure_score(GR, HR, params.lambda) - parent_score) -
                                params.gamma;
            if (gain <= 0) continue;
            const double threshold = lo + 0.5 * (hi - lo);
            if (!best || gain > best->gain ||
                (gain == best->gain && (int(f) < best->feature ||
                                        (int(f) == best->feature && threshold < best->threshold))))
                best = SplitResult{int(f), threshold, gain};
        }
    }
    return best;
}

namespace {

int build_node(const std::vector<std::vector<double>>& features,
               const std::vector<GradHessPair>& gh, const std::vector<std::size_t>& indices,
               const GbtParams& params, int depth, RegressionTree& tree) {
    double G = 0, H = 0;
    for (std::size_t i : indices) {
        G += gh[i].g;
        H += gh[i].h;
    }

    std::optional<SplitResult> split;
    if (depth < params.max_depth) split = find_best_split(features, gh, indices, params);

    const int node_id = int(tree.nodes.size());
    tree.nodes.emplace_back();
    if (!split) {
        tree.nodes[node_id].weight = -G / (H + params.lambda);
        return node_id;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t i : indices)
        (features[i][split->feature] < split->threshold ? left : right).push_back(i);

    tree.nodes[node_id].feature = split->feature;
    tree.nodes[node_id].threshold = split->threshold;
    tree.nodes[node_id].gain = split->gain;
    const int l = build_node(features, gh, left, params, depth + 1, tree);
    const int r = build_node(features, gh, right, params, depth + 1, tree);
    tree.nodes[node_id].left = l;
    tree.nodes[node_id].right = r;
    return node_id;
}

}  // namespace

RegressionTree build_tree(const std::vector<std::vector<double>>& features,
                          const std::vector<GradHessPair>& gh,
                          const std::vector<std::size_t>& indices, const GbtParams& params) {
    if (indices.empty()) throw DataError("tree requires at least one sample");
    validate_params(params);
    RegressionTree tree;
    build_node(features, gh, indices, params, 0, tree);
    return tree;
}

double GbtModel::predict(const std::vector<double>& features) const {
    if (!feature_names.empty() && features.size() != feature_names.size())
        throw DataError("feature width mismatch");
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(features);
    return base_score + params.learning_rate * sum;
}

std::vector<std::pair<std::string, double>> GbtModel::feature_importance() const {
    double total = std::accumulate(importance_gain.begin(), importance_gain.end(), 0.0);
    std::vector<std::pair<std::string, double>> out;
    if (total <= 0) return out;
    for (std::size_t f = 0; f < importance_gain.size(); ++f)
        out.emplace_back(feature_names[f], importance_gain[f] / total);
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

GbtModel fit_gbt(const std::vector<std::vector<double>>& features,
                 const std::vector<double>& targets,
                 const std::vector<std::string>& feature_names, const GbtParams& params) {
    if (features.empty() || features.size() != targets.size())
        throw DataError("boosting requires matching non-empty features and targets");
    validate_params(params);
    const std::size_t width = feature_names.size();
    for (const auto& row : features)
        if (row.size() != width) throw DataError("feature width mismatch");
    for (const auto& row : features)
        for (double x : row)
            if (!std::isfinite(x)) throw DataError("non-finite feature value");
    for (double y : targets)
        if (!std::isfinite(y)) throw DataError("non-finite target value");

    GbtModel model;
    model.params = params;
    model.feature_names = feature_names;
    model.importance_gain.assign(width, 0.0);
    model.base_score = std::accumulate(targets.begin(), targets.end(), 0.0) / double(targets.size());

    std::vector<double> pred(targets.size(), model.base_score);
    std::vector<GradHessPair> gh(targets.size());
    std::vector<std::size_t> all(targets.size());
    std::iota(all.begin(), all.end(), 0);

    for (int t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < targets.size(); ++i)
            gh[i] = squared_loss_grad_hess(pred[i], targets[i]);
        RegressionTree tree = build_tree(features, gh, all, params);
        for (const auto& node : tree.nodes)
            if (!node.is_leaf()) model.importance_gain[node.feature] += node.gain;
        for (std::size_t i = 0; i < targets.size(); ++i)
            pred[i] += params.learning_rate * tree.predict(features[i]);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace gasf
