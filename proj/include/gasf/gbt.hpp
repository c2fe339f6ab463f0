#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gasf/errors.hpp"

namespace gasf {

struct GbtParams {
    int n_trees = 200;
    int max_depth = 4;
    double learning_rate = 0.1;     // eta
    double lambda = 1.0;            // L2 leaf regularization
    double gamma = 0.0;             // split penalty
    double min_child_weight = 1.0;  // minimum hessian sum per child
};

struct GradHessPair {
    double g = 0.0;
    double h = 0.0;
};

// Squared loss: g = pred - target, h = 1.
GradHessPair squared_loss_grad_hess(double pred, double target);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double gain = 0.0;
    double weight = 0.0;  // leaf output -G/(H+lambda)

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    // Routing: go left iff value < threshold.
    double predict(const std::vector<double>& features) const;
};

struct SplitResult {
    int feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exact greedy search over every feature and every boundary between distinct
// values. Returns nullopt when no split has positive gain or min_child_weight
// cannot be met. Ties break toward the lowest feature index, then the lowest
// threshold.
std::optional<SplitResult> find_best_split(const std::vector<std::vector<double>>& features,
                                           const std::vector<GradHessPair>& gh,
                                           const std::vector<std::size_t>& indices,
                                           const GbtParams& params);

RegressionTree build_tree(const std::vector<std::vector<double>>& features,
                          const std::vector<GradHessPair>& gh,
                          const std::vector<std::size_t>& indices, const GbtParams& params);

struct GbtModel {
    GbtParams params;
    double base_score = 0.0;
    std::vector<RegressionTree> trees;
    std::vector<std::string> feature_names;
    std::vector<double> importance_gain;  // accumulated split gain per feature

    double predict(const std::vector<double>& features) const;

    // Gain shares summing to 1 (empty when the model never split).
    std::vector<std::pair<std::string, double>> feature_importance() const;
};

GbtModel fit_gbt(const std::vector<std::vector<double>>& features,
                 const std::vector<double>& targets,
                 const std::vector<std::string>& feature_names, const GbtParams& params);

}  // namespace gasf
