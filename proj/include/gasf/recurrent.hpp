#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "gasf/errors.hpp"
#include "gasf/preprocess.hpp"
#include "gasf/rng.hpp"

namespace gasf {

using Matrix = std::vector<std::vector<double>>;  // timesteps x width

// Gate blocks are stored stacked: w_x is (4H)xF row-major with gate order
// i, f, o, g; w_h is (4H)xH; b is 4H.
struct LstmCellParams {
    int input = 0;
    int hidden = 0;
    std::vector<double> w_x;
    std::vector<double> w_h;
    std::vector<double> b;
};

// Gate order z (update), r (reset), c (candidate); w_x is (3H)xF.
struct GruCellParams {
    int input = 0;
    int hidden = 0;
    std::vector<double> w_x;
    std::vector<double> w_h;
    std::vector<double> b;
};

struct LstmLayer {
    LstmCellParams cell;
    double dropout = 0.0;
};

struct GruLayer {
    GruCellParams cell;
    double dropout = 0.0;
};

struct BiLstmLayer {
    LstmCellParams forward_cell;
    LstmCellParams backward_cell;  // same hidden size; output width is 2H
    double dropout = 0.0;
};

using Layer = std::variant<LstmLayer, GruLayer, BiLstmLayer>;

int layer_input_width(const Layer& layer);
int layer_output_width(const Layer& layer);

struct DenseHead {
    std::vector<double> w;
    std::vector<double> b{0.0};  // single bias, kept as a 1-vector for the optimizer
};

struct RecurrentNetwork {
    std::vector<Layer> layers;
    DenseHead head;
    std::uint64_t rng_seed = 0;

    int input_width() const;
};

enum class NetworkKind { Lstm, Gru, BiLstm };

// Uniform +-1/sqrt(fan_in) init; LSTM forget-gate biases start at 1.
RecurrentNetwork make_network(NetworkKind kind, int input_width, int hidden, int num_layers,
                              double dropout, std::uint64_t seed);

// Single-step cell evaluations.
std::pair<std::vector<double>, std::vector<double>> lstm_step(const LstmCellParams& p,
                                                              const std::vector<double>& x,
                                                              const std::vector<double>& h_prev,
                                                              const std::vector<double>& c_prev);
std::vector<double> gru_step(const GruCellParams& p, const std::vector<double>& x,
                             const std::vector<double>& h_prev);

// Full-sequence layer output, Lx2H. Dropout is applied (inverted scaling)
// only when training with a non-null rng.
Matrix bilstm_forward(const BiLstmLayer& layer, const Matrix& window, bool training = false,
                      Rng* rng = nullptr);

// Scalar prediction in scaled target space. Inference (training=false) is a
// pure function of (net, window).
double forward(const RecurrentNetwork& net, const Matrix& window, bool training = false,
               Rng* rng = nullptr);

struct TrainConfig {
    int epochs = 500;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;
};

struct TrainHistory {
    std::vector<double> epoch_loss;    // mean squared error per epoch (pre-update batches)
    double final_train_loss = 0.0;     // full-pass MSE after the last update
};

// Mini-batch BPTT with Adam, seeded shuffling and global-norm clipping.
TrainHistory train(RecurrentNetwork& net, const std::vector<SequenceWindow>& windows,
                   const TrainConfig& cfg);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t params_checked = 0;
};

// Central finite differences over every parameter, dropout off.
GradCheckReport gradient_check(const RecurrentNetwork& net, const SequenceWindow& window,
                               double fd_step = 1e-5);

// Parameter tensors in a fixed order (per layer: w_x, w_h, b for each cell;
// then head w, head b). Shared by the optimizer, the gradient container and
// serialization.
std::vector<const std::vector<double>*> param_refs(const RecurrentNetwork& net);
std::vector<std::vector<double>*> param_refs(RecurrentNetwork& net);

}  // namespace gasf
