#include "gasf/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace gasf {

namespace {

// ---------------------------------------------------------------------------
// Dense kernels (row-major). Multi-accumulator dot so the compiler can
// vectorize the reduction without reassociation flags.

double dot(const double* a, const double* b, int n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

// y += W x
void matvec_add(const double* W, const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) y[r] += dot(W + std::size_t(r) * cols, x, cols);
}

// y += W^T x
void matvec_t_add(const double* W, const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const double xr = x[r];
        const double* w = W + std::size_t(r) * cols;
        for (int c = 0; c < cols; ++c) y[c] += xr * w[c];
    }
}

// G += a b^T
void outer_add(double* G, const double* a, const double* b, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const double ar = a[r];
        if (ar == 0.0) continue;
        double* g = G + std::size_t(r) * cols;
        for (int c = 0; c < cols; ++c) g[c] += ar * b[c];
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Flat {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Flat() = default;
    Flat(int r, int c) : rows(r), cols(c), d(std::size_t(r) * c, 0.0) {}
    double* row(int r) { return d.data() + std::size_t(r) * cols; }
    const double* row(int r) const { return d.data() + std::size_t(r) * cols; }
};

Flat to_flat(const Matrix& m) {
    if (m.empty()) throw DataError("empty window");
    Flat f(int(m.size()), int(m[0].size()));
    for (int t = 0; t < f.rows; ++t) {
        if (int(m[t].size()) != f.cols) throw DataError("ragged window matrix");
        std::copy(m[t].begin(), m[t].end(), f.row(t));
    }
    return f;
}

Flat reversed_rows(const Flat& in) {
    Flat out(in.rows, in.cols);
    for (int t = 0; t < in.rows; ++t)
        std::copy(in.row(in.rows - 1 - t), in.row(in.rows - 1 - t) + in.cols, out.row(t));
    return out;
}

// ---------------------------------------------------------------------------
// LSTM scan

struct LstmScanCache {
    // Post-activation gates per timestep, stacked i,f,o,g (L x 4H), plus cell
    // state trajectories.
    Flat gates;
    Flat c;
    Flat tanhc;
    Flat h;
};

void check_lstm(const LstmCellParams& p, int in_width) {
    const std::size_t H = std::size_t(p.hidden), F = std::size_t(p.input);
    if (p.input != in_width || p.w_x.size() != 4 * H * F || p.w_h.size() != 4 * H * H ||
        p.b.size() != 4 * H)
        throw DataError("LSTM cell dimension mismatch");
}

void lstm_scan(const LstmCellParams& p, const Flat& in, LstmScanCache& cache) {
    check_lstm(p, in.cols);
    const int L = in.rows, H = p.hidden, F = p.input;
    cache.gates = Flat(L, 4 * H);
    cache.c = Flat(L, H);
    cache.tanhc = Flat(L, H);
    cache.h = Flat(L, H);

    std::vector<double> a(std::size_t(4) * H);
    for (int t = 0; t < L; ++t) {
        std::copy(p.b.begin(), p.b.end(), a.begin());
        matvec_add(p.w_x.data(), in.row(t), a.data(), 4 * H, F);
        if (t > 0) matvec_add(p.w_h.data(), cache.h.row(t - 1), a.data(), 4 * H, H);

        double* g = cache.gates.row(t);
        double* c = cache.c.row(t);
        double* tc = cache.tanhc.row(t);
        double* h = cache.h.row(t);
        const double* c_prev = t > 0 ? cache.c.row(t - 1) : nullptr;
        for (int u = 0; u < H; ++u) {
            const double gi = sigmoid(a[u]);
            const double gf = sigmoid(a[H + u]);
            const double go = sigmoid(a[2 * H + u]);
            const double gg = std::tanh(a[3 * H + u]);
            g[u] = gi;
            g[H + u] = gf;
            g[2 * H + u] = go;
            g[3 * H + u] = gg;
            c[u] = gi * gg + (c_prev ? gf * c_prev[u] : 0.0);
            tc[u] = std::tanh(c[u]);
            h[u] = go * tc[u];
        }
    }
}

void lstm_scan_backward(const LstmCellParams& p, const Flat& in, const LstmScanCache& cache,
                        const Flat& d_out, Flat& d_in, double* g_wx, double* g_wh, double* g_b) {
    const int L = in.rows, H = p.hidden, F = p.input;
    std::vector<double> dh(std::size_t(H), 0.0), dc(std::size_t(H), 0.0), da(std::size_t(4) * H, 0.0);
    std::vector<double> dh_next(std::size_t(H), 0.0);

    for (int t = L - 1; t >= 0; --t) {
        const double* g = cache.gates.row(t);
        const double* tc = cache.tanhc.row(t);
        const double* c_prev = t > 0 ? cache.c.row(t - 1) : nullptr;
        for (int u = 0; u < H; ++u) dh[u] = d_out.row(t)[u] + dh_next[u];

        for (int u = 0; u < H; ++u) {
            const double gi = g[u], gf = g[H + u], go = g[2 * H + u], gg = g[3 * H + u];
            const double d_o = dh[u] * tc[u];
            double d_c = dh[u] * go * (1.0 - tc[u] * tc[u]) + dc[u];
            const double d_i = d_c * gg;
            const double d_f = c_prev ? d_c * c_prev[u] : 0.0;
            const double d_g = d_c * gi;
            da[u] = d_i * gi * (1.0 - gi);
            da[H + u] = d_f * gf * (1.0 - gf);
            da[2 * H + u] = d_o * go * (1.0 - go);
            da[3 * H + u] = d_g * (1.0 - gg * gg);
            dc[u] = d_c * gf;  // flows to c_{t-1}
        }

        outer_add(g_wx, da.data(), in.row(t), 4 * H, F);
        if (t > 0) outer_add(g_wh, da.data(), cache.h.row(t - 1), 4 * H, H);
        for (int u = 0; u < 4 * H; ++u) g_b[u] += da[u];

        matvec_t_add(p.w_x.data(), da.data(), d_in.row(t), 4 * H, F);
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        if (t > 0) matvec_t_add(p.w_h.data(), da.data(), dh_next.data(), 4 * H, H);
    }
}

// ---------------------------------------------------------------------------
// GRU scan

struct GruScanCache {
    Flat z, r, cand, rh, h;  // each L x H; rh = r (.) h_prev
};

void check_gru(const GruCellParams& p, int in_width) {
    const std::size_t H = std::size_t(p.hidden), F = std::size_t(p.input);
    if (p.input != in_width || p.w_x.size() != 3 * H * F || p.w_h.size() != 3 * H * H ||
        p.b.size() != 3 * H)
        throw DataError("GRU cell dimension mismatch");
}

void gru_scan(const GruCellParams& p, const Flat& in, GruScanCache& cache) {
    check_gru(p, in.cols);
    const int L = in.rows, H = p.hidden, F = p.input;
    cache.z = Flat(L, H);
    cache.r = Flat(L, H);
    cache.cand = Flat(L, H);
    cache.rh = Flat(L, H);
    cache.h = Flat(L, H);

    std::vector<double> a(std::size_t(3) * H);
    for (int t = 0; t < L; ++t) {
        std::copy(p.b.begin(), p.b.end(), a.begin());
        matvec_add(p.w_x.data(), in.row(t), a.data(), 3 * H, F);
        const double* h_prev = t > 0 ? cache.h.row(t - 1) : nullptr;
        if (h_prev) matvec_add(p.w_h.data(), h_prev, a.data(), 2 * H, H);  // z, r rows only

        double* z = cache.z.row(t);
        double* r = cache.r.row(t);
        double* rh = cache.rh.row(t);
        for (int u = 0; u < H; ++u) {
            z[u] = sigmoid(a[u]);
            r[u] = sigmoid(a[H + u]);
            rh[u] = h_prev ? r[u] * h_prev[u] : 0.0;
        }
        if (h_prev)
            matvec_add(p.w_h.data() + std::size_t(2) * H * H, rh, a.data() + 2 * H, H, H);

        double* cd = cache.cand.row(t);
        double* h = cache.h.row(t);
        for (int u = 0; u < H; ++u) {
            cd[u] = std::tanh(a[2 * H + u]);
            h[u] = z[u] * cd[u] + (h_prev ? (1.0 - z[u]) * h_prev[u] : 0.0);
        }
    }
}

void gru_scan_backward(const GruCellParams& p, const Flat& in, const GruScanCache& cache,
                       const Flat& d_out, Flat& d_in, double* g_wx, double* g_wh, double* g_b) {
    const int L = in.rows, H = p.hidden, F = p.input;
    std::vector<double> dh(std::size_t(H), 0.0), da(std::size_t(3) * H, 0.0), drh(std::size_t(H), 0.0);
    std::vector<double> dh_next(std::size_t(H), 0.0);

    for (int t = L - 1; t >= 0; --t) {
        const double* z = cache.z.row(t);
        const double* r = cache.r.row(t);
        const double* cd = cache.cand.row(t);
        const double* h_prev = t > 0 ? cache.h.row(t - 1) : nullptr;
        for (int u = 0; u < H; ++u) dh[u] = d_out.row(t)[u] + dh_next[u];
        std::fill(dh_next.begin(), dh_next.end(), 0.0);

        // candidate branch
        for (int u = 0; u < H; ++u) {
            const double d_cand = dh[u] * z[u];
            da[2 * H + u] = d_cand * (1.0 - cd[u] * cd[u]);
            if (h_prev) dh_next[u] += dh[u] * (1.0 - z[u]);
        }
        std::fill(drh.begin(), drh.end(), 0.0);
        matvec_t_add(p.w_h.data() + std::size_t(2) * H * H, da.data() + 2 * H, drh.data(), H, H);

        for (int u = 0; u < H; ++u) {
            const double d_z = dh[u] * (cd[u] - (h_prev ? h_prev[u] : 0.0));
            const double d_r = h_prev ? drh[u] * h_prev[u] : 0.0;
            da[u] = d_z * z[u] * (1.0 - z[u]);
            da[H + u] = d_r * r[u] * (1.0 - r[u]);
            if (h_prev) dh_next[u] += drh[u] * r[u];
        }

        outer_add(g_wx, da.data(), in.row(t), 3 * H, F);
        if (h_prev) {
            outer_add(g_wh, da.data(), h_prev, 2 * H, H);
            outer_add(g_wh + std::size_t(2) * H * H, da.data() + 2 * H, cache.rh.row(t), H, H);
            matvec_t_add(p.w_h.data(), da.data(), dh_next.data(), 2 * H, H);
        }
        for (int u = 0; u < 3 * H; ++u) g_b[u] += da[u];
        matvec_t_add(p.w_x.data(), da.data(), d_in.row(t), 3 * H, F);
    }
}

// ---------------------------------------------------------------------------
// Layers

struct LayerCache {
    LstmScanCache lstm_fwd;
    LstmScanCache lstm_bwd;   // BiLSTM reverse direction (over reversed input)
    GruScanCache gru;
    Flat rev_in;              // reversed input, kept for BiLSTM backward
    std::vector<double> drop; // scaled dropout mask over the output, empty if unused
};

double layer_dropout(const Layer& layer) {
    return std::visit([](const auto& l) { return l.dropout; }, layer);
}

void apply_dropout(Flat& out, LayerCache& cache, double rate, bool training, Rng* rng) {
    if (!training || rate <= 0.0 || rng == nullptr) return;
    const double keep = 1.0 - rate;
    cache.drop.resize(out.d.size());
    for (std::size_t i = 0; i < out.d.size(); ++i) {
        cache.drop[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
        out.d[i] *= cache.drop[i];
    }
}

Flat layer_forward(const Layer& layer, const Flat& in, LayerCache& cache, bool training,
                   Rng* rng) {
    Flat out;
    if (const auto* l = std::get_if<LstmLayer>(&layer)) {
        lstm_scan(l->cell, in, cache.lstm_fwd);
        out = cache.lstm_fwd.h;
    } else if (const auto* l = std::get_if<GruLayer>(&layer)) {
        gru_scan(l->cell, in, cache.gru);
        out = cache.gru.h;
    } else {
        const auto& bl = std::get<BiLstmLayer>(layer);
        if (bl.forward_cell.hidden != bl.backward_cell.hidden)
            throw DataError("BiLSTM cells must share hidden size");
        lstm_scan(bl.forward_cell, in, cache.lstm_fwd);
        cache.rev_in = reversed_rows(in);
        lstm_scan(bl.backward_cell, cache.rev_in, cache.lstm_bwd);
        const int L = in.rows, H = bl.forward_cell.hidden;
        out = Flat(L, 2 * H);
        for (int t = 0; t < L; ++t) {
            std::copy(cache.lstm_fwd.h.row(t), cache.lstm_fwd.h.row(t) + H, out.row(t));
            std::copy(cache.lstm_bwd.h.row(L - 1 - t), cache.lstm_bwd.h.row(L - 1 - t) + H,
                      out.row(t) + H);
        }
    }
    apply_dropout(out, cache, layer_dropout(layer), training, rng);
    return out;
}

// Gradient slots follow param_refs() order: 3 tensors per cell, 2 for the head.
void layer_backward(const Layer& layer, const Flat& in, const LayerCache& cache, Flat& d_out,
                    Flat& d_in, std::vector<std::vector<double>>& grads, std::size_t slot) {
    if (!cache.drop.empty())
        for (std::size_t i = 0; i < d_out.d.size(); ++i) d_out.d[i] *= cache.drop[i];

    if (const auto* l = std::get_if<LstmLayer>(&layer)) {
        lstm_scan_backward(l->cell, in, cache.lstm_fwd, d_out, d_in, grads[slot].data(),
                           grads[slot + 1].data(), grads[slot + 2].data());
    } else if (const auto* l = std::get_if<GruLayer>(&layer)) {
        gru_scan_backward(l->cell, in, cache.gru, d_out, d_in, grads[slot].data(),
                          grads[slot + 1].data(), grads[slot + 2].data());
    } else {
        const auto& bl = std::get<BiLstmLayer>(layer);
        const int L = in.rows, H = bl.forward_cell.hidden;
        Flat d_fwd(L, H), d_bwd(L, H);
        for (int t = 0; t < L; ++t)
            for (int u = 0; u < H; ++u) {
                d_fwd.row(t)[u] = d_out.row(t)[u];
                d_bwd.row(L - 1 - t)[u] = d_out.row(t)[H + u];
            }
        lstm_scan_backward(bl.forward_cell, in, cache.lstm_fwd, d_fwd, d_in, grads[slot].data(),
                           grads[slot + 1].data(), grads[slot + 2].data());
        Flat d_rev_in(L, in.cols);
        lstm_scan_backward(bl.backward_cell, cache.rev_in, cache.lstm_bwd, d_bwd, d_rev_in,
                           grads[slot + 3].data(), grads[slot + 4].data(), grads[slot + 5].data());
        for (int t = 0; t < L; ++t)
            for (int c = 0; c < in.cols; ++c) d_in.row(t)[c] += d_rev_in.row(L - 1 - t)[c];
    }
}

std::size_t layer_slot_count(const Layer& layer) {
    return std::holds_alternative<BiLstmLayer>(layer) ? 6 : 3;
}

// Forward through all layers; returns prediction. Caches/activations kept for
// the backward pass when non-null.
double net_forward(const RecurrentNetwork& net, const Flat& window, bool training, Rng* rng,
                   std::vector<Flat>* acts, std::vector<LayerCache>* caches) {
    if (net.layers.empty()) throw DataError("network has no layers");
    if (window.cols != net.input_width()) throw DataError("window width does not match network");

    std::vector<Flat> local_acts;
    std::vector<LayerCache> local_caches;
    auto& A = acts ? *acts : local_acts;
    auto& C = caches ? *caches : local_caches;
    A.clear();
    C.resize(net.layers.size());
    A.push_back(window);
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        A.push_back(layer_forward(net.layers[i], A[i], C[i], training, rng));

    const Flat& last = A.back();
    if (int(net.head.w.size()) != last.cols) throw DataError("head width mismatch");
    return dot(net.head.w.data(), last.row(last.rows - 1), last.cols) + net.head.b[0];
}

// Returns squared error; accumulates gradients of weight * (pred-target)^2.
double predict_and_grad(const RecurrentNetwork& net, const Flat& window, double target,
                        double weight, std::vector<std::vector<double>>& grads, bool training,
                        Rng* drop_rng) {
    std::vector<Flat> acts;
    std::vector<LayerCache> caches;
    const double pred = net_forward(net, window, training, drop_rng, &acts, &caches);
    const double err = pred - target;

    const double dpred = 2.0 * err * weight;
    const Flat& last = acts.back();
    const std::size_t head_slot = grads.size() - 2;
    for (int c = 0; c < last.cols; ++c)
        grads[head_slot][c] += dpred * last.row(last.rows - 1)[c];
    grads[head_slot + 1][0] += dpred;

    Flat d_out(last.rows, last.cols);
    for (int c = 0; c < last.cols; ++c) d_out.row(last.rows - 1)[c] = dpred * net.head.w[c];

    std::size_t slot = 0;
    std::vector<std::size_t> slots(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        slots[i] = slot;
        slot += layer_slot_count(net.layers[i]);
    }
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        Flat d_in(acts[i].rows, acts[i].cols);
        layer_backward(net.layers[i], acts[i], caches[i], d_out, d_in, grads, slots[i]);
        d_out = std::move(d_in);
    }
    return err * err;
}

std::vector<std::vector<double>> zero_grads(const RecurrentNetwork& net) {
    std::vector<std::vector<double>> g;
    for (const auto* p : param_refs(net)) g.emplace_back(p->size(), 0.0);
    return g;
}

void init_lstm_cell(LstmCellParams& p, int input, int hidden, Rng& rng) {
    p.input = input;
    p.hidden = hidden;
    const std::size_t H = std::size_t(hidden), F = std::size_t(input);
    p.w_x.resize(4 * H * F);
    p.w_h.resize(4 * H * H);
    p.b.assign(4 * H, 0.0);
    const double bx = 1.0 / std::sqrt(double(input));
    const double bh = 1.0 / std::sqrt(double(hidden));
    for (auto& w : p.w_x) w = rng.uniform(-bx, bx);
    for (auto& w : p.w_h) w = rng.uniform(-bh, bh);
    for (std::size_t u = 0; u < H; ++u) p.b[H + u] = 1.0;  // forget gate
}

void init_gru_cell(GruCellParams& p, int input, int hidden, Rng& rng) {
    p.input = input;
    p.hidden = hidden;
    const std::size_t H = std::size_t(hidden), F = std::size_t(input);
    p.w_x.resize(3 * H * F);
    p.w_h.resize(3 * H * H);
    p.b.assign(3 * H, 0.0);
    const double bx = 1.0 / std::sqrt(double(input));
    const double bh = 1.0 / std::sqrt(double(hidden));
    for (auto& w : p.w_x) w = rng.uniform(-bx, bx);
    for (auto& w : p.w_h) w = rng.uniform(-bh, bh);
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

int layer_input_width(const Layer& layer) {
    if (const auto* l = std::get_if<LstmLayer>(&layer)) return l->cell.input;
    if (const auto* l = std::get_if<GruLayer>(&layer)) return l->cell.input;
    return std::get<BiLstmLayer>(layer).forward_cell.input;
}

int layer_output_width(const Layer& layer) {
    if (const auto* l = std::get_if<LstmLayer>(&layer)) return l->cell.hidden;
    if (const auto* l = std::get_if<GruLayer>(&layer)) return l->cell.hidden;
    return 2 * std::get<BiLstmLayer>(layer).forward_cell.hidden;
}

int RecurrentNetwork::input_width() const {
    if (layers.empty()) throw DataError("network has no layers");
    return layer_input_width(layers.front());
}

RecurrentNetwork make_network(NetworkKind kind, int input_width, int hidden, int num_layers,
                              double dropout, std::uint64_t seed) {
    if (input_width < 1 || hidden < 1 || num_layers < 1)
        throw DataError("network dimensions must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw DataError("dropout must lie in [0,1)");
    RecurrentNetwork net;
    net.rng_seed = seed;
    Rng rng(seed);
    int width = input_width;
    for (int i = 0; i < num_layers; ++i) {
        switch (kind) {
            case NetworkKind::Lstm: {
                LstmLayer l;
                l.dropout = dropout;
                init_lstm_cell(l.cell, width, hidden, rng);
                width = hidden;
                net.layers.emplace_back(std::move(l));
                break;
            }
            case NetworkKind::Gru: {
                GruLayer l;
                l.dropout = dropout;
                init_gru_cell(l.cell, width, hidden, rng);
                width = hidden;
                net.layers.emplace_back(std::move(l));
                break;
            }
            case NetworkKind::BiLstm: {
                BiLstmLayer l;
                l.dropout = dropout;
                init_lstm_cell(l.forward_cell, width, hidden, rng);
                init_lstm_cell(l.backward_cell, width, hidden, rng);
                width = 2 * hidden;
                net.layers.emplace_back(std::move(l));
                break;
            }
        }
    }
    net.head.w.resize(std::size_t(width));
    const double bw = 1.0 / std::sqrt(double(width));
    for (auto& w : net.head.w) w = rng.uniform(-bw, bw);
    net.head.b[0] = 0.0;
    return net;
}

std::pair<std::vector<double>, std::vector<double>> lstm_step(const LstmCellParams& p,
                                                              const std::vector<double>& x,
                                                              const std::vector<double>& h_prev,
                                                              const std::vector<double>& c_prev) {
    check_lstm(p, int(x.size()));
    if (int(h_prev.size()) != p.hidden || int(c_prev.size()) != p.hidden)
        throw DataError("LSTM state dimension mismatch");
    const int H = p.hidden;
    std::vector<double> a = p.b;
    matvec_add(p.w_x.data(), x.data(), a.data(), 4 * H, p.input);
    matvec_add(p.w_h.data(), h_prev.data(), a.data(), 4 * H, H);
    std::vector<double> h(std::size_t(H), 0.0), c(std::size_t(H), 0.0);
    for (int u = 0; u < H; ++u) {
        const double gi = sigmoid(a[u]), gf = sigmoid(a[H + u]);
        const double go = sigmoid(a[2 * H + u]), gg = std::tanh(a[3 * H + u]);
        c[u] = gf * c_prev[u] + gi * gg;
        h[u] = go * std::tanh(c[u]);
    }
    return {h, c};
}

std::vector<double> gru_step(const GruCellParams& p, const std::vector<double>& x,
                             const std::vector<double>& h_prev) {
    check_gru(p, int(x.size()));
    if (int(h_prev.size()) != p.hidden) throw DataError("GRU state dimension mismatch");
    const int H = p.hidden;
    std::vector<double> a = p.b;
    matvec_add(p.w_x.data(), x.data(), a.data(), 3 * H, p.input);
    matvec_add(p.w_h.data(), h_prev.data(), a.data(), 2 * H, H);
    std::vector<double> rh(std::size_t(H), 0.0);
    std::vector<double> h(std::size_t(H), 0.0);
    for (int u = 0; u < H; ++u) rh[u] = sigmoid(a[H + u]) * h_prev[u];
    matvec_add(p.w_h.data() + std::size_t(2) * H * H, rh.data(), a.data() + 2 * H, H, H);
    for (int u = 0; u < H; ++u) {
        const double z = sigmoid(a[u]);
        h[u] = z * std::tanh(a[2 * H + u]) + (1.0 - z) * h_prev[u];
    }
    return h;
}

Matrix bilstm_forward(const BiLstmLayer& layer, const Matrix& window, bool training, Rng* rng) {
    Flat in = to_flat(window);
    LayerCache cache;
    Layer l = layer;
    Flat out = layer_forward(l, in, cache, training, rng);
    Matrix m(std::size_t(out.rows));
    for (int t = 0; t < out.rows; ++t) m[t].assign(out.row(t), out.row(t) + out.cols);
    return m;
}

double forward(const RecurrentNetwork& net, const Matrix& window, bool training, Rng* rng) {
    return net_forward(net, to_flat(window), training, rng, nullptr, nullptr);
}

std::vector<const std::vector<double>*> param_refs(const RecurrentNetwork& net) {
    std::vector<const std::vector<double>*> out;
    for (const auto& layer : net.layers) {
        if (const auto* l = std::get_if<LstmLayer>(&layer)) {
            out.insert(out.end(), {&l->cell.w_x, &l->cell.w_h, &l->cell.b});
        } else if (const auto* l = std::get_if<GruLayer>(&layer)) {
            out.insert(out.end(), {&l->cell.w_x, &l->cell.w_h, &l->cell.b});
        } else {
            const auto& bl = std::get<BiLstmLayer>(layer);
            out.insert(out.end(),
                       {&bl.forward_cell.w_x, &bl.forward_cell.w_h, &bl.forward_cell.b,
                        &bl.backward_cell.w_x, &bl.backward_cell.w_h, &bl.backward_cell.b});
        }
    }
    out.push_back(&net.head.w);
    out.push_back(&net.head.b);
    return out;
}

std::vector<std::vector<double>*> param_refs(RecurrentNetwork& net) {
    std::vector<std::vector<double>*> out;
    for (const auto* p : param_refs(std::as_const(net)))
        out.push_back(const_cast<std::vector<double>*>(p));
    return out;
}

TrainHistory train(RecurrentNetwork& net, const std::vector<SequenceWindow>& windows,
                   const TrainConfig& cfg) {
    if (windows.empty()) throw DataError("training requires at least one window");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0))
        throw DataError("invalid training configuration");

    std::vector<Flat> inputs;
    inputs.reserve(windows.size());
    for (const auto& w : windows) inputs.push_back(to_flat(w.inputs));

    auto params = param_refs(net);
    auto grads = zero_grads(net);
    auto m = zero_grads(net);
    auto v = zero_grads(net);

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    std::int64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_sse = 0.0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
            const double weight = 1.0 / double(end - start);
            for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                epoch_sse += predict_and_grad(net, inputs[i], windows[i].target, weight, grads,
                                              true, &rng);
            }

            if (cfg.clip_norm > 0) {
                double norm2 = 0.0;
                for (const auto& g : grads)
                    for (double x : g) norm2 += x * x;
                const double norm = std::sqrt(norm2);
                if (norm > cfg.clip_norm) {
                    const double scale = cfg.clip_norm / norm;
                    for (auto& g : grads)
                        for (double& x : g) x *= scale;
                }
            }

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, double(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, double(step));
            for (std::size_t s = 0; s < params.size(); ++s) {
                auto& p = *params[s];
                for (std::size_t j = 0; j < p.size(); ++j) {
                    const double g = grads[s][j];
                    m[s][j] = cfg.beta1 * m[s][j] + (1.0 - cfg.beta1) * g;
                    v[s][j] = cfg.beta2 * v[s][j] + (1.0 - cfg.beta2) * g * g;
                    p[j] -= cfg.learning_rate * (m[s][j] / bc1) /
                            (std::sqrt(v[s][j] / bc2) + cfg.epsilon);
                }
            }
        }
        const double loss = epoch_sse / double(windows.size());
        if (!std::isfinite(loss))
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
        history.epoch_loss.push_back(loss);
    }

    double final_sse = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const double pred = net_forward(net, inputs[i], false, nullptr, nullptr, nullptr);
        final_sse += (pred - windows[i].target) * (pred - windows[i].target);
    }
    history.final_train_loss = final_sse / double(windows.size());
    return history;
}

GradCheckReport gradient_check(const RecurrentNetwork& net, const SequenceWindow& window,
                               double fd_step) {
    RecurrentNetwork work = net;
    const Flat in = to_flat(window.inputs);
    auto grads = zero_grads(work);
    predict_and_grad(work, in, window.target, 1.0, grads, false, nullptr);

    auto params = param_refs(work);
    GradCheckReport report;
    for (std::size_t s = 0; s < params.size(); ++s) {
        auto& p = *params[s];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double saved = p[j];
            p[j] = saved + fd_step;
            const double up = net_forward(work, in, false, nullptr, nullptr, nullptr);
            p[j] = saved - fd_step;
            const double dn = net_forward(work, in, false, nullptr, nullptr, nullptr);
            p[j] = saved;
            const double lu = (up - window.target) * (up - window.target);
            const double ld = (dn - window.target) * (dn - window.target);
            const double numeric = (lu - ld) / (2.0 * fd_step);
            const double analytic = grads[s][j];
            // The 1e-6 floor keeps the quotient meaningful where the true
            // gradient is tiny and the central difference is roundoff-bound
            // (absolute agreement to ~1e-10 is still required there).
            const double rel = std::abs(analytic - numeric) /
                               std::max(1e-6, std::abs(analytic) + std::abs(numeric));
            report.max_rel_error = std::max(report.max_rel_error, rel);
            ++report.params_checked;
        }
    }
    return report;
}

}  // namespace gasf
