#pragma once

#include "hts/rng.hpp"
#include "hts/types.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hts::nn {

struct ConvLayerSpec {
    std::size_t filters = 16;
    std::size_t kernel = 4;

    bool operator==(const ConvLayerSpec &) const = default;
};

// Two-branch regression network:
//   MLP branch   exog (exog_dim) -> dense ReLU layers `hidden`
//   CNN branch   window (length `window`, 1 channel) -> conv ReLU layers,
//                stride 1, zero "same" padding, flattened channel-major
//   head         concat(MLP out, CNN out) -> dense linear, width `outputs`
// A branch with zero input width is omitted. A branch with inputs but no
// layers feeds its raw input to the head.
struct NetworkSpec {
    std::size_t exog_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t window = 0;
    std::vector<ConvLayerSpec> conv;
    std::size_t outputs = 1;

    // Throws ConfigError on zero widths, filters, kernels or outputs.
    void validate() const;

    std::size_t mlp_output_width() const;
    std::size_t cnn_output_width() const;
    std::size_t head_input_width() const { return mlp_output_width() + cnn_output_width(); }
    std::size_t parameter_count() const;

    bool operator==(const NetworkSpec &) const = default;

    // Uniform architecture: `conv_layers` layers of (filters, kernel) and
    // `mlp_layers` dense layers of `units`.
    static NetworkSpec two_branch(std::size_t exog_dim, std::size_t window, std::size_t outputs, std::size_t filters,
                                  std::size_t kernel, std::size_t units, std::size_t conv_layers = 6,
                                  std::size_t mlp_layers = 3);
};

std::string to_json(const NetworkSpec &spec);
NetworkSpec spec_from_json(const std::string &json);

// One training example per row.
struct Dataset {
    RowMatrix exog;    // N x exog_dim
    RowMatrix windows; // N x window
    RowMatrix targets; // N x outputs

    std::size_t size() const { return static_cast<std::size_t>(targets.rows()); }
    Dataset slice(std::size_t begin, std::size_t end) const;
};

// Reusable activations for one forward/backward pass.
struct Workspace {
    std::vector<std::vector<double>> mlp_act;   // per dense layer, post-ReLU
    std::vector<std::vector<double>> conv_act;  // per conv layer, post-ReLU, [filter][t]
    std::vector<double> head_in;
    std::vector<double> output;
    // backward scratch
    std::vector<double> grad_a, grad_b, grad_head_in;
};

// Parameters live in one flat vector in layer order: MLP layers, conv
// layers, head; each layer stores its weights (row-major) then biases.
// Dense weights are [out][in]; conv weights are [filter][channel][tap].
class Network {
public:
    Network() = default;
    explicit Network(NetworkSpec spec);

    const NetworkSpec &spec() const { return spec_; }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }

    // He-uniform for ReLU layers, Glorot-uniform for the linear head, zero biases.
    void initialize(Rng &rng);

    Vector forward(std::span<const double> exog, std::span<const double> window) const;
    void forward(Workspace &ws, std::span<const double> exog, std::span<const double> window) const;

    // Accumulates d(loss)/d(params) into grad given d(loss)/d(output) for
    // the pass held in ws.
    void backward(Workspace &ws, std::span<const double> exog, std::span<const double> window,
                  std::span<const double> grad_output, std::span<double> grad) const;

private:
    struct DenseLayout {
        std::size_t in, out, offset;
    };
    struct ConvLayout {
        std::size_t channels, filters, kernel, offset;
    };

    NetworkSpec spec_;
    std::vector<DenseLayout> mlp_;
    std::vector<ConvLayout> conv_;
    DenseLayout head_{};
    std::vector<double> params_;
};

// (1/T) [ fit_weight * sum_t ||Y_t - Yhat_t||^2 + sum_weight * sum_t (1'Y_t - 1'Yhat_t)^2 ]
double weighted_loss(const RowMatrix &target, const RowMatrix &prediction, double fit_weight, double sum_weight);

// Coherence-penalised loss with weights (1 - alpha, alpha); alpha in (0, 1).
double coherence_loss(const RowMatrix &target, const RowMatrix &prediction, double alpha);

// Output gradient of one example under the weighted loss with batch size T.
void loss_gradient(std::span<const double> target, std::span<const double> prediction, double fit_weight,
                   double sum_weight, std::size_t batch_size, std::span<double> out);

// Predictions for every row of a dataset.
RowMatrix predict(const Network &net, const Dataset &data);

// Exact gradient of the weighted loss over the whole batch.
std::vector<double> backward(const Network &net, const Dataset &batch, double fit_weight, double sum_weight);
// Gradient of coherence_loss(alpha).
std::vector<double> backward(const Network &net, const Dataset &batch, double alpha);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam update, in place.
void adam_step(std::span<double> weights, std::span<const double> grads, AdamState &state, const AdamConfig &cfg);

struct TrainConfig {
    double alpha = 0.5;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 500;
    std::size_t patience = 20;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    bool standardize = true;

    void validate() const;
};

// z-scores applied to inputs and an affine map for targets. Targets are
// centred per output and divided by one common scale, which multiplies the
// coherence loss by a constant and leaves its minimiser unchanged.
struct Scaling {
    Vector exog_mean, exog_scale;
    double window_mean = 0.0, window_scale = 1.0;
    Vector target_mean;
    double target_scale = 1.0;

    static Scaling identity(const NetworkSpec &spec);
    static Scaling fit(const Dataset &data);
    Dataset apply(const Dataset &data) const;
};

struct TrainedNetwork {
    Network network;
    Scaling scaling;
    std::vector<double> train_loss;      // per epoch, standardised target units
    std::vector<double> validation_loss; // per epoch; empty when no validation rows
    std::size_t best_epoch = 0;

    const NetworkSpec &spec() const { return network.spec(); }
    double best_validation_loss() const;

    // Original-scale prediction for raw (unstandardised) inputs.
    Vector predict(std::span<const double> exog, std::span<const double> window) const;
    RowMatrix predict(const Dataset &raw) const;

    // Format: "HTS-NNW/1\n", one line of canonical JSON (spec, scaling,
    // history), an 8-byte little-endian parameter count, then the
    // parameters as little-endian IEEE-754 doubles in layer order.
    void save(const std::filesystem::path &path) const;
    static TrainedNetwork load(const std::filesystem::path &path);
};

// Chronological split: the last floor(N * validation_fraction) rows validate.
// Stops after max_epochs or once validation loss has not improved for
// max(1, patience) consecutive epochs and restores the best weights.
// Throws TrainingError on non-finite loss, DataError on an empty dataset.
TrainedNetwork train(const NetworkSpec &spec, const Dataset &data, const TrainConfig &cfg);

using Trainer = std::function<TrainedNetwork(const NetworkSpec &, const Dataset &, const TrainConfig &)>;

struct GridSpace {
    std::vector<std::size_t> filters{16, 32, 64};
    std::vector<std::size_t> kernels{4, 8, 16};
    std::vector<std::size_t> units{64, 128, 256};
};

struct GridCell {
    std::size_t filters = 0, kernel = 0, units = 0;
    double validation_loss = 0.0;
    bool failed = false;
    std::string error;
};

struct GridResult {
    NetworkSpec best;
    std::size_t best_index = 0;
    std::vector<GridCell> cells; // lexicographic (filters, kernel, units) order
};

// Trains every cell with the architecture of `base` rewritten to the cell's
// filters/kernel/units. Lowest best-validation loss wins; ties go to the
// earliest cell. Failing cells are reported and skipped; if all fail a
// TrainingError is thrown.
GridResult grid_search(const GridSpace &space, const NetworkSpec &base, const Dataset &data, const TrainConfig &cfg,
                       const Trainer &trainer = train, std::size_t jobs = 1);

} // namespace hts::nn
