#include "hts/neuralnet.hpp"

#include "hts/error.hpp"
#include "hts/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace hts::nn {

using json = nlohmann::json;

// ---------------------------------------------------------------- spec

void NetworkSpec::validate() const {
    if (outputs == 0) {
        throw ConfigError("network needs at least one output");
    }
    for (std::size_t h : hidden) {
        if (h == 0) {
            throw ConfigError("dense layer width must be positive");
        }
    }
    for (const auto &c : conv) {
        if (c.filters == 0 || c.kernel == 0) {
            throw ConfigError("convolution filters and kernel size must be positive");
        }
    }
    if (head_input_width() == 0) {
        throw ConfigError("network has neither exogenous nor window inputs");
    }
}

std::size_t NetworkSpec::mlp_output_width() const {
    if (exog_dim == 0) {
        return 0;
    }
    return hidden.empty() ? exog_dim : hidden.back();
}

std::size_t NetworkSpec::cnn_output_width() const {
    if (window == 0) {
        return 0;
    }
    return conv.empty() ? window : conv.back().filters * window;
}

std::size_t NetworkSpec::parameter_count() const {
    std::size_t count = 0;
    if (exog_dim > 0) {
        std::size_t in = exog_dim;
        for (std::size_t h : hidden) {
            count += in * h + h;
            in = h;
        }
    }
    if (window > 0) {
        std::size_t channels = 1;
        for (const auto &c : conv) {
            count += c.filters * channels * c.kernel + c.filters;
            channels = c.filters;
        }
    }
    count += head_input_width() * outputs + outputs;
    return count;
}

NetworkSpec NetworkSpec::two_branch(std::size_t exog_dim, std::size_t window, std::size_t outputs,
                                    std::size_t filters, std::size_t kernel, std::size_t units,
                                    std::size_t conv_layers, std::size_t mlp_layers) {
    NetworkSpec spec;
    spec.exog_dim = exog_dim;
    spec.window = window;
    spec.outputs = outputs;
    if (exog_dim > 0) {
        spec.hidden.assign(mlp_layers, units);
    }
    if (window > 0) {
        spec.conv.assign(conv_layers, ConvLayerSpec{filters, kernel});
    }
    return spec;
}

namespace {

json spec_json(const NetworkSpec &spec) {
    json conv = json::array();
    for (const auto &c : spec.conv) {
        conv.push_back({{"filters", c.filters}, {"kernel", c.kernel}});
    }
    return {{"exog_dim", spec.exog_dim},
            {"hidden", spec.hidden},
            {"window", spec.window},
            {"conv", conv},
            {"outputs", spec.outputs}};
}

NetworkSpec spec_from(const json &j) {
    NetworkSpec spec;
    spec.exog_dim = j.at("exog_dim").get<std::size_t>();
    spec.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    spec.window = j.at("window").get<std::size_t>();
    for (const auto &c : j.at("conv")) {
        spec.conv.push_back({c.at("filters").get<std::size_t>(), c.at("kernel").get<std::size_t>()});
    }
    spec.outputs = j.at("outputs").get<std::size_t>();
    spec.validate();
    return spec;
}

} // namespace

std::string to_json(const NetworkSpec &spec) {
    return spec_json(spec).dump();
}

NetworkSpec spec_from_json(const std::string &text) {
    try {
        return spec_from(json::parse(text));
    } catch (const json::exception &e) {
        throw DataError(std::string("bad network spec: ") + e.what());
    }
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    const auto b = static_cast<Index>(begin);
    const auto n = static_cast<Index>(end - begin);
    Dataset out;
    out.exog = exog.middleRows(b, n);
    out.windows = windows.middleRows(b, n);
    out.targets = targets.middleRows(b, n);
    return out;
}

// ---------------------------------------------------------------- network

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t offset = 0;
    if (spec_.exog_dim > 0) {
        std::size_t in = spec_.exog_dim;
        for (std::size_t h : spec_.hidden) {
            mlp_.push_back({in, h, offset});
            offset += in * h + h;
            in = h;
        }
    }
    if (spec_.window > 0) {
        std::size_t channels = 1;
        for (const auto &c : spec_.conv) {
            conv_.push_back({channels, c.filters, c.kernel, offset});
            offset += c.filters * channels * c.kernel + c.filters;
            channels = c.filters;
        }
    }
    head_ = {spec_.head_input_width(), spec_.outputs, offset};
    offset += head_.in * head_.out + head_.out;
    params_.assign(offset, 0.0);
}

void Network::initialize(Rng &rng) {
    std::fill(params_.begin(), params_.end(), 0.0);
    auto fill = [&](std::size_t offset, std::size_t count, double limit) {
        for (std::size_t i = 0; i < count; ++i) {
            params_[offset + i] = rng.uniform(-limit, limit);
        }
    };
    for (const auto &l : mlp_) {
        fill(l.offset, l.in * l.out, std::sqrt(6.0 / static_cast<double>(l.in)));
    }
    for (const auto &l : conv_) {
        fill(l.offset, l.filters * l.channels * l.kernel, std::sqrt(6.0 / static_cast<double>(l.channels * l.kernel)));
    }
    fill(head_.offset, head_.in * head_.out, std::sqrt(6.0 / static_cast<double>(head_.in + head_.out)));
}

void Network::forward(Workspace &ws, std::span<const double> exog, std::span<const double> window) const {
    if (exog.size() != spec_.exog_dim || window.size() != spec_.window) {
        throw DataError("network input shape mismatch: expected exog " + std::to_string(spec_.exog_dim) +
                        " and window " + std::to_string(spec_.window) + ", got " + std::to_string(exog.size()) +
                        " and " + std::to_string(window.size()));
    }
    const double *p = params_.data();
    ws.head_in.resize(head_.in);
    std::size_t head_pos = 0;

    ws.mlp_act.resize(mlp_.size());
    const double *x = exog.data();
    for (std::size_t l = 0; l < mlp_.size(); ++l) {
        const auto &L = mlp_[l];
        auto &out = ws.mlp_act[l];
        out.resize(L.out);
        const double *W = p + L.offset;
        const double *b = W + L.in * L.out;
        for (std::size_t o = 0; o < L.out; ++o) {
            const double *row = W + o * L.in;
            double acc = b[o];
            for (std::size_t i = 0; i < L.in; ++i) {
                acc += row[i] * x[i];
            }
            out[o] = acc > 0.0 ? acc : 0.0;
        }
        x = out.data();
    }
    if (spec_.exog_dim > 0) {
        const std::size_t w = spec_.mlp_output_width();
        std::copy(x, x + w, ws.head_in.begin());
        head_pos = w;
    }

    const std::size_t len = spec_.window;
    ws.conv_act.resize(conv_.size());
    const double *in = window.data();
    for (std::size_t l = 0; l < conv_.size(); ++l) {
        const auto &L = conv_[l];
        auto &out = ws.conv_act[l];
        out.resize(L.filters * len);
        const double *W = p + L.offset;
        const double *b = W + L.filters * L.channels * L.kernel;
        const auto pad = static_cast<std::ptrdiff_t>((L.kernel - 1) / 2);
        for (std::size_t f = 0; f < L.filters; ++f) {
            double *o = out.data() + f * len;
            std::fill(o, o + len, b[f]);
            for (std::size_t c = 0; c < L.channels; ++c) {
                const double *src = in + c * len;
                const double *wk = W + (f * L.channels + c) * L.kernel;
                for (std::size_t j = 0; j < L.kernel; ++j) {
                    const double wv = wk[j];
                    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
                    const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                    const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(len),
                                                                       static_cast<std::ptrdiff_t>(len) - shift);
                    for (std::ptrdiff_t t = t0; t < t1; ++t) {
                        o[t] += wv * src[t + shift];
                    }
                }
            }
            for (std::size_t t = 0; t < len; ++t) {
                o[t] = o[t] > 0.0 ? o[t] : 0.0;
            }
        }
        in = out.data();
    }
    if (len > 0) {
        const std::size_t w = spec_.cnn_output_width();
        std::copy(in, in + w, ws.head_in.begin() + static_cast<std::ptrdiff_t>(head_pos));
    }

    ws.output.resize(head_.out);
    const double *W = p + head_.offset;
    const double *b = W + head_.in * head_.out;
    for (std::size_t o = 0; o < head_.out; ++o) {
        const double *row = W + o * head_.in;
        double acc = b[o];
        for (std::size_t i = 0; i < head_.in; ++i) {
            acc += row[i] * ws.head_in[i];
        }
        ws.output[o] = acc;
    }
}

Vector Network::forward(std::span<const double> exog, std::span<const double> window) const {
    Workspace ws;
    forward(ws, exog, window);
    return Eigen::Map<const Vector>(ws.output.data(), static_cast<Index>(ws.output.size()));
}

void Network::backward(Workspace &ws, std::span<const double> exog, std::span<const double> window,
                       std::span<const double> grad_output, std::span<double> grad) const {
    const double *p = params_.data();
    double *g = grad.data();

    // head
    {
        const double *W = p + head_.offset;
        double *gW = g + head_.offset;
        double *gb = gW + head_.in * head_.out;
        ws.grad_head_in.assign(head_.in, 0.0);
        for (std::size_t o = 0; o < head_.out; ++o) {
            const double go = grad_output[o];
            if (go == 0.0) {
                continue;
            }
            gb[o] += go;
            const double *row = W + o * head_.in;
            double *grow = gW + o * head_.in;
            for (std::size_t i = 0; i < head_.in; ++i) {
                grow[i] += go * ws.head_in[i];
                ws.grad_head_in[i] += go * row[i];
            }
        }
    }

    // MLP branch
    if (!mlp_.empty()) {
        auto &da = ws.grad_a;
        da.assign(ws.grad_head_in.begin(), ws.grad_head_in.begin() + static_cast<std::ptrdiff_t>(mlp_.back().out));
        for (std::size_t l = mlp_.size(); l-- > 0;) {
            const auto &L = mlp_[l];
            const auto &act = ws.mlp_act[l];
            const double *x = l == 0 ? exog.data() : ws.mlp_act[l - 1].data();
            const double *W = p + L.offset;
            double *gW = g + L.offset;
            double *gb = gW + L.in * L.out;
            auto &dx = ws.grad_b;
            dx.assign(L.in, 0.0);
            for (std::size_t o = 0; o < L.out; ++o) {
                const double dy = act[o] > 0.0 ? da[o] : 0.0;
                if (dy == 0.0) {
                    continue;
                }
                gb[o] += dy;
                const double *row = W + o * L.in;
                double *grow = gW + o * L.in;
                for (std::size_t i = 0; i < L.in; ++i) {
                    grow[i] += dy * x[i];
                    dx[i] += dy * row[i];
                }
            }
            std::swap(da, dx);
        }
    }

    // CNN branch
    if (!conv_.empty()) {
        const std::size_t len = spec_.window;
        const std::size_t offset = spec_.mlp_output_width();
        auto &da = ws.grad_a;
        da.assign(ws.grad_head_in.begin() + static_cast<std::ptrdiff_t>(offset), ws.grad_head_in.end());
        for (std::size_t l = conv_.size(); l-- > 0;) {
            const auto &L = conv_[l];
            const auto &act = ws.conv_act[l];
            const double *in = l == 0 ? window.data() : ws.conv_act[l - 1].data();
            const double *W = p + L.offset;
            double *gW = g + L.offset;
            double *gb = gW + L.filters * L.channels * L.kernel;
            const auto pad = static_cast<std::ptrdiff_t>((L.kernel - 1) / 2);
            for (std::size_t i = 0; i < L.filters * len; ++i) {
                if (act[i] <= 0.0) {
                    da[i] = 0.0;
                }
            }
            auto &din = ws.grad_b;
            const bool need_input_grad = l > 0;
            if (need_input_grad) {
                din.assign(L.channels * len, 0.0);
            }
            for (std::size_t f = 0; f < L.filters; ++f) {
                const double *dy = da.data() + f * len;
                double bsum = 0.0;
                for (std::size_t t = 0; t < len; ++t) {
                    bsum += dy[t];
                }
                gb[f] += bsum;
                for (std::size_t c = 0; c < L.channels; ++c) {
                    const double *src = in + c * len;
                    const double *wk = W + (f * L.channels + c) * L.kernel;
                    double *gk = gW + (f * L.channels + c) * L.kernel;
                    double *dsrc = need_input_grad ? din.data() + c * len : nullptr;
                    for (std::size_t j = 0; j < L.kernel; ++j) {
                        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
                        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(len),
                                                                           static_cast<std::ptrdiff_t>(len) - shift);
                        double acc = 0.0;
                        for (std::ptrdiff_t t = t0; t < t1; ++t) {
                            acc += dy[t] * src[t + shift];
                        }
                        gk[j] += acc;
                        if (dsrc) {
                            const double wv = wk[j];
                            for (std::ptrdiff_t t = t0; t < t1; ++t) {
                                dsrc[t + shift] += wv * dy[t];
                            }
                        }
                    }
                }
            }
            if (need_input_grad) {
                std::swap(da, din);
            }
        }
    }
}

// ---------------------------------------------------------------- loss

namespace {

void check_same_shape(const RowMatrix &a, const RowMatrix &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DataError("loss: target and prediction shapes differ");
    }
    if (a.rows() == 0) {
        throw DataError("loss: empty batch");
    }
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(alpha));
    }
}

double example_loss(const double *target, const double *prediction, std::size_t width, double fit_weight,
                    double sum_weight) {
    double sq = 0.0;
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
        const double e = target[j] - prediction[j];
        sq += e * e;
        sum += e;
    }
    return fit_weight * sq + sum_weight * sum * sum;
}

} // namespace

double weighted_loss(const RowMatrix &target, const RowMatrix &prediction, double fit_weight, double sum_weight) {
    check_same_shape(target, prediction);
    double total = 0.0;
    const auto width = static_cast<std::size_t>(target.cols());
    for (Index t = 0; t < target.rows(); ++t) {
        total += example_loss(target.row(t).data(), prediction.row(t).data(), width, fit_weight, sum_weight);
    }
    return total / static_cast<double>(target.rows());
}

double coherence_loss(const RowMatrix &target, const RowMatrix &prediction, double alpha) {
    check_alpha(alpha);
    return weighted_loss(target, prediction, 1.0 - alpha, alpha);
}

void loss_gradient(std::span<const double> target, std::span<const double> prediction, double fit_weight,
                   double sum_weight, std::size_t batch_size, std::span<double> out) {
    double sum = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
        sum += target[j] - prediction[j];
    }
    const double scale = 2.0 / static_cast<double>(batch_size);
    for (std::size_t j = 0; j < target.size(); ++j) {
        out[j] = -scale * (fit_weight * (target[j] - prediction[j]) + sum_weight * sum);
    }
}

RowMatrix predict(const Network &net, const Dataset &data) {
    RowMatrix out(static_cast<Index>(data.size()), static_cast<Index>(net.spec().outputs));
    Workspace ws;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto r = static_cast<Index>(i);
        net.forward(ws, {data.exog.row(r).data(), static_cast<std::size_t>(data.exog.cols())},
                    {data.windows.row(r).data(), static_cast<std::size_t>(data.windows.cols())});
        std::copy(ws.output.begin(), ws.output.end(), out.row(r).data());
    }
    return out;
}

std::vector<double> backward(const Network &net, const Dataset &batch, double fit_weight, double sum_weight) {
    if (batch.size() == 0) {
        throw DataError("backward: empty batch");
    }
    std::vector<double> grad(net.parameter_count(), 0.0);
    std::vector<double> gout(net.spec().outputs);
    Workspace ws;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto r = static_cast<Index>(i);
        std::span<const double> x{batch.exog.row(r).data(), static_cast<std::size_t>(batch.exog.cols())};
        std::span<const double> w{batch.windows.row(r).data(), static_cast<std::size_t>(batch.windows.cols())};
        net.forward(ws, x, w);
        loss_gradient({batch.targets.row(r).data(), gout.size()}, ws.output, fit_weight, sum_weight, batch.size(),
                      gout);
        net.backward(ws, x, w, gout, grad);
    }
    return grad;
}

std::vector<double> backward(const Network &net, const Dataset &batch, double alpha) {
    check_alpha(alpha);
    return backward(net, batch, 1.0 - alpha, alpha);
}

// ---------------------------------------------------------------- Adam

void adam_step(std::span<double> weights, std::span<const double> grads, AdamState &state, const AdamConfig &cfg) {
    if (state.m.size() != weights.size()) {
        state = AdamState(weights.size());
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        weights[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

// ---------------------------------------------------------------- scaling

void TrainConfig::validate() const {
    check_alpha(alpha);
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
    if (batch_size == 0 || max_epochs == 0) {
        throw ConfigError("batch size and epoch count must be positive");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation fraction must lie in [0, 1)");
    }
}

Scaling Scaling::identity(const NetworkSpec &spec) {
    Scaling s;
    s.exog_mean = Vector::Zero(static_cast<Index>(spec.exog_dim));
    s.exog_scale = Vector::Ones(static_cast<Index>(spec.exog_dim));
    s.target_mean = Vector::Zero(static_cast<Index>(spec.outputs));
    return s;
}

Scaling Scaling::fit(const Dataset &data) {
    Scaling s;
    const double n = static_cast<double>(data.size());
    auto safe = [](double sd) { return sd > 1e-12 ? sd : 1.0; };

    s.exog_mean = data.exog.colwise().mean().transpose();
    s.exog_scale.resize(data.exog.cols());
    for (Index j = 0; j < data.exog.cols(); ++j) {
        const double var = (data.exog.col(j).array() - s.exog_mean(j)).square().sum() / n;
        s.exog_scale(j) = safe(std::sqrt(var));
    }
    if (data.windows.size() > 0) {
        s.window_mean = data.windows.mean();
        const double var = (data.windows.array() - s.window_mean).square().mean();
        s.window_scale = safe(std::sqrt(var));
    }
    s.target_mean = data.targets.colwise().mean().transpose();
    const RowMatrix centred = data.targets.rowwise() - s.target_mean.transpose();
    s.target_scale = safe(std::sqrt(centred.array().square().mean()));
    return s;
}

Dataset Scaling::apply(const Dataset &data) const {
    Dataset out;
    out.exog = (data.exog.rowwise() - exog_mean.transpose()).array().rowwise() / exog_scale.transpose().array();
    out.windows = (data.windows.array() - window_mean) / window_scale;
    out.targets = (data.targets.rowwise() - target_mean.transpose()) / target_scale;
    return out;
}

// ---------------------------------------------------------------- trained network

double TrainedNetwork::best_validation_loss() const {
    const auto &h = validation_loss.empty() ? train_loss : validation_loss;
    if (h.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    return h[std::min(best_epoch, h.size() - 1)];
}

Vector TrainedNetwork::predict(std::span<const double> exog, std::span<const double> window) const {
    const auto &spec = network.spec();
    if (exog.size() != spec.exog_dim || window.size() != spec.window) {
        throw DataError("prediction input shape mismatch");
    }
    std::vector<double> x(exog.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = (exog[i] - scaling.exog_mean(static_cast<Index>(i))) / scaling.exog_scale(static_cast<Index>(i));
    }
    std::vector<double> w(window.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = (window[i] - scaling.window_mean) / scaling.window_scale;
    }
    Vector out = network.forward(x, w);
    return (out * scaling.target_scale + scaling.target_mean).eval();
}

RowMatrix TrainedNetwork::predict(const Dataset &raw) const {
    Dataset scaled = scaling.apply(raw);
    RowMatrix out = nn::predict(network, scaled);
    out *= scaling.target_scale;
    out.rowwise() += scaling.target_mean.transpose();
    return out;
}

namespace {

constexpr char kMagic[] = "HTS-NNW/1\n";

json vec_json(const Vector &v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vector json_vec(const json &j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

void put_u64(std::ostream &out, std::uint64_t v) {
    char bytes[8];
    for (int b = 0; b < 8; ++b) {
        bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
    }
    out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream &in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char *>(bytes), 8);
    if (!in) {
        throw DataError("truncated weight file");
    }
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
        v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    }
    return v;
}

} // namespace

void TrainedNetwork::save(const std::filesystem::path &path) const {
    json header = {{"format", 1},
                   {"spec", spec_json(network.spec())},
                   {"scaling",
                    {{"exog_mean", vec_json(scaling.exog_mean)},
                     {"exog_scale", vec_json(scaling.exog_scale)},
                     {"window_mean", scaling.window_mean},
                     {"window_scale", scaling.window_scale},
                     {"target_mean", vec_json(scaling.target_mean)},
                     {"target_scale", scaling.target_scale}}},
                   {"best_epoch", best_epoch},
                   {"train_loss", train_loss},
                   {"validation_loss", validation_loss}};
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << kMagic << header.dump() << '\n';
    const auto params = network.parameters();
    put_u64(out, params.size());
    for (double v : params) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        put_u64(out, bits);
    }
}

TrainedNetwork TrainedNetwork::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::string magic;
    std::getline(in, magic);
    if (magic + "\n" != kMagic) {
        throw DataError("'" + path.string() + "' is not a network weight file");
    }
    std::string line;
    std::getline(in, line);
    TrainedNetwork out;
    try {
        const json header = json::parse(line);
        out.network = Network(spec_from(header.at("spec")));
        const auto &sc = header.at("scaling");
        out.scaling.exog_mean = json_vec(sc.at("exog_mean"));
        out.scaling.exog_scale = json_vec(sc.at("exog_scale"));
        out.scaling.window_mean = sc.at("window_mean").get<double>();
        out.scaling.window_scale = sc.at("window_scale").get<double>();
        out.scaling.target_mean = json_vec(sc.at("target_mean"));
        out.scaling.target_scale = sc.at("target_scale").get<double>();
        out.best_epoch = header.at("best_epoch").get<std::size_t>();
        out.train_loss = header.at("train_loss").get<std::vector<double>>();
        out.validation_loss = header.at("validation_loss").get<std::vector<double>>();
    } catch (const json::exception &e) {
        throw DataError("bad weight file header: " + std::string(e.what()));
    }
    const std::uint64_t count = get_u64(in);
    auto params = out.network.parameters();
    if (count != params.size()) {
        throw DataError("weight count does not match the network spec");
    }
    for (auto &v : params) {
        const std::uint64_t bits = get_u64(in);
        std::memcpy(&v, &bits, sizeof v);
    }
    return out;
}

// ---------------------------------------------------------------- training

TrainedNetwork train(const NetworkSpec &spec, const Dataset &data, const TrainConfig &cfg) {
    cfg.validate();
    spec.validate();
    const std::size_t n = data.size();
    if (n == 0) {
        throw DataError("empty training set");
    }
    if (static_cast<std::size_t>(data.exog.cols()) != spec.exog_dim ||
        static_cast<std::size_t>(data.windows.cols()) != spec.window ||
        static_cast<std::size_t>(data.targets.cols()) != spec.outputs ||
        static_cast<std::size_t>(data.exog.rows()) != n || static_cast<std::size_t>(data.windows.rows()) != n) {
        throw DataError("dataset shape does not match the network spec");
    }

    auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.validation_fraction));
    if (n_val >= n) {
        n_val = 0;
    }
    const std::size_t n_train = n - n_val;

    TrainedNetwork out;
    out.scaling = cfg.standardize ? Scaling::fit(data.slice(0, n_train)) : Scaling::identity(spec);
    const Dataset scaled = out.scaling.apply(data);
    const Dataset validation = n_val > 0 ? scaled.slice(n_train, n) : Dataset{};

    Network net(spec);
    Rng init_rng(derive_seed(cfg.seed, "init"));
    net.initialize(init_rng);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));

    const double fit_w = 1.0 - cfg.alpha;
    const double sum_w = cfg.alpha;
    const std::size_t width = spec.outputs;
    const std::size_t params = net.parameter_count();

    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) {
        order[i] = i;
    }
    std::vector<double> grad(params);
    std::vector<double> gout(width);
    std::vector<double> best(net.parameters().begin(), net.parameters().end());
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    AdamState adam(params);
    const AdamConfig adam_cfg{cfg.learning_rate};
    Workspace ws;
    const auto exog_cols = static_cast<std::size_t>(scaled.exog.cols());
    const auto window_cols = static_cast<std::size_t>(scaled.windows.cols());

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t stop = std::min(n_train, start + cfg.batch_size);
            const std::size_t bsz = stop - start;
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const auto r = static_cast<Index>(order[k]);
                std::span<const double> x{scaled.exog.row(r).data(), exog_cols};
                std::span<const double> w{scaled.windows.row(r).data(), window_cols};
                const double *y = scaled.targets.row(r).data();
                net.forward(ws, x, w);
                total += example_loss(y, ws.output.data(), width, fit_w, sum_w);
                loss_gradient({y, width}, ws.output, fit_w, sum_w, bsz, gout);
                net.backward(ws, x, w, gout, grad);
            }
            adam_step(net.parameters(), grad, adam, adam_cfg);
        }
        const double train_loss = total / static_cast<double>(n_train);
        if (!std::isfinite(train_loss)) {
            throw TrainingError(epoch, "training loss is not finite");
        }
        out.train_loss.push_back(train_loss);
        double monitored = train_loss;
        if (n_val > 0) {
            monitored = weighted_loss(validation.targets, nn::predict(net, validation), fit_w, sum_w);
            if (!std::isfinite(monitored)) {
                throw TrainingError(epoch, "validation loss is not finite");
            }
            out.validation_loss.push_back(monitored);
        }
        if (monitored < best_loss) {
            best_loss = monitored;
            out.best_epoch = epoch;
            std::copy(net.parameters().begin(), net.parameters().end(), best.begin());
            since_best = 0;
        } else if (++since_best >= std::max<std::size_t>(1, cfg.patience)) {
            break;
        }
    }
    std::copy(best.begin(), best.end(), net.parameters().begin());
    out.network = std::move(net);
    return out;
}

// ---------------------------------------------------------------- grid search

GridResult grid_search(const GridSpace &space, const NetworkSpec &base, const Dataset &data, const TrainConfig &cfg,
                       const Trainer &trainer, std::size_t jobs) {
    if (space.filters.empty() || space.kernels.empty() || space.units.empty()) {
        throw ConfigError("grid search needs non-empty filter, kernel and unit grids");
    }
    GridResult result;
    std::vector<NetworkSpec> specs;
    for (std::size_t f : space.filters) {
        for (std::size_t k : space.kernels) {
            for (std::size_t u : space.units) {
                NetworkSpec s = base;
                for (auto &c : s.conv) {
                    c = {f, k};
                }
                for (auto &h : s.hidden) {
                    h = u;
                }
                specs.push_back(std::move(s));
                result.cells.push_back({f, k, u, 0.0, false, {}});
            }
        }
    }
    parallel_for(specs.size(), jobs, [&](std::size_t i) {
        try {
            result.cells[i].validation_loss = trainer(specs[i], data, cfg).best_validation_loss();
        } catch (const Error &e) {
            result.cells[i].failed = true;
            result.cells[i].error = e.what();
        }
    });
    bool found = false;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto &cell = result.cells[i];
        if (cell.failed) {
            continue;
        }
        if (!found || cell.validation_loss < result.cells[result.best_index].validation_loss) {
            result.best_index = i;
            found = true;
        }
    }
    if (!found) {
        throw TrainingError(0, "every grid-search cell failed to train");
    }
    result.best = specs[result.best_index];
    return result;
}

} // namespace hts::nn
