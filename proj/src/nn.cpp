#include "dbforge/nn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "dbforge/error.hpp"

namespace dbforge::nn {

std::vector<int> Architecture::dims() const {
    std::vector<int> d;
    d.reserve(hidden.size() + 2);
    d.push_back(input_dim);
    d.insert(d.end(), hidden.begin(), hidden.end());
    d.push_back(classes);
    return d;
}

std::int64_t Architecture::parameter_count() const {
    const auto d = dims();
    std::int64_t n = 0;
    for (std::size_t l = 0; l + 1 < d.size(); ++l) {
        n += static_cast<std::int64_t>(d[l + 1]) * d[l] + d[l + 1];
    }
    return n;
}

void Architecture::validate() const {
    if (input_dim < 1) throw ValidationError("architecture input dimension must be positive");
    if (classes < 2) throw ValidationError("architecture needs at least 2 classes");
    if (hidden.size() > 2) throw ValidationError("at most two hidden layers are supported");
    for (int h : hidden) {
        if (h < 1) throw ValidationError("hidden layer width must be positive");
    }
}

void TrainConfig::validate() const {
    if ((epochs > 0) == (iterations > 0)) {
        throw ValidationError("exactly one of epochs/iterations must be positive");
    }
    if (batch_size < 1) throw ValidationError("batch size must be positive");
    if (learning_rate < 0.0) throw ValidationError("learning rate must be nonnegative");
    if (weight_decay < 0.0) throw ValidationError("weight decay must be nonnegative");
}

DataView view(const datagen::LabeledDataset& ds) {
    return {ds.features, ds.labels, ds.feature_dim, ds.classes};
}

OwnedData take(const DataView& data, std::span<const std::int64_t> indices) {
    OwnedData out;
    out.feature_dim = data.feature_dim;
    out.classes = data.classes;
    out.features.reserve(indices.size() * data.feature_dim);
    out.labels.reserve(indices.size());
    for (std::int64_t i : indices) {
        const auto r = data.row(i);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.labels.push_back(data.labels[i]);
    }
    return out;
}

std::int64_t ClassifierModel::weight_offset(int layer) const {
    const auto d = arch.dims();
    std::int64_t off = 0;
    for (int l = 0; l < layer; ++l) {
        off += static_cast<std::int64_t>(d[l + 1]) * d[l] + d[l + 1];
    }
    return off;
}

std::int64_t ClassifierModel::bias_offset(int layer) const {
    const auto d = arch.dims();
    return weight_offset(layer) + static_cast<std::int64_t>(d[layer + 1]) * d[layer];
}

namespace {

void softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

double logsumexp(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    return m + std::log(sum);
}

// z[l] = W[l] a + b[l] for one layer.
void affine(const ClassifierModel& model, int layer, std::span<const double> in,
            std::vector<double>& out) {
    const auto d = model.arch.dims();
    const int n_in = d[layer];
    const int n_out = d[layer + 1];
    const double* w = model.params.data() + model.weight_offset(layer);
    const double* b = model.params.data() + model.bias_offset(layer);
    out.assign(n_out, 0.0);
    for (int o = 0; o < n_out; ++o) {
        double acc = b[o];
        const double* wrow = w + static_cast<std::int64_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) acc += wrow[i] * in[i];
        out[o] = acc;
    }
}

} // namespace

std::vector<double> ClassifierModel::forward(std::span<const double> x) const {
    const int layers = arch.layer_count();
    std::vector<double> a(x.begin(), x.end());
    std::vector<double> z;
    for (int l = 0; l < layers; ++l) {
        affine(*this, l, a, z);
        if (l + 1 < layers) {
            for (double& v : z) v = std::max(v, 0.0);
        }
        a = z;
    }
    softmax_inplace(a);
    return a;
}

ClassifierModel init_model(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    ClassifierModel model;
    model.arch = arch;
    model.params.assign(arch.parameter_count(), 0.0);
    Rng rng(derive_seed(seed, {0x696e6974ULL})); // "init" stream
    const auto d = arch.dims();
    std::int64_t pos = 0;
    for (int l = 0; l + 1 < static_cast<int>(d.size()); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(d[l]));
        const std::int64_t count = static_cast<std::int64_t>(d[l + 1]) * d[l] + d[l + 1];
        for (std::int64_t k = 0; k < count; ++k) {
            model.params[pos++] = (2.0 * rng.next_double() - 1.0) * bound;
        }
    }
    return model;
}

WeightedSampler::WeightedSampler(std::vector<double> weights, std::uint64_t seed)
    : weights_(std::move(weights)), rng_(derive_seed(seed, {0x73616d70ULL})) {
    if (weights_.empty()) throw ValidationError("sampler needs at least one weight");
    cumulative_.reserve(weights_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const double w = weights_[i];
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ValidationError("sampler weight at index " + std::to_string(i) +
                                  " is negative or non-finite");
        }
        acc += w;
        cumulative_.push_back(acc);
    }
    if (acc <= 0.0) throw ValidationError("all sampler weights are zero");
}

std::int64_t WeightedSampler::sample_one() {
    const double u = rng_.next_double() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = static_cast<std::int64_t>(it - cumulative_.begin());
    return std::min(idx, static_cast<std::int64_t>(cumulative_.size()) - 1);
}

std::vector<std::int64_t> WeightedSampler::sample_indices(std::int64_t count) {
    if (count < 1) throw ValidationError("sample count must be positive");
    std::vector<std::int64_t> out(count);
    for (auto& v : out) v = sample_one();
    return out;
}

double loss_and_gradient(const ClassifierModel& model, const DataView& data,
                         std::span<const std::int64_t> batch, double weight_decay,
                         std::vector<double>& grad) {
    const auto d = model.arch.dims();
    const int layers = model.arch.layer_count();
    grad.assign(model.params.size(), 0.0);

    // per-sample activation buffers, reused across the batch
    std::vector<std::vector<double>> act(layers + 1);
    std::vector<std::vector<double>> pre(layers);
    std::vector<double> delta, delta_prev;

    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const std::int64_t idx : batch) {
        const auto x = data.row(idx);
        act[0].assign(x.begin(), x.end());
        for (int l = 0; l < layers; ++l) {
            affine(model, l, act[l], pre[l]);
            act[l + 1] = pre[l];
            if (l + 1 < layers) {
                for (double& v : act[l + 1]) v = std::max(v, 0.0);
            }
        }
        const int y = data.labels[idx];
        const double lse = logsumexp(pre[layers - 1]);
        loss += (lse - pre[layers - 1][y]) * inv_batch;

        // delta at the output: softmax(z) - onehot(y)
        delta = pre[layers - 1];
        softmax_inplace(delta);
        delta[y] -= 1.0;
        for (double& v : delta) v *= inv_batch;

        for (int l = layers - 1; l >= 0; --l) {
            double* gw = grad.data() + model.weight_offset(l);
            double* gb = grad.data() + model.bias_offset(l);
            const int n_in = d[l];
            const int n_out = d[l + 1];
            for (int o = 0; o < n_out; ++o) {
                const double dv = delta[o];
                gb[o] += dv;
                double* grow = gw + static_cast<std::int64_t>(o) * n_in;
                const double* a = act[l].data();
                for (int i = 0; i < n_in; ++i) grow[i] += dv * a[i];
            }
            if (l > 0) {
                const double* w = model.params.data() + model.weight_offset(l);
                delta_prev.assign(n_in, 0.0);
                for (int o = 0; o < n_out; ++o) {
                    const double dv = delta[o];
                    const double* wrow = w + static_cast<std::int64_t>(o) * n_in;
                    for (int i = 0; i < n_in; ++i) delta_prev[i] += wrow[i] * dv;
                }
                for (int i = 0; i < n_in; ++i) {
                    if (pre[l - 1][i] <= 0.0) delta_prev[i] = 0.0;
                }
                delta = delta_prev;
            }
        }
    }

    if (weight_decay > 0.0) {
        // L2 on weights only, biases excluded
        for (int l = 0; l < layers; ++l) {
            const std::int64_t w0 = model.weight_offset(l);
            const std::int64_t w1 = model.bias_offset(l);
            for (std::int64_t k = w0; k < w1; ++k) {
                loss += 0.5 * weight_decay * model.params[k] * model.params[k];
                grad[k] += weight_decay * model.params[k];
            }
        }
    }
    return loss;
}

Trainer::Trainer(const DataView& data, const Architecture& arch, const TrainConfig& cfg,
                 std::optional<WeightedSampler> sampler)
    : data_(data),
      cfg_(cfg),
      sampler_(std::move(sampler)),
      shuffle_rng_(derive_seed(cfg.seed, {0x73687566ULL})) {
    cfg_.validate();
    arch.validate();
    if (data_.size() < 1) throw ValidationError("training data is empty");
    if (arch.input_dim != data_.feature_dim) {
        throw ValidationError("architecture input dimension does not match the data");
    }
    if (arch.classes != data_.classes) {
        throw ValidationError("architecture class count does not match the data");
    }
    if (sampler_ && sampler_->size() != data_.size()) {
        throw ValidationError("sampler weight count does not match the data");
    }
    model_ = init_model(arch, derive_seed(cfg.seed, {0x6d6f64656cULL}));
    const std::int64_t n = data_.size();
    batches_per_epoch_ = (n + cfg_.batch_size - 1) / cfg_.batch_size;
    total_steps_ = cfg_.epochs > 0 ? static_cast<std::int64_t>(cfg_.epochs) * batches_per_epoch_
                                   : cfg_.iterations;
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    cursor_ = n; // forces a shuffle before the first uniform batch
}

double Trainer::step() {
    const std::int64_t n = data_.size();
    batch_.clear();
    if (sampler_) {
        for (int k = 0; k < cfg_.batch_size; ++k) batch_.push_back(sampler_->sample_one());
    } else {
        for (int k = 0; k < cfg_.batch_size && batch_.size() < static_cast<std::size_t>(n); ++k) {
            if (cursor_ >= n) {
                for (std::int64_t i = n - 1; i > 0; --i) {
                    const auto j = static_cast<std::int64_t>(
                        shuffle_rng_.next_below(static_cast<std::uint64_t>(i) + 1));
                    std::swap(order_[i], order_[j]);
                }
                cursor_ = 0;
            }
            batch_.push_back(order_[cursor_++]);
        }
    }

    const double loss = loss_and_gradient(model_, data_, batch_, cfg_.weight_decay, grad_);
    if (!std::isfinite(loss)) {
        throw TrainingError("training loss became non-finite at step " +
                            std::to_string(steps_done_));
    }

    if (cfg_.optimizer == Optimizer::Sgd) {
        for (std::size_t k = 0; k < model_.params.size(); ++k) {
            model_.params[k] -= cfg_.learning_rate * grad_[k];
        }
    } else {
        constexpr double beta1 = 0.9;
        constexpr double beta2 = 0.999;
        constexpr double eps = 1e-8;
        if (adam_m_.empty()) {
            adam_m_.assign(model_.params.size(), 0.0);
            adam_v_.assign(model_.params.size(), 0.0);
        }
        ++adam_t_;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
        for (std::size_t k = 0; k < model_.params.size(); ++k) {
            adam_m_[k] = beta1 * adam_m_[k] + (1.0 - beta1) * grad_[k];
            adam_v_[k] = beta2 * adam_v_[k] + (1.0 - beta2) * grad_[k] * grad_[k];
            model_.params[k] -=
                cfg_.learning_rate * (adam_m_[k] / c1) / (std::sqrt(adam_v_[k] / c2) + eps);
        }
    }
    ++steps_done_;
    return loss;
}

TrainResult train_erm(const DataView& data, const Architecture& arch, const TrainConfig& cfg,
                      std::optional<WeightedSampler> sampler) {
    Trainer trainer(data, arch, cfg, std::move(sampler));
    TrainResult result;
    double window_loss = 0.0;
    std::int64_t window_count = 0;
    while (trainer.steps_done() < trainer.total_steps()) {
        window_loss += trainer.step();
        ++window_count;
        if (window_count == trainer.batches_per_epoch() ||
            trainer.steps_done() == trainer.total_steps()) {
            result.epoch_loss.push_back(window_loss / static_cast<double>(window_count));
            window_loss = 0.0;
            window_count = 0;
        }
    }
    result.model = trainer.model();
    return result;
}

Matrix predict_proba(const ClassifierModel& model, const DataView& data) {
    if (model.arch.input_dim != data.feature_dim) {
        throw ValidationError("model input dimension does not match the data");
    }
    Matrix out(static_cast<int>(data.size()), model.arch.classes);
    for (std::int64_t i = 0; i < data.size(); ++i) {
        const auto p = model.forward(data.row(i));
        std::copy(p.begin(), p.end(), out.data.begin() + i * model.arch.classes);
    }
    return out;
}

std::vector<int> argmax_rows(const Matrix& proba) {
    std::vector<int> out(proba.rows);
    for (int i = 0; i < proba.rows; ++i) {
        const double* row = proba.data.data() + static_cast<std::int64_t>(i) * proba.cols;
        out[i] = static_cast<int>(std::max_element(row, row + proba.cols) - row);
    }
    return out;
}

std::vector<int> predict_labels(const ClassifierModel& model, const DataView& data) {
    return argmax_rows(predict_proba(model, data));
}

double gradient_check_at(const ClassifierModel& model, const DataView& probe, double step) {
    std::vector<std::int64_t> batch(probe.size());
    std::iota(batch.begin(), batch.end(), 0);

    std::vector<double> analytic;
    loss_and_gradient(model, probe, batch, 0.0, analytic);

    ClassifierModel probe_model = model;
    std::vector<double> scratch;
    double worst = 0.0;
    for (std::size_t k = 0; k < probe_model.params.size(); ++k) {
        const double saved = probe_model.params[k];
        probe_model.params[k] = saved + step;
        const double up = loss_and_gradient(probe_model, probe, batch, 0.0, scratch);
        probe_model.params[k] = saved - step;
        const double down = loss_and_gradient(probe_model, probe, batch, 0.0, scratch);
        probe_model.params[k] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({1.0, std::abs(analytic[k]), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
    }
    return worst;
}

double gradient_check(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    // Redraw the probe when a hidden pre-activation sits near the ReLU
    // kink, where central differences are meaningless.
    for (int attempt = 0;; ++attempt) {
        const std::uint64_t s = derive_seed(seed, {0x67636865636bULL, static_cast<std::uint64_t>(attempt)});
        ClassifierModel model = init_model(arch, s);
        Rng rng(derive_seed(s, {0x70726f6265ULL}));
        const int count = 5;
        OwnedData probe;
        probe.feature_dim = arch.input_dim;
        probe.classes = arch.classes;
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < arch.input_dim; ++j) probe.features.push_back(rng.next_gaussian());
            probe.labels.push_back(i % arch.classes);
        }

        bool near_kink = false;
        if (!arch.hidden.empty()) {
            std::vector<double> a, z;
            for (int i = 0; i < count && !near_kink; ++i) {
                a.assign(probe.features.begin() + static_cast<std::int64_t>(i) * arch.input_dim,
                         probe.features.begin() + static_cast<std::int64_t>(i + 1) * arch.input_dim);
                for (int l = 0; l + 1 < model.arch.layer_count(); ++l) {
                    affine(model, l, a, z);
                    for (double v : z) {
                        if (std::abs(v) < 1e-3) near_kink = true;
                    }
                    for (double& v : z) v = std::max(v, 0.0);
                    a = z;
                }
            }
        }
        if (!near_kink || attempt >= 16) {
            return gradient_check_at(model, probe.as_view());
        }
    }
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "#dbforge-model v1\n";
    out << "arch " << model.arch.input_dim << " " << model.arch.classes << " "
        << model.arch.hidden.size();
    for (int h : model.arch.hidden) out << " " << h;
    out << "\n";
    out << "init " << model.init_scheme << "\n";
    out << "params " << model.params.size() << "\n";
    char buf[32];
    for (double p : model.params) {
        auto res = std::to_chars(buf, buf + sizeof(buf), p);
        out.write(buf, res.ptr - buf);
        out.put('\n');
    }
    if (!out) throw IoError("write failed for " + path.string());
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "#dbforge-model v1") {
        throw FormatError(path.string() + ":1: expected '#dbforge-model v1' header");
    }
    ClassifierModel model;
    std::size_t hidden_count = 0;
    {
        if (!std::getline(in, line)) throw FormatError(path.string() + ":2: missing arch line");
        std::istringstream ss(line);
        std::string tag;
        ss >> tag >> model.arch.input_dim >> model.arch.classes >> hidden_count;
        if (tag != "arch" || !ss || hidden_count > 2) {
            throw FormatError(path.string() + ":2: malformed arch line");
        }
        for (std::size_t i = 0; i < hidden_count; ++i) {
            int h = 0;
            ss >> h;
            if (!ss) throw FormatError(path.string() + ":2: malformed arch line");
            model.arch.hidden.push_back(h);
        }
    }
    {
        if (!std::getline(in, line) || !line.starts_with("init ")) {
            throw FormatError(path.string() + ":3: missing init line");
        }
        model.init_scheme = line.substr(5);
    }
    std::size_t count = 0;
    {
        if (!std::getline(in, line) || !line.starts_with("params ")) {
            throw FormatError(path.string() + ":4: missing params line");
        }
        count = std::stoull(line.substr(7));
    }
    model.arch.validate();
    if (count != static_cast<std::size_t>(model.arch.parameter_count())) {
        throw FormatError(path.string() + ":4: parameter count does not match the architecture");
    }
    model.params.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        if (!std::getline(in, line)) {
            throw FormatError(path.string() + ": truncated parameter block at entry " +
                              std::to_string(k));
        }
        double v = 0.0;
        auto res = std::from_chars(line.data(), line.data() + line.size(), v);
        if (res.ec != std::errc{} || res.ptr != line.data() + line.size()) {
            throw FormatError(path.string() + ": bad parameter value at entry " + std::to_string(k));
        }
        model.params.push_back(v);
    }
    return model;
}

} // namespace dbforge::nn
