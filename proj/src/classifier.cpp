#include "scproj/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace scproj {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double max = logits.row(r).maxCoeff();
        out.row(r) = (logits.row(r).array() - max).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

// Mean cross-entropy straight from logits via log-sum-exp; exact where the
// clamped public loss() saturates.
double fused_loss(const Matrix& logits, const Matrix& targets) {
    double total = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double max = logits.row(r).maxCoeff();
        const double lse =
            max + std::log((logits.row(r).array() - max).exp().sum());
        total += lse - logits.row(r).dot(targets.row(r));
    }
    return total / double(logits.rows());
}

struct ForwardCache {
    std::vector<Matrix> activations;  ///< [input, hidden outputs...]
    Matrix logits;
};

ForwardCache forward_cached(const std::vector<Layer>& layers, const Matrix& inputs) {
    ForwardCache cache;
    cache.activations.reserve(layers.size());
    cache.activations.push_back(inputs);
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        Matrix z = (cache.activations.back() * layers[i].weights).rowwise() +
                   layers[i].bias;
        cache.activations.push_back(z.cwiseMax(0.0));
    }
    cache.logits = (cache.activations.back() * layers.back().weights).rowwise() +
                   layers.back().bias;
    return cache;
}

// Analytic gradient of the mean cross-entropy w.r.t. every layer parameter.
std::vector<Layer> backward(const std::vector<Layer>& layers,
                            const ForwardCache& cache, const Matrix& targets) {
    const double batch = double(cache.logits.rows());
    std::vector<Layer> grads(layers.size());
    Matrix delta = (softmax_rows(cache.logits) - targets) / batch;
    for (std::size_t i = layers.size(); i-- > 0;) {
        grads[i].weights.noalias() = cache.activations[i].transpose() * delta;
        grads[i].bias = delta.colwise().sum();
        if (i > 0) {
            Matrix upstream = delta * layers[i].weights.transpose();
            // ReLU gate: activations[i] is max(z, 0), so positive entries
            // mark where the unit was live.
            delta = upstream.cwiseProduct(
                (cache.activations[i].array() > 0.0).cast<double>().matrix());
        }
    }
    return grads;
}

struct AdamState {
    std::vector<Layer> m;
    std::vector<Layer> v;
    long step = 0;

    explicit AdamState(const std::vector<Layer>& layers) {
        m.resize(layers.size());
        v.resize(layers.size());
        for (std::size_t i = 0; i < layers.size(); ++i) {
            m[i].weights = Matrix::Zero(layers[i].weights.rows(),
                                        layers[i].weights.cols());
            m[i].bias = RowVector::Zero(layers[i].bias.size());
            v[i] = m[i];
        }
    }

    void update(std::vector<Layer>& layers, const std::vector<Layer>& grads,
                double lr) {
        ++step;
        const double bias1 = 1.0 - std::pow(kAdamBeta1, double(step));
        const double bias2 = 1.0 - std::pow(kAdamBeta2, double(step));
        auto apply = [&](auto& param, auto& m1, auto& m2, const auto& grad) {
            m1 = kAdamBeta1 * m1 + (1.0 - kAdamBeta1) * grad;
            m2 = kAdamBeta2 * m2.array().matrix() +
                 (1.0 - kAdamBeta2) * grad.array().square().matrix();
            param.array() -= lr * (m1.array() / bias1) /
                             ((m2.array() / bias2).sqrt() + kAdamEpsilon);
        };
        for (std::size_t i = 0; i < layers.size(); ++i) {
            apply(layers[i].weights, m[i].weights, v[i].weights, grads[i].weights);
            apply(layers[i].bias, m[i].bias, v[i].bias, grads[i].bias);
        }
    }
};

std::vector<Layer> init_layers(Eigen::Index input_dim,
                               const std::vector<int>& hidden_sizes,
                               Eigen::Index n_classes, Rng& rng) {
    std::vector<Eigen::Index> dims;
    dims.push_back(input_dim);
    for (int h : hidden_sizes) dims.push_back(h);
    dims.push_back(n_classes);

    std::vector<Layer> layers(dims.size() - 1);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Eigen::Index fan_in = dims[i];
        const Eigen::Index fan_out = dims[i + 1];
        const bool output = i + 1 == layers.size();
        // He-uniform feeds the ReLU stack; Glorot-uniform suits the linear
        // softmax head.
        const double limit = output
                                 ? std::sqrt(6.0 / double(fan_in + fan_out))
                                 : std::sqrt(6.0 / double(fan_in));
        layers[i].weights.resize(fan_in, fan_out);
        for (Eigen::Index r = 0; r < fan_in; ++r) {
            for (Eigen::Index c = 0; c < fan_out; ++c) {
                layers[i].weights(r, c) = rng.uniform(-limit, limit);
            }
        }
        layers[i].bias = RowVector::Zero(fan_out);
    }
    return layers;
}

void check_network_config(const NetworkConfig& config) {
    if (config.hidden_sizes.empty()) {
        throw ValidationError("network needs at least one hidden layer");
    }
    for (int h : config.hidden_sizes) {
        if (h < 1) throw ValidationError("hidden layer sizes must be positive");
    }
    if (config.epochs < 1) throw ValidationError("epochs must be positive");
    if (config.batch_size < 1) throw ValidationError("batch size must be positive");
    if (!(config.learning_rate > 0.0)) {
        throw ValidationError("learning rate must be positive");
    }
    if (!(config.validation_fraction > 0.0) ||
        !(config.validation_fraction < 1.0)) {
        throw ValidationError("validation fraction must lie in (0, 1)");
    }
    if (config.patience < 0) throw ValidationError("patience must be non-negative");
}

Matrix one_hot(const std::vector<int>& ids, const std::vector<int>& rows,
               Eigen::Index n_classes) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), n_classes);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out(static_cast<Eigen::Index>(r), ids[static_cast<std::size_t>(rows[r])]) = 1.0;
    }
    return out;
}

}  // namespace

std::size_t ClassifierModel::parameter_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers) {
        count += static_cast<std::size_t>(layer.weights.size()) +
                 static_cast<std::size_t>(layer.bias.size());
    }
    return count;
}

Matrix forward(const ClassifierModel& model, const Matrix& inputs) {
    if (inputs.cols() != model.input_dim) {
        throw ValidationError("input has " + std::to_string(inputs.cols()) +
                              " columns but model expects " +
                              std::to_string(model.input_dim));
    }
    Matrix h = inputs;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        h = ((h * model.layers[i].weights).rowwise() + model.layers[i].bias).eval();
        if (i + 1 < model.layers.size()) h = h.cwiseMax(0.0);
        if (!h.allFinite()) {
            throw ValidationError("non-finite activation in layer " +
                                  std::to_string(i + 1));
        }
    }
    return softmax_rows(h);
}

double loss(const Matrix& predictions, const Matrix& targets) {
    if (predictions.rows() != targets.rows() ||
        predictions.cols() != targets.cols()) {
        throw ValidationError("prediction and target shapes differ");
    }
    if (predictions.rows() == 0) throw ValidationError("empty loss batch");
    const auto clamped =
        predictions.array().max(1e-12).min(1.0);
    return -(targets.array() * clamped.log()).sum() / double(predictions.rows());
}

SplitIndices stratified_holdout(const std::vector<int>& class_ids,
                                double held_fraction, Rng& rng) {
    const auto n = class_ids.size();
    if (n == 0) throw ValidationError("cannot split an empty dataset");
    if (!(held_fraction > 0.0) || !(held_fraction < 1.0)) {
        throw ValidationError("held fraction must lie in (0, 1)");
    }

    std::map<int, long> sizes;
    for (int id : class_ids) ++sizes[id];
    std::map<int, long> quota;
    for (const auto& [id, count] : sizes) {
        if (count < 2) {
            throw ValidationError("class " + std::to_string(id) +
                                  " has fewer than 2 members; cannot hold any out");
        }
        quota[id] = std::clamp<long>(std::lround(held_fraction * double(count)), 1,
                                     count - 1);
    }

    // One label-independent shuffle, then fill each class quota in shuffled
    // order: relabeling classes cannot change which cells are held out.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    SplitIndices split;
    std::map<int, long> held_so_far;
    for (int idx : order) {
        const int id = class_ids[static_cast<std::size_t>(idx)];
        if (held_so_far[id] < quota[id]) {
            ++held_so_far[id];
            split.held.push_back(idx);
        } else {
            split.keep.push_back(idx);
        }
    }
    std::sort(split.keep.begin(), split.keep.end());
    std::sort(split.held.begin(), split.held.end());
    return split;
}

ClassifierModel train(const Matrix& data, const std::vector<int>& class_ids,
                      const std::vector<std::string>& label_names,
                      const NetworkConfig& config, std::vector<EpochLoss>* history) {
    check_network_config(config);
    const Eigen::Index n = data.rows();
    if (static_cast<Eigen::Index>(class_ids.size()) != n) {
        throw ValidationError("class id count does not match row count");
    }
    const auto k = static_cast<Eigen::Index>(label_names.size());
    if (k < 2) throw ValidationError("training needs at least two classes");
    if (n < 2 * k) {
        throw ValidationError("need at least two cells per class (" +
                              std::to_string(n) + " cells for " +
                              std::to_string(k) + " classes)");
    }
    for (int id : class_ids) {
        if (id < 0 || id >= k) {
            throw ValidationError("class id " + std::to_string(id) +
                                  " outside the label dictionary");
        }
    }
    if (!data.allFinite()) {
        throw ValidationError("training data contains non-finite values");
    }

    Rng rng(config.seed);
    const SplitIndices split =
        stratified_holdout(class_ids, config.validation_fraction, rng);

    auto gather = [&data](const std::vector<int>& rows) {
        Matrix out(static_cast<Eigen::Index>(rows.size()), data.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.row(static_cast<Eigen::Index>(r)) = data.row(rows[r]);
        }
        return out;
    };
    const Matrix train_x = gather(split.keep);
    const Matrix val_x = gather(split.held);
    const Matrix train_y = one_hot(class_ids, split.keep, k);
    const Matrix val_y = one_hot(class_ids, split.held, k);
    const auto n_train = static_cast<Eigen::Index>(split.keep.size());

    ClassifierModel model;
    model.input_dim = data.cols();
    model.label_dict = label_names;
    model.layers = init_layers(data.cols(), config.hidden_sizes, k, rng);

    AdamState adam(model.layers);
    std::vector<Layer> best_layers = model.layers;
    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (Eigen::Index start = 0; start < n_train; start += config.batch_size) {
            const auto size = std::min<Eigen::Index>(config.batch_size,
                                                     n_train - start);
            Matrix batch_x(size, data.cols());
            Matrix batch_y(size, k);
            for (Eigen::Index r = 0; r < size; ++r) {
                const int src = order[static_cast<std::size_t>(start + r)];
                batch_x.row(r) = train_x.row(src);
                batch_y.row(r) = train_y.row(src);
            }
            const ForwardCache cache = forward_cached(model.layers, batch_x);
            epoch_loss += fused_loss(cache.logits, batch_y) * double(size);
            adam.update(model.layers, backward(model.layers, cache, batch_y),
                        config.learning_rate);
        }
        epoch_loss /= double(n_train);

        const double val_loss =
            fused_loss(forward_cached(model.layers, val_x).logits, val_y);
        if (!std::isfinite(epoch_loss) || !std::isfinite(val_loss)) {
            throw ValidationError("loss became non-finite at epoch " +
                                  std::to_string(epoch));
        }
        if (history) history->push_back({epoch, epoch_loss, val_loss});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_layers = model.layers;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs > 0 && bad_epochs >= config.patience) break;
        }
    }

    model.layers = std::move(best_layers);
    return model;
}

double gradient_check(const ClassifierModel& model, const Matrix& inputs,
                      const Matrix& targets) {
    if (model.parameter_count() > 10000) {
        throw ValidationError("gradient check limited to 1e4 parameters, got " +
                              std::to_string(model.parameter_count()));
    }
    std::vector<Layer> layers = model.layers;
    const std::vector<Layer> analytic =
        backward(layers, forward_cached(layers, inputs), targets);

    const double h = 1e-5;
    auto loss_at = [&]() {
        ClassifierModel probe;
        probe.layers = layers;
        probe.label_dict = model.label_dict;
        probe.input_dim = model.input_dim;
        return loss(forward(probe, inputs), targets);
    };

    double worst = 0.0;
    auto probe_param = [&](double& param, double analytic_grad) {
        const double saved = param;
        param = saved + h;
        const double up = loss_at();
        param = saved - h;
        const double down = loss_at();
        param = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max(std::abs(analytic_grad), std::abs(numeric));
        const double diff = std::abs(analytic_grad - numeric);
        worst = std::max(worst, denom < 1e-6 ? diff : diff / denom);
    };

    for (std::size_t i = 0; i < layers.size(); ++i) {
        for (Eigen::Index r = 0; r < layers[i].weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layers[i].weights.cols(); ++c) {
                probe_param(layers[i].weights(r, c), analytic[i].weights(r, c));
            }
        }
        for (Eigen::Index c = 0; c < layers[i].bias.size(); ++c) {
            probe_param(layers[i].bias(c), analytic[i].bias(c));
        }
    }
    return worst;
}

TrainedPipeline fit_pipeline(const LabeledDataset& dataset,
                             const PipelineConfig& config) {
    dataset.validate();

    TrainedPipeline pipeline;
    pipeline.recipe = fit_recipe(dataset, config.hvg_count);
    const Matrix scaled = apply_recipe(dataset.matrix, pipeline.recipe);

    const LabelEncoding encoding = encode_labels(dataset.labels);
    const PcaBasis pca = fit_pca(scaled, config.n_pcs);
    const MdaBasis mda = fit_mda(scaled, encoding.ids, config.mda_epsilon_scale);
    pipeline.basis = make_ensemble(pca, mda, pipeline.recipe.selected_genes);

    Matrix projected = project(scaled, pipeline.basis);
    if (config.align_batches && !dataset.batch.empty()) {
        projected = align_batches(projected, dataset.batch);
    }

    pipeline.model = train(projected, encoding.ids, encoding.names, config.network,
                           &pipeline.training_meta.losses);

    auto& meta = pipeline.training_meta.config;
    meta.emplace_back("hvg_count", std::to_string(config.hvg_count));
    meta.emplace_back("n_pcs", std::to_string(config.n_pcs));
    meta.emplace_back("mda_epsilon_scale", format_double(config.mda_epsilon_scale));
    std::string hidden;
    for (int size : config.network.hidden_sizes) {
        if (!hidden.empty()) hidden += ",";
        hidden += std::to_string(size);
    }
    meta.emplace_back("hidden_sizes", hidden);
    meta.emplace_back("seed", std::to_string(config.network.seed));
    meta.emplace_back("epochs", std::to_string(config.network.epochs));
    meta.emplace_back("batch_size", std::to_string(config.network.batch_size));
    meta.emplace_back("learning_rate", format_double(config.network.learning_rate));
    meta.emplace_back("validation_fraction",
                      format_double(config.network.validation_fraction));
    meta.emplace_back("patience", std::to_string(config.network.patience));
    meta.emplace_back("align_batches", config.align_batches ? "true" : "false");

    std::uint64_t fp = fnv1a(dataset.matrix.values.data(),
                             sizeof(double) *
                                 static_cast<std::size_t>(dataset.matrix.values.size()));
    for (const auto& label : dataset.labels) fp = fnv1a(label.data(), label.size(), fp);
    pipeline.training_meta.data_fingerprint = fp;
    return pipeline;
}

PredictionResult predict(const TrainedPipeline& pipeline,
                         const ExpressionMatrix& matrix,
                         const std::vector<std::string>& batch) {
    const Matrix scaled = apply_recipe(matrix, pipeline.recipe);
    Matrix projected = project(scaled, pipeline.basis);
    if (!batch.empty()) projected = align_batches(projected, batch);

    PredictionResult result;
    result.probabilities = forward(pipeline.model, projected);
    result.class_names = pipeline.model.label_dict;
    result.labels.reserve(static_cast<std::size_t>(projected.rows()));
    for (Eigen::Index r = 0; r < result.probabilities.rows(); ++r) {
        Eigen::Index argmax = 0;
        for (Eigen::Index c = 1; c < result.probabilities.cols(); ++c) {
            if (result.probabilities(r, c) > result.probabilities(r, argmax)) {
                argmax = c;  // strict ">" keeps ties on the lowest index
            }
        }
        result.labels.push_back(
            pipeline.model.label_dict[static_cast<std::size_t>(argmax)]);
    }
    return result;
}

}  // namespace scproj
