#ifndef SCPROJ_CLASSIFIER_HPP
#define SCPROJ_CLASSIFIER_HPP

#include "scproj/preprocess.hpp"
#include "scproj/projection.hpp"
#include "scproj/rng.hpp"
#include "scproj/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace scproj {

/**
 * @brief Training settings for the feed-forward softmax network.
 *
 * Hidden layers use ReLU. Everything random (weight init, epoch shuffles,
 * the validation split) derives from `seed`, so identical inputs and config
 * give bitwise-identical models.
 */
struct NetworkConfig {
    std::vector<int> hidden_sizes = {100, 55, 30, 55, 100};
    std::uint64_t seed = 0;
    int epochs = 100;
    int batch_size = 128;
    double learning_rate = 1e-3;
    double validation_fraction = 0.2;
    int patience = 10;  ///< epochs without validation improvement before stopping
};

struct Layer {
    Matrix weights;  ///< in x out
    RowVector bias;  ///< length out
};

/** Hidden layers plus the softmax output layer, with the label dictionary. */
struct ClassifierModel {
    std::vector<Layer> layers;
    std::vector<std::string> label_dict;  ///< output index -> label
    Eigen::Index input_dim = 0;

    Eigen::Index n_classes() const { return static_cast<Eigen::Index>(label_dict.size()); }
    std::size_t parameter_count() const;
};

struct EpochLoss {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

/** Provenance carried inside a saved pipeline. */
struct TrainingMeta {
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<EpochLoss> losses;
    std::uint64_t data_fingerprint = 0;
};

/** The deployable bundle: recipe + projection basis + network. */
struct TrainedPipeline {
    PreprocessRecipe recipe;
    ProjectionBasis basis;
    ClassifierModel model;
    TrainingMeta training_meta;
};

/**
 * Runs the forward pass and returns one softmax probability row per input
 * row (max-subtracted for stability). Throws ValidationError on a dimension
 * mismatch and names the layer if an activation goes non-finite.
 */
Matrix forward(const ClassifierModel& model, const Matrix& inputs);

/**
 * Mean cross-entropy between probability rows and one-hot targets, with
 * predictions clamped to [1e-12, 1].
 */
double loss(const Matrix& predictions, const Matrix& targets);

/**
 * Trains with mini-batch Adam on the cross-entropy objective.
 *
 * A stratified `validation_fraction` split is held out; the parameters with
 * the best validation loss are kept, and training stops early after
 * `patience` epochs without improvement. Per-epoch losses are appended to
 * `history` when provided.
 */
ClassifierModel train(const Matrix& data, const std::vector<int>& class_ids,
                      const std::vector<std::string>& label_names,
                      const NetworkConfig& config,
                      std::vector<EpochLoss>* history = nullptr);

/**
 * Compares analytic gradients against central finite differences (h = 1e-5)
 * on every parameter and returns the worst relative error. Denominators
 * below 1e-6 fall back to absolute differences so dead units do not amplify
 * finite-difference noise. The model must stay small (<= 1e4 parameters).
 */
double gradient_check(const ClassifierModel& model, const Matrix& inputs,
                      const Matrix& targets);

/** Settings for the whole train-time pipeline (recipe + bases + network). */
struct PipelineConfig {
    std::size_t hvg_count = 2000;
    Eigen::Index n_pcs = 100;
    double mda_epsilon_scale = 1e-6;
    NetworkConfig network;
    bool align_batches = true;  ///< used by the cross-dataset protocol
};

/** Fits recipe, bases and network on a labeled dataset. */
TrainedPipeline fit_pipeline(const LabeledDataset& dataset, const PipelineConfig& config);

struct PredictionResult {
    std::vector<std::string> labels;       ///< argmax per cell, ties to lowest class index
    Matrix probabilities;                  ///< cells x classes
    std::vector<std::string> class_names;  ///< column order of `probabilities`
};

/**
 * Transforms a query matrix with the pipeline's recipe and basis, optionally
 * aligns the given per-cell batches in projected space, and classifies every
 * cell.
 */
PredictionResult predict(const TrainedPipeline& pipeline, const ExpressionMatrix& matrix,
                         const std::vector<std::string>& batch = {});

/**
 * Writes the pipeline as a single self-describing binary file: magic,
 * format version, FNV-1a content checksum, then all matrices as
 * little-endian doubles with explicit dimensions.
 */
void save_pipeline(const TrainedPipeline& pipeline, const std::string& path);

/** Throws VersionError / ChecksumError / FormatError on a bad file. */
TrainedPipeline load_pipeline(const std::string& path);

/** Indices held out by a stratified split; both lists sorted ascending. */
struct SplitIndices {
    std::vector<int> keep;
    std::vector<int> held;
};

/**
 * Holds out `held_fraction` of every class (rounded, clamped so both sides
 * keep at least one member). Deterministic given the Rng state; classes are
 * visited in ascending id order.
 */
SplitIndices stratified_holdout(const std::vector<int>& class_ids, double held_fraction,
                                Rng& rng);

}  // namespace scproj

#endif
