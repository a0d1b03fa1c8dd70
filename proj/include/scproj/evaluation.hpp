#ifndef SCPROJ_EVALUATION_HPP
#define SCPROJ_EVALUATION_HPP

#include "scproj/classifier.hpp"
#include "scproj/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace scproj {

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
};

/**
 * @brief Classification metrics plus the confusion matrix.
 *
 * `confusion` rows are truth, columns are predictions, both ordered by
 * `confusion_labels` (sorted union of truth and predicted labels). macro_f1
 * is the unweighted mean of per-class F1 over classes present in the truth.
 */
struct EvalReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    std::vector<std::string> confusion_labels;
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> confusion;
    double predict_wall_time = 0.0;  ///< seconds; not part of deterministic outputs
    std::int64_t n_cells = 0;
};

/** Zero-denominator precision/recall/F1 follow the 0 convention. */
EvalReport score(const std::vector<std::string>& truth,
                 const std::vector<std::string>& predicted);

/**
 * Within-dataset protocol: stratified train/test split (default 80/20) keyed
 * on the canonical cell-id order so the report is independent of file row
 * order, then fit on the training side and score the held-out side.
 * Every class needs at least 5 cells.
 */
EvalReport run_intra(const LabeledDataset& dataset, const PipelineConfig& config,
                     std::uint64_t split_seed, double test_fraction = 0.2);

/**
 * Cross-dataset protocol: restrict every reference dataset and the query to
 * their shared cell types, select variable genes on the concatenated
 * reference, intersect with the query's genes, fit on the full reference,
 * optionally align each dataset as one batch in projected space, and score
 * the query.
 */
EvalReport run_inter(const std::vector<LabeledDataset>& reference,
                     const LabeledDataset& query, const PipelineConfig& config);

/** Which experiment a sweep (or a single run) should execute. */
struct ProtocolSpec {
    enum class Mode { intra, inter };
    Mode mode = Mode::intra;
    LabeledDataset dataset;                 ///< intra input
    std::vector<LabeledDataset> reference;  ///< inter inputs
    LabeledDataset query;
    PipelineConfig config;
    std::uint64_t split_seed = 0;
    double test_fraction = 0.2;
};

EvalReport run_protocol(const ProtocolSpec& spec);

struct SweepRow {
    Eigen::Index n_pcs = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

/** Rows sorted ascending by n_pcs, one full pipeline run per grid value. */
struct SweepResult {
    std::vector<SweepRow> rows;
};

/**
 * Reruns the protocol once per grid value with only the principal-component
 * count changing; 0 means discriminant-only. Grid values are deduplicated
 * and sorted. `jobs` > 1 runs grid points concurrently (each is
 * independent and deterministic).
 */
SweepResult sweep_components(const ProtocolSpec& spec, std::vector<Eigen::Index> pc_grid,
                             int jobs = 1);

/**
 * Median wall-clock seconds of predict() over `repeats` runs after one
 * warm-up, covering recipe application through argmax. Raw samples are
 * appended to `samples` when provided.
 */
double time_predict(const TrainedPipeline& pipeline, const ExpressionMatrix& matrix,
                    int repeats, std::vector<double>* samples = nullptr);

// Report serialization. `header_lines` are emitted verbatim as leading
// comment lines (the CLI passes its effective-config echo). Wall time is
// excluded unless `with_timing` is set so default outputs stay reproducible.
std::string report_text(const EvalReport& report,
                        const std::vector<std::string>& header_lines = {},
                        bool with_timing = false);
std::string report_jsonl(const EvalReport& report,
                         const std::vector<std::string>& header_lines = {},
                         bool with_timing = false);
std::string per_class_csv(const EvalReport& report,
                          const std::vector<std::string>& header_lines = {});
std::string confusion_csv(const EvalReport& report,
                          const std::vector<std::string>& header_lines = {});
std::string sweep_csv(const SweepResult& result,
                      const std::vector<std::string>& header_lines = {});

}  // namespace scproj

#endif
