#include "scproj/evaluation.hpp"

#include "scproj/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace scproj {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

std::string json_string(const std::string& value) {
    std::string out = "\"";
    for (char c : value) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
    return out;
}

void emit_header(std::string& out, const std::vector<std::string>& header_lines) {
    for (const auto& line : header_lines) {
        out += line;
        out += '\n';
    }
}

LabeledDataset subset_cells(const LabeledDataset& dataset,
                            const std::vector<int>& rows) {
    LabeledDataset out;
    out.matrix.gene_names = dataset.matrix.gene_names;
    out.matrix.values.resize(static_cast<Eigen::Index>(rows.size()),
                             dataset.matrix.values.cols());
    out.matrix.cell_ids.reserve(rows.size());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = static_cast<std::size_t>(rows[r]);
        out.matrix.values.row(static_cast<Eigen::Index>(r)) =
            dataset.matrix.values.row(rows[r]);
        out.matrix.cell_ids.push_back(dataset.matrix.cell_ids[src]);
        out.labels.push_back(dataset.labels[src]);
        if (!dataset.batch.empty()) out.batch.push_back(dataset.batch[src]);
    }
    return out;
}

LabeledDataset restrict_to_labels(const LabeledDataset& dataset,
                                  const std::set<std::string>& keep) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
        if (keep.count(dataset.labels[i])) rows.push_back(static_cast<int>(i));
    }
    return subset_cells(dataset, rows);
}

std::vector<std::string> argmax_labels(const Matrix& probabilities,
                                       const std::vector<std::string>& class_names) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(probabilities.rows()));
    for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
        Eigen::Index argmax = 0;
        for (Eigen::Index c = 1; c < probabilities.cols(); ++c) {
            if (probabilities(r, c) > probabilities(r, argmax)) argmax = c;
        }
        labels.push_back(class_names[static_cast<std::size_t>(argmax)]);
    }
    return labels;
}

}  // namespace

EvalReport score(const std::vector<std::string>& truth,
                 const std::vector<std::string>& predicted) {
    if (truth.size() != predicted.size()) {
        throw ValidationError("truth has " + std::to_string(truth.size()) +
                              " labels but predictions have " +
                              std::to_string(predicted.size()));
    }
    if (truth.empty()) throw ValidationError("cannot score an empty label list");

    std::set<std::string> union_set(truth.begin(), truth.end());
    union_set.insert(predicted.begin(), predicted.end());

    EvalReport report;
    report.confusion_labels.assign(union_set.begin(), union_set.end());
    std::unordered_map<std::string, Eigen::Index> index;
    for (std::size_t i = 0; i < report.confusion_labels.size(); ++i) {
        index[report.confusion_labels[i]] = static_cast<Eigen::Index>(i);
    }

    const auto c = static_cast<Eigen::Index>(report.confusion_labels.size());
    report.confusion.setZero(c, c);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++report.confusion(index.at(truth[i]), index.at(predicted[i]));
    }
    report.n_cells = static_cast<std::int64_t>(truth.size());
    report.accuracy =
        double(report.confusion.diagonal().sum()) / double(report.n_cells);

    for (Eigen::Index i = 0; i < c; ++i) {
        const std::int64_t tp = report.confusion(i, i);
        const std::int64_t support = report.confusion.row(i).sum();
        if (support == 0) continue;  // predicted-only label: confusion only
        const std::int64_t predicted_count = report.confusion.col(i).sum();
        ClassMetrics metrics;
        metrics.label = report.confusion_labels[static_cast<std::size_t>(i)];
        metrics.support = support;
        metrics.precision =
            predicted_count > 0 ? double(tp) / double(predicted_count) : 0.0;
        metrics.recall = double(tp) / double(support);
        const double denom = metrics.precision + metrics.recall;
        metrics.f1 =
            denom > 0.0 ? 2.0 * metrics.precision * metrics.recall / denom : 0.0;
        report.per_class.push_back(std::move(metrics));
    }
    // Summing in value order (not label order) makes the macro average
    // bitwise invariant under class renaming.
    std::vector<double> f1s;
    f1s.reserve(report.per_class.size());
    for (const auto& metrics : report.per_class) f1s.push_back(metrics.f1);
    std::sort(f1s.begin(), f1s.end());
    report.macro_f1 = std::accumulate(f1s.begin(), f1s.end(), 0.0) /
                      double(report.per_class.size());
    return report;
}

EvalReport run_intra(const LabeledDataset& dataset, const PipelineConfig& config,
                     std::uint64_t split_seed, double test_fraction) {
    dataset.validate();
    {
        std::map<std::string, int> counts;
        for (const auto& label : dataset.labels) ++counts[label];
        for (const auto& [label, count] : counts) {
            if (count < 5) {
                throw ValidationError("class '" + label + "' has " +
                                      std::to_string(count) +
                                      " cells; the split protocol needs at least 5");
            }
        }
    }

    // Canonical cell-id order makes the split a function of content, not of
    // the row order the file happened to arrive in.
    std::vector<int> canonical(dataset.labels.size());
    std::iota(canonical.begin(), canonical.end(), 0);
    std::sort(canonical.begin(), canonical.end(), [&](int a, int b) {
        return dataset.matrix.cell_ids[static_cast<std::size_t>(a)] <
               dataset.matrix.cell_ids[static_cast<std::size_t>(b)];
    });

    const LabelEncoding encoding = encode_labels(dataset.labels);
    std::vector<int> canonical_ids;
    canonical_ids.reserve(canonical.size());
    for (int idx : canonical) {
        canonical_ids.push_back(encoding.ids[static_cast<std::size_t>(idx)]);
    }

    Rng rng(split_seed);
    const SplitIndices split = stratified_holdout(canonical_ids, test_fraction, rng);
    // Keep canonical (cell-id) order in the subsets too: sorting back to file
    // positions would leak the arrival order into minibatch composition.
    auto remap = [&canonical](const std::vector<int>& positions) {
        std::vector<int> rows;
        rows.reserve(positions.size());
        for (int p : positions) rows.push_back(canonical[static_cast<std::size_t>(p)]);
        return rows;
    };
    const LabeledDataset train_set = subset_cells(dataset, remap(split.keep));
    const LabeledDataset test_set = subset_cells(dataset, remap(split.held));

    const TrainedPipeline pipeline = fit_pipeline(train_set, config);

    const auto start = Clock::now();
    const PredictionResult predictions = predict(pipeline, test_set.matrix);
    const double elapsed = seconds_since(start);

    EvalReport report = score(test_set.labels, predictions.labels);
    report.predict_wall_time = elapsed;
    return report;
}

EvalReport run_inter(const std::vector<LabeledDataset>& reference,
                     const LabeledDataset& query, const PipelineConfig& config) {
    if (reference.empty()) {
        throw ValidationError("cross-dataset run needs at least one reference dataset");
    }
    for (const auto& dataset : reference) dataset.validate();
    query.validate(/*require_replicates=*/false);

    // Cell types every dataset (references and query) has.
    std::set<std::string> shared;
    {
        auto labels = reference[0].distinct_labels();
        shared.insert(labels.begin(), labels.end());
    }
    auto intersect_with = [&shared](const std::vector<std::string>& other) {
        std::set<std::string> present(other.begin(), other.end());
        for (auto it = shared.begin(); it != shared.end();) {
            it = present.count(*it) ? std::next(it) : shared.erase(it);
        }
    };
    for (std::size_t d = 1; d < reference.size(); ++d) {
        intersect_with(reference[d].distinct_labels());
    }
    intersect_with(query.distinct_labels());
    if (shared.size() < 2) {
        throw ValidationError("reference and query share only " +
                              std::to_string(shared.size()) +
                              " cell type(s); need at least 2");
    }

    std::vector<LabeledDataset> refs;
    refs.reserve(reference.size());
    for (const auto& dataset : reference) {
        refs.push_back(restrict_to_labels(dataset, shared));
    }
    const LabeledDataset query_shared = restrict_to_labels(query, shared);

    // Common reference gene space, then one concatenated training set with
    // per-dataset batch tags (cell ids prefixed so collisions across studies
    // cannot trip the uniqueness invariant).
    std::vector<ExpressionMatrix> ref_matrices;
    ref_matrices.reserve(refs.size());
    for (const auto& dataset : refs) ref_matrices.push_back(dataset.matrix);
    if (ref_matrices.size() > 1) ref_matrices = intersect_genes(ref_matrices);

    LabeledDataset train_set;
    train_set.matrix.gene_names = ref_matrices[0].gene_names;
    Eigen::Index total_cells = 0;
    for (const auto& matrix : ref_matrices) total_cells += matrix.n_cells();
    train_set.matrix.values.resize(total_cells,
                                   static_cast<Eigen::Index>(
                                       train_set.matrix.gene_names.size()));
    Eigen::Index row = 0;
    for (std::size_t d = 0; d < ref_matrices.size(); ++d) {
        const std::string tag = "ref" + std::to_string(d);
        for (Eigen::Index r = 0; r < ref_matrices[d].n_cells(); ++r) {
            train_set.matrix.values.row(row++) = ref_matrices[d].values.row(r);
            train_set.matrix.cell_ids.push_back(
                tag + ":" + ref_matrices[d].cell_ids[static_cast<std::size_t>(r)]);
            train_set.labels.push_back(refs[d].labels[static_cast<std::size_t>(r)]);
            train_set.batch.push_back(tag);
        }
    }
    train_set.validate();

    // Variable genes come from the concatenated reference, then drop to the
    // ones the query actually measured (keeping the ranking order).
    std::vector<std::string> ranked =
        select_hvg(train_set.matrix, config.hvg_count);
    {
        std::set<std::string> query_genes(query_shared.matrix.gene_names.begin(),
                                          query_shared.matrix.gene_names.end());
        std::erase_if(ranked, [&query_genes](const std::string& gene) {
            return !query_genes.count(gene);
        });
    }
    if (ranked.empty()) {
        throw ValidationError("no variable reference gene is present in the query");
    }

    TrainedPipeline pipeline;
    pipeline.recipe = fit_recipe_for_genes(train_set, ranked, config.hvg_count);
    const Matrix ref_scaled = apply_recipe(train_set.matrix, pipeline.recipe);
    const Matrix query_scaled = apply_recipe(query_shared.matrix, pipeline.recipe);

    const LabelEncoding encoding = encode_labels(train_set.labels);
    const PcaBasis pca = fit_pca(ref_scaled, config.n_pcs);
    const MdaBasis mda = fit_mda(ref_scaled, encoding.ids, config.mda_epsilon_scale);
    pipeline.basis = make_ensemble(pca, mda, pipeline.recipe.selected_genes);

    Matrix ref_projected = project(ref_scaled, pipeline.basis);
    Matrix query_projected = project(query_scaled, pipeline.basis);
    if (config.align_batches) {
        // Joint alignment with each dataset as one batch, query included.
        Matrix stacked(ref_projected.rows() + query_projected.rows(),
                       ref_projected.cols());
        stacked << ref_projected, query_projected;
        std::vector<std::string> batches = train_set.batch;
        batches.insert(batches.end(),
                       static_cast<std::size_t>(query_projected.rows()), "query");
        stacked = align_batches(stacked, batches);
        ref_projected = stacked.topRows(ref_projected.rows());
        query_projected = stacked.bottomRows(query_projected.rows());
    }

    pipeline.model = train(ref_projected, encoding.ids, encoding.names,
                           config.network, &pipeline.training_meta.losses);

    const auto start = Clock::now();
    const Matrix probabilities = forward(pipeline.model, query_projected);
    const std::vector<std::string> predicted =
        argmax_labels(probabilities, pipeline.model.label_dict);
    const double elapsed = seconds_since(start);

    EvalReport report = score(query_shared.labels, predicted);
    report.predict_wall_time = elapsed;
    return report;
}

EvalReport run_protocol(const ProtocolSpec& spec) {
    if (spec.mode == ProtocolSpec::Mode::intra) {
        return run_intra(spec.dataset, spec.config, spec.split_seed,
                         spec.test_fraction);
    }
    return run_inter(spec.reference, spec.query, spec.config);
}

SweepResult sweep_components(const ProtocolSpec& spec,
                             std::vector<Eigen::Index> pc_grid, int jobs) {
    if (pc_grid.empty()) throw ValidationError("component grid is empty");
    for (Eigen::Index v : pc_grid) {
        if (v < 0) throw ValidationError("component counts must be non-negative");
    }
    std::sort(pc_grid.begin(), pc_grid.end());
    pc_grid.erase(std::unique(pc_grid.begin(), pc_grid.end()), pc_grid.end());

    SweepResult result;
    result.rows.resize(pc_grid.size());

    auto run_point = [&spec, &pc_grid, &result](std::size_t i) {
        ProtocolSpec point = spec;
        point.config.n_pcs = pc_grid[i];
        const EvalReport report = run_protocol(point);
        result.rows[i] = {pc_grid[i], report.accuracy, report.macro_f1};
    };

    if (jobs <= 1 || pc_grid.size() == 1) {
        for (std::size_t i = 0; i < pc_grid.size(); ++i) run_point(i);
        return result;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pc_grid.size()) return;
            try {
                run_point(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const auto n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(jobs), pc_grid.size());
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
    if (failure) std::rethrow_exception(failure);
    return result;
}

double time_predict(const TrainedPipeline& pipeline, const ExpressionMatrix& matrix,
                    int repeats, std::vector<double>* samples) {
    if (repeats < 1) throw ValidationError("repeats must be positive");

    (void)predict(pipeline, matrix);  // warm-up excluded from the measurement

    std::vector<double> measured;
    measured.reserve(static_cast<std::size_t>(repeats));
    for (int i = 0; i < repeats; ++i) {
        const auto start = Clock::now();
        (void)predict(pipeline, matrix);
        measured.push_back(seconds_since(start));
    }
    if (samples) samples->insert(samples->end(), measured.begin(), measured.end());

    std::sort(measured.begin(), measured.end());
    const std::size_t mid = measured.size() / 2;
    return measured.size() % 2 == 1
               ? measured[mid]
               : 0.5 * (measured[mid - 1] + measured[mid]);
}

std::string report_text(const EvalReport& report,
                        const std::vector<std::string>& header_lines,
                        bool with_timing) {
    std::string out;
    emit_header(out, header_lines);
    out += "accuracy " + format_double(report.accuracy) + '\n';
    out += "macro_f1 " + format_double(report.macro_f1) + '\n';
    out += "n_cells " + std::to_string(report.n_cells) + '\n';
    if (with_timing) {
        out += "predict_seconds " + format_double(report.predict_wall_time) + '\n';
    }
    for (const auto& metrics : report.per_class) {
        out += "class " + metrics.label + " precision " +
               format_double(metrics.precision) + " recall " +
               format_double(metrics.recall) + " f1 " + format_double(metrics.f1) +
               " support " + std::to_string(metrics.support) + '\n';
    }
    return out;
}

std::string report_jsonl(const EvalReport& report,
                         const std::vector<std::string>& header_lines,
                         bool with_timing) {
    std::string out;
    emit_header(out, header_lines);
    out += "{\"record\":\"summary\",\"accuracy\":" + format_double(report.accuracy) +
           ",\"macro_f1\":" + format_double(report.macro_f1) +
           ",\"n_cells\":" + std::to_string(report.n_cells);
    if (with_timing) {
        out += ",\"predict_seconds\":" + format_double(report.predict_wall_time);
    }
    out += "}\n";
    for (const auto& metrics : report.per_class) {
        out += "{\"record\":\"class\",\"label\":" + json_string(metrics.label) +
               ",\"precision\":" + format_double(metrics.precision) +
               ",\"recall\":" + format_double(metrics.recall) +
               ",\"f1\":" + format_double(metrics.f1) +
               ",\"support\":" + std::to_string(metrics.support) + "}\n";
    }
    for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
        out += "{\"record\":\"confusion\",\"truth\":" +
               json_string(report.confusion_labels[static_cast<std::size_t>(r)]) +
               ",\"counts\":[";
        for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) {
            if (c > 0) out += ',';
            out += std::to_string(report.confusion(r, c));
        }
        out += "]}\n";
    }
    return out;
}

std::string per_class_csv(const EvalReport& report,
                          const std::vector<std::string>& header_lines) {
    std::string out;
    emit_header(out, header_lines);
    out += "label,precision,recall,f1,support\n";
    for (const auto& metrics : report.per_class) {
        out += csv_field(metrics.label) + ',' + format_double(metrics.precision) +
               ',' + format_double(metrics.recall) + ',' + format_double(metrics.f1) +
               ',' + std::to_string(metrics.support) + '\n';
    }
    return out;
}

std::string confusion_csv(const EvalReport& report,
                          const std::vector<std::string>& header_lines) {
    std::string out;
    emit_header(out, header_lines);
    out += "truth";
    for (const auto& label : report.confusion_labels) {
        out += ',' + csv_field(label);
    }
    out += '\n';
    for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
        out += csv_field(report.confusion_labels[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) {
            out += ',' + std::to_string(report.confusion(r, c));
        }
        out += '\n';
    }
    return out;
}

std::string sweep_csv(const SweepResult& result,
                      const std::vector<std::string>& header_lines) {
    std::string out;
    emit_header(out, header_lines);
    out += "n_pcs,accuracy,macro_f1\n";
    for (const auto& row : result.rows) {
        out += std::to_string(row.n_pcs) + ',' + format_double(row.accuracy) + ',' +
               format_double(row.macro_f1) + '\n';
    }
    return out;
}

}  // namespace scproj
