#include "cli.hpp"

#include "scproj/evaluation.hpp"
#include "scproj/ingest.hpp"
#include "scproj/synthdata.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scproj {

namespace {

/// Bad invocations exit with code 2; runtime failures with 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// small helpers

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::string single_line(std::string text) {
    std::replace(text.begin(), text.end(), '\n', ';');
    return text;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto pos = csv.find(',', start);
        if (pos == std::string::npos) {
            items.push_back(trim(csv.substr(start)));
            break;
        }
        items.push_back(trim(csv.substr(start, pos - start)));
        start = pos + 1;
    }
    return items;
}

long long parse_int(const std::string& token, const std::string& what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw UsageError("cannot parse '" + token + "' as an integer for " + what);
    }
}

double parse_dbl(const std::string& token, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw UsageError("cannot parse '" + token + "' as a number for " + what);
    }
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& what) {
    std::vector<int> out;
    for (const auto& token : split_list(csv)) {
        if (token.empty()) throw UsageError("empty entry in " + what + " list");
        out.push_back(static_cast<int>(parse_int(token, what)));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& csv,
                                      const std::string& what) {
    std::vector<double> out;
    for (const auto& token : split_list(csv)) {
        if (token.empty()) throw UsageError("empty entry in " + what + " list");
        out.push_back(parse_dbl(token, what));
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::string sibling(const std::string& path, const char* name) {
    return (std::filesystem::path(path).parent_path() / name).string();
}

// ---------------------------------------------------------------------------
// config file translation: key=value lines become --key=value flags injected
// right after the subcommand; flags given on the command line win.

std::vector<std::string> with_config_applied(std::vector<std::string> args) {
    std::string config_path;
    bool found = false;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file path");
            if (found) throw UsageError("--config given more than once");
            config_path = args[++i];
            found = true;
        } else if (args[i].rfind("--config=", 0) == 0) {
            if (found) throw UsageError("--config given more than once");
            config_path = args[i].substr(9);
            found = true;
        } else {
            rest.push_back(args[i]);
        }
    }
    if (!found) return rest;
    if (rest.empty() || rest[0].empty() || rest[0][0] == '-') {
        throw UsageError("--config requires a subcommand");
    }

    auto overridden = [&rest](const std::string& key) {
        const std::string flag = "--" + key;
        for (std::size_t i = 1; i < rest.size(); ++i) {
            if (rest[i] == flag || rest[i].rfind(flag + "=", 0) == 0) return true;
        }
        return false;
    };

    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot open config file '" + config_path + "'");
    std::vector<std::string> injected;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw UsageError(config_path + ":" + std::to_string(line_no) +
                             ": expected key=value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key == "config") throw UsageError("config files cannot nest");
        if (key == "command") continue;  // provenance line from an echoed header
        if (overridden(key)) continue;
        injected.push_back("--" + key + "=" + value);
    }

    std::vector<std::string> out;
    out.push_back(rest[0]);
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), rest.begin() + 1, rest.end());
    return out;
}

// ---------------------------------------------------------------------------
// effective-config echo, emitted as comment lines into every output file

class Echo {
public:
    void add(const std::string& key, const std::string& value) {
        entries_.emplace_back(key, value);
    }
    void add(const std::string& key, bool value) {
        entries_.emplace_back(key, value ? "true" : "false");
    }
    template <typename T>
    void add_num(const std::string& key, T value) {
        entries_.emplace_back(key, std::to_string(value));
    }
    void add_dbl(const std::string& key, double value) {
        entries_.emplace_back(key, format_double(value));
    }

    std::vector<std::string> lines(const std::string& command) const {
        std::vector<std::string> out;
        out.push_back("# command=" + command);
        for (const auto& [key, value] : entries_) {
            out.push_back("# " + key + "=" + value);
        }
        return out;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// shared flag groups

struct IoFlags {
    std::string format = "dense";
    std::string orientation = "genes";
    std::string delimiter = "comma";
    std::string genes_file;
    std::string barcodes_file;
};

void add_io_flags(CLI::App* cmd, IoFlags& io) {
    cmd->add_option("--format", io.format, "matrix file format")
        ->check(CLI::IsMember({"dense", "mtx"}))
        ->capture_default_str();
    cmd->add_option("--orientation", io.orientation,
                    "row axis of dense files (most expression dumps are genes x cells)")
        ->check(CLI::IsMember({"cells", "genes"}))
        ->capture_default_str();
    cmd->add_option("--delimiter", io.delimiter, "dense file delimiter")
        ->check(CLI::IsMember({"comma", "tab"}))
        ->capture_default_str();
    cmd->add_option("--genes-file", io.genes_file,
                    "mtx gene sidecar (default: genes.tsv next to the matrix)");
    cmd->add_option("--barcodes-file", io.barcodes_file,
                    "mtx barcode sidecar (default: barcodes.tsv next to the matrix)");
}

Orientation to_orientation(const std::string& s) {
    return s == "cells" ? Orientation::cells_as_rows : Orientation::genes_as_rows;
}

Delimiter to_delimiter(const std::string& s) {
    return s == "tab" ? Delimiter::tab : Delimiter::comma;
}

ExpressionMatrix load_matrix(const std::string& path, const IoFlags& io) {
    if (io.format == "mtx") {
        const std::string genes =
            io.genes_file.empty() ? sibling(path, "genes.tsv") : io.genes_file;
        const std::string barcodes = io.barcodes_file.empty()
                                         ? sibling(path, "barcodes.tsv")
                                         : io.barcodes_file;
        return read_sparse_mtx(path, genes, barcodes);
    }
    return read_dense(path, to_orientation(io.orientation),
                      to_delimiter(io.delimiter));
}

void echo_io(Echo& echo, const IoFlags& io) {
    echo.add("format", io.format);
    echo.add("orientation", io.orientation);
    echo.add("delimiter", io.delimiter);
    if (!io.genes_file.empty()) echo.add("genes-file", io.genes_file);
    if (!io.barcodes_file.empty()) echo.add("barcodes-file", io.barcodes_file);
}

struct NetFlags {
    std::string hidden = "100,55,30,55,100";
    int epochs = 100;
    int batch_size = 128;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double val_frac = 0.2;
    int patience = 10;
};

void add_net_flags(CLI::App* cmd, NetFlags& net) {
    cmd->add_option("--hidden", net.hidden, "hidden layer sizes, comma separated")
        ->capture_default_str();
    cmd->add_option("--epochs", net.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch-size", net.batch_size, "mini-batch size")
        ->capture_default_str();
    cmd->add_option("--lr", net.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--seed", net.seed, "seed for split, init, and shuffles")
        ->capture_default_str();
    cmd->add_option("--val-frac", net.val_frac, "validation holdout fraction")
        ->capture_default_str();
    cmd->add_option("--patience", net.patience,
                    "epochs without validation improvement before stopping")
        ->capture_default_str();
}

NetworkConfig to_network(const NetFlags& net) {
    NetworkConfig config;
    config.hidden_sizes = parse_int_list(net.hidden, "--hidden");
    config.epochs = net.epochs;
    config.batch_size = net.batch_size;
    config.learning_rate = net.lr;
    config.seed = net.seed;
    config.validation_fraction = net.val_frac;
    config.patience = net.patience;
    return config;
}

void echo_net(Echo& echo, const NetFlags& net) {
    echo.add("hidden", net.hidden);
    echo.add_num("epochs", net.epochs);
    echo.add_num("batch-size", net.batch_size);
    echo.add_dbl("lr", net.lr);
    echo.add_num("seed", net.seed);
    echo.add_dbl("val-frac", net.val_frac);
    echo.add_num("patience", net.patience);
}

struct PipeFlags {
    std::uint64_t hvg = 2000;
    long long pcs = 100;
    double epsilon_scale = 1e-6;
    std::string align = "on";
};

void add_pipe_flags(CLI::App* cmd, PipeFlags& pipe, bool with_pcs) {
    cmd->add_option("--hvg", pipe.hvg, "number of variable genes to keep")
        ->capture_default_str();
    if (with_pcs) {
        cmd->add_option("--pcs", pipe.pcs,
                        "principal components in the ensemble (0 = discriminant only)")
            ->capture_default_str();
    }
    cmd->add_option("--epsilon-scale", pipe.epsilon_scale,
                    "within-class scatter regularization scale")
        ->capture_default_str();
    cmd->add_option("--align-batches", pipe.align,
                    "projected-space batch centering")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
}

PipelineConfig to_pipeline(const PipeFlags& pipe, const NetFlags& net) {
    PipelineConfig config;
    config.hvg_count = pipe.hvg;
    config.n_pcs = static_cast<Eigen::Index>(pipe.pcs);
    config.mda_epsilon_scale = pipe.epsilon_scale;
    config.align_batches = pipe.align == "on";
    config.network = to_network(net);
    return config;
}

void echo_pipe(Echo& echo, const PipeFlags& pipe, bool with_pcs) {
    echo.add_num("hvg", pipe.hvg);
    if (with_pcs) echo.add_num("pcs", pipe.pcs);
    echo.add_dbl("epsilon-scale", pipe.epsilon_scale);
    echo.add("align-batches", pipe.align);
}

LabeledDataset load_labeled(const std::string& matrix_path,
                            const std::string& labels_path, const IoFlags& io,
                            bool labels_header) {
    const ExpressionMatrix matrix = load_matrix(matrix_path, io);
    std::vector<std::string> warnings;
    LabeledDataset dataset = read_labels(labels_path, matrix, labels_header, &warnings);
    for (const auto& warning : warnings) {
        std::cerr << "warning: " << warning << "\n";
    }
    return dataset;
}

// ---------------------------------------------------------------------------
// protocol flags shared by evaluate and sweep

struct ProtocolFlags {
    std::string mode = "intra";
    std::vector<std::string> ref_matrix;
    std::vector<std::string> ref_labels;
    std::string query;
    std::string query_labels;
    bool labels_header = false;
    std::uint64_t split_seed = 0;
    double test_frac = 0.2;
    IoFlags io;
    PipeFlags pipe;
    NetFlags net;
};

void add_protocol_flags(CLI::App* cmd, ProtocolFlags& flags, bool with_pcs) {
    cmd->add_option("--mode", flags.mode, "intra (split one dataset) or inter "
                                          "(reference datasets vs a query)")
        ->check(CLI::IsMember({"intra", "inter"}))
        ->capture_default_str();
    cmd->add_option("--ref-matrix", flags.ref_matrix,
                    "reference matrix file (repeatable in inter mode)")
        ->required();
    cmd->add_option("--ref-labels", flags.ref_labels,
                    "reference label file, one per --ref-matrix")
        ->required();
    cmd->add_option("--query", flags.query, "query matrix file (inter mode)");
    cmd->add_option("--query-labels", flags.query_labels,
                    "query label file (inter mode)");
    cmd->add_flag("--labels-header", flags.labels_header,
                  "skip one header line in label files");
    cmd->add_option("--split-seed", flags.split_seed, "intra-mode split seed")
        ->capture_default_str();
    cmd->add_option("--test-frac", flags.test_frac, "intra-mode held-out fraction")
        ->capture_default_str();
    add_io_flags(cmd, flags.io);
    add_pipe_flags(cmd, flags.pipe, with_pcs);
    add_net_flags(cmd, flags.net);
}

ProtocolSpec build_protocol(const ProtocolFlags& flags) {
    ProtocolSpec spec;
    spec.config = to_pipeline(flags.pipe, flags.net);
    spec.split_seed = flags.split_seed;
    spec.test_fraction = flags.test_frac;
    if (flags.ref_matrix.size() != flags.ref_labels.size()) {
        throw UsageError("--ref-matrix and --ref-labels counts differ (" +
                         std::to_string(flags.ref_matrix.size()) + " vs " +
                         std::to_string(flags.ref_labels.size()) + ")");
    }
    if (flags.mode == "intra") {
        spec.mode = ProtocolSpec::Mode::intra;
        if (flags.ref_matrix.size() != 1) {
            throw UsageError("intra mode takes exactly one --ref-matrix");
        }
        if (!flags.query.empty()) {
            throw UsageError("--query is only meaningful in inter mode");
        }
        spec.dataset = load_labeled(flags.ref_matrix[0], flags.ref_labels[0],
                                    flags.io, flags.labels_header);
    } else {
        spec.mode = ProtocolSpec::Mode::inter;
        if (flags.query.empty() || flags.query_labels.empty()) {
            throw UsageError("inter mode needs --query and --query-labels");
        }
        for (std::size_t i = 0; i < flags.ref_matrix.size(); ++i) {
            spec.reference.push_back(load_labeled(flags.ref_matrix[i],
                                                  flags.ref_labels[i], flags.io,
                                                  flags.labels_header));
        }
        const ExpressionMatrix matrix = load_matrix(flags.query, flags.io);
        std::vector<std::string> warnings;
        spec.query = read_labels(flags.query_labels, matrix, flags.labels_header,
                                 &warnings);
        for (const auto& warning : warnings) {
            std::cerr << "warning: " << warning << "\n";
        }
    }
    return spec;
}

void echo_protocol(Echo& echo, const ProtocolFlags& flags, bool with_pcs) {
    echo.add("mode", flags.mode);
    for (const auto& path : flags.ref_matrix) echo.add("ref-matrix", path);
    for (const auto& path : flags.ref_labels) echo.add("ref-labels", path);
    if (!flags.query.empty()) echo.add("query", flags.query);
    if (!flags.query_labels.empty()) echo.add("query-labels", flags.query_labels);
    echo.add("labels-header", flags.labels_header);
    echo_io(echo, flags.io);
    echo.add_num("split-seed", flags.split_seed);
    echo.add_dbl("test-frac", flags.test_frac);
    echo_pipe(echo, flags.pipe, with_pcs);
    echo_net(echo, flags.net);
}

// ---------------------------------------------------------------------------
// commands

void cmd_train(const std::string& ref_matrix, const std::string& ref_labels,
               const std::string& out, const IoFlags& io, bool labels_header,
               const PipeFlags& pipe, const NetFlags& net,
               const std::string& loss_curve, const std::string& spectra) {
    const LabeledDataset dataset =
        load_labeled(ref_matrix, ref_labels, io, labels_header);
    const PipelineConfig config = to_pipeline(pipe, net);
    const TrainedPipeline pipeline = fit_pipeline(dataset, config);
    save_pipeline(pipeline, out);

    Echo echo;
    echo.add("ref-matrix", ref_matrix);
    echo.add("ref-labels", ref_labels);
    echo.add("labels-header", labels_header);
    echo_io(echo, io);
    echo_pipe(echo, pipe, true);
    echo_net(echo, net);
    echo.add("out", out);
    const std::string loss_path = loss_curve.empty() ? out + ".loss.csv" : loss_curve;
    echo.add("loss-curve", loss_path);
    if (!spectra.empty()) echo.add("spectra", spectra);

    std::string csv;
    for (const auto& line : echo.lines("train")) {
        csv += line;
        csv += '\n';
    }
    csv += "epoch,train_loss,val_loss\n";
    for (const auto& row : pipeline.training_meta.losses) {
        csv += std::to_string(row.epoch) + ',' + format_double(row.train_loss) + ',' +
               format_double(row.val_loss) + '\n';
    }
    write_file(loss_path, csv);

    if (!spectra.empty()) {
        std::string spectra_csv;
        for (const auto& line : echo.lines("train")) {
            spectra_csv += line;
            spectra_csv += '\n';
        }
        spectra_csv += "block,component_index,eigenvalue,cumulative_fraction\n";
        for (const auto& row : eigenvalue_spectra(pipeline.basis)) {
            spectra_csv += row.block + ',' + std::to_string(row.component_index) +
                           ',' + format_double(row.eigenvalue) + ',' +
                           format_double(row.cumulative_fraction) + '\n';
        }
        write_file(spectra, spectra_csv);
    }
}

void cmd_predict(const std::string& model, const std::string& query,
                 const std::string& out, const IoFlags& io,
                 const std::string& batch_file, bool probs) {
    const TrainedPipeline pipeline = load_pipeline(model);
    const ExpressionMatrix matrix = load_matrix(query, io);

    std::vector<std::string> batch;
    if (!batch_file.empty()) {
        std::vector<std::string> warnings;
        batch = read_labels(batch_file, matrix, false, &warnings).labels;
        for (const auto& warning : warnings) {
            std::cerr << "warning: " << warning << "\n";
        }
    }
    const PredictionResult result = predict(pipeline, matrix, batch);

    Echo echo;
    echo.add("model", model);
    echo.add("query", query);
    echo_io(echo, io);
    if (!batch_file.empty()) echo.add("batch-file", batch_file);
    echo.add("probs", probs);
    echo.add("out", out);

    std::string csv;
    for (const auto& line : echo.lines("predict")) {
        csv += line;
        csv += '\n';
    }
    csv += "cell_id,predicted_label,max_probability";
    if (probs) {
        for (const auto& name : result.class_names) csv += ',' + name;
    }
    csv += '\n';
    for (Eigen::Index r = 0; r < result.probabilities.rows(); ++r) {
        csv += matrix.cell_ids[static_cast<std::size_t>(r)] + ',' +
               result.labels[static_cast<std::size_t>(r)] + ',' +
               format_double(result.probabilities.row(r).maxCoeff());
        if (probs) {
            for (Eigen::Index c = 0; c < result.probabilities.cols(); ++c) {
                csv += ',' + format_double(result.probabilities(r, c));
            }
        }
        csv += '\n';
    }
    write_file(out, csv);
}

void cmd_evaluate(const ProtocolFlags& flags, const std::string& out,
                  bool with_timing) {
    const ProtocolSpec spec = build_protocol(flags);
    const EvalReport report = run_protocol(spec);

    Echo echo;
    echo_protocol(echo, flags, true);
    echo.add("with-timing", with_timing);
    echo.add("out", out);
    const auto header = echo.lines("evaluate");

    write_file(out + ".txt", report_text(report, header, with_timing));
    write_file(out + ".jsonl", report_jsonl(report, header, with_timing));
    write_file(out + ".per_class.csv", per_class_csv(report, header));
    write_file(out + ".confusion.csv", confusion_csv(report, header));
}

void cmd_sweep(const ProtocolFlags& flags, const std::string& grid_csv, int jobs,
               const std::string& out) {
    const ProtocolSpec spec = build_protocol(flags);
    std::vector<Eigen::Index> grid;
    for (int v : parse_int_list(grid_csv, "--pcs")) {
        grid.push_back(static_cast<Eigen::Index>(v));
    }
    const SweepResult result = sweep_components(spec, grid, jobs);

    Echo echo;
    echo_protocol(echo, flags, false);
    echo.add("pcs", grid_csv);
    echo.add_num("jobs", jobs);
    echo.add("out", out);
    write_file(out, sweep_csv(result, echo.lines("sweep")));
}

void cmd_bench(const std::string& model, const std::string& query,
               const IoFlags& io, int repeats, const std::string& out) {
    const TrainedPipeline pipeline = load_pipeline(model);
    const ExpressionMatrix matrix = load_matrix(query, io);

    std::vector<double> samples;
    const double median = time_predict(pipeline, matrix, repeats, &samples);

    Echo echo;
    echo.add("model", model);
    echo.add("query", query);
    echo_io(echo, io);
    echo.add_num("repeats", repeats);
    echo.add("out", out);

    std::string csv;
    for (const auto& line : echo.lines("bench")) {
        csv += line;
        csv += '\n';
    }
    csv += "sample,seconds\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        csv += std::to_string(i + 1) + ',' + format_double(samples[i]) + '\n';
    }
    csv += "median," + format_double(median) + '\n';
    write_file(out, csv);
}

void cmd_synth(const std::string& out, const std::string& classes, int genes,
               double separation, int informative, double sparsity,
               const std::string& batch_offsets, std::uint64_t seed,
               const std::string& orientation, const std::string& delimiter) {
    SynthSpec spec;
    spec.n_cells_per_class = parse_int_list(classes, "--classes");
    spec.n_genes = genes;
    spec.class_separation = separation;
    spec.informative_genes = informative;
    spec.sparsity = sparsity;
    if (!batch_offsets.empty()) {
        spec.batch_offsets = parse_double_list(batch_offsets, "--batch-offsets");
    }
    spec.seed = seed;
    const LabeledDataset dataset = generate(spec);

    write_dense(dataset.matrix, out + ".matrix.csv", to_orientation(orientation),
                to_delimiter(delimiter));
    write_labels(dataset, out + ".labels.csv", to_delimiter(delimiter));

    Echo echo;
    echo.add("classes", classes);
    echo.add_num("genes", genes);
    echo.add_dbl("separation", separation);
    echo.add_num("informative", informative);
    echo.add_dbl("sparsity", sparsity);
    if (!batch_offsets.empty()) echo.add("batch-offsets", batch_offsets);
    echo.add_num("seed", seed);
    echo.add("orientation", orientation);
    echo.add("delimiter", delimiter);
    echo.add("out", out);

    std::string manifest;
    for (const auto& line : echo.lines("synth")) {
        manifest += line;
        manifest += '\n';
    }
    manifest += "file,role\n";
    manifest += out + ".matrix.csv,matrix\n";
    manifest += out + ".labels.csv,labels\n";
    write_file(out + ".manifest.csv", manifest);
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"ensemble projection cell-type classifier"};
    app.require_subcommand(1);

    // train ------------------------------------------------------------
    std::string t_matrix, t_labels, t_out, t_loss, t_spectra;
    bool t_labels_header = false;
    IoFlags t_io;
    PipeFlags t_pipe;
    NetFlags t_net;
    auto* train_cmd =
        app.add_subcommand("train", "fit a projection + classifier pipeline");
    train_cmd->add_option("--ref-matrix", t_matrix, "training matrix file")
        ->required();
    train_cmd->add_option("--ref-labels", t_labels, "training label file")
        ->required();
    train_cmd->add_option("--out", t_out, "pipeline output file")->required();
    train_cmd->add_flag("--labels-header", t_labels_header,
                        "skip one header line in the label file");
    add_io_flags(train_cmd, t_io);
    add_pipe_flags(train_cmd, t_pipe, true);
    add_net_flags(train_cmd, t_net);
    train_cmd->add_option("--loss-curve", t_loss,
                          "per-epoch loss CSV (default: <out>.loss.csv)");
    train_cmd->add_option("--spectra", t_spectra,
                          "write the basis eigenvalue spectra to this CSV");
    train_cmd->callback([&]() {
        cmd_train(t_matrix, t_labels, t_out, t_io, t_labels_header, t_pipe, t_net,
                  t_loss, t_spectra);
    });

    // predict ----------------------------------------------------------
    std::string p_model, p_query, p_out, p_batch;
    bool p_probs = false;
    IoFlags p_io;
    auto* predict_cmd =
        app.add_subcommand("predict", "classify cells with a trained pipeline");
    predict_cmd->add_option("--model", p_model, "trained pipeline file")->required();
    predict_cmd->add_option("--query", p_query, "query matrix file")->required();
    predict_cmd->add_option("--out", p_out, "predictions CSV")->required();
    add_io_flags(predict_cmd, p_io);
    predict_cmd->add_option("--batch-file", p_batch,
                            "per-cell batch ids (cell_id,batch) to align before "
                            "classification");
    predict_cmd->add_flag("--probs", p_probs,
                          "emit one probability column per class");
    predict_cmd->callback(
        [&]() { cmd_predict(p_model, p_query, p_out, p_io, p_batch, p_probs); });

    // evaluate ----------------------------------------------------------
    ProtocolFlags e_flags;
    std::string e_out;
    bool e_timing = false;
    auto* eval_cmd = app.add_subcommand(
        "evaluate", "run the within- or cross-dataset protocol and report metrics");
    add_protocol_flags(eval_cmd, e_flags, true);
    eval_cmd->add_option("--out", e_out,
                         "output prefix (.txt, .jsonl, .per_class.csv, "
                         ".confusion.csv)")
        ->required();
    eval_cmd->add_flag("--with-timing", e_timing,
                       "include wall-clock timing in reports (breaks "
                       "byte-for-byte reproducibility)");
    eval_cmd->callback([&]() { cmd_evaluate(e_flags, e_out, e_timing); });

    // sweep --------------------------------------------------------------
    ProtocolFlags s_flags;
    std::string s_grid = "0,10,20,30,40,50,60,70,80,90,100";
    std::string s_out;
    int s_jobs = 1;
    auto* sweep_cmd = app.add_subcommand(
        "sweep", "rerun the protocol across a principal-component grid");
    add_protocol_flags(sweep_cmd, s_flags, false);
    sweep_cmd->add_option("--pcs", s_grid, "comma-separated component grid")
        ->capture_default_str();
    sweep_cmd->add_option("--jobs", s_jobs, "parallel grid points")
        ->capture_default_str();
    sweep_cmd->add_option("--out", s_out, "sweep CSV")->required();
    sweep_cmd->callback([&]() { cmd_sweep(s_flags, s_grid, s_jobs, s_out); });

    // bench --------------------------------------------------------------
    std::string b_model, b_query, b_out;
    IoFlags b_io;
    int b_repeats = 5;
    auto* bench_cmd =
        app.add_subcommand("bench", "measure prediction wall time on a query");
    bench_cmd->add_option("--model", b_model, "trained pipeline file")->required();
    bench_cmd->add_option("--query", b_query, "query matrix file")->required();
    add_io_flags(bench_cmd, b_io);
    bench_cmd->add_option("--repeats", b_repeats, "timed repeats after one warm-up")
        ->capture_default_str();
    bench_cmd->add_option("--out", b_out, "timing CSV")->required();
    bench_cmd->callback(
        [&]() { cmd_bench(b_model, b_query, b_io, b_repeats, b_out); });

    // synth --------------------------------------------------------------
    std::string y_out, y_classes = "100,100", y_offsets;
    std::string y_orientation = "genes", y_delimiter = "comma";
    int y_genes = 200, y_informative = 20;
    double y_separation = 5.0, y_sparsity = 0.0;
    std::uint64_t y_seed = 0;
    auto* synth_cmd = app.add_subcommand(
        "synth", "generate a labeled synthetic dataset as dense CSV");
    synth_cmd->add_option("--out", y_out, "output prefix")->required();
    synth_cmd->add_option("--classes", y_classes, "cells per class, comma separated")
        ->capture_default_str();
    synth_cmd->add_option("--genes", y_genes, "gene count")->capture_default_str();
    synth_cmd->add_option("--separation", y_separation,
                          "centroid distance in within-class standard deviations")
        ->capture_default_str();
    synth_cmd->add_option("--informative", y_informative,
                          "genes carrying class signal")
        ->capture_default_str();
    synth_cmd->add_option("--sparsity", y_sparsity, "fraction of entries zeroed")
        ->capture_default_str();
    synth_cmd->add_option("--batch-offsets", y_offsets,
                          "per-batch shift magnitudes, comma separated");
    synth_cmd->add_option("--seed", y_seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--orientation", y_orientation, "written matrix row axis")
        ->check(CLI::IsMember({"cells", "genes"}))
        ->capture_default_str();
    synth_cmd->add_option("--delimiter", y_delimiter, "written file delimiter")
        ->check(CLI::IsMember({"comma", "tab"}))
        ->capture_default_str();
    synth_cmd->callback([&]() {
        cmd_synth(y_out, y_classes, y_genes, y_separation, y_informative, y_sparsity,
                  y_offsets, y_seed, y_orientation, y_delimiter);
    });

    try {
        std::vector<std::string> args;
        args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
        for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
        args = with_config_applied(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << single_line(e.what()) << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << single_line(e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << single_line(e.what()) << "\n";
        return 1;
    }
}

}  // namespace scproj
