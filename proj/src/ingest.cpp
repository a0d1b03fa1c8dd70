#include "scproj/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace scproj {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    // Trailing blank lines are an artifact of the final newline, not content.
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

double parse_number(const std::string& token, const std::string& path,
                    std::size_t row, std::size_t col) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || token.empty()) {
        throw ParseError(path + ": row " + std::to_string(row) + ", column " +
                         std::to_string(col) + ": invalid number '" + token + "'");
    }
    return value;
}

// Splits on tab when the line contains one, otherwise on comma. Label files
// arrive in both flavors and carry no self-describing header.
std::vector<std::string> split_auto(const std::string& line) {
    return split(line, line.find('\t') != std::string::npos ? '\t' : ',');
}

}  // namespace

char delimiter_char(Delimiter delim) {
    return delim == Delimiter::comma ? ',' : '\t';
}

ExpressionMatrix read_dense(const std::string& path, Orientation orientation,
                            Delimiter delimiter) {
    const char delim = delimiter_char(delimiter);
    auto lines = read_lines(path);
    if (lines.size() < 2) {
        throw FormatError(path + ": need a header row and at least one data row");
    }

    auto header = split(lines[0], delim);
    auto first_body = split(lines[1], delim);
    // The corner token (axis name above the row ids) is optional; some
    // writers emit it, some leave the header one field short.
    std::size_t col_ids_offset;
    if (header.size() == first_body.size()) {
        col_ids_offset = 1;
    } else if (header.size() + 1 == first_body.size()) {
        col_ids_offset = 0;
    } else {
        throw FormatError(path + ": header has " + std::to_string(header.size()) +
                          " fields but row 2 has " + std::to_string(first_body.size()));
    }
    std::vector<std::string> col_ids(header.begin() + col_ids_offset, header.end());
    if (col_ids.empty()) {
        throw FormatError(path + ": header declares no data columns");
    }

    const std::size_t n_rows = lines.size() - 1;
    const std::size_t n_cols = col_ids.size();
    std::vector<std::string> row_ids;
    row_ids.reserve(n_rows);
    Matrix body(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t file_row = r + 2;  // 1-based, after the header
        auto fields = split(lines[r + 1], delim);
        if (fields.size() != n_cols + 1) {
            throw FormatError(path + ": row " + std::to_string(file_row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(n_cols + 1));
        }
        row_ids.push_back(fields[0]);
        for (std::size_t c = 0; c < n_cols; ++c) {
            body(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                parse_number(fields[c + 1], path, file_row, c + 2);
        }
    }

    ExpressionMatrix out;
    if (orientation == Orientation::cells_as_rows) {
        out.values = std::move(body);
        out.cell_ids = std::move(row_ids);
        out.gene_names = std::move(col_ids);
    } else {
        out.values = body.transpose();
        out.gene_names = std::move(row_ids);
        out.cell_ids = std::move(col_ids);
    }
    out.validate();
    return out;
}

void write_dense(const ExpressionMatrix& matrix, const std::string& path,
                 Orientation orientation, Delimiter delimiter) {
    const char delim = delimiter_char(delimiter);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    const bool cells_rows = orientation == Orientation::cells_as_rows;
    const auto& row_ids = cells_rows ? matrix.cell_ids : matrix.gene_names;
    const auto& col_ids = cells_rows ? matrix.gene_names : matrix.cell_ids;

    out << "id";
    for (const auto& id : col_ids) out << delim << id;
    out << '\n';
    for (std::size_t r = 0; r < row_ids.size(); ++r) {
        out << row_ids[r];
        for (std::size_t c = 0; c < col_ids.size(); ++c) {
            const double v = cells_rows
                                 ? matrix.values(static_cast<Eigen::Index>(r),
                                                 static_cast<Eigen::Index>(c))
                                 : matrix.values(static_cast<Eigen::Index>(c),
                                                 static_cast<Eigen::Index>(r));
            out << delim << format_double(v);
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

ExpressionMatrix read_sparse_mtx(const std::string& matrix_path,
                                 const std::string& genes_path,
                                 const std::string& barcodes_path) {
    auto lines = read_lines(matrix_path);
    if (lines.empty() || lines[0].rfind("%%MatrixMarket", 0) != 0) {
        throw FormatError(matrix_path + ": missing %%MatrixMarket banner");
    }
    {
        std::istringstream banner(lines[0]);
        std::string tag, object, fmt, field, symmetry;
        banner >> tag >> object >> fmt >> field >> symmetry;
        if (object != "matrix" || fmt != "coordinate" ||
            (field != "real" && field != "integer") || symmetry != "general") {
            throw FormatError(matrix_path + ": unsupported MatrixMarket type '" +
                              object + " " + fmt + " " + field + " " + symmetry +
                              "'; need coordinate real|integer general");
        }
    }

    std::size_t cursor = 1;
    while (cursor < lines.size() &&
           (lines[cursor].empty() || lines[cursor][0] == '%')) {
        ++cursor;
    }
    if (cursor >= lines.size()) {
        throw FormatError(matrix_path + ": missing dimension line");
    }

    long n_genes = 0, n_cells = 0, nnz = 0;
    {
        std::istringstream dims(lines[cursor]);
        if (!(dims >> n_genes >> n_cells >> nnz) || n_genes < 0 || n_cells < 0 ||
            nnz < 0) {
            throw FormatError(matrix_path + ": bad dimension line '" + lines[cursor] +
                              "'");
        }
    }
    ++cursor;

    ExpressionMatrix out;
    out.gene_names = read_lines(genes_path);
    out.cell_ids = read_lines(barcodes_path);
    if (static_cast<long>(out.gene_names.size()) != n_genes) {
        throw ValidationError(genes_path + ": " + std::to_string(out.gene_names.size()) +
                              " gene ids, but matrix header declares " +
                              std::to_string(n_genes));
    }
    if (static_cast<long>(out.cell_ids.size()) != n_cells) {
        throw ValidationError(barcodes_path + ": " +
                              std::to_string(out.cell_ids.size()) +
                              " barcodes, but matrix header declares " +
                              std::to_string(n_cells));
    }

    out.values = Matrix::Zero(n_cells, n_genes);
    long seen = 0;
    for (; cursor < lines.size(); ++cursor) {
        if (lines[cursor].empty() || lines[cursor][0] == '%') continue;
        std::istringstream entry(lines[cursor]);
        long gene = 0, cell = 0;
        double value = 0.0;
        if (!(entry >> gene >> cell >> value)) {
            throw FormatError(matrix_path + ": row " + std::to_string(cursor + 1) +
                              ": bad coordinate entry '" + lines[cursor] + "'");
        }
        if (gene < 1 || gene > n_genes || cell < 1 || cell > n_cells) {
            throw FormatError(matrix_path + ": row " + std::to_string(cursor + 1) +
                              ": coordinate (" + std::to_string(gene) + "," +
                              std::to_string(cell) + ") outside " +
                              std::to_string(n_genes) + "x" + std::to_string(n_cells));
        }
        out.values(cell - 1, gene - 1) += value;  // duplicates accumulate
        ++seen;
    }
    if (seen != nnz) {
        throw FormatError(matrix_path + ": header declares " + std::to_string(nnz) +
                          " entries, found " + std::to_string(seen));
    }
    out.validate();
    return out;
}

LabeledDataset read_labels(const std::string& path, const ExpressionMatrix& dataset,
                           bool skip_header, std::vector<std::string>* warnings) {
    auto lines = read_lines(path);
    std::size_t start = skip_header ? 1 : 0;

    std::unordered_map<std::string, std::size_t> cell_index;
    cell_index.reserve(dataset.cell_ids.size());
    for (std::size_t i = 0; i < dataset.cell_ids.size(); ++i) {
        cell_index[dataset.cell_ids[i]] = i;
    }

    std::vector<std::string> labels(dataset.cell_ids.size());
    std::vector<std::string> batch(dataset.cell_ids.size());
    std::vector<bool> covered(dataset.cell_ids.size(), false);
    bool any_batch = false;

    for (std::size_t r = start; r < lines.size(); ++r) {
        if (lines[r].empty()) continue;
        auto fields = split_auto(lines[r]);
        if (fields.size() < 2 || fields.size() > 3) {
            throw ParseError(path + ": row " + std::to_string(r + 1) + " has " +
                             std::to_string(fields.size()) +
                             " fields, expected cell_id,label[,batch]");
        }
        auto it = cell_index.find(fields[0]);
        if (it == cell_index.end()) {
            if (warnings) {
                warnings->push_back("label for unknown cell id '" + fields[0] +
                                    "' ignored");
            }
            continue;
        }
        covered[it->second] = true;
        labels[it->second] = fields[1];
        if (fields.size() == 3) {
            batch[it->second] = fields[2];
            any_batch = true;
        }
    }

    std::string missing;
    for (std::size_t i = 0; i < covered.size(); ++i) {
        if (!covered[i]) {
            if (!missing.empty()) missing += ", ";
            missing += dataset.cell_ids[i];
        }
    }
    if (!missing.empty()) {
        throw ValidationError(path + ": no label for cell id(s): " + missing);
    }

    LabeledDataset out;
    out.matrix = dataset;
    out.labels = std::move(labels);
    if (any_batch) out.batch = std::move(batch);
    // Singleton labels are fine at ingest time; fitting code re-validates
    // with the replicate requirement it actually needs.
    out.validate(/*require_replicates=*/false);
    return out;
}

void write_labels(const LabeledDataset& dataset, const std::string& path,
                  Delimiter delimiter) {
    const char delim = delimiter_char(delimiter);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
        out << dataset.matrix.cell_ids[i] << delim << dataset.labels[i];
        if (!dataset.batch.empty()) out << delim << dataset.batch[i];
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<ExpressionMatrix> intersect_genes(
    const std::vector<ExpressionMatrix>& datasets) {
    if (datasets.size() < 2) {
        throw ValidationError("gene intersection needs at least two datasets");
    }
    std::set<std::string> common(datasets[0].gene_names.begin(),
                                 datasets[0].gene_names.end());
    for (std::size_t d = 1; d < datasets.size(); ++d) {
        std::unordered_set<std::string> present(datasets[d].gene_names.begin(),
                                                datasets[d].gene_names.end());
        for (auto it = common.begin(); it != common.end();) {
            it = present.count(*it) ? std::next(it) : common.erase(it);
        }
    }
    if (common.empty()) {
        throw ValidationError("datasets share no genes");
    }

    std::vector<std::string> genes(common.begin(), common.end());  // sorted
    std::vector<ExpressionMatrix> out;
    out.reserve(datasets.size());
    for (const auto& dataset : datasets) {
        std::unordered_map<std::string, Eigen::Index> index;
        index.reserve(dataset.gene_names.size());
        for (std::size_t g = 0; g < dataset.gene_names.size(); ++g) {
            index[dataset.gene_names[g]] = static_cast<Eigen::Index>(g);
        }
        ExpressionMatrix restricted;
        restricted.cell_ids = dataset.cell_ids;
        restricted.gene_names = genes;
        restricted.values.resize(dataset.values.rows(),
                                 static_cast<Eigen::Index>(genes.size()));
        for (std::size_t g = 0; g < genes.size(); ++g) {
            restricted.values.col(static_cast<Eigen::Index>(g)) =
                dataset.values.col(index.at(genes[g]));
        }
        out.push_back(std::move(restricted));
    }
    return out;
}

}  // namespace scproj
