#ifndef SCPROJ_INGEST_HPP
#define SCPROJ_INGEST_HPP

#include "scproj/types.hpp"

#include <string>
#include <vector>

namespace scproj {

/** On-disk row meaning for dense text matrices. Never inferred from content. */
enum class Orientation { cells_as_rows, genes_as_rows };

enum class Delimiter { comma, tab };

char delimiter_char(Delimiter d);

/**
 * Reads a delimited text matrix with a header row of ids and row ids in the
 * first column, returning it in canonical cells x genes layout (transposing
 * when the file stores genes as rows).
 *
 * Throws ParseError with 1-based line/field coordinates for malformed
 * numbers, FormatError for ragged rows and ValidationError for duplicate ids
 * or non-finite values.
 */
ExpressionMatrix read_dense(const std::string& path, Orientation orientation,
                            Delimiter delimiter);

/** Symmetric emitter for read_dense; values are written round-trip exact. */
void write_dense(const ExpressionMatrix& matrix, const std::string& path,
                 Orientation orientation, Delimiter delimiter);

/**
 * Reads a MatrixMarket coordinate file (genes x cells, 1-based indices, the
 * usual 10x layout) plus one-id-per-line gene and barcode sidecars. Entries
 * absent from the coordinate list are zero; duplicate coordinates accumulate.
 */
ExpressionMatrix read_sparse_mtx(const std::string& matrix_path,
                                 const std::string& genes_path,
                                 const std::string& barcodes_path);

/**
 * Joins a delimited label file (cell_id, label[, batch]) against a dataset by
 * cell id. Every dataset cell must be labeled; labels for unknown cells are
 * dropped with a warning appended to `warnings` when provided (otherwise
 * printed to stderr).
 */
LabeledDataset read_labels(const std::string& path, const ExpressionMatrix& dataset,
                           bool skip_header = false,
                           std::vector<std::string>* warnings = nullptr);

/** Writer for the read_labels format: cell_id, label[, batch], no header. */
void write_labels(const LabeledDataset& dataset, const std::string& path,
                  Delimiter delimiter = Delimiter::comma);

/**
 * Restricts every matrix to the lexicographically sorted common gene set, so
 * all outputs share one column order. Throws ValidationError when the
 * intersection is empty.
 */
std::vector<ExpressionMatrix> intersect_genes(const std::vector<ExpressionMatrix>& datasets);

}  // namespace scproj

#endif
