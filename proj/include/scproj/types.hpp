#ifndef SCPROJ_TYPES_HPP
#define SCPROJ_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace scproj {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/** Numeric text that could not be parsed, with file coordinates in the message. */
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** Structurally broken input (ragged rows, out-of-bounds coordinates, bad magic). */
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** Input that parsed but violates a contract (duplicate ids, dimension mismatch). */
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** Stored checksum does not match the file contents. */
class ChecksumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** File carries a format version this build cannot read. */
class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * @brief Expression values for a set of cells, always cells x genes.
 *
 * Readers normalize any on-disk orientation to this layout so downstream
 * code never has to guess. Axes are carried as ordered id lists; both must
 * be duplicate-free and `values` must be finite everywhere.
 */
struct ExpressionMatrix {
    Matrix values;
    std::vector<std::string> gene_names;
    std::vector<std::string> cell_ids;

    Eigen::Index n_cells() const { return values.rows(); }
    Eigen::Index n_genes() const { return values.cols(); }

    /** Throws ValidationError on axis/shape mismatch, duplicate ids or non-finite values. */
    void validate() const;
};

/**
 * @brief An ExpressionMatrix with per-cell type labels and optional batch ids.
 *
 * `batch` is either empty or has one entry per cell.
 */
struct LabeledDataset {
    ExpressionMatrix matrix;
    std::vector<std::string> labels;
    std::vector<std::string> batch;

    Eigen::Index n_cells() const { return matrix.n_cells(); }

    /**
     * Validates alignment of labels/batch with the matrix. When
     * `require_replicates` is set, every distinct label must occur at least
     * twice; fitting code needs that for within-class scatter and stratified
     * splits, but a filtered query used only for scoring does not.
     */
    void validate(bool require_replicates = true) const;

    /** Distinct labels in sorted order. */
    std::vector<std::string> distinct_labels() const;
};

/** Stable mapping between string labels and dense class ids (sorted order). */
struct LabelEncoding {
    std::vector<std::string> names;
    std::vector<int> ids;
};

LabelEncoding encode_labels(const std::vector<std::string>& labels);

/** FNV-1a 64-bit, used for content checksums and data fingerprints. */
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t seed = 1469598103934665603ULL);

/** Shortest round-trip decimal representation of a double. */
std::string format_double(double value);

}  // namespace scproj

#endif
