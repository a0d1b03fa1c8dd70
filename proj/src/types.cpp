#include "scproj/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

namespace scproj {

namespace {

void check_unique(const std::vector<std::string>& ids, const char* axis) {
    std::unordered_set<std::string> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw ValidationError(std::string("duplicate ") + axis + " id '" + id + "'");
        }
    }
}

}  // namespace

void ExpressionMatrix::validate() const {
    if (values.rows() != static_cast<Eigen::Index>(cell_ids.size())) {
        throw ValidationError("row count " + std::to_string(values.rows()) +
                              " does not match " + std::to_string(cell_ids.size()) +
                              " cell ids");
    }
    if (values.cols() != static_cast<Eigen::Index>(gene_names.size())) {
        throw ValidationError("column count " + std::to_string(values.cols()) +
                              " does not match " + std::to_string(gene_names.size()) +
                              " gene names");
    }
    check_unique(gene_names, "gene");
    check_unique(cell_ids, "cell");
    if (!values.allFinite()) {
        throw ValidationError("expression matrix contains non-finite values");
    }
}

void LabeledDataset::validate(bool require_replicates) const {
    matrix.validate();
    if (labels.size() != static_cast<std::size_t>(matrix.n_cells())) {
        throw ValidationError("label count " + std::to_string(labels.size()) +
                              " does not match " + std::to_string(matrix.n_cells()) +
                              " cells");
    }
    if (!batch.empty() && batch.size() != labels.size()) {
        throw ValidationError("batch id count " + std::to_string(batch.size()) +
                              " does not match " + std::to_string(labels.size()) +
                              " cells");
    }
    if (require_replicates) {
        std::unordered_map<std::string, int> counts;
        for (const auto& label : labels) ++counts[label];
        for (const auto& [label, count] : counts) {
            if (count < 2) {
                throw ValidationError("label '" + label +
                                      "' occurs only once; every cell type needs at "
                                      "least two cells");
            }
        }
    }
}

std::vector<std::string> LabeledDataset::distinct_labels() const {
    std::vector<std::string> out(labels);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

LabelEncoding encode_labels(const std::vector<std::string>& labels) {
    LabelEncoding enc;
    enc.names = labels;
    std::sort(enc.names.begin(), enc.names.end());
    enc.names.erase(std::unique(enc.names.begin(), enc.names.end()), enc.names.end());
    std::unordered_map<std::string, int> index;
    index.reserve(enc.names.size());
    for (std::size_t i = 0; i < enc.names.size(); ++i) {
        index[enc.names[i]] = static_cast<int>(i);
    }
    enc.ids.reserve(labels.size());
    for (const auto& label : labels) enc.ids.push_back(index.at(label));
    return enc;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = seed;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string format_double(double value) {
    char buf[64];
    auto result = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, result.ptr);
}

}  // namespace scproj
