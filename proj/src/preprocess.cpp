#include "scproj/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace scproj {

namespace {

// Per-cell size-factor normalization to `target` total counts followed by
// log(1 + x). Cells with zero total counts are left as zeros.
Matrix normalize_log(const Matrix& values, double target) {
    Matrix out(values.rows(), values.cols());
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        const double total = values.row(r).sum();
        if (total > 0.0) {
            out.row(r) = (values.row(r) * (target / total)).array().log1p();
        } else {
            out.row(r).setZero();
        }
    }
    return out;
}

std::unordered_map<std::string, Eigen::Index> gene_index(
    const std::vector<std::string>& names) {
    std::unordered_map<std::string, Eigen::Index> index;
    index.reserve(names.size());
    for (std::size_t g = 0; g < names.size(); ++g) {
        index[names[g]] = static_cast<Eigen::Index>(g);
    }
    return index;
}

}  // namespace

std::vector<std::string> select_hvg(const ExpressionMatrix& matrix,
                                    std::size_t count) {
    if (count == 0) throw ValidationError("HVG count must be positive");
    if (matrix.n_genes() == 0) throw ValidationError("matrix has no genes");

    const Eigen::Index n = matrix.n_cells();
    struct Ranked {
        double ratio;
        std::string name;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(static_cast<std::size_t>(matrix.n_genes()));
    for (Eigen::Index g = 0; g < matrix.n_genes(); ++g) {
        const double mean = matrix.values.col(g).mean();
        if (mean == 0.0) continue;  // zero-mean genes carry no signal to rank
        const double var =
            (matrix.values.col(g).array() - mean).square().sum() / double(n);
        ranked.push_back({var / mean, matrix.gene_names[static_cast<std::size_t>(g)]});
    }
    if (ranked.empty()) {
        throw ValidationError("no usable genes: all genes have zero mean");
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        return a.name < b.name;
    });
    if (ranked.size() > count) ranked.resize(count);
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (const auto& r : ranked) out.push_back(r.name);
    return out;
}

PreprocessRecipe fit_recipe(const LabeledDataset& dataset, std::size_t hvg_count) {
    return fit_recipe_for_genes(dataset, select_hvg(dataset.matrix, hvg_count),
                                hvg_count);
}

PreprocessRecipe fit_recipe_for_genes(const LabeledDataset& dataset,
                                      const std::vector<std::string>& genes,
                                      std::size_t hvg_count) {
    PreprocessRecipe recipe;
    recipe.hvg_count = hvg_count;

    const Matrix logged = normalize_log(dataset.matrix.values,
                                        recipe.size_factor_target);
    const auto index = gene_index(dataset.matrix.gene_names);
    const double n = static_cast<double>(logged.rows());
    if (n < 2) throw ValidationError("need at least two cells to fit scaling");

    std::vector<double> means, stds;
    for (const auto& name : genes) {
        auto it = index.find(name);
        if (it == index.end()) {
            throw ValidationError("gene '" + name + "' not present in dataset");
        }
        const auto col = logged.col(it->second);
        const double mean = col.mean();
        const double std_dev =
            std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
        // Genes that are constant after the log transform cannot be z-scored;
        // the threshold absorbs float noise around an exactly constant column.
        if (std_dev <= 1e-12 * std::max(1.0, std::abs(mean))) continue;
        recipe.selected_genes.push_back(name);
        means.push_back(mean);
        stds.push_back(std_dev);
    }
    if (recipe.selected_genes.empty()) {
        throw ValidationError("every candidate gene is constant after normalization");
    }
    recipe.per_gene_mean =
        Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
    recipe.per_gene_std =
        Eigen::Map<const Vector>(stds.data(), static_cast<Eigen::Index>(stds.size()));
    return recipe;
}

Matrix apply_recipe(const ExpressionMatrix& matrix, const PreprocessRecipe& recipe) {
    const auto index = gene_index(matrix.gene_names);
    std::vector<Eigen::Index> cols;
    cols.reserve(recipe.selected_genes.size());
    std::string missing;
    for (const auto& name : recipe.selected_genes) {
        auto it = index.find(name);
        if (it == index.end()) {
            if (!missing.empty()) missing += ", ";
            missing += name;
        } else {
            cols.push_back(it->second);
        }
    }
    if (!missing.empty()) {
        throw ValidationError("matrix is missing recipe gene(s): " + missing);
    }

    const Matrix logged = normalize_log(matrix.values, recipe.size_factor_target);
    Matrix out(matrix.values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto j = static_cast<Eigen::Index>(c);
        out.col(j) = (logged.col(cols[c]).array() - recipe.per_gene_mean(j)) /
                     recipe.per_gene_std(j);
    }
    return out;
}

}  // namespace scproj
