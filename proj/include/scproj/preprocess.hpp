#ifndef SCPROJ_PREPROCESS_HPP
#define SCPROJ_PREPROCESS_HPP

#include "scproj/types.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace scproj {

/**
 * @brief Everything needed to transform a matrix exactly the way the
 * training data was transformed.
 *
 * The pipeline is counts-per-cell normalization to `size_factor_target`,
 * log(1 + x), then a per-gene z-score using `per_gene_mean` / `per_gene_std`
 * computed on the training cells. Query data is always transformed with
 * these stored statistics, never refit.
 */
struct PreprocessRecipe {
    std::size_t hvg_count = 2000;
    std::vector<std::string> selected_genes;
    Vector per_gene_mean;  ///< post-log space, one entry per selected gene
    Vector per_gene_std;   ///< post-log space, strictly positive
    double size_factor_target = 1e4;
};

/**
 * Ranks genes by descending variance-to-mean ratio of the raw values across
 * cells (population variance) and returns the top `count` names. Genes with
 * zero mean are unusable and excluded; exact ratio ties break
 * lexicographically by gene name.
 */
std::vector<std::string> select_hvg(const ExpressionMatrix& matrix, std::size_t count);

/** select_hvg + fit_recipe_for_genes in one step. */
PreprocessRecipe fit_recipe(const LabeledDataset& dataset, std::size_t hvg_count);

/**
 * Fits normalization statistics for an explicit gene list (used when the
 * gene set was decided elsewhere, e.g. after intersecting with a query).
 * Genes whose post-log standard deviation is zero are dropped.
 */
PreprocessRecipe fit_recipe_for_genes(const LabeledDataset& dataset,
                                      const std::vector<std::string>& genes,
                                      std::size_t hvg_count);

/**
 * Applies a fitted recipe, returning a cells x selected-genes matrix of
 * z-scores. Throws ValidationError listing any recipe gene missing from the
 * input.
 */
Matrix apply_recipe(const ExpressionMatrix& matrix, const PreprocessRecipe& recipe);

}  // namespace scproj

#endif
