#ifndef SCPROJ_PROJECTION_HPP
#define SCPROJ_PROJECTION_HPP

#include "scproj/types.hpp"

#include <string>
#include <vector>

namespace scproj {

/**
 * @brief Principal component basis in gene space.
 *
 * Columns of `components` are orthonormal eigenvectors of the sample
 * covariance matrix (divisor n-1), sorted by descending eigenvalue, so each
 * eigenvalue equals the variance of the data projected onto its component.
 * The sign convention makes each column's largest-magnitude entry positive.
 */
struct PcaBasis {
    Matrix components;  ///< genes x l, orthonormal columns
    Vector eigenvalues; ///< length l, non-increasing
    Vector center;      ///< per-gene mean of the fit data

    Eigen::Index n_genes() const { return center.size(); }
    Eigen::Index n_components() const { return components.cols(); }
};

/**
 * @brief Discriminant basis from between/within-class scatter.
 *
 * Solves the generalized eigenproblem of S_b against S_w + eps*I via
 * Cholesky whitening. One component per distinct class is kept even though
 * the between-class scatter has rank at most classes-1, so the trailing
 * eigenvalue sits at numerical noise. Columns have unit Euclidean norm but
 * are not mutually orthogonal in general.
 */
struct MdaBasis {
    Matrix components;    ///< genes x k, unit-norm columns
    Vector eigenvalues;   ///< length k, non-increasing
    Matrix class_means;   ///< k x genes, rows in class-id order
    double regularization = 0.0;  ///< eps actually added to the S_w diagonal

    Eigen::Index n_genes() const { return components.rows(); }
    Eigen::Index n_components() const { return components.cols(); }
};

/**
 * @brief The combined projection [V | U]: discriminant columns first, then
 * principal components, with no re-orthogonalization across the blocks.
 */
struct ProjectionBasis {
    Matrix ensemble;  ///< genes x (k + l)
    PcaBasis pca;
    MdaBasis mda;
    std::vector<std::string> gene_names;

    Eigen::Index n_genes() const { return ensemble.rows(); }
    Eigen::Index dim() const { return ensemble.cols(); }
};

/**
 * Fits the top `n_components` principal components of `data` (cells x genes).
 *
 * When there are fewer cells than genes the n x n Gram matrix is
 * eigendecomposed and mapped back instead of forming the full gene-by-gene
 * covariance; the two routes agree through the SVD correspondence.
 * `n_components` may be zero, which fits only the centering vector (the
 * discriminant-only configuration). Throws ValidationError when
 * `n_components` exceeds min(cells, genes) or the input is non-finite.
 */
PcaBasis fit_pca(const Matrix& data, Eigen::Index n_components);

/**
 * Fits one discriminant component per distinct class id.
 *
 * `class_ids` must be dense 0..k-1 with k >= 2 and every class populated by
 * at least two rows. The within-class scatter is regularized with
 * eps = epsilon_scale * trace(S_w) / genes before inversion.
 */
MdaBasis fit_mda(const Matrix& data, const std::vector<int>& class_ids,
                 double epsilon_scale = 1e-6);

/** Column-concatenates [V | U]; both bases must share the gene dimension. */
ProjectionBasis make_ensemble(const PcaBasis& pca, const MdaBasis& mda,
                              std::vector<std::string> gene_names = {});

/** Projects data (cells x genes) after subtracting the PCA center. */
Matrix project(const Matrix& data, const ProjectionBasis& basis);

/**
 * Per-batch centering in projected space: each batch's per-column mean is
 * replaced by the global per-column mean. A single-batch input is returned
 * unchanged.
 */
Matrix align_batches(const Matrix& projected, const std::vector<std::string>& batch);

/** One row per component of the spectra CSV dump (see CLI --spectra). */
struct SpectrumRow {
    std::string block;  // "mda" or "pca"
    Eigen::Index component_index = 0;
    double eigenvalue = 0.0;
    double cumulative_fraction = 0.0;
};

std::vector<SpectrumRow> eigenvalue_spectra(const ProjectionBasis& basis);

}  // namespace scproj

#endif
