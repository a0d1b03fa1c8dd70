#include "scproj/projection.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace scproj {

namespace {

// Largest-|entry| coordinate made positive; ties go to the lowest index so the
// convention is deterministic across solvers and platforms.
void fix_signs(Matrix& components) {
    for (Eigen::Index c = 0; c < components.cols(); ++c) {
        Eigen::Index argmax = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < components.rows(); ++r) {
            const double mag = std::abs(components(r, c));
            if (mag > best) {
                best = mag;
                argmax = r;
            }
        }
        if (components(argmax, c) < 0.0) components.col(c) = -components.col(c);
    }
}

// Indices of `values` sorted by descending value; ties keep the solver's
// original eigen-index order.
std::vector<Eigen::Index> descending_order(const Vector& values) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return values(a) > values(b);
    });
    return order;
}

// Deterministic fill-in for directions the data does not span (possible on the
// Gram route since centered data has rank < n): the canonical basis vector
// with the largest residual after projecting out the columns found so far.
Vector orthonormal_completion(const Matrix& components, Eigen::Index n_found) {
    const Eigen::Index m = components.rows();
    Vector best_residual;
    double best_norm = -1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        Vector candidate = Vector::Zero(m);
        candidate(i) = 1.0;
        if (n_found > 0) {
            const auto basis = components.leftCols(n_found);
            candidate -= basis * (basis.transpose() * candidate);
        }
        const double norm = candidate.norm();
        if (norm > best_norm + 1e-12) {
            best_norm = norm;
            best_residual = candidate;
        }
    }
    if (best_norm <= 1e-12) {
        throw ValidationError("cannot complete an orthonormal basis");
    }
    return best_residual / best_norm;
}

}  // namespace

PcaBasis fit_pca(const Matrix& data, Eigen::Index n_components) {
    const Eigen::Index n = data.rows();
    const Eigen::Index m = data.cols();
    if (n < 2) throw ValidationError("PCA needs at least two rows");
    if (n_components < 0 || n_components > std::min(n, m)) {
        throw ValidationError("component count " + std::to_string(n_components) +
                              " exceeds min(rows, cols) = " +
                              std::to_string(std::min(n, m)));
    }
    if (!data.allFinite()) throw ValidationError("PCA input contains non-finite values");

    PcaBasis basis;
    basis.center = data.colwise().mean();
    const Matrix centered = data.rowwise() - basis.center.transpose();

    Vector all_values;
    Matrix all_vectors;
    if (n >= m) {
        const Matrix cov = centered.transpose() * centered / double(n - 1);
        Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
        if (solver.info() != Eigen::Success) {
            throw ValidationError("covariance eigendecomposition failed");
        }
        all_values = solver.eigenvalues();
        all_vectors = solver.eigenvectors();
    } else {
        // Gram trick: the n×n matrix XXᵀ/(n−1) shares its nonzero spectrum
        // with the covariance; right singular vectors come from Xᵀw/‖Xᵀw‖.
        const Matrix gram = centered * centered.transpose() / double(n - 1);
        Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
        if (solver.info() != Eigen::Success) {
            throw ValidationError("Gram eigendecomposition failed");
        }
        all_values = solver.eigenvalues();
        const Matrix gram_vectors = solver.eigenvectors();
        const double scale = all_values.size() > 0
                                 ? std::max(1.0, all_values.maxCoeff())
                                 : 1.0;
        // Map back in descending-eigenvalue order so that completion of the
        // near-null directions can orthogonalize against real ones.
        const auto order = descending_order(all_values);
        Matrix ordered_vectors(m, n);
        Vector ordered_values(n);
        for (Eigen::Index rank = 0; rank < n; ++rank) {
            const Eigen::Index src = order[static_cast<std::size_t>(rank)];
            ordered_values(rank) = all_values(src);
            Vector mapped = centered.transpose() * gram_vectors.col(src);
            const double norm = mapped.norm();
            if (all_values(src) > 1e-12 * scale && norm > 1e-12) {
                ordered_vectors.col(rank) = mapped / norm;
            } else {
                ordered_vectors.col(rank) =
                    orthonormal_completion(ordered_vectors, rank);
            }
        }
        all_values = std::move(ordered_values);
        all_vectors = std::move(ordered_vectors);
    }

    const auto order = descending_order(all_values);
    basis.components.resize(m, n_components);
    basis.eigenvalues.resize(n_components);
    for (Eigen::Index c = 0; c < n_components; ++c) {
        const Eigen::Index src = order[static_cast<std::size_t>(c)];
        basis.components.col(c) = all_vectors.col(src);
        basis.eigenvalues(c) = all_values(src);
    }
    fix_signs(basis.components);
    return basis;
}

MdaBasis fit_mda(const Matrix& data, const std::vector<int>& class_ids,
                 double epsilon_scale) {
    const Eigen::Index n = data.rows();
    const Eigen::Index m = data.cols();
    if (static_cast<Eigen::Index>(class_ids.size()) != n) {
        throw ValidationError("class id count does not match row count");
    }
    if (!data.allFinite()) throw ValidationError("MDA input contains non-finite values");

    std::map<int, std::vector<Eigen::Index>> members;
    for (Eigen::Index r = 0; r < n; ++r) members[class_ids[r]].push_back(r);
    const auto k = static_cast<Eigen::Index>(members.size());
    if (k < 2) throw ValidationError("MDA needs at least two classes");
    for (const auto& [id, rows] : members) {
        if (rows.size() < 2) {
            throw ValidationError("class " + std::to_string(id) +
                                  " has a single member; within-class scatter "
                                  "needs at least two");
        }
    }

    const RowVector global_mean = data.colwise().mean();
    MdaBasis basis;
    basis.class_means.resize(k, m);

    Matrix s_b = Matrix::Zero(m, m);
    Matrix s_w = Matrix::Zero(m, m);
    Eigen::Index class_row = 0;
    for (const auto& [id, rows] : members) {
        RowVector mean = RowVector::Zero(m);
        for (Eigen::Index r : rows) mean += data.row(r);
        mean /= double(rows.size());
        basis.class_means.row(class_row++) = mean;

        const Vector dev = (mean - global_mean).transpose();
        s_b.noalias() += double(rows.size()) * dev * dev.transpose();
        for (Eigen::Index r : rows) {
            const Vector within = (data.row(r) - mean).transpose();
            s_w.noalias() += within * within.transpose();
        }
    }

    double epsilon = epsilon_scale * s_w.trace() / double(m);
    if (!(epsilon > 0.0)) epsilon = epsilon_scale;
    basis.regularization = epsilon;

    Matrix regularized = s_w;
    regularized.diagonal().array() += epsilon;
    Eigen::LLT<Matrix> llt(regularized);
    if (llt.info() != Eigen::Success) {
        throw ValidationError("within-class scatter is not positive definite "
                              "even after regularization");
    }

    // Whitened problem: W = L⁻¹ S_b L⁻ᵀ is symmetric and shares eigenvalues
    // with (S_w + εI)⁻¹ S_b; eigenvectors map back through v = L⁻ᵀ y.
    const Matrix half = llt.matrixL().solve(s_b);
    Matrix whitened = llt.matrixL().solve(half.transpose());
    whitened = ((whitened + whitened.transpose()) * 0.5).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> solver(whitened);
    if (solver.info() != Eigen::Success) {
        throw ValidationError("discriminant eigendecomposition failed");
    }
    const Vector values = solver.eigenvalues();
    const auto order = descending_order(values);

    basis.components.resize(m, k);
    basis.eigenvalues.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const Eigen::Index src = order[static_cast<std::size_t>(c)];
        Vector v = llt.matrixU().solve(solver.eigenvectors().col(src));
        const double norm = v.norm();
        if (norm <= 0.0) throw ValidationError("degenerate discriminant component");
        basis.components.col(c) = v / norm;
        basis.eigenvalues(c) = values(src);
    }
    fix_signs(basis.components);
    return basis;
}

ProjectionBasis make_ensemble(const PcaBasis& pca, const MdaBasis& mda,
                              std::vector<std::string> gene_names) {
    if (pca.n_genes() != mda.components.rows()) {
        throw ValidationError("PCA basis has " + std::to_string(pca.n_genes()) +
                              " genes but MDA basis has " +
                              std::to_string(mda.components.rows()));
    }
    if (!gene_names.empty() &&
        static_cast<Eigen::Index>(gene_names.size()) != pca.n_genes()) {
        throw ValidationError("gene name count does not match basis dimension");
    }
    ProjectionBasis basis;
    basis.pca = pca;
    basis.mda = mda;
    basis.gene_names = std::move(gene_names);
    basis.ensemble.resize(pca.n_genes(),
                          mda.components.cols() + pca.components.cols());
    basis.ensemble << mda.components, pca.components;
    return basis;
}

Matrix project(const Matrix& data, const ProjectionBasis& basis) {
    if (data.cols() != basis.ensemble.rows()) {
        throw ValidationError("data has " + std::to_string(data.cols()) +
                              " columns but basis expects " +
                              std::to_string(basis.ensemble.rows()));
    }
    return (data.rowwise() - basis.pca.center.transpose()) * basis.ensemble;
}

Matrix align_batches(const Matrix& projected, const std::vector<std::string>& batch) {
    if (static_cast<Eigen::Index>(batch.size()) != projected.rows()) {
        throw ValidationError("batch id count does not match row count");
    }
    std::map<std::string, std::vector<Eigen::Index>> groups;
    for (Eigen::Index r = 0; r < projected.rows(); ++r) groups[batch[r]].push_back(r);
    if (groups.size() <= 1) return projected;

    const RowVector global_mean = projected.colwise().mean();
    Matrix out(projected.rows(), projected.cols());
    for (const auto& [id, rows] : groups) {
        RowVector mean = RowVector::Zero(projected.cols());
        for (Eigen::Index r : rows) mean += projected.row(r);
        mean /= double(rows.size());
        for (Eigen::Index r : rows) {
            out.row(r) = projected.row(r) - mean + global_mean;
        }
    }
    return out;
}

std::vector<SpectrumRow> eigenvalue_spectra(const ProjectionBasis& basis) {
    std::vector<SpectrumRow> rows;
    auto emit = [&rows](const char* block, const Vector& values) {
        const double total = values.size() > 0 ? values.sum() : 0.0;
        double running = 0.0;
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            running += values(i);
            rows.push_back({block, i + 1, values(i),
                            total > 0.0 ? running / total : 0.0});
        }
    };
    emit("mda", basis.mda.eigenvalues);
    emit("pca", basis.pca.eigenvalues);
    return rows;
}

}  // namespace scproj
