#include <doctest.h>

#include "oracles.hpp"
#include "scproj/projection.hpp"
#include "scproj/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace scproj;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    }
    return m;
}

// Three Gaussian blobs with random centers; returns data and class ids.
std::pair<Matrix, std::vector<int>> three_blobs(Rng& rng, Eigen::Index dims,
                                                int per_class, double spread) {
    Matrix data(3 * per_class, dims);
    std::vector<int> ids;
    for (int c = 0; c < 3; ++c) {
        Vector center(dims);
        for (Eigen::Index j = 0; j < dims; ++j) center(j) = 6.0 * rng.normal();
        for (int i = 0; i < per_class; ++i) {
            for (Eigen::Index j = 0; j < dims; ++j) {
                data(c * per_class + i, j) = center(j) + spread * rng.normal();
            }
            ids.push_back(c);
        }
    }
    return {data, ids};
}

}  // namespace

TEST_CASE("fit_pca on perfectly correlated 2D data finds the diagonal") {
    Matrix data(6, 2);
    for (int i = 0; i < 6; ++i) {
        data(i, 0) = i - 2.5;
        data(i, 1) = i - 2.5;
    }
    const auto pca = fit_pca(data, 2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(pca.components(0, 0) - inv_sqrt2) < 1e-12);
    CHECK(std::abs(pca.components(1, 0) - inv_sqrt2) < 1e-12);
    CHECK(std::abs(pca.eigenvalues(1)) < 1e-12);
}

TEST_CASE("projected per-component variance reproduces the eigenvalues") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 12 + static_cast<Eigen::Index>(rng.below(20));
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.below(5));
        const Matrix data = random_matrix(rng, n, m) * 3.0;
        const auto pca = fit_pca(data, m);
        const Matrix centered = data.rowwise() - pca.center.transpose();
        const Matrix proj = centered * pca.components;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double var = proj.col(j).squaredNorm() / static_cast<double>(n - 1);
            const double scale = std::max(1.0, std::abs(pca.eigenvalues(j)));
            CHECK(std::abs(var - pca.eigenvalues(j)) / scale < 1e-8);
        }
    }
}

TEST_CASE("fit_pca matches the Jacobi oracle on a random 5x3 instance") {
    Rng rng(33);
    const Matrix data = random_matrix(rng, 5, 3);
    const auto pca = fit_pca(data, 3);
    const auto reference = oracle::jacobi_eigen(oracle::naive_covariance(data));
    for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK(std::abs(pca.eigenvalues(j) - reference.values(j)) < 1e-8);
        CHECK(oracle::sign_free_distance(pca.components.col(j), reference.vectors.col(j)) <
              1e-6);
    }
}

TEST_CASE("fit_pca agrees with the Jacobi oracle on both solver routes") {
    Rng rng(34);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.below(6));
        // alternate tall (covariance route) and wide (Gram route) shapes
        const Eigen::Index n = (trial % 2 == 0) ? m + 1 + static_cast<Eigen::Index>(rng.below(8))
                                                : 2 + static_cast<Eigen::Index>(rng.below(m));
        const Matrix data = random_matrix(rng, n, m);
        const auto pca = fit_pca(data, std::min(n, m));
        const auto reference = oracle::jacobi_eigen(oracle::naive_covariance(data));
        const double lead = std::max(1.0, std::abs(reference.values(0)));
        for (Eigen::Index j = 0; j < pca.n_components(); ++j) {
            CHECK(std::abs(pca.eigenvalues(j) - reference.values(j)) < 1e-8);
            // eigenvectors of near-zero eigenvalues are not unique; skip them
            if (reference.values(j) > 1e-9 * lead) {
                CHECK(oracle::sign_free_distance(pca.components.col(j),
                                                 reference.vectors.col(j)) < 1e-6);
            }
        }
    }
}

TEST_CASE("fit_pca columns are orthonormal and sign-fixed") {
    Rng rng(55);
    const Matrix data = random_matrix(rng, 9, 6);
    const auto pca = fit_pca(data, 4);
    const Matrix gram = pca.components.transpose() * pca.components;
    CHECK((gram - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index j = 0; j < 4; ++j) {
        Eigen::Index biggest = 0;
        pca.components.col(j).cwiseAbs().maxCoeff(&biggest);
        CHECK(pca.components(biggest, j) > 0.0);
    }
}

TEST_CASE("fit_pca validates its inputs") {
    Rng rng(2);
    const Matrix data = random_matrix(rng, 4, 3);
    CHECK_THROWS_AS(fit_pca(data, 4), ValidationError);  // l > min(n, m)
    Matrix bad = data;
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(fit_pca(bad, 2), ValidationError);
    CHECK_THROWS_AS(fit_pca(Matrix::Zero(1, 3), 1), ValidationError);  // n < 2

    const auto none = fit_pca(data, 0);  // centering-only fit is allowed
    CHECK(none.n_components() == 0);
    CHECK(none.center.size() == 3);
}

TEST_CASE("fit_mda separates two axis-aligned classes") {
    Rng rng(8);
    Matrix data(400, 2);
    std::vector<int> ids;
    for (int i = 0; i < 400; ++i) {
        const int c = i % 2;
        data(i, 0) = (c == 0 ? -5.0 : 5.0) + 0.1 * rng.normal();
        data(i, 1) = 0.1 * rng.normal();
        ids.push_back(c);
    }
    const auto mda = fit_mda(data, ids);
    REQUIRE(mda.n_components() == 2);
    CHECK(std::abs(mda.components(0, 0)) > 0.99);
    CHECK(mda.eigenvalues(0) > 0.0);
}

TEST_CASE("the k-th MDA eigenvalue sits at numerical noise") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        auto [data, ids] = three_blobs(rng, 5, 30, 0.8);
        const auto mda = fit_mda(data, ids);
        REQUIRE(mda.eigenvalues.size() == 3);
        REQUIRE(mda.eigenvalues(0) > 0.0);
        CHECK(mda.eigenvalues(2) <= 1e-6 * mda.eigenvalues(0));
    }
}

TEST_CASE("the first MDA component beats random directions and PCA on the Fisher ratio") {
    Rng rng(29);
    auto [data, ids] = three_blobs(rng, 4, 50, 1.0);
    const auto scatters = oracle::naive_scatters(data, ids);
    const auto mda = fit_mda(data, ids);
    const double best = oracle::fisher_ratio(mda.components.col(0), scatters);

    for (int trial = 0; trial < 1000; ++trial) {
        Vector v(4);
        for (Eigen::Index j = 0; j < 4; ++j) v(j) = rng.normal();
        v.normalize();
        CHECK(best >= oracle::fisher_ratio(v, scatters));
    }

    const auto pca = fit_pca(data, 4);
    for (Eigen::Index j = 0; j < 4; ++j) {
        CHECK(best >= oracle::fisher_ratio(pca.components.col(j), scatters));
    }
}

TEST_CASE("fit_mda validates class structure") {
    Rng rng(3);
    const Matrix data = random_matrix(rng, 6, 3);
    CHECK_THROWS_AS(fit_mda(data, {0, 0, 0, 0, 0, 0}), ValidationError);  // one class
    CHECK_THROWS_AS(fit_mda(data, {0, 0, 0, 0, 0, 1}), ValidationError);  // singleton
    CHECK_THROWS_AS(fit_mda(data, {0, 0, 1, 1}), ValidationError);        // length mismatch
}

TEST_CASE("doubling the regularization barely moves a well-conditioned solution") {
    Rng rng(47);
    auto [data, ids] = three_blobs(rng, 6, 80, 1.0);
    const auto a = fit_mda(data, ids, 1e-6);
    const auto b = fit_mda(data, ids, 2e-6);
    const double cosine = std::abs(a.components.col(0).dot(b.components.col(0)));
    CHECK(std::acos(std::min(1.0, cosine)) < 1e-3);
    CHECK(b.regularization > a.regularization);
}

TEST_CASE("make_ensemble concatenates discriminant then principal columns") {
    Rng rng(5);
    auto [data, ids] = three_blobs(rng, 5, 20, 1.0);
    const auto pca = fit_pca(data, 4);
    const auto mda = fit_mda(data, ids);
    const auto basis = make_ensemble(pca, mda, {"a", "b", "c", "d", "e"});
    REQUIRE(basis.dim() == 7);  // 3 classes + 4 PCs
    for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK((basis.ensemble.col(j) - mda.components.col(j)).cwiseAbs().maxCoeff() == 0.0);
    }
    for (Eigen::Index j = 0; j < 4; ++j) {
        CHECK((basis.ensemble.col(3 + j) - pca.components.col(j)).cwiseAbs().maxCoeff() ==
              0.0);
    }
}

TEST_CASE("a zero-component PCA yields the discriminant-only ensemble") {
    Rng rng(6);
    auto [data, ids] = three_blobs(rng, 5, 20, 1.0);
    const auto basis = make_ensemble(fit_pca(data, 0), fit_mda(data, ids));
    CHECK(basis.dim() == 3);
    CHECK((basis.ensemble - basis.mda.components).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_ensemble rejects mismatched gene dimensions") {
    Rng rng(7);
    auto [data, ids] = three_blobs(rng, 5, 20, 1.0);
    const auto pca = fit_pca(random_matrix(rng, 10, 4), 2);
    CHECK_THROWS_AS(make_ensemble(pca, fit_mda(data, ids)), ValidationError);
}

TEST_CASE("projecting the center lands on zero in the principal block") {
    Rng rng(9);
    auto [data, ids] = three_blobs(rng, 5, 20, 1.0);
    const auto basis = make_ensemble(fit_pca(data, 3), fit_mda(data, ids));
    Matrix row(1, 5);
    row.row(0) = basis.pca.center.transpose();
    const Matrix proj = project(row, basis);
    for (Eigen::Index j = 3; j < proj.cols(); ++j) CHECK(std::abs(proj(0, j)) < 1e-12);
}

TEST_CASE("project reduces to identity for a trivial one-gene basis") {
    ProjectionBasis basis;
    basis.ensemble = Matrix::Identity(1, 1);
    basis.pca.components = Matrix::Identity(1, 1);
    basis.pca.center = Vector::Zero(1);
    basis.pca.eigenvalues = Vector::Zero(1);
    Matrix data(2, 1);
    data << 3, 4;
    const Matrix proj = project(data, basis);
    CHECK(proj(0, 0) == 3.0);
    CHECK(proj(1, 0) == 4.0);
}

TEST_CASE("project matches the naive matrix-multiply oracle") {
    Rng rng(77);
    ProjectionBasis basis;
    basis.ensemble = random_matrix(rng, 4, 3);
    basis.pca.center = Vector::Zero(4);
    const Matrix data = random_matrix(rng, 6, 4);
    const Matrix proj = project(data, basis);
    const Matrix want = oracle::naive_matmul(data, basis.ensemble);
    CHECK((proj - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("project is linear when the center is zero") {
    Rng rng(78);
    ProjectionBasis basis;
    basis.ensemble = random_matrix(rng, 4, 2);
    basis.pca.center = Vector::Zero(4);
    const Matrix x = random_matrix(rng, 5, 4);
    const Matrix y = random_matrix(rng, 5, 4);
    const Matrix lhs = project(2.0 * x + 3.0 * y, basis);
    const Matrix rhs = 2.0 * project(x, basis) + 3.0 * project(y, basis);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("project rejects dimension mismatches") {
    Rng rng(79);
    ProjectionBasis basis;
    basis.ensemble = random_matrix(rng, 4, 2);
    basis.pca.center = Vector::Zero(4);
    CHECK_THROWS_AS(project(random_matrix(rng, 5, 3), basis), ValidationError);
}

TEST_CASE("align_batches leaves a single batch untouched") {
    Rng rng(91);
    const Matrix data = random_matrix(rng, 8, 3);
    const Matrix out = align_batches(data, std::vector<std::string>(8, "only"));
    CHECK((out - data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("align_batches removes a constant offset between two batches") {
    Rng rng(92);
    Matrix data(12, 3);
    std::vector<std::string> batch;
    for (int i = 0; i < 6; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) data(i, j) = rng.normal();
        batch.push_back("a");
    }
    RowVector offset(3);
    offset << 10.0, -4.0, 2.5;
    for (int i = 6; i < 12; ++i) {
        data.row(i) = data.row(i - 6) + offset;
        batch.push_back("b");
    }
    const Matrix out = align_batches(data, batch);
    const RowVector mean_a = out.topRows(6).colwise().mean();
    const RowVector mean_b = out.bottomRows(6).colwise().mean();
    CHECK((mean_a - mean_b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("after alignment every batch mean equals the global mean") {
    Rng rng(93);
    const Matrix data = random_matrix(rng, 30, 4);
    std::vector<std::string> batch;
    for (int i = 0; i < 30; ++i) batch.push_back("b" + std::to_string(i % 3));
    const Matrix out = align_batches(data, batch);
    const RowVector global = out.colwise().mean();
    for (int b = 0; b < 3; ++b) {
        RowVector mean = RowVector::Zero(4);
        int count = 0;
        for (int i = 0; i < 30; ++i) {
            if (batch[static_cast<std::size_t>(i)] == "b" + std::to_string(b)) {
                mean += out.row(i);
                ++count;
            }
        }
        mean /= count;
        CHECK((mean - global).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("align_batches rejects a batch list of the wrong length") {
    Rng rng(94);
    const Matrix data = random_matrix(rng, 8, 3);
    CHECK_THROWS_AS(align_batches(data, std::vector<std::string>(7, "a")),
                    ValidationError);
}

TEST_CASE("eigenvalue spectra carry both blocks with cumulative fractions") {
    Rng rng(95);
    auto [data, ids] = three_blobs(rng, 5, 20, 1.0);
    const auto basis = make_ensemble(fit_pca(data, 4), fit_mda(data, ids));
    const auto rows = eigenvalue_spectra(basis);
    REQUIRE(rows.size() == 7);
    CHECK(rows[0].block == "mda");
    CHECK(rows[0].component_index == 1);
    CHECK(rows[3].block == "pca");
    CHECK(rows[3].component_index == 1);
    CHECK(std::abs(rows[6].cumulative_fraction - 1.0) < 1e-12);
    for (std::size_t i = 4; i < rows.size(); ++i) {
        CHECK(rows[i].cumulative_fraction >= rows[i - 1].cumulative_fraction - 1e-15);
    }
}
