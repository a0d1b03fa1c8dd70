#include "scproj/synthdata.hpp"

#include "scproj/rng.hpp"

#include <algorithm>
#include <cmath>

namespace scproj {

namespace {

std::string padded(const char* prefix, std::size_t value, int width) {
    std::string digits = std::to_string(value);
    if (static_cast<int>(digits.size()) < width) {
        digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    }
    return prefix + digits;
}

void check_spec(const SynthSpec& spec) {
    if (spec.n_cells_per_class.size() < 2) {
        throw ValidationError("need at least two classes");
    }
    for (int count : spec.n_cells_per_class) {
        if (count < 2) {
            throw ValidationError("every class needs at least two cells");
        }
    }
    if (spec.n_genes < 1) throw ValidationError("need at least one gene");
    if (spec.informative_genes < 0 || spec.informative_genes > spec.n_genes) {
        throw ValidationError("informative gene count must lie in [0, n_genes]");
    }
    if (spec.class_separation < 0.0) {
        throw ValidationError("class separation must be non-negative");
    }
    if (spec.class_separation > 0.0 &&
        spec.informative_genes < static_cast<int>(spec.n_cells_per_class.size())) {
        throw ValidationError("separated classes need at least one informative "
                              "gene per class");
    }
    if (!(spec.sparsity >= 0.0) || spec.sparsity >= 1.0) {
        throw ValidationError("sparsity must lie in [0, 1)");
    }
}

// Mean of max(0, N(mu, 1)): mu·Phi(mu) + phi(mu).
double truncated_mean(double mu) {
    const double phi = std::exp(-0.5 * mu * mu) / std::sqrt(2.0 * M_PI);
    const double cdf = 0.5 * std::erfc(-mu / std::sqrt(2.0));
    return mu * cdf + phi;
}

// Height h such that, after truncation at zero and the sparsity mask, a gene
// at baseline + h sits exactly `target` above a baseline-only gene in
// expectation. truncated_mean is strictly increasing, so bisection is safe.
double solve_height(double baseline, double target, double sparsity) {
    const double goal = truncated_mean(baseline) + target / (1.0 - sparsity);
    double lo = 0.0, hi = target / (1.0 - sparsity) + 1.0;
    while (truncated_mean(baseline + hi) < goal) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (truncated_mean(baseline + mid) < goal ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

LabeledDataset generate(const SynthSpec& spec) {
    check_spec(spec);
    const auto k = spec.n_cells_per_class.size();
    const auto genes = static_cast<Eigen::Index>(spec.n_genes);
    Rng rng(spec.seed);

    // One shared shift direction keeps inter-batch centroid distances equal
    // to the offset differences.
    const std::size_t n_batches = spec.batch_offsets.size();
    Vector direction = Vector::Zero(genes);
    if (n_batches > 0) {
        for (Eigen::Index g = 0; g < genes; ++g) direction(g) = rng.normal();
        const double norm = direction.norm();
        if (norm > 0.0) direction /= norm;
    }

    // Without batch shifts the baseline is zero, so informative genes behave
    // like on/off markers (count-like, mostly-zero background). Batch shifts
    // need headroom above zero or truncation would bend the shift geometry;
    // noise has unit standard deviation, so 4 sigmas suffice.
    double baseline = 0.0;
    if (n_batches > 0) {
        double min_mean = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            const double extreme =
                spec.batch_offsets[b] * (spec.batch_offsets[b] >= 0.0
                                             ? direction.minCoeff()
                                             : direction.maxCoeff());
            min_mean = std::min(min_mean, extreme);
        }
        baseline = 4.0 + std::max(0.0, -min_mean);
    }

    // Informative genes are dealt round-robin to classes. Class c is raised
    // on its m_c genes by a height calibrated so the observed (truncated,
    // masked) per-gene lift is class_separation/sqrt(2·m_c); every centroid
    // pair then sits exactly class_separation apart in expectation, in units
    // of the unit noise scale.
    std::vector<int> genes_per_class(k, 0);
    for (int g = 0; g < spec.informative_genes; ++g) {
        ++genes_per_class[static_cast<std::size_t>(g) % k];
    }
    std::vector<double> height(k, 0.0);
    if (spec.class_separation > 0.0) {
        for (std::size_t c = 0; c < k; ++c) {
            const double lift =
                spec.class_separation / std::sqrt(2.0 * genes_per_class[c]);
            height[c] = solve_height(baseline, lift, spec.sparsity);
        }
    }

    Eigen::Index total = 0;
    for (int count : spec.n_cells_per_class) total += count;

    LabeledDataset out;
    out.matrix.values.resize(total, genes);
    out.matrix.cell_ids.reserve(static_cast<std::size_t>(total));
    out.labels.reserve(static_cast<std::size_t>(total));
    out.matrix.gene_names.reserve(static_cast<std::size_t>(genes));
    const int gene_width =
        std::max<int>(4, static_cast<int>(std::to_string(genes - 1).size()));
    for (Eigen::Index g = 0; g < genes; ++g) {
        out.matrix.gene_names.push_back(
            padded("gene_", static_cast<std::size_t>(g), gene_width));
    }

    const int label_width =
        std::max<int>(2, static_cast<int>(std::to_string(k - 1).size()));
    std::size_t cell = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::string label = padded("class_", c, label_width);
        for (int i = 0; i < spec.n_cells_per_class[c]; ++i, ++cell) {
            out.matrix.cell_ids.push_back(padded("cell_", cell, 6));
            out.labels.push_back(label);
            const std::size_t batch = n_batches > 0 ? cell % n_batches : 0;

            auto row = out.matrix.values.row(static_cast<Eigen::Index>(cell));
            for (Eigen::Index g = 0; g < genes; ++g) {
                double mean = baseline;
                if (g < spec.informative_genes &&
                    static_cast<std::size_t>(g) % k == c) {
                    mean += height[c];
                }
                if (n_batches > 0) {
                    mean += spec.batch_offsets[batch] * direction(g);
                }
                double value = std::max(0.0, mean + rng.normal());
                if (spec.sparsity > 0.0 && rng.uniform01() < spec.sparsity) {
                    value = 0.0;
                }
                row(g) = value;
            }
            if (n_batches > 0) {
                out.batch.push_back(padded("batch_", batch, 1));
            }
        }
    }

    out.validate();
    return out;
}

}  // namespace scproj
