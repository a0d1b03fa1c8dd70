#ifndef SCPROJ_SYNTHDATA_HPP
#define SCPROJ_SYNTHDATA_HPP

#include "scproj/types.hpp"

#include <cstdint>
#include <vector>

namespace scproj {

/**
 * @brief Recipe for a synthetic labeled expression dataset.
 *
 * Class centroids sit on scaled unit axes of the informative-gene subspace
 * so every centroid pair is exactly `class_separation` apart in units of
 * the (post-sparsity) average within-class standard deviation. Unit
 * Gaussian noise is added on all genes, a constant baseline keeps values
 * non-negative (count-like), the sparsity mask zeroes entries after noise,
 * and an optional per-batch shift of the given magnitudes is applied along
 * one fixed direction shared by all batches. Batch ids are assigned
 * round-robin when `batch_offsets` is non-empty. Fully deterministic in
 * `seed`.
 */
struct SynthSpec {
    std::vector<int> n_cells_per_class = {100, 100};
    int n_genes = 200;
    double class_separation = 5.0;
    int informative_genes = 20;
    double sparsity = 0.0;  ///< fraction of entries zeroed post-generation, in [0, 1)
    std::vector<double> batch_offsets;
    std::uint64_t seed = 0;
};

LabeledDataset generate(const SynthSpec& spec);

}  // namespace scproj

#endif
