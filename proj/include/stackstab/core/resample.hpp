#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "stackstab/core/dataset.hpp"
#include "stackstab/core/rng.hpp"

namespace stackstab {

/// Positions into a parent dataset. Bootstrap replicates have length m and may
/// repeat; subsamples have length p <= m and are all distinct.
struct ResampleIndices {
    std::vector<std::size_t> indices;
    bool with_replacement = true;

    friend bool operator==(const ResampleIndices&, const ResampleIndices&) = default;
};

ResampleIndices bootstrap_indices(std::size_t m, RandomStream& stream);

/// Uniform size-p subset (partial Fisher-Yates), in draw order.
ResampleIndices subsample_indices(std::size_t m, std::size_t p, RandomStream& stream);

/// The dataset (data[indices[0]], data[indices[1]], ...).
Dataset reindex(const Dataset& data, const ResampleIndices& indices);

std::pair<Dataset, ResampleIndices> bootstrap_sample(const Dataset& data, Seed seed);
std::pair<Dataset, ResampleIndices> subsample(const Dataset& data, std::size_t p, Seed seed);

}  // namespace stackstab
