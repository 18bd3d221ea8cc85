#include "stackstab/core/resample.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace stackstab {

ResampleIndices bootstrap_indices(std::size_t m, RandomStream& stream) {
    if (m == 0) throw std::invalid_argument("bootstrap of an empty dataset");
    ResampleIndices r{std::vector<std::size_t>(m), true};
    for (auto& i : r.indices) i = static_cast<std::size_t>(stream.uniform_index(m));
    return r;
}

ResampleIndices subsample_indices(std::size_t m, std::size_t p, RandomStream& stream) {
    if (p == 0) throw std::invalid_argument("subsample size p must be >= 1");
    if (p > m) {
        throw std::invalid_argument("subsample size p=" + std::to_string(p) + " exceeds m=" + std::to_string(m));
    }
    std::vector<std::size_t> pool(m);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t k = 0; k < p; ++k) {
        const auto j = k + static_cast<std::size_t>(stream.uniform_index(m - k));
        std::swap(pool[k], pool[j]);
    }
    pool.resize(p);
    return ResampleIndices{std::move(pool), false};
}

Dataset reindex(const Dataset& data, const ResampleIndices& indices) {
    std::vector<Example> examples;
    examples.reserve(indices.indices.size());
    for (std::size_t i : indices.indices) {
        if (i >= data.size()) throw std::out_of_range("resample index out of range");
        examples.push_back(data[i]);
    }
    return data.with_examples(std::move(examples));
}

std::pair<Dataset, ResampleIndices> bootstrap_sample(const Dataset& data, Seed seed) {
    RandomStream stream(seed);
    ResampleIndices r = bootstrap_indices(data.size(), stream);
    return {reindex(data, r), std::move(r)};
}

std::pair<Dataset, ResampleIndices> subsample(const Dataset& data, std::size_t p, Seed seed) {
    RandomStream stream(seed);
    ResampleIndices r = subsample_indices(data.size(), p, stream);
    return {reindex(data, r), std::move(r)};
}

}  // namespace stackstab
