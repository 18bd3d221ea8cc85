#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "stackstab/core/dataset.hpp"
#include "stackstab/core/rng.hpp"

namespace stackstab {

/// Two isotropic unit-variance Gaussian blobs whose centres are `separation`
/// apart along the diagonal. Class +1 sits at +c, class -1 at -c.
struct BlobsSpec {
    std::size_t m = 100;
    std::size_t d = 2;
    double separation = 2.0;
};

/// y = <w*, x> + noise with x ~ N(0, I) and w* ~ N(0, I) drawn once per source.
struct LinearSpec {
    std::size_t m = 100;
    std::size_t d = 3;
    double noise_std = 0.1;
};

using SyntheticSpec = std::variant<BlobsSpec, LinearSpec>;

void validate(const SyntheticSpec& spec);

/// A distribution P over examples. Stability estimators draw fresh training sets
/// and fresh points from it.
class DataSource {
public:
    virtual ~DataSource() = default;
    virtual Task task() const = 0;
    virtual std::size_t dim() const = 0;
    virtual Dataset draw(std::size_t m, Seed seed) const = 0;
    virtual Example draw_example(Seed seed) const = 0;
};

class SyntheticSource final : public DataSource {
public:
    /// The source's own parameters (w* for the linear generator) are derived
    /// from `seed`; draws take their own seeds.
    SyntheticSource(SyntheticSpec spec, Seed seed);

    Task task() const override;
    std::size_t dim() const override;

    /// Blobs: example i gets label +1 for even i, -1 for odd i, so the counts are
    /// ceil(m/2) / floor(m/2).
    Dataset draw(std::size_t m, Seed seed) const override;

    /// Blobs: label is a fair coin.
    Example draw_example(Seed seed) const override;

    const std::vector<double>& true_weights() const noexcept { return weights_; }
    const SyntheticSpec& spec() const noexcept { return spec_; }

private:
    Example sample(RandomStream& stream, double blob_label) const;

    SyntheticSpec spec_;
    std::vector<double> weights_;
};

/// Deterministic dataset of size spec.m drawn from SyntheticSource(spec, seed).
Dataset gen_synthetic(const SyntheticSpec& spec, Seed seed);

}  // namespace stackstab
