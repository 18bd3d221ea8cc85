#include "stackstab/core/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "stackstab/core/overloaded.hpp"

namespace stackstab {

void validate(const SyntheticSpec& spec) {
    std::visit(overloaded{
                   [](const BlobsSpec& s) {
                       if (s.m < 2) throw std::invalid_argument("blobs: m must be >= 2");
                       if (s.d < 1) throw std::invalid_argument("blobs: d must be >= 1");
                       if (!(s.separation >= 0.0) || !std::isfinite(s.separation)) {
                           throw std::invalid_argument("blobs: separation must be a finite value >= 0");
                       }
                   },
                   [](const LinearSpec& s) {
                       if (s.m < 2) throw std::invalid_argument("linear: m must be >= 2");
                       if (s.d < 1) throw std::invalid_argument("linear: d must be >= 1");
                       if (!(s.noise_std >= 0.0) || !std::isfinite(s.noise_std)) {
                           throw std::invalid_argument("linear: noise-std must be a finite value >= 0");
                       }
                   },
               },
               spec);
}

SyntheticSource::SyntheticSource(SyntheticSpec spec, Seed seed) : spec_(spec) {
    validate(spec_);
    if (const auto* lin = std::get_if<LinearSpec>(&spec_)) {
        RandomStream stream = substream(seed, "true-weights");
        weights_.resize(lin->d);
        for (double& w : weights_) w = stream.normal();
    }
}

Task SyntheticSource::task() const {
    return std::holds_alternative<BlobsSpec>(spec_) ? Task::binary : Task::regression;
}

std::size_t SyntheticSource::dim() const {
    return std::visit([](const auto& s) { return s.d; }, spec_);
}

Example SyntheticSource::sample(RandomStream& stream, double blob_label) const {
    Example e;
    if (const auto* blobs = std::get_if<BlobsSpec>(&spec_)) {
        const double offset = 0.5 * blobs->separation / std::sqrt(static_cast<double>(blobs->d));
        e.x.resize(blobs->d);
        for (double& v : e.x) v = blob_label * offset + stream.normal();
        e.y = blob_label;
    } else {
        const auto& lin = std::get<LinearSpec>(spec_);
        e.x.resize(lin.d);
        double y = 0.0;
        for (std::size_t j = 0; j < lin.d; ++j) {
            e.x[j] = stream.normal();
            y += weights_[j] * e.x[j];
        }
        const double noise = stream.normal();
        e.y = lin.noise_std > 0.0 ? y + lin.noise_std * noise : y;
    }
    return e;
}

Dataset SyntheticSource::draw(std::size_t m, Seed seed) const {
    if (m < 1) throw std::invalid_argument("cannot draw an empty dataset");
    std::vector<Example> examples;
    examples.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        RandomStream stream = substream(seed, "example", i);
        examples.push_back(sample(stream, i % 2 == 0 ? 1.0 : -1.0));
    }
    return Dataset(task(), std::move(examples));
}

Example SyntheticSource::draw_example(Seed seed) const {
    RandomStream stream = substream(seed, "fresh-example");
    const double label = stream.uniform() < 0.5 ? 1.0 : -1.0;
    return sample(stream, label);
}

Dataset gen_synthetic(const SyntheticSpec& spec, Seed seed) {
    SyntheticSource source(spec, seed);
    const std::size_t m = std::visit([](const auto& s) { return s.m; }, spec);
    return source.draw(m, derive(seed, "dataset"));
}

}  // namespace stackstab
