#include "stackstab/core/estimators.hpp"

namespace stackstab {

RiskEstimate summarize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("cannot summarize an empty sample");
    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double std_error = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    return RiskEstimate{mean, std_error, values.size()};
}

}  // namespace stackstab
