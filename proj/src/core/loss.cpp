#include "stackstab/core/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stackstab {

LossKind LossKind::squared(double bound) {
    if (!(bound > 0.0)) throw std::invalid_argument("loss bound M must be > 0");
    return LossKind{Kind::squared, 1.0, bound};
}

LossKind LossKind::classification01() {
    return LossKind{Kind::classification01, 1.0, 1.0};
}

LossKind LossKind::gamma_margin(double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma loss requires gamma > 0");
    return LossKind{Kind::gamma, gamma, 1.0};
}

std::string_view to_string(LossKind::Kind kind) noexcept {
    switch (kind) {
        case LossKind::Kind::squared: return "squared";
        case LossKind::Kind::classification01: return "classification01";
        case LossKind::Kind::gamma: return "gamma";
    }
    return "unknown";
}

LossKind::Kind loss_kind_from_string(std::string_view name) {
    if (name == "squared") return LossKind::Kind::squared;
    if (name == "classification01") return LossKind::Kind::classification01;
    if (name == "gamma") return LossKind::Kind::gamma;
    throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

double classify(double score) noexcept {
    if (score > 0.0) return 1.0;
    if (score < 0.0) return -1.0;
    return 0.0;
}

double loss(const LossKind& kind, double prediction, const Example& z, Task task) {
    switch (kind.kind) {
        case LossKind::Kind::squared: {
            const double r = z.y - prediction;
            return r * r;
        }
        case LossKind::Kind::classification01:
            if (task == Task::regression) {
                throw std::invalid_argument("classification01 loss requires a classification task");
            }
            if (task == Task::multiclass) return prediction == z.y ? 0.0 : 1.0;
            return classify(prediction) == z.y ? 0.0 : 1.0;
        case LossKind::Kind::gamma: {
            if (!(kind.gamma > 0.0)) throw std::invalid_argument("gamma loss requires gamma > 0");
            if (task != Task::binary) throw std::invalid_argument("gamma loss requires a binary task");
            const double margin = z.y * prediction;
            if (margin < 0.0) return 1.0;
            if (margin <= kind.gamma) return 1.0 - margin / kind.gamma;
            return 0.0;
        }
    }
    throw std::logic_error("unhandled loss kind");
}

}  // namespace stackstab
