#pragma once

#include <string_view>

#include "stackstab/core/dataset.hpp"

namespace stackstab {

/// Loss family plus its known upper bound M (0 <= loss <= M).
struct LossKind {
    enum class Kind { squared, classification01, gamma };

    Kind kind = Kind::classification01;
    double gamma = 1.0;  // margin, gamma kind only
    double bound = 1.0;  // M

    static LossKind squared(double bound);
    static LossKind classification01();
    static LossKind gamma_margin(double gamma);

    friend bool operator==(const LossKind&, const LossKind&) = default;
};

std::string_view to_string(LossKind::Kind kind) noexcept;
LossKind::Kind loss_kind_from_string(std::string_view name);

/// sign(score), with sign(0) = 0. A zero score therefore never equals a +-1
/// label and counts as a misclassification for both classes.
double classify(double score) noexcept;

/// Loss of a real-valued prediction on z = (x, y).
///   squared          (y - f)^2
///   classification01 I(sign(f) != y) for binary tasks, I(f != y) for multiclass
///   gamma            1 if yf < 0; 1 - yf/gamma if 0 <= yf <= gamma; 0 otherwise
double loss(const LossKind& kind, double prediction, const Example& z, Task task = Task::binary);

}  // namespace stackstab
