#include "stackstab/core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stackstab {

std::string_view to_string(Task task) noexcept {
    switch (task) {
        case Task::regression: return "regression";
        case Task::binary: return "binary";
        case Task::multiclass: return "multiclass";
    }
    return "unknown";
}

Task task_from_string(std::string_view name) {
    if (name == "regression") return Task::regression;
    if (name == "binary") return Task::binary;
    if (name == "multiclass") return Task::multiclass;
    throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

Dataset::Dataset(Task task, std::vector<Example> examples, std::vector<double> labels)
    : task_(task), examples_(std::move(examples)), labels_(std::move(labels)) {
    if (examples_.empty()) throw std::invalid_argument("dataset must contain at least one example");
    const std::size_t d = examples_.front().x.size();
    if (d == 0) throw std::invalid_argument("examples must have at least one feature");
    for (std::size_t i = 0; i < examples_.size(); ++i) {
        if (examples_[i].x.size() != d) {
            throw std::invalid_argument("example " + std::to_string(i) + " has dimension " +
                                        std::to_string(examples_[i].x.size()) + ", expected " +
                                        std::to_string(d));
        }
    }
    switch (task_) {
        case Task::regression:
            labels_.clear();
            break;
        case Task::binary:
            if (labels_.empty()) labels_ = {-1.0, 1.0};
            if (labels_ != std::vector<double>{-1.0, 1.0}) {
                throw std::invalid_argument("binary label set must be {-1, +1}");
            }
            for (std::size_t i = 0; i < examples_.size(); ++i) {
                if (examples_[i].y != -1.0 && examples_[i].y != 1.0) {
                    throw std::invalid_argument("binary example " + std::to_string(i) +
                                                " has label outside {-1, +1}");
                }
            }
            break;
        case Task::multiclass: {
            if (labels_.empty()) {
                double max_label = 0.0;
                for (const auto& e : examples_) max_label = std::max(max_label, e.y);
                for (double c = 0.0; c <= max_label; c += 1.0) labels_.push_back(c);
            }
            for (std::size_t i = 0; i < examples_.size(); ++i) {
                const double y = examples_[i].y;
                if (y < 0.0 || y != std::floor(y) || y >= static_cast<double>(labels_.size())) {
                    throw std::invalid_argument("multiclass example " + std::to_string(i) +
                                                " has label outside the declared class indices");
                }
            }
            break;
        }
    }
}

void Dataset::set_label_names(std::vector<std::string> names) {
    if (!names.empty() && names.size() != labels_.size()) {
        throw std::invalid_argument("label name count does not match label set");
    }
    label_names_ = std::move(names);
}

void Dataset::set_feature_names(std::vector<std::string> names) {
    if (!names.empty() && names.size() != dim()) {
        throw std::invalid_argument("feature name count does not match dimension");
    }
    feature_names_ = std::move(names);
}

Dataset Dataset::with_examples(std::vector<Example> examples) const {
    Dataset out(task_, std::move(examples), labels_);
    out.label_names_ = label_names_;
    if (!feature_names_.empty() && out.dim() == feature_names_.size()) {
        out.feature_names_ = feature_names_;
    }
    return out;
}

Dataset remove_example(const Dataset& data, std::size_t i) {
    if (i >= data.size()) {
        throw std::out_of_range("remove_example: index " + std::to_string(i) +
                                " out of range for m=" + std::to_string(data.size()));
    }
    if (data.size() == 1) {
        throw std::invalid_argument("remove_example: removing the only example leaves an empty dataset");
    }
    std::vector<Example> kept;
    kept.reserve(data.size() - 1);
    for (std::size_t j = 0; j < data.size(); ++j) {
        if (j != i) kept.push_back(data[j]);
    }
    return data.with_examples(std::move(kept));
}

Dataset replace_example(const Dataset& data, std::size_t i, Example z) {
    if (i >= data.size()) {
        throw std::out_of_range("replace_example: index " + std::to_string(i) +
                                " out of range for m=" + std::to_string(data.size()));
    }
    if (z.x.size() != data.dim()) {
        throw std::invalid_argument("replace_example: replacement has dimension " +
                                    std::to_string(z.x.size()) + ", dataset has " +
                                    std::to_string(data.dim()));
    }
    std::vector<Example> examples = data.examples();
    examples[i] = std::move(z);
    return data.with_examples(std::move(examples));
}

Dataset insert_example(const Dataset& data, std::size_t i, Example z) {
    if (i > data.size()) {
        throw std::out_of_range("insert_example: position " + std::to_string(i) + " past the end");
    }
    if (z.x.size() != data.dim()) {
        throw std::invalid_argument("insert_example: dimension mismatch");
    }
    std::vector<Example> examples = data.examples();
    examples.insert(examples.begin() + static_cast<std::ptrdiff_t>(i), std::move(z));
    return data.with_examples(std::move(examples));
}

}  // namespace stackstab
