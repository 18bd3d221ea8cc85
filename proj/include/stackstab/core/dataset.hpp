#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stackstab {

enum class Task { regression, binary, multiclass };

std::string_view to_string(Task task) noexcept;
Task task_from_string(std::string_view name);

/// One training pair z = (x, y). For binary tasks y is -1 or +1; for multiclass
/// tasks y is a class index 0..K-1.
struct Example {
    std::vector<double> x;
    double y = 0.0;

    friend bool operator==(const Example&, const Example&) = default;
};

/// Ordered, immutable training set. Order is part of the identity: removal and
/// replacement operate by position.
class Dataset {
public:
    /// `labels` is the declared label set for classification. When empty it is
    /// filled with {-1, +1} (binary) or the observed class indices (multiclass).
    Dataset(Task task, std::vector<Example> examples, std::vector<double> labels = {});

    std::size_t size() const noexcept { return examples_.size(); }
    std::size_t dim() const noexcept { return examples_.front().x.size(); }
    Task task() const noexcept { return task_; }

    const Example& operator[](std::size_t i) const { return examples_[i]; }
    const std::vector<Example>& examples() const noexcept { return examples_; }
    std::span<const double> labels() const noexcept { return labels_; }

    /// Display names of the original labels (CSV ingestion), parallel to labels().
    const std::vector<std::string>& label_names() const noexcept { return label_names_; }
    void set_label_names(std::vector<std::string> names);

    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    void set_feature_names(std::vector<std::string> names);

    std::size_t num_classes() const noexcept { return labels_.size(); }

    /// Same task, label set and names, different examples.
    Dataset with_examples(std::vector<Example> examples) const;

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.task_ == b.task_ && a.examples_ == b.examples_ && a.labels_ == b.labels_;
    }

private:
    Task task_;
    std::vector<Example> examples_;
    std::vector<double> labels_;
    std::vector<std::string> label_names_;
    std::vector<std::string> feature_names_;
};

/// D with the i-th example removed; throws when the result would be empty.
Dataset remove_example(const Dataset& data, std::size_t i);

/// D with the i-th example replaced by z (kept at position i).
Dataset replace_example(const Dataset& data, std::size_t i, Example z);

/// Inverse of remove_example: inserts z so that it ends up at position i.
Dataset insert_example(const Dataset& data, std::size_t i, Example z);

}  // namespace stackstab
