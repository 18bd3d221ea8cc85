#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stackstab/core/loss.hpp"

namespace stackstab {

/// Value of a stability or generalization bound together with everything that
/// produced it.
struct BoundResult {
    double value = 0.0;
    std::string formula;
    std::vector<std::pair<std::string, double>> inputs;
    std::vector<std::string> notes;
    std::string q_mode;                  // inclusion-probability preset, when one was used
    std::optional<LossKind::Kind> loss;  // loss the bound is stated for, if specific

    std::optional<double> input(const std::string& name) const;
};

/// beta(g) * prod_t beta(f_t): stability of stacking with independently trained
/// bases and combiner.
BoundResult stacking_bound(double combiner_beta, std::span<const double> base_betas);

/// P(N > s) for N ~ Binomial(T, q): sum_{k=s+1}^{T} C(T,k) q^k (1-q)^(T-k).
/// Binomial coefficients are exact 64-bit integers for T <= 64.
double inclusion_tail(std::size_t T, std::size_t s, double q);

/// Per-replicate inclusion probability for bootstrap replicates.
struct BootstrapInclusion {
    enum class Kind {
        scaled,    // 0.632 / m   (token "paper", the default)
        standard,  // 1 - (1 - 1/m)^m
        custom,    // caller-supplied q
    };
    Kind kind = Kind::scaled;
    double q = 0.0;  // custom only

    double probability(std::size_t m) const;
    std::string token() const;
    static BootstrapInclusion from_token(const std::string& token, double q = 0.0);
};

/// Per-replicate inclusion probability for size-p subsamples.
struct SubsampleInclusion {
    enum class Kind {
        inverse_p,  // 1 / p       (token "paper-text")
        p_over_m,   // p / m       (token "paper-example", the default)
        custom,
    };
    Kind kind = Kind::p_over_m;
    double q = 0.0;

    double probability(std::size_t p, std::size_t m) const;
    std::string token() const;
    static SubsampleInclusion from_token(const std::string& token, double q = 0.0);
};

/// P(N_i > floor(T/2)) * stacking_bound, N_i ~ Binomial(T, q).
BoundResult bag_stacking_bound(std::size_t T, std::size_t m, double combiner_beta, std::span<const double> base_betas,
                               BootstrapInclusion q = {});

BoundResult dag_stacking_bound(std::size_t T, std::size_t p, std::size_t m, double combiner_beta,
                               std::span<const double> base_betas, SubsampleInclusion q = {});

enum class BoundTask { regression, classification };

/// k -> gamma_k, the base algorithm's stability at training size k.
struct GammaSchedule {
    std::function<double(std::size_t)> at;
    std::string description;

    static GammaSchedule constant(double value);
    /// gamma_k = c / k (k-NN: c = k_nn; ridge: c = 1 / lambda).
    static GammaSchedule inverse(double c);
};

enum class OccupancyMode { automatic, exact, approximate };

/// Largest m for which `automatic` uses the exact occupancy distribution.
inline constexpr std::size_t kExactOccupancyLimit = 30;

/// P[d(r) = k], k = 1..m, for the number d(r) of distinct indices among m uniform
/// draws with replacement from m. Exact rational arithmetic; element k-1 holds k.
std::vector<double> occupancy_distribution(std::size_t m);

/// C * sum_k (k gamma_k / m) P[d(r) = k] with C = B (regression) or 2
/// (classification). `approximate` replaces the sum with 0.632 gamma_{round(0.632 m)}.
BoundResult bagging_stability_bound(const GammaSchedule& gamma, std::size_t m, double B, BoundTask task,
                                    OccupancyMode mode = OccupancyMode::automatic);

/// B gamma_p p / m (regression) or 2 gamma_p p / m (classification).
BoundResult subbagging_stability_bound(double gamma_p, std::size_t p, std::size_t m, double B, BoundTask task);

/// A stable combiner on top of (sub)bagging: combiner_beta times the inner bound,
/// with the Lipschitz constant B entering exactly once (the regression inner
/// bounds already carry it, the classification ones do not).
BoundResult combiner_on_bagging_bound(double combiner_beta, double B, const BoundResult& inner);

enum class GenBoundKind { hypothesis, pointwise, uniform };

/// hypothesis: R_loo + sqrt((M^2 + 6 M m beta) / (2 m delta))
/// pointwise:  R_emp + sqrt((M^2 + 12 M m beta) / (2 m delta))
/// uniform:    R_emp + 2 beta + (4 m beta + M) sqrt(log(1/delta) / (2 m))
BoundResult gen_bound(GenBoundKind kind, double observed_error, double beta, double M, std::size_t m, double delta);

enum class SubbaggingGenVariant { loo, emp };

/// observed + sqrt((2 M^2 + 12 M B p gamma) / (m delta)), gamma = gamma_p (loo)
/// or the pointwise constant gamma'_p (emp).
BoundResult gen_bound_subbagging(SubbaggingGenVariant variant, double observed_error, double gamma, std::size_t p,
                                 std::size_t m, double M, double B, double delta);

std::string to_string(GenBoundKind kind);
std::string to_string(BoundTask task);

}  // namespace stackstab
