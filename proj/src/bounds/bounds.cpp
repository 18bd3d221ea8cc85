#include "stackstab/bounds/bounds.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/binomial.hpp>
#include <boost/multiprecision/cpp_int.hpp>

namespace stackstab {

namespace {

void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

void require_nonnegative(double value, const std::string& name) {
    require(value >= 0.0 && std::isfinite(value), name + " must be a finite value >= 0");
}

void require_delta(double delta) {
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
}

// Pascal's triangle row T; C(64, 32) < 2^63 so every entry fits.
std::vector<std::uint64_t> binomial_row(std::size_t T) {
    std::vector<std::uint64_t> row{1};
    for (std::size_t n = 1; n <= T; ++n) {
        std::vector<std::uint64_t> next(n + 1, 1);
        for (std::size_t k = 1; k < n; ++k) next[k] = row[k - 1] + row[k];
        row = std::move(next);
    }
    return row;
}

double product(std::span<const double> values) {
    double p = 1.0;
    for (double v : values) p *= v;
    return p;
}

std::string describe_real(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

std::optional<double> BoundResult::input(const std::string& name) const {
    for (const auto& [key, value] : inputs) {
        if (key == name) return value;
    }
    return std::nullopt;
}

BoundResult stacking_bound(double combiner_beta, std::span<const double> base_betas) {
    require_nonnegative(combiner_beta, "combiner beta");
    require(!base_betas.empty(), "stacking bound needs at least one base beta");
    BoundResult r;
    r.formula = "stacking: beta(g) * prod_t beta(f_t)";
    r.inputs.emplace_back("combiner_beta", combiner_beta);
    for (std::size_t t = 0; t < base_betas.size(); ++t) {
        require_nonnegative(base_betas[t], "base beta " + std::to_string(t));
        r.inputs.emplace_back("base_beta_" + std::to_string(t), base_betas[t]);
    }
    r.inputs.emplace_back("T", static_cast<double>(base_betas.size()));
    r.value = combiner_beta * product(base_betas);
    return r;
}

double inclusion_tail(std::size_t T, std::size_t s, double q) {
    require(q >= 0.0 && q <= 1.0, "inclusion probability q must lie in [0, 1]");
    require(s <= T, "threshold s must satisfy s <= T");
    if (s == T) return 0.0;
    if (T > 64) {
        namespace bm = boost::math;
        return bm::cdf(bm::complement(bm::binomial_distribution<double>(static_cast<double>(T), q),
                                      static_cast<double>(s)));
    }
    const std::vector<std::uint64_t> row = binomial_row(T);
    double total = 0.0;
    for (std::size_t k = s + 1; k <= T; ++k) {
        total += static_cast<double>(row[k]) * std::pow(q, static_cast<double>(k)) *
                 std::pow(1.0 - q, static_cast<double>(T - k));
    }
    return std::min(total, 1.0);
}

// ---------------------------------------------------------------------------

double BootstrapInclusion::probability(std::size_t m) const {
    require(m >= 1, "m must be >= 1");
    const double md = static_cast<double>(m);
    switch (kind) {
        case Kind::scaled: return std::min(1.0, 0.632 / md);
        case Kind::standard: return 1.0 - std::pow(1.0 - 1.0 / md, md);
        case Kind::custom:
            require(q >= 0.0 && q <= 1.0, "custom q must lie in [0, 1]");
            return q;
    }
    return 0.0;
}

std::string BootstrapInclusion::token() const {
    switch (kind) {
        case Kind::scaled: return "paper";
        case Kind::standard: return "standard";
        case Kind::custom: return "custom";
    }
    return "unknown";
}

BootstrapInclusion BootstrapInclusion::from_token(const std::string& token, double q) {
    if (token == "paper") return {Kind::scaled, 0.0};
    if (token == "standard") return {Kind::standard, 0.0};
    if (token == "custom") return {Kind::custom, q};
    throw std::invalid_argument("unknown bootstrap q_mode '" + token + "' (expected paper, standard or custom)");
}

double SubsampleInclusion::probability(std::size_t p, std::size_t m) const {
    require(p >= 1 && p <= m, "subsample size p must lie in [1, m]");
    switch (kind) {
        case Kind::inverse_p: return 1.0 / static_cast<double>(p);
        case Kind::p_over_m: return static_cast<double>(p) / static_cast<double>(m);
        case Kind::custom:
            require(q >= 0.0 && q <= 1.0, "custom q must lie in [0, 1]");
            return q;
    }
    return 0.0;
}

std::string SubsampleInclusion::token() const {
    switch (kind) {
        case Kind::inverse_p: return "paper-text";
        case Kind::p_over_m: return "paper-example";
        case Kind::custom: return "custom";
    }
    return "unknown";
}

SubsampleInclusion SubsampleInclusion::from_token(const std::string& token, double q) {
    if (token == "paper-text") return {Kind::inverse_p, 0.0};
    if (token == "paper-example") return {Kind::p_over_m, 0.0};
    if (token == "custom") return {Kind::custom, q};
    throw std::invalid_argument("unknown subsample q_mode '" + token +
                                "' (expected paper-text, paper-example or custom)");
}

namespace {

BoundResult sampled_stacking(const char* name, std::size_t T, double q, double combiner_beta,
                             std::span<const double> base_betas) {
    require(T >= 1, "T must be >= 1");
    require(base_betas.size() == T, "expected one base beta per member (T=" + std::to_string(T) + ", got " +
                                        std::to_string(base_betas.size()) + ")");
    BoundResult inner = stacking_bound(combiner_beta, base_betas);
    const double tail = inclusion_tail(T, T / 2, q);
    BoundResult r;
    r.formula = std::string(name) + ": P(N_i > floor(T/2)) * beta(g) * prod_t beta(f_t)";
    r.inputs = inner.inputs;
    r.inputs.emplace_back("q", q);
    r.inputs.emplace_back("inclusion_tail", tail);
    r.inputs.emplace_back("stacking_bound", inner.value);
    r.value = tail * inner.value;
    r.loss = inner.loss;
    return r;
}

}  // namespace

BoundResult bag_stacking_bound(std::size_t T, std::size_t m, double combiner_beta, std::span<const double> base_betas,
                               BootstrapInclusion q) {
    BoundResult r = sampled_stacking("bag-stacking", T, q.probability(m), combiner_beta, base_betas);
    r.inputs.emplace_back("m", static_cast<double>(m));
    r.q_mode = q.token();
    if (q.kind == BootstrapInclusion::Kind::scaled) r.notes.push_back("q = 0.632/m");
    if (q.kind == BootstrapInclusion::Kind::standard) r.notes.push_back("q = 1 - (1 - 1/m)^m");
    return r;
}

BoundResult dag_stacking_bound(std::size_t T, std::size_t p, std::size_t m, double combiner_beta,
                               std::span<const double> base_betas, SubsampleInclusion q) {
    BoundResult r = sampled_stacking("dag-stacking", T, q.probability(p, m), combiner_beta, base_betas);
    r.inputs.emplace_back("p", static_cast<double>(p));
    r.inputs.emplace_back("m", static_cast<double>(m));
    r.q_mode = q.token();
    if (q.kind == SubsampleInclusion::Kind::inverse_p) r.notes.push_back("q = 1/p");
    if (q.kind == SubsampleInclusion::Kind::p_over_m) r.notes.push_back("q = p/m");
    return r;
}

// ---------------------------------------------------------------------------

GammaSchedule GammaSchedule::constant(double value) {
    require_nonnegative(value, "gamma");
    return GammaSchedule{[value](std::size_t) { return value; }, "constant(" + describe_real(value) + ")"};
}

GammaSchedule GammaSchedule::inverse(double c) {
    require_nonnegative(c, "gamma coefficient");
    return GammaSchedule{[c](std::size_t k) { return c / static_cast<double>(k); },
                         "inverse(" + describe_real(c) + "/k)"};
}

std::vector<double> occupancy_distribution(std::size_t m) {
    using boost::multiprecision::cpp_int;
    using boost::multiprecision::cpp_rational;
    require(m >= 1, "m must be >= 1");
    // surjections[k] = number of maps from m draws onto exactly k chosen values
    // = k! S(m, k), via S(n, k) = k S(n-1, k) + S(n-1, k-1).
    std::vector<cpp_int> stirling(m + 1, 0);
    stirling[0] = 1;
    for (std::size_t n = 1; n <= m; ++n) {
        for (std::size_t k = n; k >= 1; --k) stirling[k] = stirling[k] * static_cast<unsigned>(k) + stirling[k - 1];
        stirling[0] = 0;
    }
    cpp_int total = 1;
    for (std::size_t n = 0; n < m; ++n) total *= static_cast<unsigned>(m);

    std::vector<double> dist(m);
    cpp_int falling = 1;  // m (m-1) ... (m-k+1) = C(m,k) k!
    for (std::size_t k = 1; k <= m; ++k) {
        falling *= static_cast<unsigned>(m - k + 1);
        const cpp_rational p(falling * stirling[k], total);
        dist[k - 1] = p.convert_to<double>();
    }
    return dist;
}

BoundResult bagging_stability_bound(const GammaSchedule& gamma, std::size_t m, double B, BoundTask task,
                                    OccupancyMode mode) {
    require(m >= 1, "m must be >= 1");
    if (task == BoundTask::regression) require(B > 0.0 && std::isfinite(B), "B must be > 0");
    const double lead = task == BoundTask::regression ? B : 2.0;
    const double md = static_cast<double>(m);

    BoundResult r;
    r.inputs = {{"m", md}, {"leading_constant", lead}};
    if (task == BoundTask::regression) r.inputs.emplace_back("B", B);
    r.notes.push_back("gamma schedule " + gamma.description);

    const bool exact = mode == OccupancyMode::exact || (mode == OccupancyMode::automatic && m <= kExactOccupancyLimit);
    if (exact) {
        require(m <= 200, "exact occupancy distribution limited to m <= 200");
        const std::vector<double> dist = occupancy_distribution(m);
        double total = 0.0;
        for (std::size_t k = 1; k <= m; ++k) {
            const double g = gamma.at(k);
            require_nonnegative(g, "gamma_" + std::to_string(k));
            total += static_cast<double>(k) * g / md * dist[k - 1];
        }
        r.value = lead * total;
        r.formula = "bagging." + to_string(task) + ": C * sum_k (k gamma_k / m) P[d(r)=k]";
        r.notes.push_back("occupancy mode exact");
    } else {
        const auto k = static_cast<std::size_t>(std::max(1L, std::lround(0.632 * md)));
        const double g = gamma.at(k);
        require_nonnegative(g, "gamma_" + std::to_string(k));
        r.value = lead * 0.632 * g;
        r.inputs.emplace_back("k_approx", static_cast<double>(k));
        r.formula = "bagging." + to_string(task) + ": C * 0.632 gamma_{round(0.632 m)}";
        r.notes.push_back("occupancy mode approximate");
    }
    if (task == BoundTask::classification) r.notes.push_back("stability w.r.t. the l1 loss");
    return r;
}

BoundResult subbagging_stability_bound(double gamma_p, std::size_t p, std::size_t m, double B, BoundTask task) {
    require(p >= 1 && p <= m, "subsample size p must lie in [1, m]");
    require_nonnegative(gamma_p, "gamma_p");
    if (task == BoundTask::regression) require(B > 0.0 && std::isfinite(B), "B must be > 0");
    const double lead = task == BoundTask::regression ? B : 2.0;
    BoundResult r;
    r.formula = "subbagging." + to_string(task) + ": C * gamma_p * p / m";
    r.inputs = {{"gamma_p", gamma_p},
                {"p", static_cast<double>(p)},
                {"m", static_cast<double>(m)},
                {"leading_constant", lead}};
    if (task == BoundTask::regression) r.inputs.emplace_back("B", B);
    r.value = lead * gamma_p * static_cast<double>(p) / static_cast<double>(m);
    return r;
}

BoundResult combiner_on_bagging_bound(double combiner_beta, double B, const BoundResult& inner) {
    require_nonnegative(combiner_beta, "combiner beta");
    require_nonnegative(B, "B");
    const bool regression = inner.formula.rfind("bagging.regression", 0) == 0 ||
                            inner.formula.rfind("subbagging.regression", 0) == 0;
    const bool classification = inner.formula.rfind("bagging.classification", 0) == 0 ||
                                inner.formula.rfind("subbagging.classification", 0) == 0;
    require(regression || classification, "inner bound must come from bagging or subbagging");
    const double extra = classification ? B : 1.0;
    BoundResult r;
    r.formula = "combiner-on-" + inner.formula.substr(0, inner.formula.find(':')) + ": beta(g) * inner" +
                (classification ? " * B" : "");
    r.inputs = {{"combiner_beta", combiner_beta}, {"B", B}, {"inner", inner.value}};
    r.notes = inner.notes;
    r.value = combiner_beta * extra * inner.value;
    return r;
}

// ---------------------------------------------------------------------------

std::string to_string(GenBoundKind kind) {
    switch (kind) {
        case GenBoundKind::hypothesis: return "hypothesis";
        case GenBoundKind::pointwise: return "pointwise";
        case GenBoundKind::uniform: return "uniform";
    }
    return "unknown";
}

std::string to_string(BoundTask task) {
    return task == BoundTask::regression ? "regression" : "classification";
}

BoundResult gen_bound(GenBoundKind kind, double observed_error, double beta, double M, std::size_t m, double delta) {
    require_delta(delta);
    require(M > 0.0 && std::isfinite(M), "M must be > 0");
    require_nonnegative(beta, "beta");
    require(m >= 1, "m must be >= 1");
    require(observed_error >= 0.0 && observed_error <= M, "observed error must lie in [0, M]");
    const double md = static_cast<double>(m);

    BoundResult r;
    r.inputs = {{"observed_error", observed_error}, {"beta", beta}, {"M", M}, {"m", md}, {"delta", delta}};
    switch (kind) {
        case GenBoundKind::hypothesis:
            r.formula = "hypothesis: R_loo + sqrt((M^2 + 6 M m beta) / (2 m delta))";
            r.value = observed_error + std::sqrt((M * M + 6.0 * M * md * beta) / (2.0 * md * delta));
            break;
        case GenBoundKind::pointwise:
            r.formula = "pointwise: R_emp + sqrt((M^2 + 12 M m beta) / (2 m delta))";
            r.value = observed_error + std::sqrt((M * M + 12.0 * M * md * beta) / (2.0 * md * delta));
            break;
        case GenBoundKind::uniform:
            r.formula = "uniform: R_emp + 2 beta + (4 m beta + M) sqrt(log(1/delta) / (2 m))";
            r.value = observed_error + 2.0 * beta + (4.0 * md * beta + M) * std::sqrt(std::log(1.0 / delta) / (2.0 * md));
            break;
    }
    return r;
}

BoundResult gen_bound_subbagging(SubbaggingGenVariant variant, double observed_error, double gamma, std::size_t p,
                                 std::size_t m, double M, double B, double delta) {
    require_delta(delta);
    require(M > 0.0 && std::isfinite(M), "M must be > 0");
    require_nonnegative(gamma, "gamma");
    require_nonnegative(B, "B");
    require(p >= 1 && p <= m, "subsample size p must lie in [1, m]");
    require(observed_error >= 0.0 && observed_error <= M, "observed error must lie in [0, M]");
    const double md = static_cast<double>(m);
    const double pd = static_cast<double>(p);
    BoundResult r;
    r.formula = variant == SubbaggingGenVariant::loo
                    ? "subbagging-loo: R_loo + sqrt((2 M^2 + 12 M B p gamma_p) / (m delta))"
                    : "subbagging-emp: R_emp + sqrt((2 M^2 + 12 M B p gamma'_p) / (m delta))";
    r.inputs = {{"observed_error", observed_error}, {"gamma", gamma}, {"p", pd}, {"m", md},
                {"M", M},                           {"B", B},         {"delta", delta}};
    r.value = observed_error + std::sqrt((2.0 * M * M + 12.0 * M * B * pd * gamma) / (md * delta));
    return r;
}

}  // namespace stackstab
