#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "stackstab/core/synthetic.hpp"
#include "stackstab/learners/learner.hpp"
#include "stackstab/learners/linalg.hpp"
#include "stackstab/learners/logistic.hpp"

using namespace stackstab;

namespace {

// Gaussian elimination with partial pivoting on a small dense system.
std::vector<double> solve_by_hand(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(A[r][c]) > std::abs(A[pivot][c])) pivot = r;
        }
        std::swap(A[c], A[pivot]);
        std::swap(b[c], b[pivot]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t k = r + 1; k < n; ++k) s -= A[r][k] * x[k];
        x[r] = s / A[r][r];
    }
    return x;
}

std::vector<double> ridge_by_hand(const Dataset& data, double lambda) {
    const std::size_t d = data.dim();
    const double m = static_cast<double>(data.size());
    std::vector<std::vector<double>> A(d, std::vector<double>(d, 0.0));
    std::vector<double> b(d, 0.0);
    for (const auto& z : data.examples()) {
        for (std::size_t i = 0; i < d; ++i) {
            b[i] += z.x[i] * z.y;
            for (std::size_t j = 0; j < d; ++j) A[i][j] += z.x[i] * z.x[j];
        }
    }
    for (std::size_t i = 0; i < d; ++i) A[i][i] += lambda * m;
    return solve_by_hand(A, b);
}

const std::vector<double>& coefficients(const TrainedModel& model) {
    return std::get<LinearFit>(model.params()).weights;
}

double stump_error(const Dataset& data, std::span<const double> w, std::size_t f, double threshold, double polarity) {
    double err = 0.0, total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double pred = data[i].x[f] > threshold ? polarity : -polarity;
        total += w[i];
        if (pred != data[i].y) err += w[i];
    }
    return err / total;
}

}  // namespace

TEST_CASE("learner specs validate hyperparameters") {
    CHECK_THROWS(LearnerSpec::knn(0));
    CHECK_THROWS(LearnerSpec::ridge(0.0));
    CHECK_THROWS(LearnerSpec::ridge(-1.0));
    CHECK_THROWS(LearnerSpec::logistic(LogisticParams{0.01, 0.0}));
    CHECK_THROWS(LearnerSpec::logistic(LogisticParams{0.01, 0.1, 0}));
    CHECK_THROWS(LearnerSpec::logistic(LogisticParams{0.01, 0.1, 10, 0.0}));
    CHECK(LearnerSpec::ridge(1.0).is_linear());
    CHECK_FALSE(LearnerSpec::knn(1).is_linear());
    CHECK_FALSE(LearnerSpec::stump().supports(Task::regression));
    CHECK_FALSE(LearnerSpec::logistic().supports(Task::regression));
}

TEST_CASE("ridge with tiny lambda recovers the generator weights") {
    const LinearSpec spec{50, 3, 0.0};
    const Dataset data = gen_synthetic(spec, Seed{21});
    const SyntheticSource source(spec, Seed{21});
    const TrainedModel model = train(LearnerSpec::ridge(1e-8), data);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(coefficients(model)[j] - source.true_weights()[j]) < 1e-6);

    const Example fresh = source.draw_example(Seed{5});
    double noiseless = 0.0;
    for (std::size_t j = 0; j < 3; ++j) noiseless += source.true_weights()[j] * fresh.x[j];
    CHECK(std::abs(model.predict(fresh.x) - noiseless) < 1e-5);
}

TEST_CASE("ridge solves the lambda*m-scaled normal equations") {
    const Dataset data = gen_synthetic(LinearSpec{30, 4, 0.5}, Seed{3});
    for (double lambda : {0.01, 0.3, 5.0}) {
        const TrainedModel model = train(LearnerSpec::ridge(lambda), data);
        const auto hand = ridge_by_hand(data, lambda);
        for (std::size_t j = 0; j < hand.size(); ++j)
            CHECK(coefficients(model)[j] == doctest::Approx(hand[j]).epsilon(1e-10));

        // Residual of (X^T X + lambda m I) w - X^T y.
        const Eigen::MatrixXd X = linalg::design_matrix(data);
        const Eigen::VectorXd y = linalg::targets(data);
        const Eigen::Map<const Eigen::VectorXd> w(coefficients(model).data(), 4);
        const Eigen::MatrixXd A = X.transpose() * X + lambda * 30.0 * Eigen::MatrixXd::Identity(4, 4);
        const Eigen::VectorXd r = A * w - X.transpose() * y;
        CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-9 * A.lpNorm<Eigen::Infinity>());
    }
}

TEST_CASE("ridge with an intercept fits a shifted target") {
    std::vector<Example> ex;
    for (int i = 0; i < 20; ++i) ex.push_back({{static_cast<double>(i)}, 3.0 + 2.0 * i});
    const TrainedModel model = train(LearnerSpec::ridge(1e-10, true), Dataset(Task::regression, ex));
    const auto& fit = std::get<LinearFit>(model.params());
    CHECK(fit.weights[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.bias == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("weighted ridge equals ridge on replicated rows") {
    const Dataset data = gen_synthetic(LinearSpec{6, 2, 0.2}, Seed{8});
    const std::vector<double> w{2, 1, 0, 1, 3, 1};
    std::vector<Example> replicated;
    for (std::size_t i = 0; i < data.size(); ++i)
        for (int c = 0; c < static_cast<int>(w[i]); ++c) replicated.push_back(data[i]);
    // Weights are rescaled to sum to m, so the penalty keeps its lambda * (total
    // weight) form and matches the 8-row replicated set with the same lambda.
    const TrainedModel weighted = train(LearnerSpec::ridge(0.4), data, w);
    const TrainedModel rows = train(LearnerSpec::ridge(0.4), Dataset(Task::regression, replicated));
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(coefficients(weighted)[j] == doctest::Approx(coefficients(rows)[j]).epsilon(1e-9));
}

TEST_CASE("knn prediction") {
    const Dataset data(Task::binary, {{{0.0}, 1.0}, {{1.0}, 1.0}, {{2.0}, -1.0}, {{10.0}, -1.0}});
    const TrainedModel one = train(LearnerSpec::knn(1), data);
    for (const auto& z : data.examples()) CHECK(one.predict(z.x) == z.y);

    const TrainedModel three = train(LearnerSpec::knn(3), data);
    const std::vector<double> x{1.0};
    CHECK(three.predict(x) == doctest::Approx(1.0 / 3.0));

    const TrainedModel big = train(LearnerSpec::knn(10), data);
    CHECK(big.predict(x) == 0.0);  // k clamps to m; two votes each way

    const Dataset reg(Task::regression, {{{0.0}, 1.0}, {{1.0}, 3.0}, {{5.0}, 100.0}});
    CHECK(train(LearnerSpec::knn(2), reg).predict(std::vector<double>{0.4}) == 2.0);

    const Dataset mc(Task::multiclass, {{{0.0}, 2.0}, {{0.1}, 1.0}, {{0.2}, 1.0}, {{5.0}, 0.0}});
    CHECK(train(LearnerSpec::knn(3), mc).predict(std::vector<double>{0.0}) == 1.0);
    CHECK_THROWS(one.predict(std::vector<double>{1.0, 2.0}));
}

TEST_CASE("knn is invariant under permutation of distinct-distance data") {
    const Dataset data = gen_synthetic(BlobsSpec{30, 2, 1.0}, Seed{4});
    std::vector<Example> reversed(data.examples().rbegin(), data.examples().rend());
    const TrainedModel a = train(LearnerSpec::knn(5), data);
    const TrainedModel b = train(LearnerSpec::knn(5), Dataset(Task::binary, reversed));
    const SyntheticSource source(BlobsSpec{30, 2, 1.0}, Seed{4});
    for (int i = 0; i < 50; ++i) {
        const auto x = source.draw_example(derive(Seed{1}, "probe", i)).x;
        CHECK(a.predict(x) == b.predict(x));
    }
}

TEST_CASE("stump separates separable data") {
    const Dataset data(Task::binary, {{{-1.0}, -1.0}, {{-0.5}, -1.0}, {{0.5}, 1.0}, {{1.0}, 1.0}});
    const TrainedModel model = train(LearnerSpec::stump(), data);
    const auto& fit = std::get<StumpFit>(model.params());
    CHECK(fit.threshold > -0.5);
    CHECK(fit.threshold < 0.5);
    CHECK(fit.weighted_error == 0.0);
    for (const auto& z : data.examples()) CHECK(model.predict(z.x) == z.y);
}

TEST_CASE("stump error is minimal over the candidate set") {
    const Dataset data = gen_synthetic(BlobsSpec{40, 3, 1.0}, Seed{12});
    RandomStream s(Seed{13});
    std::vector<double> w(data.size());
    for (auto& v : w) v = s.uniform() + 0.01;
    const TrainedModel model = train(LearnerSpec::stump(), data, w);
    const double best = std::get<StumpFit>(model.params()).weighted_error;
    CHECK(stump_error(data, w, std::get<StumpFit>(model.params()).feature,
                      std::get<StumpFit>(model.params()).threshold,
                      std::get<StumpFit>(model.params()).polarity) == doctest::Approx(best).epsilon(1e-12));
    for (std::size_t f = 0; f < 3; ++f) {
        std::vector<double> values;
        for (const auto& z : data.examples()) values.push_back(z.x[f]);
        std::sort(values.begin(), values.end());
        std::vector<double> thresholds{-std::numeric_limits<double>::infinity(),
                                       std::numeric_limits<double>::infinity()};
        for (std::size_t i = 0; i + 1 < values.size(); ++i) thresholds.push_back(0.5 * (values[i] + values[i + 1]));
        for (double t : thresholds) {
            for (double pol : {1.0, -1.0}) CHECK(best <= stump_error(data, w, f, t, pol) + 1e-12);
        }
    }
}

TEST_CASE("logistic regression") {
    SUBCASE("mirror-symmetric data gives a zero intercept") {
        std::vector<Example> ex;
        RandomStream s(Seed{2});
        for (int i = 0; i < 20; ++i) {
            const std::vector<double> x{s.normal() + 1.0, s.normal()};
            const double y = s.uniform() < 0.8 ? 1.0 : -1.0;
            ex.push_back({x, y});
            ex.push_back({{-x[0], -x[1]}, -y});
        }
        const TrainedModel model = train(LearnerSpec::logistic(), Dataset(Task::binary, ex));
        CHECK(std::abs(std::get<LinearFit>(model.params()).bias) < 1e-6);
        CHECK(model.status().converged);
    }
    SUBCASE("objective never increases across accepted steps") {
        const Dataset data = gen_synthetic(BlobsSpec{40, 2, 1.0}, Seed{6});
        const Eigen::MatrixXd X = linalg::design_matrix(data);
        const Eigen::VectorXd y = linalg::targets(data);
        const Eigen::VectorXd p = Eigen::VectorXd::Constant(40, 1.0 / 40.0);
        double previous = std::numeric_limits<double>::infinity();
        for (std::size_t iters : {1, 2, 3, 5, 10, 20, 50, 100}) {
            GradientDescentOptions options{1.0, iters, 1e-12, true};
            const LogisticSolution sol = fit_logistic(X, y, p, 0.01, options);
            const double obj = logistic_objective(X, y, p, 0.01, sol.weights, sol.bias);
            CHECK(obj <= previous + 1e-15);
            previous = obj;
        }
    }
    SUBCASE("non-convergence is flagged, not fatal") {
        const Dataset data = gen_synthetic(BlobsSpec{40, 2, 1.0}, Seed{6});
        LogisticParams params;
        params.max_iters = 1;
        const TrainedModel model = train(LearnerSpec::logistic(params), data);
        CHECK_FALSE(model.status().converged);
    }
}

TEST_CASE("theoretical stability constants") {
    const LossKind c01 = LossKind::classification01();
    CHECK(*theoretical_stability(LearnerSpec::knn(5), 100, c01).value == doctest::Approx(0.05));
    CHECK(*theoretical_stability(LearnerSpec::ridge(2.0), 10, c01).value == doctest::Approx(0.05));
    CHECK_FALSE(theoretical_stability(LearnerSpec::stump(), 10, c01).value.has_value());
    CHECK_FALSE(theoretical_stability(LearnerSpec::logistic(), 10, c01).value.has_value());
    CHECK(*theoretical_stability(LearnerSpec::constant(1.0), 10, c01).value == 0.0);
    for (std::size_t m : {10, 33, 128}) {
        CHECK(*theoretical_stability(LearnerSpec::knn(3), 2 * m, c01).value ==
              *theoretical_stability(LearnerSpec::knn(3), m, c01).value / 2.0);
        CHECK(*theoretical_stability(LearnerSpec::ridge(0.5), 2 * m, c01).value ==
              *theoretical_stability(LearnerSpec::ridge(0.5), m, c01).value / 2.0);
    }
}
