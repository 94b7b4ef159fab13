// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include <doctest.h>

#include <cmath>

#include "vidbossa/rng.hpp"
#include "vidbossa/svm.hpp"
#include "test_util.hpp"

using namespace vidbossa;

namespace {

// Two separated 2-D Gaussian blobs.
void make_blobs(Rng& rng, size_t per_class, std::vector<std::vector<double>>& X,
                std::vector<int>& y) {
    for (size_t i = 0; i < per_class; ++i) {
        double a, b;
        rng.next_gaussian_pair(a, b);
        X.push_back({a * 0.5 + 3.0, b * 0.5 + 3.0});
        y.push_back(1);
        rng.next_gaussian_pair(a, b);
        X.push_back({a * 0.5 - 3.0, b * 0.5 - 3.0});
        y.push_back(-1);
    }
}

double alpha_sum_y(const SvmModel& m) {
    double s = 0.0;
    for (size_t i = 0; i < m.alphas.size(); ++i) s += m.alphas[i] * m.labels[i];
    return s;
}

} // namespace

TEST_CASE("gamma_auto") {
    SUBCASE("pairwise distances {1,2,3} give gamma 0.5") {
        const std::vector<std::vector<double>> X = {{0.0}, {1.0}, {3.0}};
        CHECK(gamma_auto(X, Metric::L2) == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("two vectors at distance 4 give gamma 0.25") {
        const std::vector<std::vector<double>> X = {{0.0, 0.0}, {0.0, 4.0}};
        CHECK(gamma_auto(X, Metric::L2) == doctest::Approx(0.25).epsilon(1e-15));
    }
    SUBCASE("identical vectors are a configuration error") {
        const std::vector<std::vector<double>> X = {{1.0, 2.0}, {1.0, 2.0}};
        CHECK_THROWS_WITH_AS(gamma_auto(X, Metric::L2), doctest::Contains("gamma"),
                             ConfigError);
    }
    SUBCASE("kernel of a point with itself is 1") {
        const std::vector<double> x = {0.3, -0.7};
        CHECK(std::exp(-1.7 * distance(x, x, Metric::L2)) == 1.0);
    }
}

TEST_CASE("kernel values are symmetric and in (0, 1]") {
    Rng rng(1);
    const double gamma = 0.8;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> a(5), b(5);
        for (int i = 0; i < 5; ++i) {
            a[i] = rng.next_double() * 4 - 2;
            b[i] = rng.next_double() * 4 - 2;
        }
        const double kab = std::exp(-gamma * distance(a, b, Metric::L2));
        const double kba = std::exp(-gamma * distance(b, a, Metric::L2));
        CHECK(kab == kba);
        CHECK(kab > 0.0);
        CHECK(kab <= 1.0);
    }
}

TEST_CASE("two-point SVM matches the closed-form solution") {
    // alpha* = 1/(1 - K12), bias 0, scores +-(1 - K12)*alpha = +-1.
    const std::vector<std::vector<double>> X = {{0.0}, {1.0}};
    const std::vector<int> y = {1, -1};
    KernelConfig cfg;
    cfg.metric = Metric::L2;
    cfg.gamma = 0.5;
    cfg.C = 10.0;
    const SvmModel m = svm_train(X, y, cfg, 1e-5, 50, 1);

    const double k12 = std::exp(-0.5 * 1.0);
    const double alpha_star = 1.0 / (1.0 - k12);
    REQUIRE(m.alphas.size() == 2);
    CHECK(m.alphas[0] == doctest::Approx(alpha_star).epsilon(1e-6));
    CHECK(m.alphas[1] == doctest::Approx(alpha_star).epsilon(1e-6));
    CHECK(m.bias == doctest::Approx(0.0).epsilon(1e-6));

    const double s0 = svm_decision(m, X[0]);
    const double s1 = svm_decision(m, X[1]);
    CHECK(s0 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s1 == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(svm_predict(m, X[0]) == 1);
    CHECK(svm_predict(m, X[1]) == -1);
    CHECK(kkt_residual(m, X, y) < 1e-5);
}

TEST_CASE("separable blobs train to 100% accuracy with clean KKT state") {
    Rng rng(2);
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    make_blobs(rng, 20, X, y);
    KernelConfig cfg; // gamma auto, C = 10
    const SvmModel m = svm_train(X, y, cfg, 1e-3, 200, 7);

    for (size_t i = 0; i < X.size(); ++i) {
        CHECK(svm_predict(m, X[i]) == y[i]);
    }
    CHECK(kkt_residual(m, X, y) < 1e-3);
    CHECK(std::fabs(alpha_sum_y(m)) < 1e-6);
    for (double a : m.alphas) {
        CHECK(a >= 0.0);
        CHECK(a <= cfg.C);
    }
}

TEST_CASE("identical points with conflicting labels pin both alphas at C") {
    const std::vector<std::vector<double>> X = {{0.5, 0.5}, {0.5, 0.5}};
    const std::vector<int> y = {1, -1};
    KernelConfig cfg;
    cfg.gamma = 1.0;
    cfg.C = 0.25;
    const SvmModel m = svm_train(X, y, cfg, 1e-3, 20, 3);
    REQUIRE(m.alphas.size() == 2);
    CHECK(m.alphas[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(m.alphas[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(kkt_residual(m, X, y) < 1e-3);
}

TEST_CASE("decision function details") {
    SUBCASE("sign rule maps score 0 and positives to +1") {
        SvmModel m;
        m.gamma = 1.0;
        m.bias = 0.0;
        CHECK(svm_predict(m, std::vector<double>{}) == 1); // empty sum -> bias 0 -> +1
        m.bias = -0.3;
        CHECK(svm_decision(m, std::vector<double>{}) == -0.3);
        CHECK(svm_predict(m, std::vector<double>{}) == -1);
    }
    SUBCASE("prediction is invariant to support-vector storage order") {
        Rng rng(3);
        std::vector<std::vector<double>> X;
        std::vector<int> y;
        make_blobs(rng, 10, X, y);
        KernelConfig cfg;
        const SvmModel m = svm_train(X, y, cfg, 1e-3, 100, 5);
        REQUIRE(m.support_vectors.size() >= 2);
        SvmModel rev = m;
        std::reverse(rev.support_vectors.begin(), rev.support_vectors.end());
        std::reverse(rev.alphas.begin(), rev.alphas.end());
        std::reverse(rev.labels.begin(), rev.labels.end());
        const std::vector<double> probe = {0.1, -0.4};
        CHECK(svm_decision(m, probe) == doctest::Approx(svm_decision(rev, probe)).epsilon(1e-12));
    }
    SUBCASE("dimension mismatch is rejected") {
        Rng rng(4);
        std::vector<std::vector<double>> X;
        std::vector<int> y;
        make_blobs(rng, 5, X, y);
        const SvmModel m = svm_train(X, y, KernelConfig{}, 1e-3, 100, 5);
        CHECK_THROWS_AS(svm_decision(m, std::vector<double>{1.0, 2.0, 3.0}),
                        ContractViolation);
    }
}

TEST_CASE("svm_train input validation") {
    const std::vector<std::vector<double>> X = {{0.0}, {1.0}};
    CHECK_THROWS_AS(svm_train(X, std::vector<int>{1, 1}, KernelConfig{}), ConfigError);
    CHECK_THROWS_AS(svm_train(X, std::vector<int>{1, 2}, KernelConfig{}), ConfigError);
    const std::vector<std::vector<double>> bad = {{0.0}, {std::nan("")}};
    CHECK_THROWS_AS(svm_train(bad, std::vector<int>{1, -1}, KernelConfig{}), ConfigError);
}

TEST_CASE("BSVM files round-trip the model") {
    TempDir tmp("bsvm");
    Rng rng(5);
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    make_blobs(rng, 8, X, y);
    KernelConfig cfg;
    cfg.metric = Metric::L1;
    const SvmModel m = svm_train(X, y, cfg, 1e-3, 100, 5);
    write_model_file(m, tmp / "m.bsvm");
    const SvmModel back = read_model_file(tmp / "m.bsvm");
    CHECK(back.metric == m.metric);
    CHECK(back.gamma == m.gamma);
    CHECK(back.C == m.C);
    CHECK(back.bias == m.bias);
    CHECK(back.support_vectors == m.support_vectors);
    CHECK(back.labels == m.labels);
    REQUIRE(back.alphas.size() == m.alphas.size());
    for (size_t i = 0; i < m.alphas.size(); ++i) {
        CHECK(back.alphas[i] == doctest::Approx(m.alphas[i]).epsilon(1e-15));
    }
    const std::vector<double> probe = {0.2, 0.3};
    CHECK(svm_decision(back, probe) == doctest::Approx(svm_decision(m, probe)).epsilon(1e-12));
}
