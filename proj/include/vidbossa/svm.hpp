// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vidbossa/errors.hpp"

namespace vidbossa {

enum class Metric : uint8_t { L2 = 0, L1 = 1 };

Metric parse_metric(const std::string& name);
const char* metric_name(Metric m);

/// exp(-gamma * d(x, x')) kernel. gamma empty means "resolve from the
/// training data" (inverse of the mean pairwise distance).
struct KernelConfig {
    Metric metric = Metric::L2;
    std::optional<double> gamma; // nullopt = AUTO
    double C = 10.0;
};

struct SvmModel {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> alphas; // in [0, C]
    std::vector<int> labels;    // +1 / -1
    double bias = 0.0;
    Metric metric = Metric::L2;
    double gamma = 0.0; // resolved, > 0
    double C = 10.0;
    // Indices into the training set; filled by svm_train, not serialized.
    std::vector<uint32_t> support_indices;

    size_t dim() const { return support_vectors.empty() ? 0 : support_vectors[0].size(); }
};

double distance(std::span<const double> a, std::span<const double> b, Metric metric);

/// gamma = 1 / mean pairwise distance over all unordered pairs. Raises
/// ConfigError when every pair coincides (mean distance zero).
double gamma_auto(std::span<const std::vector<double>> train, Metric metric);

/// SMO dual optimization on the materialized kernel matrix, run to KKT
/// tolerance `tol`. Deterministic given `seed` (used only to vary the
/// fallback scan origin when the max-|E1-E2| pair makes no progress).
/// Training stops early after `max_passes` consecutive sweeps without an
/// alpha update.
SvmModel svm_train(std::span<const std::vector<double>> X, std::span<const int> y,
                   const KernelConfig& cfg, double tol = 1e-3, uint32_t max_passes = 200,
                   uint64_t seed = 1);

double svm_decision(const SvmModel& model, std::span<const double> x);
int svm_predict(const SvmModel& model, std::span<const double> x); // score 0 -> +1

/// Worst KKT violation over the training set; < tol after training.
double kkt_residual(const SvmModel& model, std::span<const std::vector<double>> X,
                    std::span<const int> y);

// Model file: magic "BSVM", u8 version=1, u8 metric, f64le gamma, f64le C,
// u32le n_sv, u32le dim, n_sv*dim f64le support vectors, n_sv f64le
// alpha*y coefficients, f64le bias.
SvmModel read_model_file(const std::filesystem::path& path);
void write_model_file(const SvmModel& model, const std::filesystem::path& path);

} // namespace vidbossa
