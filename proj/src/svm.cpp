// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "vidbossa/io_util.hpp"
#include "vidbossa/kernels.hpp"
#include "vidbossa/rng.hpp"

namespace vidbossa {

Metric parse_metric(const std::string& name) {
    if (name == "l2") return Metric::L2;
    if (name == "l1") return Metric::L1;
    throw ConfigError("unknown metric \"" + name + "\" (expected l2 or l1)");
}

const char* metric_name(Metric m) {
    return m == Metric::L2 ? "l2" : "l1";
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
    if (a.size() != b.size()) {
        throw ContractViolation("distance: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
    }
    return metric == Metric::L2 ? kern::l2_distance(a.data(), b.data(), a.size())
                                : kern::l1_distance(a.data(), b.data(), a.size());
}

double gamma_auto(std::span<const std::vector<double>> train, Metric metric) {
    if (train.size() < 2) {
        throw ConfigError("gamma_auto: need at least 2 training vectors");
    }
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < train.size(); ++i) {
        for (size_t j = i + 1; j < train.size(); ++j) {
            sum += distance(train[i], train[j], metric);
            ++pairs;
        }
    }
    const double mean = sum / static_cast<double>(pairs);
    if (mean <= 0.0) {
        throw ConfigError("gamma_auto: mean pairwise distance is zero (all training vectors "
                          "identical); set gamma explicitly or diversify the training set");
    }
    return 1.0 / mean;
}

namespace {

// Platt's SMO over a materialized kernel matrix, with an error cache kept
// incrementally up to date. The eta >= 0 case is handled by evaluating the
// objective at both clip bounds, so degenerate pairs (identical points)
// still make progress.
class SmoSolver {
public:
    SmoSolver(std::span<const std::vector<double>> X, std::span<const int> y, double C,
              Metric metric, double gamma, double tol, uint32_t max_passes, uint64_t seed)
        : n_(X.size()), y_(y.begin(), y.end()), C_(C), tol_(tol), max_passes_(max_passes),
          rng_(seed) {
        K_.assign(n_ * n_, 0.0);
        for (size_t i = 0; i < n_; ++i) {
            K_[i * n_ + i] = 1.0;
            for (size_t j = i + 1; j < n_; ++j) {
                const double k = std::exp(-gamma * distance(X[i], X[j], metric));
                K_[i * n_ + j] = k;
                K_[j * n_ + i] = k;
            }
        }
        alpha_.assign(n_, 0.0);
        errors_.assign(n_, 0.0);
        for (size_t i = 0; i < n_; ++i) errors_[i] = -y_[i]; // f = 0 initially
    }

    void solve() {
        uint32_t quiet_passes = 0;
        while (quiet_passes < max_passes_) {
            size_t changed = 0;
            for (size_t i = 0; i < n_; ++i) {
                changed += examine(i) ? 1 : 0;
            }
            quiet_passes = changed == 0 ? quiet_passes + 1 : 0;
            if (changed == 0 && !has_violator()) break;
        }
    }

    std::vector<double> take_alpha() { return std::move(alpha_); }
    double bias() const { return b_; }

private:
    double f(size_t i) const { return errors_[i] + y_[i]; }

    bool violates(size_t i) const {
        const double r = errors_[i] * y_[i]; // y*f - 1
        return (r < -tol_ && alpha_[i] < C_) || (r > tol_ && alpha_[i] > 0.0);
    }

    bool has_violator() const {
        for (size_t i = 0; i < n_; ++i) {
            if (violates(i)) return true;
        }
        return false;
    }

    bool examine(size_t i2) {
        if (!violates(i2)) return false;

        // Second-choice heuristic: maximize |E1 - E2|, ties to lowest index.
        size_t best = n_;
        double best_gap = -1.0;
        for (size_t i1 = 0; i1 < n_; ++i1) {
            if (i1 == i2) continue;
            const double gap = std::fabs(errors_[i1] - errors_[i2]);
            if (gap > best_gap) {
                best_gap = gap;
                best = i1;
            }
        }
        if (best < n_ && take_step(best, i2)) return true;

        // Fall back to a full scan from a seeded random origin.
        const size_t start = static_cast<size_t>(rng_.next_below(n_));
        for (size_t k = 0; k < n_; ++k) {
            const size_t i1 = (start + k) % n_;
            if (i1 == i2) continue;
            if (take_step(i1, i2)) return true;
        }
        return false;
    }

    bool take_step(size_t i1, size_t i2) {
        const double a1_old = alpha_[i1];
        const double a2_old = alpha_[i2];
        const int y1 = y_[i1], y2 = y_[i2];
        const double E1 = errors_[i1], E2 = errors_[i2];
        const double s = y1 * y2;

        double L, H;
        if (y1 != y2) {
            L = std::max(0.0, a2_old - a1_old);
            H = std::min(C_, C_ + a2_old - a1_old);
        } else {
            L = std::max(0.0, a1_old + a2_old - C_);
            H = std::min(C_, a1_old + a2_old);
        }
        if (L >= H) return false;

        const double k11 = K_[i1 * n_ + i1];
        const double k12 = K_[i1 * n_ + i2];
        const double k22 = K_[i2 * n_ + i2];
        const double eta = k11 + k22 - 2.0 * k12;

        double a2;
        if (eta > 0.0) {
            a2 = a2_old + y2 * (E1 - E2) / eta;
            a2 = std::clamp(a2, L, H);
        } else {
            // Objective at the clip bounds (Platt's formulation; E here is
            // f(x)-y with the bias included, hence the -b_ correction).
            const double f1 = y1 * (E1 - b_) - a1_old * k11 - s * a2_old * k12;
            const double f2 = y2 * (E2 - b_) - s * a1_old * k12 - a2_old * k22;
            const double L1 = a1_old + s * (a2_old - L);
            const double H1 = a1_old + s * (a2_old - H);
            const double objL =
                L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12;
            const double objH =
                H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12;
            if (objL < objH - 1e-12)
                a2 = L;
            else if (objH < objL - 1e-12)
                a2 = H;
            else
                return false;
        }
        if (a2 < 1e-10) a2 = 0.0;
        if (a2 > C_ - 1e-10) a2 = C_;
        if (std::fabs(a2 - a2_old) < 1e-12 * (a2 + a2_old + 1e-12)) return false;

        const double a1 = a1_old + s * (a2_old - a2);

        const double da1 = a1 - a1_old;
        const double da2 = a2 - a2_old;
        const double b1 =
            b_ - E1 - y1 * da1 * k11 - y2 * da2 * k12;
        const double b2 =
            b_ - E2 - y1 * da1 * k12 - y2 * da2 * k22;
        double b_new;
        if (a1 > 0.0 && a1 < C_)
            b_new = b1;
        else if (a2 > 0.0 && a2 < C_)
            b_new = b2;
        else
            b_new = 0.5 * (b1 + b2);
        const double db = b_new - b_;

        alpha_[i1] = a1;
        alpha_[i2] = a2;
        b_ = b_new;
        for (size_t k = 0; k < n_; ++k) {
            errors_[k] += y1 * da1 * K_[i1 * n_ + k] + y2 * da2 * K_[i2 * n_ + k] + db;
        }
        return true;
    }

    size_t n_;
    std::vector<int> y_;
    double C_;
    double tol_;
    uint32_t max_passes_;
    Rng rng_;
    std::vector<double> K_;
    std::vector<double> alpha_;
    std::vector<double> errors_; // E_i = f(x_i) - y_i
    double b_ = 0.0;
};

} // namespace

SvmModel svm_train(std::span<const std::vector<double>> X, std::span<const int> y,
                   const KernelConfig& cfg, double tol, uint32_t max_passes, uint64_t seed) {
    if (X.size() != y.size() || X.size() < 2) {
        throw ConfigError("svm_train: need >= 2 samples with one label each");
    }
    bool has_pos = false, has_neg = false;
    for (int l : y) {
        if (l == 1)
            has_pos = true;
        else if (l == -1)
            has_neg = true;
        else
            throw ConfigError("svm_train: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) {
        throw ConfigError("svm_train: training set contains a single class");
    }
    for (const auto& x : X) {
        for (double v : x) {
            if (!std::isfinite(v)) throw ConfigError("svm_train: non-finite feature value");
        }
        if (x.size() != X[0].size()) {
            throw ContractViolation("svm_train: inconsistent feature dimensions");
        }
    }
    if (cfg.C <= 0.0) throw ConfigError("svm_train: C must be > 0");

    const double gamma = cfg.gamma ? *cfg.gamma : gamma_auto(X, cfg.metric);
    if (gamma <= 0.0) throw ConfigError("svm_train: gamma must be > 0");

    SmoSolver solver(X, y, cfg.C, cfg.metric, gamma, tol, max_passes, seed);
    solver.solve();
    const std::vector<double> alpha = solver.take_alpha();

    SvmModel model;
    model.metric = cfg.metric;
    model.gamma = gamma;
    model.C = cfg.C;
    model.bias = solver.bias();
    for (size_t i = 0; i < X.size(); ++i) {
        if (alpha[i] > 0.0) {
            model.support_vectors.push_back(X[i]);
            model.alphas.push_back(alpha[i]);
            model.labels.push_back(y[i]);
            model.support_indices.push_back(static_cast<uint32_t>(i));
        }
    }
    return model;
}

double svm_decision(const SvmModel& model, std::span<const double> x) {
    if (!model.support_vectors.empty() && x.size() != model.dim()) {
        throw ContractViolation("svm_decision: input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.dim()));
    }
    double score = model.bias;
    for (size_t i = 0; i < model.support_vectors.size(); ++i) {
        const double d = distance(model.support_vectors[i], x, model.metric);
        score += model.alphas[i] * model.labels[i] * std::exp(-model.gamma * d);
    }
    return score;
}

int svm_predict(const SvmModel& model, std::span<const double> x) {
    return svm_decision(model, x) >= 0.0 ? 1 : -1;
}

double kkt_residual(const SvmModel& model, std::span<const std::vector<double>> X,
                    std::span<const int> y) {
    // Recover each point's alpha: via the recorded training indices when
    // present, else by matching vectors (models loaded from disk).
    std::vector<double> full_alpha(X.size(), 0.0);
    if (!model.support_indices.empty()) {
        for (size_t s = 0; s < model.support_indices.size(); ++s) {
            full_alpha[model.support_indices[s]] = model.alphas[s];
        }
    } else {
        for (size_t i = 0; i < X.size(); ++i) {
            for (size_t s = 0; s < model.support_vectors.size(); ++s) {
                if (model.labels[s] == y[i] && model.support_vectors[s] == X[i]) {
                    full_alpha[i] = model.alphas[s];
                    break;
                }
            }
        }
    }
    double worst = 0.0;
    for (size_t i = 0; i < X.size(); ++i) {
        const double alpha = full_alpha[i];
        const double margin = y[i] * svm_decision(model, X[i]);
        double violation = 0.0;
        if (alpha <= 0.0) {
            violation = std::max(0.0, 1.0 - margin);
        } else if (alpha >= model.C) {
            violation = std::max(0.0, margin - 1.0);
        } else {
            violation = std::fabs(margin - 1.0);
        }
        worst = std::max(worst, violation);
    }
    return worst;
}

namespace {
constexpr char kBsvmMagic[4] = {'B', 'S', 'V', 'M'};
}

void write_model_file(const SvmModel& model, const std::filesystem::path& path) {
    ByteWriter w;
    w.bytes(kBsvmMagic, 4);
    w.u8(1);
    w.u8(static_cast<uint8_t>(model.metric));
    w.f64le(model.gamma);
    w.f64le(model.C);
    w.u32le(static_cast<uint32_t>(model.support_vectors.size()));
    w.u32le(static_cast<uint32_t>(model.dim()));
    for (const auto& sv : model.support_vectors) {
        for (double v : sv) w.f64le(v);
    }
    for (size_t i = 0; i < model.alphas.size(); ++i) {
        w.f64le(model.alphas[i] * model.labels[i]);
    }
    w.f64le(model.bias);
    write_file_bytes(path, w.data());
}

SvmModel read_model_file(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path.string());
    const uint8_t* magic = r.take(4);
    if (std::memcmp(magic, kBsvmMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad magic \"" +
                          std::string(reinterpret_cast<const char*>(magic), 4) +
                          "\" (expected BSVM)");
    }
    const uint8_t version = r.u8();
    if (version != 1) {
        throw FormatError(path.string() + ": unsupported BSVM version " +
                          std::to_string(version));
    }
    SvmModel model;
    const uint8_t metric = r.u8();
    if (metric > 1) throw FormatError(path.string() + ": unknown metric " + std::to_string(metric));
    model.metric = static_cast<Metric>(metric);
    model.gamma = r.f64le();
    model.C = r.f64le();
    const uint32_t n_sv = r.u32le();
    const uint32_t dim = r.u32le();
    model.support_vectors.resize(n_sv);
    for (uint32_t i = 0; i < n_sv; ++i) {
        model.support_vectors[i].resize(dim);
        for (uint32_t d = 0; d < dim; ++d) model.support_vectors[i][d] = r.f64le();
    }
    model.alphas.resize(n_sv);
    model.labels.resize(n_sv);
    for (uint32_t i = 0; i < n_sv; ++i) {
        const double coef = r.f64le();
        model.labels[i] = coef >= 0.0 ? 1 : -1;
        model.alphas[i] = std::fabs(coef);
    }
    model.bias = r.f64le();
    return model;
}

} // namespace vidbossa
