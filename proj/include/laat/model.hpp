#pragma once

// Logistic regression and one-hidden-layer ReLU networks with exact input
// gradients and the attribution-aligned training loss:
//
//   L = mean_i [ BCE(p_i, y_i) + gamma * MSE(a_i / |a_i|, s / |s|) ]
//
// where a_i is the gradient of the logit with respect to input i.

#include "laat/dataset.hpp"
#include "laat/error.hpp"
#include "laat/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace laat {

enum class ModelKind { lr, mlp };

inline std::string_view to_string(ModelKind kind) { return kind == ModelKind::lr ? "lr" : "mlp"; }

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "lr") return ModelKind::lr;
    if (s == "mlp") return ModelKind::mlp;
    throw ConfigError(fmt::format("unknown model kind '{}' (expected lr or mlp)", s));
}

inline constexpr std::size_t kDefaultHidden = 100;

/// Named contiguous slice of the flat parameter vector.
struct ParamBlock {
    std::string_view name;
    std::size_t offset;
    std::size_t size;
};

/// Model parameters stored as one flat vector.
///
/// Layout, LR:  [w (d), b]
/// Layout, MLP: [W1 (h x d, row-major), b1 (h), w2 (h), b2]
class ModelParams {
public:
    ModelParams() = default;

    static ModelParams zeros(ModelKind kind, std::size_t input_dim, std::size_t hidden = kDefaultHidden) {
        if (input_dim == 0) {
            throw ConfigError("model: input dimension must be positive");
        }
        if (kind == ModelKind::mlp && hidden == 0) {
            throw ConfigError("model: hidden width must be positive");
        }
        ModelParams p;
        p.kind_ = kind;
        p.d_ = input_dim;
        p.h_ = kind == ModelKind::mlp ? hidden : 0;
        p.theta_.assign(kind == ModelKind::lr ? input_dim + 1 : p.h_ * input_dim + 2 * p.h_ + 1, 0.0);
        return p;
    }

    [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return d_; }
    [[nodiscard]] std::size_t hidden() const noexcept { return h_; }
    [[nodiscard]] std::size_t size() const noexcept { return theta_.size(); }

    [[nodiscard]] std::span<double> values() noexcept { return theta_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return theta_; }

    [[nodiscard]] std::vector<ParamBlock> blocks() const {
        if (kind_ == ModelKind::lr) {
            return {{"w", 0, d_}, {"b", d_, 1}};
        }
        return {{"W1", 0, h_ * d_}, {"b1", h_ * d_, h_}, {"w2", h_ * d_ + h_, h_}, {"b2", h_ * d_ + 2 * h_, 1}};
    }

    // LR accessors
    [[nodiscard]] std::span<double> weights() { return lr_slice(0, d_); }
    [[nodiscard]] std::span<const double> weights() const { return lr_slice(0, d_); }
    [[nodiscard]] double& bias() { return lr_slice(d_, 1)[0]; }
    [[nodiscard]] double bias() const { return lr_slice(d_, 1)[0]; }

    // MLP accessors
    [[nodiscard]] std::span<double> hidden_weights() { return mlp_slice(0, h_ * d_); }
    [[nodiscard]] std::span<const double> hidden_weights() const { return mlp_slice(0, h_ * d_); }
    [[nodiscard]] std::span<double> hidden_bias() { return mlp_slice(h_ * d_, h_); }
    [[nodiscard]] std::span<const double> hidden_bias() const { return mlp_slice(h_ * d_, h_); }
    [[nodiscard]] std::span<double> output_weights() { return mlp_slice(h_ * d_ + h_, h_); }
    [[nodiscard]] std::span<const double> output_weights() const { return mlp_slice(h_ * d_ + h_, h_); }
    [[nodiscard]] double& output_bias() { return mlp_slice(h_ * d_ + 2 * h_, 1)[0]; }
    [[nodiscard]] double output_bias() const { return mlp_slice(h_ * d_ + 2 * h_, 1)[0]; }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(theta_.begin(), theta_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    std::span<double> lr_slice(std::size_t off, std::size_t n) {
        assert(kind_ == ModelKind::lr);
        return {theta_.data() + off, n};
    }
    std::span<const double> lr_slice(std::size_t off, std::size_t n) const {
        assert(kind_ == ModelKind::lr);
        return {theta_.data() + off, n};
    }
    std::span<double> mlp_slice(std::size_t off, std::size_t n) {
        assert(kind_ == ModelKind::mlp);
        return {theta_.data() + off, n};
    }
    std::span<const double> mlp_slice(std::size_t off, std::size_t n) const {
        assert(kind_ == ModelKind::mlp);
        return {theta_.data() + off, n};
    }

    ModelKind kind_ = ModelKind::lr;
    std::size_t d_ = 0;
    std::size_t h_ = 0;
    std::vector<double> theta_;
};

/// LR starts at zero; MLP weights are Glorot-uniform, biases zero.
inline ModelParams init_params(ModelKind kind, std::size_t input_dim, std::uint64_t seed,
                               std::size_t hidden = kDefaultHidden) {
    auto p = ModelParams::zeros(kind, input_dim, hidden);
    if (kind == ModelKind::lr) {
        return p;
    }
    auto rng = make_rng(seed, Stream::init);
    const double limit1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
    std::uniform_real_distribution<double> u1(-limit1, limit1);
    for (double& v : p.hidden_weights()) {
        v = u1(rng);
    }
    const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    std::uniform_real_distribution<double> u2(-limit2, limit2);
    for (double& v : p.output_weights()) {
        v = u2(rng);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Forward pass and input gradients
// ---------------------------------------------------------------------------

struct Prediction {
    double logit;
    double probability;
};

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace detail {

inline void check_dim(const ModelParams& params, std::size_t n) {
    if (n != params.input_dim()) {
        throw ConfigError(fmt::format("model expects {} inputs, got {}", params.input_dim(), n));
    }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Hidden pre-activations W1 x + b1.
inline void mlp_preactivations(const ModelParams& p, std::span<const double> x, std::vector<double>& pre) {
    const std::size_t h = p.hidden();
    const std::size_t d = p.input_dim();
    const auto W1 = p.hidden_weights();
    const auto b1 = p.hidden_bias();
    pre.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
        double acc = b1[k];
        const double* wk = W1.data() + k * d;
        for (std::size_t j = 0; j < d; ++j) {
            acc += wk[j] * x[j];
        }
        pre[k] = acc;
    }
}

inline double mlp_logit(const ModelParams& p, const std::vector<double>& pre) {
    const auto w2 = p.output_weights();
    double z = p.output_bias();
    for (std::size_t k = 0; k < pre.size(); ++k) {
        if (pre[k] > 0.0) {
            z += w2[k] * pre[k];
        }
    }
    return z;
}

/// a = W1^T (relu'(pre) * w2)
inline void mlp_input_gradient(const ModelParams& p, const std::vector<double>& pre, std::span<double> a) {
    const std::size_t d = p.input_dim();
    const auto W1 = p.hidden_weights();
    const auto w2 = p.output_weights();
    std::fill(a.begin(), a.end(), 0.0);
    for (std::size_t k = 0; k < pre.size(); ++k) {
        if (pre[k] > 0.0) {
            const double c = w2[k];
            const double* wk = W1.data() + k * d;
            for (std::size_t j = 0; j < d; ++j) {
                a[j] += c * wk[j];
            }
        }
    }
}

} // namespace detail

inline double logit(const ModelParams& params, std::span<const double> x) {
    detail::check_dim(params, x.size());
    if (params.kind() == ModelKind::lr) {
        return detail::dot(params.weights(), x) + params.bias();
    }
    std::vector<double> pre;
    detail::mlp_preactivations(params, x, pre);
    return detail::mlp_logit(params, pre);
}

inline Prediction forward(const ModelParams& params, std::span<const double> x) {
    const double z = logit(params, x);
    return {z, sigmoid(z)};
}

/// Probabilities for every row of a dataset.
inline std::vector<double> predict_proba(const ModelParams& params, const EncodedDataset& data) {
    std::vector<double> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out.push_back(forward(params, data.row(i)).probability);
    }
    return out;
}

/// Gradient of the logit with respect to the input.
using AttributionVector = std::vector<double>;

inline AttributionVector input_gradient(const ModelParams& params, std::span<const double> x) {
    detail::check_dim(params, x.size());
    if (params.kind() == ModelKind::lr) {
        const auto w = params.weights();
        return {w.begin(), w.end()};
    }
    std::vector<double> pre;
    detail::mlp_preactivations(params, x, pre);
    AttributionVector a(params.input_dim());
    detail::mlp_input_gradient(params, pre, a);
    return a;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

inline constexpr double kProbabilityClip = 1e-7;

struct LossBreakdown {
    double total = 0.0;
    double bce_term = 0.0;
    double reg_term = 0.0;
};

struct LossGradient {
    LossBreakdown loss;
    std::vector<double> gradient; ///< same layout as ModelParams::values()
};

namespace detail {

struct Bce {
    double loss;
    double dlogit; ///< zero inside the clipped region
};

inline Bce bce(double z, int y) {
    const double p = sigmoid(z);
    const double pc = std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
    const double loss = y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
    const bool clipped = p <= kProbabilityClip || p >= 1.0 - kProbabilityClip;
    return {loss, clipped ? 0.0 : p - static_cast<double>(y)};
}

/// s / |s|, validated against the model width.
inline std::vector<double> unit_scores(std::span<const double> s, std::size_t d) {
    if (s.size() != d) {
        throw ConfigError(fmt::format("score vector has {} entries but the model has {} inputs", s.size(), d));
    }
    const double n = norm2(s);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ConfigError("score vector has zero norm; attribution alignment needs nonzero scores");
    }
    std::vector<double> u(s.begin(), s.end());
    for (double& v : u) {
        v /= n;
    }
    return u;
}

/// Regularizer value for attribution `a`, and (optionally) its gradient
/// with respect to `a` written into `grad_a`. Returns 0 with zero gradient
/// when |a| = 0.
inline double alignment(std::span<const double> a, std::span<const double> s_unit, std::span<double> grad_a) {
    const std::size_t d = a.size();
    const double n = norm2(a);
    if (n == 0.0) {
        std::fill(grad_a.begin(), grad_a.end(), 0.0);
        return 0.0;
    }
    const double inv_d = 1.0 / static_cast<double>(d);
    double r = 0.0;
    double u_dot_g = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double u = a[j] / n;
        const double diff = u - s_unit[j];
        r += diff * diff;
        u_dot_g += u * diff;
    }
    r *= inv_d;
    if (!grad_a.empty()) {
        // d r / d u = 2/d (u - s);  d u / d a = (I - u u^T) / |a|
        for (std::size_t j = 0; j < d; ++j) {
            const double u = a[j] / n;
            grad_a[j] = 2.0 * inv_d * ((u - s_unit[j]) - u * u_dot_g) / n;
        }
    }
    return r;
}

inline LossBreakdown evaluate(const ModelParams& params, const EncodedDataset& batch, std::span<const double> scores,
                              double gamma, std::vector<double>* grad) {
    if (batch.size() == 0) {
        throw ConfigError("loss: empty batch");
    }
    if (gamma < 0.0 || !std::isfinite(gamma)) {
        throw ConfigError(fmt::format("loss: gamma must be a nonnegative finite number, got {}", gamma));
    }
    check_dim(params, batch.cols);
    const std::size_t d = params.input_dim();
    const std::size_t n = batch.size();
    const bool with_reg = gamma > 0.0 || !scores.empty();
    if (gamma > 0.0 && scores.empty()) {
        throw ConfigError("loss: gamma > 0 requires a score vector");
    }
    const std::vector<double> s_unit = with_reg ? unit_scores(scores, d) : std::vector<double>{};
    const bool reg_grad = grad != nullptr && gamma > 0.0;

    if (grad != nullptr) {
        grad->assign(params.size(), 0.0);
    }
    double bce_sum = 0.0;
    double reg_sum = 0.0;
    std::vector<double> grad_a(reg_grad ? d : 0);

    if (params.kind() == ModelKind::lr) {
        const auto w = params.weights();
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = batch.row(i);
            const auto term = bce(dot(w, x) + params.bias(), batch.y[i]);
            bce_sum += term.loss;
            if (grad != nullptr) {
                for (std::size_t j = 0; j < d; ++j) {
                    (*grad)[j] += term.dlogit * x[j];
                }
                (*grad)[d] += term.dlogit;
            }
        }
        // The attribution of a linear model is w for every sample.
        double reg = 0.0;
        if (with_reg) {
            reg = alignment(w, s_unit, grad_a);
            reg_sum = reg * static_cast<double>(n);
        }
        if (grad != nullptr) {
            const double inv_n = 1.0 / static_cast<double>(n);
            for (double& g : *grad) {
                g *= inv_n;
            }
            if (reg_grad) {
                for (std::size_t j = 0; j < d; ++j) {
                    (*grad)[j] += gamma * grad_a[j];
                }
            }
        }
        const double bce_term = bce_sum / static_cast<double>(n);
        const double reg_term = with_reg ? reg : 0.0;
        return {gamma > 0.0 ? bce_term + gamma * reg_term : bce_term, bce_term, reg_term};
    }

    const std::size_t h = params.hidden();
    const auto W1 = params.hidden_weights();
    const auto w2 = params.output_weights();
    const std::size_t off_b1 = h * d;
    const std::size_t off_w2 = off_b1 + h;
    const std::size_t off_b2 = off_w2 + h;
    std::vector<double> pre;
    std::vector<double> a(d);

    for (std::size_t i = 0; i < n; ++i) {
        const auto x = batch.row(i);
        mlp_preactivations(params, x, pre);
        const auto term = bce(mlp_logit(params, pre), batch.y[i]);
        bce_sum += term.loss;
        if (grad != nullptr) {
            auto& g = *grad;
            g[off_b2] += term.dlogit;
            for (std::size_t k = 0; k < h; ++k) {
                if (pre[k] > 0.0) {
                    g[off_w2 + k] += term.dlogit * pre[k];
                    const double c = term.dlogit * w2[k];
                    double* gk = g.data() + k * d;
                    for (std::size_t j = 0; j < d; ++j) {
                        gk[j] += c * x[j];
                    }
                    g[off_b1 + k] += c;
                }
            }
        }
        if (with_reg) {
            mlp_input_gradient(params, pre, a);
            reg_sum += alignment(a, s_unit, grad_a);
            if (reg_grad) {
                // ReLU masks are locally constant, so a depends on W1 and w2 only.
                auto& g = *grad;
                for (std::size_t k = 0; k < h; ++k) {
                    if (pre[k] > 0.0) {
                        const double* wk = W1.data() + k * d;
                        double* gk = g.data() + k * d;
                        const double c = gamma * w2[k];
                        double proj = 0.0;
                        for (std::size_t j = 0; j < d; ++j) {
                            gk[j] += c * grad_a[j];
                            proj += wk[j] * grad_a[j];
                        }
                        g[off_w2 + k] += gamma * proj;
                    }
                }
            }
        }
    }
    if (grad != nullptr) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (double& g : *grad) {
            g *= inv_n;
        }
    }
    const double bce_term = bce_sum / static_cast<double>(n);
    const double reg_term = reg_sum / static_cast<double>(n);
    return {gamma > 0.0 ? bce_term + gamma * reg_term : bce_term, bce_term, reg_term};
}

} // namespace detail

/// Loss on a batch. `scores` may be empty when gamma is 0.
inline LossBreakdown laat_loss(const ModelParams& params, const EncodedDataset& batch, std::span<const double> scores,
                               double gamma) {
    return detail::evaluate(params, batch, scores, gamma, nullptr);
}

/// Loss and its exact gradient with respect to every parameter.
inline LossGradient loss_gradients(const ModelParams& params, const EncodedDataset& batch,
                                   std::span<const double> scores, double gamma) {
    LossGradient out;
    out.loss = detail::evaluate(params, batch, scores, gamma, &out.gradient);
    return out;
}

} // namespace laat
