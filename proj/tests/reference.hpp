#pragma once

// Independent oracles shared by the unit tests and the acceptance binary.

#include "laat/dataset.hpp"
#include "laat/model.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace laat::testing {

/// Plain cross-entropy trainer written independently of the library's loss
/// code, mirroring its operation order so results can be compared bit for bit.
struct PlainTrainer {
    double lr = 1e-2;
    double b1 = 0.9;
    double b2 = 0.999;
    double eps = 1e-8;
    int epochs = 200;

    static double sig(double z) {
        if (z >= 0.0) {
            return 1.0 / (1.0 + std::exp(-z));
        }
        const double e = std::exp(z);
        return e / (1.0 + e);
    }

    static double residual(double z, int y) {
        const double p = sig(z);
        const bool clipped = p <= 1e-7 || p >= 1.0 - 1e-7;
        return clipped ? 0.0 : p - static_cast<double>(y);
    }

    void adam(std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v,
              int t) const {
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }

    /// theta = [w, b]
    std::vector<double> logistic(const EncodedDataset& data) const {
        const std::size_t d = data.cols;
        std::vector<double> theta(d + 1, 0.0);
        std::vector<double> m(d + 1, 0.0);
        std::vector<double> v(d + 1, 0.0);
        for (int t = 1; t <= epochs; ++t) {
            std::vector<double> g(d + 1, 0.0);
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto x = data.row(i);
                double z = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    z += theta[j] * x[j];
                }
                const double r = residual(z + theta[d], data.y[i]);
                for (std::size_t j = 0; j < d; ++j) {
                    g[j] += r * x[j];
                }
                g[d] += r;
            }
            const double inv_n = 1.0 / static_cast<double>(data.size());
            for (double& gi : g) {
                gi *= inv_n;
            }
            adam(theta, g, m, v, t);
        }
        return theta;
    }

    /// theta = [W1 (h x d), b1, w2, b2], starting from `init`.
    std::vector<double> mlp(const EncodedDataset& data, std::vector<double> theta, std::size_t h) const {
        const std::size_t d = data.cols;
        const std::size_t ob1 = h * d;
        const std::size_t ow2 = ob1 + h;
        const std::size_t ob2 = ow2 + h;
        std::vector<double> m(theta.size(), 0.0);
        std::vector<double> v(theta.size(), 0.0);
        std::vector<double> pre(h);
        for (int t = 1; t <= epochs; ++t) {
            std::vector<double> g(theta.size(), 0.0);
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto x = data.row(i);
                for (std::size_t k = 0; k < h; ++k) {
                    double acc = theta[ob1 + k];
                    for (std::size_t j = 0; j < d; ++j) {
                        acc += theta[k * d + j] * x[j];
                    }
                    pre[k] = acc;
                }
                double z = theta[ob2];
                for (std::size_t k = 0; k < h; ++k) {
                    if (pre[k] > 0.0) {
                        z += theta[ow2 + k] * pre[k];
                    }
                }
                const double r = residual(z, data.y[i]);
                g[ob2] += r;
                for (std::size_t k = 0; k < h; ++k) {
                    if (pre[k] > 0.0) {
                        g[ow2 + k] += r * pre[k];
                        const double c = r * theta[ow2 + k];
                        for (std::size_t j = 0; j < d; ++j) {
                            g[k * d + j] += c * x[j];
                        }
                        g[ob1 + k] += c;
                    }
                }
            }
            const double inv_n = 1.0 / static_cast<double>(data.size());
            for (double& gi : g) {
                gi *= inv_n;
            }
            adam(theta, g, m, v, t);
        }
        return theta;
    }
};


inline double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
        }
    }
    return wins / pairs;
}

/// Two-sided p by enumerating all 2^n sign assignments over the average ranks.
inline double enumerated_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) {
            d.push_back(a[i] - b[i]);
        }
    }
    const std::size_t n = d.size();
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        double less = 0.0;
        double equal = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(d[j]) < std::abs(d[i])) {
                less += 1.0;
            } else if (std::abs(d[j]) == std::abs(d[i])) {
                equal += 1.0;
            }
        }
        ranks[i] = less + (equal + 1.0) / 2.0;
    }
    double total = 0.0;
    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += ranks[i];
        if (d[i] > 0.0) {
            w_plus += ranks[i];
        }
    }
    const double t = std::min(w_plus, total - w_plus);
    std::size_t at_most = 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (std::size_t{1} << i)) {
                w += ranks[i];
            }
        }
        if (w <= t + 1e-9) {
            ++at_most;
        }
    }
    return std::min(1.0, 2.0 * static_cast<double>(at_most) / std::ldexp(1.0, static_cast<int>(n)));
}


/// Central differences of laat_loss().total with respect to every parameter.
inline std::vector<double> fd_gradient(const ModelParams& p, const EncodedDataset& b, std::span<const double> s, double gamma,
                                double h = 1e-5) {
    std::vector<double> g(p.size());
    ModelParams q = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = q.values()[i];
        q.values()[i] = orig + h;
        const double up = laat_loss(q, b, s, gamma).total;
        q.values()[i] = orig - h;
        const double down = laat_loss(q, b, s, gamma).total;
        q.values()[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double rel_error(std::span<const double> a, std::span<const double> b) {
    double num = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(num) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

} // namespace laat::testing
