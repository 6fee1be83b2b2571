#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "spectrum/rng.hpp"

namespace spectrum {

// Dense row-major matrices (vectors are 1xN, scalars 1x1) with reverse-mode
// autodiff recorded on a dynamic graph. Scalar type S is float in production;
// double instantiations exist for finite-difference gradient checking.

class shape_error : public std::runtime_error {
  public:
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

} // namespace detail

// RAII guard disabling graph recording (inference / metric evaluation).
class NoGradGuard {
  public:
    NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

template <class S>
struct NodeT {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<S> value;
    std::vector<S> grad; // allocated lazily by backward()
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<NodeT<S>>> parents;
    std::function<void(NodeT<S>&)> backward_fn;

    int64_t numel() const { return rows * cols; }
};

template <class S>
class TensorT {
  public:
    using Node = NodeT<S>;

    TensorT() = default;

    static TensorT zeros(int64_t rows, int64_t cols, bool requires_grad = false) {
        return filled(rows, cols, S(0), requires_grad);
    }

    static TensorT filled(int64_t rows, int64_t cols, S v, bool requires_grad = false) {
        check_dims(rows, cols);
        auto n = std::make_shared<Node>();
        n->rows = rows;
        n->cols = cols;
        n->value.assign(static_cast<size_t>(rows * cols), v);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    static TensorT from_data(int64_t rows, int64_t cols, std::vector<S> data,
                             bool requires_grad = false) {
        check_dims(rows, cols);
        if (static_cast<int64_t>(data.size()) != rows * cols)
            throw shape_error("from_data: payload size " + std::to_string(data.size()) +
                              " does not match shape " + shape_str(rows, cols));
        auto n = std::make_shared<Node>();
        n->rows = rows;
        n->cols = cols;
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    static TensorT scalar(S v, bool requires_grad = false) { return filled(1, 1, v, requires_grad); }

    // Glorot-uniform fan-in/fan-out initialization for weight matrices.
    static TensorT glorot(int64_t rows, int64_t cols, Pcg32& rng) {
        check_dims(rows, cols);
        double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        auto n = std::make_shared<Node>();
        n->rows = rows;
        n->cols = cols;
        n->value.resize(static_cast<size_t>(rows * cols));
        for (auto& v : n->value) v = static_cast<S>(rng.uniform(-limit, limit));
        n->requires_grad = true;
        return TensorT(std::move(n));
    }

    static TensorT gaussian(int64_t rows, int64_t cols, double stddev, Pcg32& rng,
                            bool requires_grad = true) {
        check_dims(rows, cols);
        auto n = std::make_shared<Node>();
        n->rows = rows;
        n->cols = cols;
        n->value.resize(static_cast<size_t>(rows * cols));
        for (auto& v : n->value) v = static_cast<S>(rng.normal() * stddev);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    bool defined() const { return static_cast<bool>(node_); }
    int64_t rows() const { return node_->rows; }
    int64_t cols() const { return node_->cols; }
    int64_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    const std::vector<S>& data() const { return node_->value; }
    std::vector<S>& data() { return node_->value; }
    const std::vector<S>& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }

    S at(int64_t r, int64_t c) const { return node_->value[static_cast<size_t>(r * cols() + c)]; }
    S& at(int64_t r, int64_t c) { return node_->value[static_cast<size_t>(r * cols() + c)]; }
    S item() const {
        if (numel() != 1) throw shape_error("item(): tensor is not scalar, shape " + shape());
        return node_->value[0];
    }

    void zero_grad() { node_->grad.clear(); }

    std::string shape() const { return shape_str(rows(), cols()); }

    std::shared_ptr<Node> node() const { return node_; }
    Node* raw() const { return node_.get(); }

    static std::string shape_str(int64_t r, int64_t c) {
        return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
    }

    explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  private:
    static void check_dims(int64_t rows, int64_t cols) {
        if (rows < 0 || cols < 0) throw shape_error("negative dimension");
    }

    std::shared_ptr<Node> node_;
};

using Tensor = TensorT<float>;

namespace ops {

template <class S>
std::vector<S>& ensure_grad(NodeT<S>& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), S(0));
    return n.grad;
}

template <class S>
TensorT<S> make_result(int64_t rows, int64_t cols, const char* op,
                       std::vector<std::shared_ptr<NodeT<S>>> parents) {
    auto n = std::make_shared<NodeT<S>>();
    n->rows = rows;
    n->cols = cols;
    n->value.resize(static_cast<size_t>(rows * cols));
    n->op = op;
    bool track = grad_enabled();
    bool any = false;
    if (track)
        for (auto& p : parents)
            if (p->requires_grad) any = true;
    if (track && any) {
        n->requires_grad = true;
        n->parents = std::move(parents);
    }
    return TensorT<S>(std::move(n));
}

// ---- elementwise and broadcast arithmetic ----

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw shape_error("add: shape mismatch " + a.shape() + " vs " + b.shape());
    auto out = make_result<S>(a.rows(), a.cols(), "add", {a.node(), b.node()});
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        out.raw()->backward_fn = [an, bn](NodeT<S>& n) {
            if (an->requires_grad) {
                auto& ga = ensure_grad(*an);
                for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
            }
            if (bn->requires_grad) {
                auto& gb = ensure_grad(*bn);
                for (size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i];
            }
        };
    }
    return out;
}

// matrix (m x n) + row vector (1 x n), broadcast over rows
template <class S>
TensorT<S> add_rowvec(const TensorT<S>& a, const TensorT<S>& v) {
    if (v.rows() != 1 || v.cols() != a.cols())
        throw shape_error("add_rowvec: shape mismatch " + a.shape() + " vs " + v.shape());
    auto out = make_result<S>(a.rows(), a.cols(), "add_rowvec", {a.node(), v.node()});
    const auto& av = a.data();
    const auto& vv = v.data();
    auto& ov = out.data();
    const int64_t n = a.cols();
    for (int64_t r = 0; r < a.rows(); ++r)
        for (int64_t c = 0; c < n; ++c) ov[r * n + c] = av[r * n + c] + vv[c];
    if (out.requires_grad()) {
        auto an = a.node();
        auto vn = v.node();
        out.raw()->backward_fn = [an, vn, n](NodeT<S>& nd) {
            if (an->requires_grad) {
                auto& ga = ensure_grad(*an);
                for (size_t i = 0; i < ga.size(); ++i) ga[i] += nd.grad[i];
            }
            if (vn->requires_grad) {
                auto& gv = ensure_grad(*vn);
                for (int64_t r = 0; r < nd.rows; ++r)
                    for (int64_t c = 0; c < n; ++c) gv[c] += nd.grad[r * n + c];
            }
        };
    }
    return out;
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, double k) {
    auto out = make_result<S>(a.rows(), a.cols(), "scale", {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    const S ks = static_cast<S>(k);
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * ks;
    if (out.requires_grad()) {
        auto an = a.node();
        out.raw()->backward_fn = [an, ks](NodeT<S>& n) {
            auto& ga = ensure_grad(*an);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * ks;
        };
    }
    return out;
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    return add(a, scale(b, -1.0));
}

// ---- matrix products ----

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.cols() != b.rows())
        throw shape_error("matmul: inner dimensions disagree " + a.shape() + " x " + b.shape());
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    auto out = make_result<S>(m, n, "matmul", {a.node(), b.node()});
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    std::fill(ov.begin(), ov.end(), S(0));
    for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
            const S aip = av[i * k + p];
            if (aip == S(0)) continue;
            const S* brow = &bv[p * n];
            S* orow = &ov[i * n];
            for (int64_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        out.raw()->backward_fn = [an, bn, m, k, n](NodeT<S>& nd) {
            if (an->requires_grad) { // dA = G * B^T
                auto& ga = ensure_grad(*an);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t p = 0; p < k; ++p) {
                        S acc = 0;
                        const S* grow = &nd.grad[i * n];
                        const S* brow = &bn->value[p * n];
                        for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ga[i * k + p] += acc;
                    }
            }
            if (bn->requires_grad) { // dB = A^T * G
                auto& gb = ensure_grad(*bn);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t p = 0; p < k; ++p) {
                        const S aip = an->value[i * k + p];
                        if (aip == S(0)) continue;
                        const S* grow = &nd.grad[i * n];
                        S* gbrow = &gb[p * n];
                        for (int64_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                    }
            }
        };
    }
    return out;
}

// a (m x k) * b^T where b is (n x k); avoids materializing transposes
// (used for attention QK^T and the tied output projection).
template <class S>
TensorT<S> matmul_nt(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.cols() != b.cols())
        throw shape_error("matmul_nt: inner dimensions disagree " + a.shape() + " x " + b.shape() +
                          "^T");
    const int64_t m = a.rows(), k = a.cols(), n = b.rows();
    auto out = make_result<S>(m, n, "matmul_nt", {a.node(), b.node()});
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            S acc = 0;
            const S* arow = &av[i * k];
            const S* brow = &bv[j * k];
            for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            ov[i * n + j] = acc;
        }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        out.raw()->backward_fn = [an, bn, m, k, n](NodeT<S>& nd) {
            if (an->requires_grad) { // dA = G * B
                auto& ga = ensure_grad(*an);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) {
                        const S g = nd.grad[i * n + j];
                        if (g == S(0)) continue;
                        const S* brow = &bn->value[j * k];
                        S* garow = &ga[i * k];
                        for (int64_t p = 0; p < k; ++p) garow[p] += g * brow[p];
                    }
            }
            if (bn->requires_grad) { // dB = G^T * A
                auto& gb = ensure_grad(*bn);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) {
                        const S g = nd.grad[i * n + j];
                        if (g == S(0)) continue;
                        const S* arow = &an->value[i * k];
                        S* gbrow = &gb[j * k];
                        for (int64_t p = 0; p < k; ++p) gbrow[p] += g * arow[p];
                    }
            }
        };
    }
    return out;
}

// ---- nonlinearities ----

template <class S>
TensorT<S> sigmoid(const TensorT<S>& a) {
    auto out = make_result<S>(a.rows(), a.cols(), "sigmoid", {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) {
        const S x = av[i];
        if (x >= S(0)) {
            ov[i] = S(1) / (S(1) + std::exp(-x));
        } else {
            const S e = std::exp(x);
            ov[i] = e / (S(1) + e);
        }
    }
    if (out.requires_grad()) {
        auto an = a.node();
        out.raw()->backward_fn = [an](NodeT<S>& n) {
            auto& ga = ensure_grad(*an);
            for (size_t i = 0; i < ga.size(); ++i) {
                const S y = n.value[i];
                ga[i] += n.grad[i] * y * (S(1) - y);
            }
        };
    }
    return out;
}

template <class S>
TensorT<S> gelu(const TensorT<S>& a) {
    auto out = make_result<S>(a.rows(), a.cols(), "gelu", {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    const double inv_sqrt2 = 0.7071067811865475244;
    for (size_t i = 0; i < ov.size(); ++i) {
        const double x = static_cast<double>(av[i]);
        ov[i] = static_cast<S>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
    }
    if (out.requires_grad()) {
        auto an = a.node();
        out.raw()->backward_fn = [an, inv_sqrt2](NodeT<S>& n) {
            auto& ga = ensure_grad(*an);
            const double inv_sqrt2pi = 0.3989422804014326779;
            for (size_t i = 0; i < ga.size(); ++i) {
                const double x = static_cast<double>(an->value[i]);
                const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                ga[i] += n.grad[i] * static_cast<S>(cdf + x * pdf);
            }
        };
    }
    return out;
}

// Row-wise softmax with max subtraction. Entries where mask[i]==1 are
// excluded (zero probability, zero gradient); a fully masked or empty row
// is rejected.
template <class S>
TensorT<S> softmax_rows(const TensorT<S>& a, const std::vector<uint8_t>* mask = nullptr) {
    if (a.cols() == 0) throw shape_error("softmax: empty axis");
    if (mask && static_cast<int64_t>(mask->size()) != a.numel())
        throw shape_error("softmax: mask size mismatch");
    auto out = make_result<S>(a.rows(), a.cols(), "softmax", {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    const int64_t n = a.cols();
    for (int64_t r = 0; r < a.rows(); ++r) {
        const S* row = &av[r * n];
        const uint8_t* mrow = mask ? &(*mask)[r * n] : nullptr;
        S mx = -std::numeric_limits<S>::infinity();
        for (int64_t c = 0; c < n; ++c)
            if ((!mrow || !mrow[c]) && row[c] > mx) mx = row[c];
        if (mx == -std::numeric_limits<S>::infinity())
            throw shape_error("softmax: fully masked row");
        S denom = 0;
        for (int64_t c = 0; c < n; ++c) {
            S e = (!mrow || !mrow[c]) ? std::exp(row[c] - mx) : S(0);
            ov[r * n + c] = e;
            denom += e;
        }
        for (int64_t c = 0; c < n; ++c) ov[r * n + c] /= denom;
    }
    if (out.requires_grad()) {
        auto an = a.node();
        out.raw()->backward_fn = [an, n](NodeT<S>& nd) {
            auto& ga = ensure_grad(*an);
            for (int64_t r = 0; r < nd.rows; ++r) {
                const S* y = &nd.value[r * n];
                const S* g = &nd.grad[r * n];
                S dot = 0;
                for (int64_t c = 0; c < n; ++c) dot += y[c] * g[c];
                for (int64_t c = 0; c < n; ++c) ga[r * n + c] += y[c] * (g[c] - dot);
            }
        };
    }
    return out;
}

// Layer normalization over the last axis with learned gain/bias.
template <class S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gain, const TensorT<S>& bias,
                      double eps = 1e-5) {
    const int64_t d = x.cols();
    if (d == 0) throw shape_error("layer_norm: zero width");
    if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d)
        throw shape_error("layer_norm: gain/bias shape mismatch, expected [1x" + std::to_string(d) +
                          "]");
    auto out = make_result<S>(x.rows(), d, "layer_norm", {x.node(), gain.node(), bias.node()});
    const auto& xv = x.data();
    const auto& gv = gain.data();
    const auto& bv = bias.data();
    auto& ov = out.data();
    // normalized rows and inverse stddev cached for backward
    auto zbuf = std::make_shared<std::vector<S>>(xv.size());
    auto isbuf = std::make_shared<std::vector<S>>(static_cast<size_t>(x.rows()));
    for (int64_t r = 0; r < x.rows(); ++r) {
        const S* row = &xv[r * d];
        double mean = 0;
        for (int64_t c = 0; c < d; ++c) mean += row[c];
        mean /= static_cast<double>(d);
        double var = 0;
        for (int64_t c = 0; c < d; ++c) {
            const double dv = row[c] - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        const S inv_std = static_cast<S>(1.0 / std::sqrt(var + eps));
        (*isbuf)[static_cast<size_t>(r)] = inv_std;
        for (int64_t c = 0; c < d; ++c) {
            const S z = static_cast<S>((row[c] - mean) * inv_std);
            (*zbuf)[r * d + c] = z;
            ov[r * d + c] = gv[c] * z + bv[c];
        }
    }
    if (out.requires_grad()) {
        auto xn = x.node();
        auto gn = gain.node();
        auto bn = bias.node();
        out.raw()->backward_fn = [xn, gn, bn, zbuf, isbuf, d](NodeT<S>& nd) {
            for (int64_t r = 0; r < nd.rows; ++r) {
                const S* g = &nd.grad[r * d];
                const S* z = &(*zbuf)[r * d];
                if (gn->requires_grad) {
                    auto& gg = ensure_grad(*gn);
                    for (int64_t c = 0; c < d; ++c) gg[c] += g[c] * z[c];
                }
                if (bn->requires_grad) {
                    auto& gb = ensure_grad(*bn);
                    for (int64_t c = 0; c < d; ++c) gb[c] += g[c];
                }
                if (xn->requires_grad) {
                    auto& gx = ensure_grad(*xn);
                    const S inv_std = (*isbuf)[static_cast<size_t>(r)];
                    double mean_gh = 0, mean_ghz = 0;
                    for (int64_t c = 0; c < d; ++c) {
                        const double gh = static_cast<double>(g[c]) * gn->value[c];
                        mean_gh += gh;
                        mean_ghz += gh * z[c];
                    }
                    mean_gh /= static_cast<double>(d);
                    mean_ghz /= static_cast<double>(d);
                    for (int64_t c = 0; c < d; ++c) {
                        const double gh = static_cast<double>(g[c]) * gn->value[c];
                        gx[r * d + c] +=
                            static_cast<S>(inv_std * (gh - mean_gh - z[c] * mean_ghz));
                    }
                }
            }
        };
    }
    return out;
}

// ---- losses ----

// -log softmax(logits)[target] for a single 1xV logits row, via log-sum-exp.
template <class S>
TensorT<S> cross_entropy_logits(const TensorT<S>& logits, int64_t target) {
    if (logits.rows() != 1) throw shape_error("cross_entropy: logits must be a single row");
    const int64_t v = logits.cols();
    if (target < 0 || target >= v)
        throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                                " out of range [0," + std::to_string(v) + ")");
    auto out = make_result<S>(1, 1, "cross_entropy", {logits.node()});
    const auto& lv = logits.data();
    S mx = lv[0];
    for (int64_t i = 1; i < v; ++i) mx = std::max(mx, lv[i]);
    double sum = 0;
    for (int64_t i = 0; i < v; ++i) sum += std::exp(static_cast<double>(lv[i] - mx));
    const double lse = std::log(sum) + static_cast<double>(mx);
    out.data()[0] = static_cast<S>(lse - static_cast<double>(lv[target]));
    if (out.requires_grad()) {
        auto ln = logits.node();
        out.raw()->backward_fn = [ln, target, v, mx, sum](NodeT<S>& nd) {
            auto& gl = ensure_grad(*ln);
            const S g = nd.grad[0];
            for (int64_t i = 0; i < v; ++i) {
                const S p =
                    static_cast<S>(std::exp(static_cast<double>(ln->value[i] - mx)) / sum);
                gl[i] += g * (p - (i == target ? S(1) : S(0)));
            }
        };
    }
    return out;
}

// Mean binary cross-entropy of probabilities against {0,1} labels.
// Probabilities are clamped to [eps, 1-eps]; the clamp kills the gradient
// in the saturated region, matching the flat forward value there.
template <class S>
TensorT<S> bce_mean(const TensorT<S>& pr, const std::vector<S>& labels, double eps = 1e-7) {
    if (static_cast<int64_t>(labels.size()) != pr.numel())
        throw shape_error("bce_mean: length mismatch " + pr.shape() + " vs labels[" +
                          std::to_string(labels.size()) + "]");
    auto out = make_result<S>(1, 1, "bce_mean", {pr.node()});
    const auto& pv = pr.data();
    const double n = static_cast<double>(pv.size());
    double acc = 0;
    for (size_t i = 0; i < pv.size(); ++i) {
        const double p = std::clamp(static_cast<double>(pv[i]), eps, 1.0 - eps);
        const double v = static_cast<double>(labels[i]);
        acc -= v * std::log(p) + (1.0 - v) * std::log(1.0 - p);
    }
    out.data()[0] = static_cast<S>(acc / n);
    if (out.requires_grad()) {
        auto pn = pr.node();
        auto lab = labels;
        out.raw()->backward_fn = [pn, lab, eps, n](NodeT<S>& nd) {
            auto& gp = ensure_grad(*pn);
            const S g = nd.grad[0];
            for (size_t i = 0; i < gp.size(); ++i) {
                const double p = static_cast<double>(pn->value[i]);
                if (p <= eps || p >= 1.0 - eps) continue;
                const double v = static_cast<double>(lab[i]);
                gp[i] += g * static_cast<S>((p - v) / (p * (1.0 - p)) / n);
            }
        };
    }
    return out;
}

template <class S>
TensorT<S> sum_all(const TensorT<S>& a) {
    auto out = make_result<S>(1, 1, "sum", {a.node()});
    double acc = 0;
    for (S v : a.data()) acc += static_cast<double>(v);
    out.data()[0] = static_cast<S>(acc);
    if (out.requires_grad()) {
        auto an = a.node();
        out.raw()->backward_fn = [an](NodeT<S>& nd) {
            auto& ga = ensure_grad(*an);
            for (auto& g : ga) g += nd.grad[0];
        };
    }
    return out;
}

// ---- structural ops ----

template <class S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
    std::vector<TensorT<S>> kept;
    for (const auto& p : parts)
        if (p.defined() && p.rows() > 0) kept.push_back(p);
    if (kept.empty()) throw shape_error("concat_rows: no rows");
    const int64_t cols = kept[0].cols();
    int64_t rows = 0;
    std::vector<std::shared_ptr<NodeT<S>>> parents;
    for (const auto& p : kept) {
        if (p.cols() != cols)
            throw shape_error("concat_rows: column mismatch " + p.shape() + " vs [..x" +
                              std::to_string(cols) + "]");
        rows += p.rows();
        parents.push_back(p.node());
    }
    auto out = make_result<S>(rows, cols, "concat_rows", parents);
    auto& ov = out.data();
    int64_t off = 0;
    for (const auto& p : kept) {
        std::copy(p.data().begin(), p.data().end(), ov.begin() + off * cols);
        off += p.rows();
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<NodeT<S>>> ns;
        for (const auto& p : kept) ns.push_back(p.node());
        out.raw()->backward_fn = [ns, cols](NodeT<S>& nd) {
            int64_t off = 0;
            for (auto& pn : ns) {
                if (pn->requires_grad) {
                    auto& gp = ensure_grad(*pn);
                    for (size_t i = 0; i < gp.size(); ++i) gp[i] += nd.grad[off * cols + i];
                }
                off += pn->rows;
            }
        };
    }
    return out;
}

template <class S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw shape_error("concat_cols: empty");
    const int64_t rows = parts[0].rows();
    int64_t cols = 0;
    std::vector<std::shared_ptr<NodeT<S>>> parents;
    for (const auto& p : parts) {
        if (p.rows() != rows)
            throw shape_error("concat_cols: row mismatch " + p.shape());
        cols += p.cols();
        parents.push_back(p.node());
    }
    auto out = make_result<S>(rows, cols, "concat_cols", parents);
    auto& ov = out.data();
    int64_t off = 0;
    for (const auto& p : parts) {
        const int64_t pc = p.cols();
        for (int64_t r = 0; r < rows; ++r)
            std::copy(p.data().begin() + r * pc, p.data().begin() + (r + 1) * pc,
                      ov.begin() + r * cols + off);
        off += pc;
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<NodeT<S>>> ns;
        for (const auto& p : parts) ns.push_back(p.node());
        out.raw()->backward_fn = [ns, rows, cols](NodeT<S>& nd) {
            int64_t off = 0;
            for (auto& pn : ns) {
                const int64_t pc = pn->cols;
                if (pn->requires_grad) {
                    auto& gp = ensure_grad(*pn);
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t c = 0; c < pc; ++c)
                            gp[r * pc + c] += nd.grad[r * cols + off + c];
                }
                off += pc;
            }
        };
    }
    return out;
}

template <class S>
TensorT<S> slice_rows(const TensorT<S>& a, int64_t r0, int64_t r1) {
    if (r0 < 0 || r1 < r0 || r1 > a.rows())
        throw shape_error("slice_rows: bad range [" + std::to_string(r0) + "," +
                          std::to_string(r1) + ") for " + a.shape());
    const int64_t cols = a.cols();
    auto out = make_result<S>(r1 - r0, cols, "slice_rows", {a.node()});
    std::copy(a.data().begin() + r0 * cols, a.data().begin() + r1 * cols, out.data().begin());
    if (out.requires_grad()) {
        auto an = a.node();
        out.raw()->backward_fn = [an, r0, cols](NodeT<S>& nd) {
            auto& ga = ensure_grad(*an);
            for (size_t i = 0; i < nd.grad.size(); ++i) ga[r0 * cols + i] += nd.grad[i];
        };
    }
    return out;
}

template <class S>
TensorT<S> slice_cols(const TensorT<S>& a, int64_t c0, int64_t c1) {
    if (c0 < 0 || c1 < c0 || c1 > a.cols())
        throw shape_error("slice_cols: bad range [" + std::to_string(c0) + "," +
                          std::to_string(c1) + ") for " + a.shape());
    const int64_t cols = a.cols();
    const int64_t w = c1 - c0;
    auto out = make_result<S>(a.rows(), w, "slice_cols", {a.node()});
    auto& ov = out.data();
    for (int64_t r = 0; r < a.rows(); ++r)
        std::copy(a.data().begin() + r * cols + c0, a.data().begin() + r * cols + c1,
                  ov.begin() + r * w);
    if (out.requires_grad()) {
        auto an = a.node();
        out.raw()->backward_fn = [an, c0, cols, w](NodeT<S>& nd) {
            auto& ga = ensure_grad(*an);
            for (int64_t r = 0; r < nd.rows; ++r)
                for (int64_t c = 0; c < w; ++c) ga[r * cols + c0 + c] += nd.grad[r * w + c];
        };
    }
    return out;
}

template <class S>
TensorT<S> mean_over_rows(const TensorT<S>& a) {
    if (a.rows() == 0) throw shape_error("mean_over_rows: no rows");
    const int64_t cols = a.cols();
    auto out = make_result<S>(1, cols, "mean_rows", {a.node()});
    auto& ov = out.data();
    std::fill(ov.begin(), ov.end(), S(0));
    for (int64_t r = 0; r < a.rows(); ++r)
        for (int64_t c = 0; c < cols; ++c) ov[c] += a.data()[r * cols + c];
    const S inv = static_cast<S>(1.0 / static_cast<double>(a.rows()));
    for (auto& v : ov) v *= inv;
    if (out.requires_grad()) {
        auto an = a.node();
        out.raw()->backward_fn = [an, cols, inv](NodeT<S>& nd) {
            auto& ga = ensure_grad(*an);
            for (int64_t r = 0; r < an->rows; ++r)
                for (int64_t c = 0; c < cols; ++c) ga[r * cols + c] += nd.grad[c] * inv;
        };
    }
    return out;
}

// Embedding lookup: duplicate indices accumulate gradient additively.
template <class S>
TensorT<S> gather_rows(const TensorT<S>& table, const std::vector<int>& indices) {
    const int64_t cols = table.cols();
    auto out = make_result<S>(static_cast<int64_t>(indices.size()), cols, "gather_rows",
                              {table.node()});
    auto& ov = out.data();
    for (size_t i = 0; i < indices.size(); ++i) {
        const int idx = indices[i];
        if (idx < 0 || idx >= table.rows())
            throw std::out_of_range("gather_rows: index " + std::to_string(idx) +
                                    " out of range for " + table.shape());
        std::copy(table.data().begin() + idx * cols, table.data().begin() + (idx + 1) * cols,
                  ov.begin() + static_cast<int64_t>(i) * cols);
    }
    if (out.requires_grad()) {
        auto tn = table.node();
        auto idxs = indices;
        out.raw()->backward_fn = [tn, idxs, cols](NodeT<S>& nd) {
            auto& gt = ensure_grad(*tn);
            for (size_t i = 0; i < idxs.size(); ++i)
                for (int64_t c = 0; c < cols; ++c)
                    gt[idxs[i] * cols + c] += nd.grad[static_cast<int64_t>(i) * cols + c];
        };
    }
    return out;
}

// Gather scalar entries from a 1xN row into a 1xK row.
template <class S>
TensorT<S> gather_elems(const TensorT<S>& v, const std::vector<int>& indices) {
    if (v.rows() != 1) throw shape_error("gather_elems: expected a row vector, got " + v.shape());
    auto out = make_result<S>(1, static_cast<int64_t>(indices.size()), "gather_elems", {v.node()});
    for (size_t i = 0; i < indices.size(); ++i) {
        const int idx = indices[i];
        if (idx < 0 || idx >= v.cols())
            throw std::out_of_range("gather_elems: index " + std::to_string(idx) +
                                    " out of range for " + v.shape());
        out.data()[i] = v.data()[idx];
    }
    if (out.requires_grad()) {
        auto vn = v.node();
        auto idxs = indices;
        out.raw()->backward_fn = [vn, idxs](NodeT<S>& nd) {
            auto& gv = ensure_grad(*vn);
            for (size_t i = 0; i < idxs.size(); ++i) gv[idxs[i]] += nd.grad[i];
        };
    }
    return out;
}

// Row i of the output is row i of `a` scaled by s[0][i].
template <class S>
TensorT<S> scale_rows(const TensorT<S>& a, const TensorT<S>& s) {
    if (s.rows() != 1 || s.cols() != a.rows())
        throw shape_error("scale_rows: scale shape " + s.shape() + " does not match rows of " +
                          a.shape());
    const int64_t cols = a.cols();
    auto out = make_result<S>(a.rows(), cols, "scale_rows", {a.node(), s.node()});
    auto& ov = out.data();
    for (int64_t r = 0; r < a.rows(); ++r) {
        const S k = s.data()[r];
        for (int64_t c = 0; c < cols; ++c) ov[r * cols + c] = a.data()[r * cols + c] * k;
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto sn = s.node();
        out.raw()->backward_fn = [an, sn, cols](NodeT<S>& nd) {
            for (int64_t r = 0; r < nd.rows; ++r) {
                if (an->requires_grad) {
                    auto& ga = ensure_grad(*an);
                    const S k = sn->value[r];
                    for (int64_t c = 0; c < cols; ++c)
                        ga[r * cols + c] += nd.grad[r * cols + c] * k;
                }
                if (sn->requires_grad) {
                    auto& gs = ensure_grad(*sn);
                    S acc = 0;
                    for (int64_t c = 0; c < cols; ++c)
                        acc += nd.grad[r * cols + c] * an->value[r * cols + c];
                    gs[r] += acc;
                }
            }
        };
    }
    return out;
}

// Max over index groups of a 1xN row; groups may overlap but not here.
// Empty groups produce `empty_fill` with no gradient. Gradient routes to
// the argmax entry (first on ties).
template <class S>
TensorT<S> group_max(const TensorT<S>& v, const std::vector<std::vector<int>>& groups,
                     S empty_fill = S(-1e9)) {
    if (v.rows() != 1) throw shape_error("group_max: expected a row vector, got " + v.shape());
    auto out = make_result<S>(1, static_cast<int64_t>(groups.size()), "group_max", {v.node()});
    auto argmax = std::make_shared<std::vector<int>>(groups.size(), -1);
    for (size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) {
            out.data()[g] = empty_fill;
            continue;
        }
        int best = groups[g][0];
        for (int idx : groups[g]) {
            if (idx < 0 || idx >= v.cols())
                throw std::out_of_range("group_max: index out of range");
            if (v.data()[idx] > v.data()[best]) best = idx;
        }
        (*argmax)[g] = best;
        out.data()[g] = v.data()[best];
    }
    if (out.requires_grad()) {
        auto vn = v.node();
        out.raw()->backward_fn = [vn, argmax](NodeT<S>& nd) {
            auto& gv = ensure_grad(*vn);
            for (size_t g = 0; g < argmax->size(); ++g)
                if ((*argmax)[g] >= 0) gv[(*argmax)[g]] += nd.grad[g];
        };
    }
    return out;
}

} // namespace ops

// Reverse topological order of every node reachable from a root.
template <class S>
struct ComputeGraph {
    std::vector<NodeT<S>*> order; // leaves first, root last
};

template <class S>
ComputeGraph<S> build_graph(const TensorT<S>& root) {
    ComputeGraph<S> g;
    std::unordered_set<const NodeT<S>*> visited;
    // iterative DFS; two-phase stack entries emulate post-order
    std::vector<std::pair<NodeT<S>*, bool>> stack;
    stack.push_back({root.raw(), false});
    while (!stack.empty()) {
        auto [n, expanded] = stack.back();
        stack.pop_back();
        if (expanded) {
            g.order.push_back(n);
            continue;
        }
        if (visited.count(n)) continue;
        visited.insert(n);
        stack.push_back({n, true});
        for (auto& p : n->parents)
            if (!visited.count(p.get())) stack.push_back({p.get(), false});
    }
    return g;
}

// Populate gradients of every requires_grad node reachable from `loss`.
// Fan-out accumulates additively.
template <class S>
void backward(const TensorT<S>& loss) {
    if (loss.numel() != 1)
        throw shape_error("backward: loss must be scalar, got " + loss.shape());
    auto graph = build_graph(loss);
    for (auto* n : graph.order)
        if (n->requires_grad && n->grad.empty()) n->grad.assign(n->value.size(), S(0));
    if (!loss.raw()->requires_grad) return; // nothing upstream requires grad
    loss.raw()->grad[0] = S(1);
    for (auto it = graph.order.rbegin(); it != graph.order.rend(); ++it) {
        NodeT<S>* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

template <class S>
bool all_finite(const TensorT<S>& t) {
    for (S v : t.data())
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

} // namespace spectrum
