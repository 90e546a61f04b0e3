#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rgan/tape.hpp"

// Named parameter storage plus the two optimizers the trainers use. One
// training thread owns a store; optimizer state lives in the optimizer and is
// surfaced through accessors so checkpoints can persist it.

namespace rgan {

template <typename S>
struct ParamT {
    std::string name;
    TensorT<S> value;
    TensorT<S> grad;  // same shape, accumulated across tapes until zeroed
};

template <typename S>
class ParameterStoreT {
public:
    int add(const std::string& name, TensorT<S> init) {
        RGAN_REQUIRE(!name.empty(), "parameter name must be non-empty");
        RGAN_REQUIRE(index_.find(name) == index_.end(),
                     "duplicate parameter name: " + name);
        const int id = static_cast<int>(params_.size());
        TensorT<S> grad(init.shape());
        params_.push_back(ParamT<S>{name, std::move(init), std::move(grad)});
        index_[name] = id;
        return id;
    }

    int size() const { return static_cast<int>(params_.size()); }

    ParamT<S>& param(int i) {
        RGAN_REQUIRE_INDEX(0 <= i && i < size(), "parameter index out of range");
        return params_[static_cast<size_t>(i)];
    }
    const ParamT<S>& param(int i) const {
        RGAN_REQUIRE_INDEX(0 <= i && i < size(), "parameter index out of range");
        return params_[static_cast<size_t>(i)];
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    ParamT<S>& by_name(const std::string& name) {
        auto it = index_.find(name);
        RGAN_REQUIRE(it != index_.end(), "unknown parameter: " + name);
        return params_[static_cast<size_t>(it->second)];
    }
    const ParamT<S>& by_name(const std::string& name) const {
        auto it = index_.find(name);
        RGAN_REQUIRE(it != index_.end(), "unknown parameter: " + name);
        return params_[static_cast<size_t>(it->second)];
    }

    void zero_grads() {
        for (auto& p : params_) p.grad.fill(S(0));
    }

    int64_t total_size() const {
        int64_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    // One leaf per parameter, in registration order. Pass requires_grad =
    // false to use the parameters frozen (scored but never differentiated).
    std::vector<VarT<S>> leaves(TapeT<S>& tape, bool requires_grad = true) const {
        std::vector<VarT<S>> vars;
        vars.reserve(params_.size());
        for (const auto& p : params_) vars.push_back(tape.leaf(p.value, requires_grad));
        return vars;
    }

    // Fold tape gradients (post-backward) into the stored grads.
    void accumulate_from(TapeT<S>& tape, const std::vector<VarT<S>>& vars) {
        RGAN_REQUIRE(vars.size() == params_.size(),
                     "accumulate_from: leaf count mismatch");
        for (size_t i = 0; i < params_.size(); ++i) {
            if (!tape.has_grad(vars[i].id)) continue;
            const TensorT<S>& g = tape.grad_of(vars[i].id);
            TensorT<S>& dst = params_[i].grad;
            for (int64_t j = 0; j < dst.size(); ++j) dst[j] += g[j];
        }
    }

private:
    std::vector<ParamT<S>> params_;
    std::map<std::string, size_t> index_;
};

// RMSprop: v <- rho*v + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(v)+eps).
template <typename S>
class RmsPropT {
public:
    explicit RmsPropT(double lr, double rho = 0.9, double eps = 1e-8)
        : lr_(lr), rho_(rho), eps_(eps) {
        RGAN_REQUIRE_CONFIG(lr > 0, "rmsprop: learning rate must be positive");
    }

    void step(ParameterStoreT<S>& store) {
        ensure_state(store);
        const S lr = static_cast<S>(lr_), rho = static_cast<S>(rho_);
        const S eps = static_cast<S>(eps_);
        for (int i = 0; i < store.size(); ++i) {
            ParamT<S>& p = store.param(i);
            TensorT<S>& v = v_[static_cast<size_t>(i)];
            RGAN_REQUIRE(v.same_shape(p.value), "rmsprop: state shape mismatch");
            for (int64_t j = 0; j < p.value.size(); ++j) {
                const S g = p.grad[j];
                v[j] = rho * v[j] + (S(1) - rho) * g * g;
                p.value[j] -= lr * g / (std::sqrt(v[j]) + eps);
            }
        }
        ++steps_;
    }

    double lr() const { return lr_; }
    void set_lr(double lr) {
        RGAN_REQUIRE_CONFIG(lr > 0, "rmsprop: learning rate must be positive");
        lr_ = lr;
    }
    int64_t steps() const { return steps_; }
    void set_steps(int64_t n) { steps_ = n; }
    std::vector<TensorT<S>>& state() { return v_; }

    void ensure_state(const ParameterStoreT<S>& store) {
        while (static_cast<int>(v_.size()) < store.size())
            v_.emplace_back(store.param(static_cast<int>(v_.size())).value.shape());
    }

private:
    double lr_, rho_, eps_;
    int64_t steps_ = 0;
    std::vector<TensorT<S>> v_;  // squared-gradient averages, per parameter
};

// Adam with bias-corrected moments.
template <typename S>
class AdamT {
public:
    explicit AdamT(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        RGAN_REQUIRE_CONFIG(lr > 0, "adam: learning rate must be positive");
    }

    void step(ParameterStoreT<S>& store) {
        ensure_state(store);
        ++steps_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
        const S lr = static_cast<S>(lr_), b1 = static_cast<S>(beta1_);
        const S b2 = static_cast<S>(beta2_), eps = static_cast<S>(eps_);
        for (int i = 0; i < store.size(); ++i) {
            ParamT<S>& p = store.param(i);
            TensorT<S>& m = m_[static_cast<size_t>(i)];
            TensorT<S>& v = v_[static_cast<size_t>(i)];
            RGAN_REQUIRE(m.same_shape(p.value) && v.same_shape(p.value),
                         "adam: state shape mismatch");
            for (int64_t j = 0; j < p.value.size(); ++j) {
                const S g = p.grad[j];
                m[j] = b1 * m[j] + (S(1) - b1) * g;
                v[j] = b2 * v[j] + (S(1) - b2) * g * g;
                const S mhat = m[j] / static_cast<S>(bc1);
                const S vhat = v[j] / static_cast<S>(bc2);
                p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    double lr() const { return lr_; }
    void set_lr(double lr) {
        RGAN_REQUIRE_CONFIG(lr > 0, "adam: learning rate must be positive");
        lr_ = lr;
    }
    int64_t steps() const { return steps_; }
    void set_steps(int64_t n) { steps_ = n; }
    std::vector<TensorT<S>>& first_moments() { return m_; }
    std::vector<TensorT<S>>& second_moments() { return v_; }

    void ensure_state(const ParameterStoreT<S>& store) {
        while (static_cast<int>(m_.size()) < store.size()) {
            m_.emplace_back(store.param(static_cast<int>(m_.size())).value.shape());
            v_.emplace_back(store.param(static_cast<int>(v_.size())).value.shape());
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    int64_t steps_ = 0;
    std::vector<TensorT<S>> m_, v_;
};

// Clamp every entry into [-c, c]. Entries already inside are untouched.
template <typename S>
void clip_weights(TensorT<S>& w, double c) {
    RGAN_REQUIRE_CONFIG(c > 0, "clip_weights: threshold must be positive");
    const S lo = static_cast<S>(-c), hi = static_cast<S>(c);
    for (int64_t i = 0; i < w.size(); ++i) w[i] = std::clamp(w[i], lo, hi);
}

template <typename S>
void clip_weights(ParameterStoreT<S>& store, double c) {
    RGAN_REQUIRE_CONFIG(c > 0, "clip_weights: threshold must be positive");
    for (int i = 0; i < store.size(); ++i) clip_weights(store.param(i).value, c);
}

using ParameterStore = ParameterStoreT<float>;
using RmsProp = RmsPropT<float>;
using Adam = AdamT<float>;

}  // namespace rgan
