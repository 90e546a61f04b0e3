#pragma once

#include "rgan/ops.hpp"
#include "rgan/optim.hpp"
#include "rgan/seqmodel.hpp"

// The Wasserstein critic: parallel 1-D conv banks (kernels 3/7/11) over the
// sequence-by-vocabulary matrix, max pooling over time, and a two-layer head.
// Depth 1 pools the raw bank outputs; depth 3 stacks two more kernel-3 layers
// with ReLUs in between. Parameters are width-independent, so the same critic
// follows the curriculum as the configured input width grows.

namespace rgan {

template <typename S>
class CriticT {
public:
    static constexpr int kKernels[3] = {3, 7, 11};

    CriticT(const Vocab& vocab, int width, int depth, int filters, int fc_hidden, Rng& rng)
        : vocab_(vocab), width_(width), depth_(depth), filters_(filters),
          fc_hidden_(fc_hidden) {
        RGAN_REQUIRE_CONFIG(depth == 1 || depth == 3, "critic: depth must be 1 or 3");
        RGAN_REQUIRE_CONFIG(width >= 3, "critic: width too small");
        RGAN_REQUIRE_CONFIG(filters >= 1 && fc_hidden >= 1, "critic: bad head sizes");
        const int V = vocab.size, F = filters;
        for (int k : kKernels) {
            const std::string name = "crit.conv1.k" + std::to_string(k);
            bank_w_.push_back(
                store_.add(name + ".w", TensorT<S>::xavier({k * V, F}, k * V, F, rng)));
            bank_b_.push_back(store_.add(name + ".b", TensorT<S>({F})));
        }
        if (depth == 3) {
            conv2_w_ = store_.add("crit.conv2.w",
                                  TensorT<S>::xavier({3 * 3 * F, F}, 3 * 3 * F, F, rng));
            conv2_b_ = store_.add("crit.conv2.b", TensorT<S>({F}));
            conv3_w_ = store_.add("crit.conv3.w",
                                  TensorT<S>::xavier({3 * F, F}, 3 * F, F, rng));
            conv3_b_ = store_.add("crit.conv3.b", TensorT<S>({F}));
        }
        const int pooled = depth == 1 ? 3 * F : F;
        fc1_w_ = store_.add("crit.fc1.w",
                            TensorT<S>::xavier({pooled, fc_hidden}, pooled, fc_hidden, rng));
        fc1_b_ = store_.add("crit.fc1.b", TensorT<S>({fc_hidden}));
        fc2_w_ = store_.add("crit.fc2.w",
                            TensorT<S>::xavier({fc_hidden, 1}, fc_hidden, 1, rng));
        fc2_b_ = store_.add("crit.fc2.b", TensorT<S>({1}));
    }

    ParameterStoreT<S>& store() { return store_; }
    const ParameterStoreT<S>& store() const { return store_; }
    int width() const { return width_; }
    int depth() const { return depth_; }
    int filters() const { return filters_; }
    void set_width(int width) {
        RGAN_REQUIRE_CONFIG(width >= 3, "critic: width too small");
        width_ = width;
    }

    // input: [B, width, V] of probability (or one-hot) rows -> scores [B, 1].
    VarT<S> score(TapeT<S>& tape, const std::vector<VarT<S>>& P, VarT<S> input) const {
        (void)tape;
        const auto& iv = input.val();
        RGAN_REQUIRE(iv.rank() == 3 && iv.dim(2) == vocab_.size,
                     "critic: input must be [B,T,V]");
        RGAN_REQUIRE(iv.dim(1) == width_,
                     "critic: input width " + std::to_string(iv.dim(1)) +
                         " != configured width " + std::to_string(width_));
        std::vector<VarT<S>> banks;
        for (size_t i = 0; i < 3; ++i)
            banks.push_back(conv1d_same(input, P[static_cast<size_t>(bank_w_[i])],
                                        P[static_cast<size_t>(bank_b_[i])], kKernels[i]));
        VarT<S> pooled;
        if (depth_ == 1) {
            // Pooling each bank then concatenating equals concatenating then
            // pooling; no nonlinearity before the pool in this variant.
            pooled = concat_cols(concat_cols(max_over_time(banks[0]), max_over_time(banks[1])),
                                 max_over_time(banks[2]));
        } else {
            VarT<S> l1 = relu(concat_channels(banks));
            VarT<S> l2 = relu(conv1d_same(l1, P[static_cast<size_t>(conv2_w_)],
                                          P[static_cast<size_t>(conv2_b_)], 3));
            VarT<S> l3 = conv1d_same(l2, P[static_cast<size_t>(conv3_w_)],
                                     P[static_cast<size_t>(conv3_b_)], 3);
            pooled = max_over_time(l3);
        }
        VarT<S> hid = relu(add_rowwise(matmul(pooled, P[static_cast<size_t>(fc1_w_)]),
                                       P[static_cast<size_t>(fc1_b_)]));
        return add_rowwise(matmul(hid, P[static_cast<size_t>(fc2_w_)]),
                           P[static_cast<size_t>(fc2_b_)]);
    }

    // Kernel-11 first-layer filters, for the diagnostics dump.
    const TensorT<S>& kernel11_weights() const {
        return store_.by_name("crit.conv1.k11.w").value;
    }

private:
    Vocab vocab_;
    int width_, depth_, filters_, fc_hidden_;
    ParameterStoreT<S> store_;
    std::vector<int> bank_w_, bank_b_;
    int conv2_w_ = -1, conv2_b_ = -1, conv3_w_ = -1, conv3_b_ = -1;
    int fc1_w_ = -1, fc1_b_ = -1, fc2_w_ = -1, fc2_b_ = -1;
};

using Critic = CriticT<float>;

// One-hot critic input for a batch of real sequences; PAD positions carry the
// PAD one-hot row.
template <typename S>
TensorT<S> one_hot_input(const TokenBatchT<S>& batch, const Vocab& vocab) {
    TensorT<S> out({batch.batch, batch.width, vocab.size});
    for (int b = 0; b < batch.batch; ++b)
        for (int t = 0; t < batch.width; ++t) out.at(b, t, batch.id(b, t)) = S(1);
    return out;
}

// Critic input for generated rows: a constant SOS one-hot row, the soft rows
// as emitted, and PAD one-hot rows out to the configured width.
template <typename S>
VarT<S> soft_critic_input(TapeT<S>& tape, VarT<S> rows, int width, const Vocab& vocab) {
    const auto& rv = rows.val();
    RGAN_REQUIRE(rv.rank() == 3 && rv.dim(2) == vocab.size,
                 "soft_critic_input: rows must be [B,T,V]");
    const int B = rv.dim(0), T = rv.dim(1);
    RGAN_REQUIRE(T + 1 <= width, "soft_critic_input: rows exceed critic width");
    TensorT<S> sos({B, 1, vocab.size});
    for (int b = 0; b < B; ++b) sos.at(b, 0, Vocab::kSos) = S(1);
    std::vector<VarT<S>> parts{tape.constant(std::move(sos)), rows};
    if (T + 1 < width) {
        TensorT<S> pad({B, width - T - 1, vocab.size});
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < width - T - 1; ++t) pad.at(b, t, Vocab::kPad) = S(1);
        parts.push_back(tape.constant(std::move(pad)));
    }
    return concat_time(parts);
}

}  // namespace rgan
