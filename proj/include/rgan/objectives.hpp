#pragma once

#include <map>

#include "rgan/seqmodel.hpp"

// Loss functions. The WGAN pair drives adversarial training; the two
// self-regularizers tie generated output back to the input without paired
// data; the likelihood losses cover pretraining and the seq2seq baseline.

namespace rgan {

enum class RegMode { base, auto_reg, freq_reg };

inline RegMode parse_reg_mode(const std::string& name) {
    if (name == "base") return RegMode::base;
    if (name == "auto") return RegMode::auto_reg;
    if (name == "freq") return RegMode::freq_reg;
    throw ConfigError("unknown regularization mode: " + name);
}

struct LossReport {
    std::map<std::string, double> values;  // wgan_d, wgan_g, auto, freq, ...
    double lambda = 0.0;
};

template <typename S>
struct WganPair {
    VarT<S> critic;     // -(mean(real) - mean(fake)), minimized by the critic
    VarT<S> generator;  // -mean(fake), minimized by the generator
};

template <typename S>
WganPair<S> wgan_losses(VarT<S> real_scores, VarT<S> fake_scores) {
    RGAN_REQUIRE(real_scores.val().size() >= 1 && fake_scores.val().size() >= 1,
                 "wgan_losses: empty batch");
    VarT<S> mean_real = mean_all(real_scores);
    VarT<S> mean_fake = mean_all(fake_scores);
    return {sub(mean_fake, mean_real), neg(mean_fake)};
}

// Mean masked cross-entropy of teacher-forced rows against the batch they
// were forced on (shifted by one: row t predicts position t+1). This single
// kernel backs auto_loss (targets = x), denoise pretraining (encoder saw the
// noised input, targets = clean y), and the paired seq2seq loss (targets = y).
template <typename S>
VarT<S> sequence_nll(const GeneratorT<S>& gen, VarT<S> rows, const TokenBatchT<S>& targets) {
    const auto& rv = rows.val();
    RGAN_REQUIRE(rv.rank() == 3 && rv.dim(0) == targets.batch &&
                     rv.dim(1) == targets.width - 1,
                 "sequence_nll: rows misaligned with targets");
    std::vector<int> tgt;
    std::vector<S> mask;
    gen.shifted_targets(targets, tgt, mask);
    return cross_entropy_mean(rows, std::move(tgt), std::move(mask));
}

// Token-frequency regularizer over generated rows. Target histograms come
// from the input sequences (task tokens, normalized by content length); the
// output histogram averages soft mass over each sequence's own emitted rows,
// task columns only.
template <typename S>
VarT<S> freq_loss_batch(VarT<S> rows, const std::vector<TokenSequence>& inputs,
                        const std::vector<int>& emitted_lengths, const Vocab& vocab) {
    const auto& rv = rows.val();
    RGAN_REQUIRE(rv.rank() == 3, "freq_loss: rows must be [B,T,V]");
    const int B = rv.dim(0), T = rv.dim(1), V = rv.dim(2);
    RGAN_REQUIRE(static_cast<int>(inputs.size()) == B &&
                     static_cast<int>(emitted_lengths.size()) == B,
                 "freq_loss: batch mismatch");
    TensorT<S> hist({B, V});
    TensorT<S> row_mask({B, T});
    for (int b = 0; b < B; ++b) {
        const TokenSequence& x = inputs[static_cast<size_t>(b)];
        RGAN_REQUIRE(!x.empty(), "freq_loss: empty input sequence");
        for (int id : x) {
            RGAN_REQUIRE(vocab.is_task(id), "freq_loss: non-task token in input");
            hist.at(b, id) += S(1) / static_cast<S>(x.size());
        }
        const int len = std::clamp(emitted_lengths[static_cast<size_t>(b)], 1, T);
        for (int t = 0; t < len; ++t) row_mask.at(b, t) = S(1);
    }
    return freq_match_loss(rows, hist, row_mask, Vocab::kTaskOffset);
}

// Single-sequence frequency gap (Eq. 6 shape), as a plain number: the test
// oracle and CLI reporting path.
template <typename S>
double freq_loss_value(const TokenSequence& x, const TensorT<S>& soft_rows,
                       const Vocab& vocab) {
    RGAN_REQUIRE(!x.empty(), "freq_loss: empty input");
    RGAN_REQUIRE(soft_rows.rank() == 2 && soft_rows.dim(0) >= 1,
                 "freq_loss: output rows empty");
    const int T = soft_rows.dim(0), V = soft_rows.dim(1);
    double loss = 0.0;
    for (int i = Vocab::kTaskOffset; i < V; ++i) {
        double fx = 0.0;
        for (int id : x)
            if (id == i) fx += 1.0;
        fx /= static_cast<double>(x.size());
        double fo = 0.0;
        for (int t = 0; t < T; ++t) fo += soft_rows.at(t, i);
        fo /= static_cast<double>(T);
        loss += (fx - fo) * (fx - fo);
    }
    (void)vocab;
    return loss;
}

template <typename S>
VarT<S> combined_generator_loss(VarT<S> wgan_g, VarT<S> reg, RegMode mode, double lambda) {
    RGAN_REQUIRE_CONFIG(lambda >= 0, "combined loss: lambda must be nonnegative");
    if (mode == RegMode::base || lambda == 0.0) return wgan_g;
    return add(wgan_g, scale(reg, lambda));
}

inline double combined_generator_loss(double wgan_g, double reg, RegMode mode,
                                      double lambda) {
    RGAN_REQUIRE_CONFIG(lambda >= 0, "combined loss: lambda must be nonnegative");
    return mode == RegMode::base ? wgan_g : wgan_g + lambda * reg;
}

// The original minimax GAN losses (sigmoid scores, saturating generator
// term). Never used for training here -- the Wasserstein pair above is -- but
// kept as the documented reference point the critic losses are measured
// against.
template <typename S>
std::pair<VarT<S>, VarT<S>> reference_gan_losses(VarT<S> real_scores, VarT<S> fake_scores) {
    RGAN_REQUIRE(real_scores.val().size() >= 1 && fake_scores.val().size() >= 1,
                 "reference_gan_losses: empty batch");
    TapeT<S>& tape = *real_scores.tape;
    auto ones_like = [&tape](VarT<S> v) {
        TensorT<S> ones(v.val().shape());
        ones.fill(S(1));
        return tape.constant(std::move(ones));
    };
    VarT<S> d_real = sigmoid(real_scores);
    VarT<S> d_fake = sigmoid(fake_scores);
    VarT<S> d_loss = neg(add(mean_all(log_floored(d_real)),
                             mean_all(log_floored(sub(ones_like(d_fake), d_fake)))));
    VarT<S> g_loss = mean_all(log_floored(sub(ones_like(d_fake), d_fake)));
    return {d_loss, g_loss};
}

}  // namespace rgan
