#pragma once

#include <utility>

#include "rgan/ops.hpp"
#include "rgan/optim.hpp"
#include "rgan/vocab.hpp"

// The generator: a multi-layer LSTM encoder-decoder with global dot-product
// attention. The decoder emits softmax rows; autoregressive generation feeds
// back the argmax token while handing the soft rows downstream unchanged.

namespace rgan {

// A right-padded batch of sequences wrapped as [SOS, tokens..., EOS, PAD...].
// Content is clipped to `clip_len` tokens first, so width = clip_len + 2.
template <typename S>
struct TokenBatchT {
    int batch = 0;
    int width = 0;
    std::vector<int> ids;  // [batch * width]
    TensorT<S> valid;      // [batch, width], 1 everywhere except PAD

    int id(int b, int t) const { return ids[static_cast<size_t>(b) * width + t]; }
};

template <typename S>
TokenBatchT<S> make_batch(const std::vector<TokenSequence>& seqs, int clip_len,
                          const Vocab& vocab) {
    RGAN_REQUIRE(!seqs.empty(), "make_batch: no sequences");
    RGAN_REQUIRE(clip_len >= 1, "make_batch: clip length must be positive");
    TokenBatchT<S> out;
    out.batch = static_cast<int>(seqs.size());
    out.width = clip_len + 2;
    out.ids.assign(static_cast<size_t>(out.batch) * out.width, Vocab::kPad);
    out.valid = TensorT<S>({out.batch, out.width});
    for (int b = 0; b < out.batch; ++b) {
        const TokenSequence& seq = seqs[static_cast<size_t>(b)];
        RGAN_REQUIRE(!seq.empty(), "make_batch: empty sequence at row " + std::to_string(b));
        vocab.check(seq);
        const int content = std::min<int>(static_cast<int>(seq.size()), clip_len);
        int t = 0;
        auto put = [&](int id) {
            out.ids[static_cast<size_t>(b) * out.width + t] = id;
            out.valid.at(b, t) = S(1);
            ++t;
        };
        put(Vocab::kSos);
        for (int i = 0; i < content; ++i) put(seq[static_cast<size_t>(i)]);
        put(Vocab::kEos);
    }
    return out;
}

// One LSTM step over a batch. Gate block layout along the 4d axis: input,
// forget, candidate, output.
template <typename S>
std::pair<VarT<S>, VarT<S>> lstm_cell(VarT<S> x, VarT<S> h, VarT<S> c, VarT<S> wx,
                                      VarT<S> wh, VarT<S> b, int hidden) {
    RGAN_REQUIRE(x.val().rank() == 2 && h.val().rank() == 2 && c.val().rank() == 2,
                 "lstm_cell: states must be 2-d");
    RGAN_REQUIRE(wx.val().dim(1) == 4 * hidden && wh.val().dim(0) == hidden &&
                     b.val().dim(0) == 4 * hidden && h.val().dim(1) == hidden,
                 "lstm_cell: parameter shapes inconsistent with hidden width");
    VarT<S> z = add_rowwise(add(matmul(x, wx), matmul(h, wh)), b);
    VarT<S> i = sigmoid(slice_cols(z, 0, hidden));
    VarT<S> f = sigmoid(slice_cols(z, hidden, 2 * hidden));
    VarT<S> g = tanh_of(slice_cols(z, 2 * hidden, 3 * hidden));
    VarT<S> o = sigmoid(slice_cols(z, 3 * hidden, 4 * hidden));
    VarT<S> c_new = add(mul(f, c), mul(i, g));
    VarT<S> h_new = mul(o, tanh_of(c_new));
    return {h_new, c_new};
}

template <typename S>
class GeneratorT {
public:
    GeneratorT(const Vocab& vocab, int layers, int hidden, Rng& rng)
        : vocab_(vocab), layers_(layers), hidden_(hidden) {
        RGAN_REQUIRE_CONFIG(layers >= 1 && hidden >= 1, "generator: bad dimensions");
        RGAN_REQUIRE_CONFIG(vocab.size > Vocab::kTaskOffset, "generator: vocab too small");
        const int V = vocab.size, d = hidden;
        embed_ = store_.add("gen.embed", TensorT<S>::xavier({V, d}, V, d, rng));
        for (int side = 0; side < 2; ++side) {
            const std::string prefix = side == 0 ? "gen.enc.l" : "gen.dec.l";
            auto& wx = side == 0 ? enc_wx_ : dec_wx_;
            auto& wh = side == 0 ? enc_wh_ : dec_wh_;
            auto& bs = side == 0 ? enc_b_ : dec_b_;
            for (int l = 0; l < layers; ++l) {
                const std::string name = prefix + std::to_string(l);
                wx.push_back(store_.add(name + ".wx",
                                        TensorT<S>::xavier({d, 4 * d}, d, 4 * d, rng)));
                wh.push_back(store_.add(name + ".wh",
                                        TensorT<S>::xavier({d, 4 * d}, d, 4 * d, rng)));
                TensorT<S> bias({4 * d});
                for (int j = d; j < 2 * d; ++j) bias[j] = S(1);  // forget gate opens
                bs.push_back(store_.add(name + ".b", std::move(bias)));
            }
        }
        out_w_ = store_.add("gen.out.w", TensorT<S>::xavier({2 * d, V}, 2 * d, V, rng));
        out_b_ = store_.add("gen.out.b", TensorT<S>({V}));
    }

    const Vocab& vocab() const { return vocab_; }
    int layers() const { return layers_; }
    int hidden() const { return hidden_; }
    ParameterStoreT<S>& store() { return store_; }
    const ParameterStoreT<S>& store() const { return store_; }

    struct Encoded {
        VarT<S> states;          // [B, T, d] top-layer states
        TensorT<S> valid;        // [B, T] attention mask
        std::vector<VarT<S>> h;  // per-layer final states [B, d]
        std::vector<VarT<S>> c;
    };

    Encoded encode(TapeT<S>& tape, const std::vector<VarT<S>>& P,
                   const TokenBatchT<S>& x) const {
        RGAN_REQUIRE(x.batch >= 1 && x.width >= 1, "encode: empty batch");
        const int B = x.batch, W = x.width, d = hidden_;
        std::vector<VarT<S>> h(static_cast<size_t>(layers_)),
            c(static_cast<size_t>(layers_));
        for (int l = 0; l < layers_; ++l) {
            h[static_cast<size_t>(l)] = tape.constant(TensorT<S>({B, d}));
            c[static_cast<size_t>(l)] = tape.constant(TensorT<S>({B, d}));
        }
        std::vector<VarT<S>> top_states;
        top_states.reserve(static_cast<size_t>(W));
        for (int t = 0; t < W; ++t) {
            std::vector<int> col(static_cast<size_t>(B));
            TensorT<S> mask({B});
            for (int b = 0; b < B; ++b) {
                col[static_cast<size_t>(b)] = x.id(b, t);
                mask[b] = x.valid.at(b, t);
            }
            VarT<S> input = embed_rows(P[static_cast<size_t>(embed_)], col);
            for (int l = 0; l < layers_; ++l) {
                auto [hn, cn] =
                    lstm_cell(input, h[static_cast<size_t>(l)], c[static_cast<size_t>(l)],
                              P[static_cast<size_t>(enc_wx_[static_cast<size_t>(l)])],
                              P[static_cast<size_t>(enc_wh_[static_cast<size_t>(l)])],
                              P[static_cast<size_t>(enc_b_[static_cast<size_t>(l)])],
                              hidden_);
                // PAD steps freeze the state so the final state reflects the
                // true end of each sequence.
                h[static_cast<size_t>(l)] = select_rows(mask, hn, h[static_cast<size_t>(l)]);
                c[static_cast<size_t>(l)] = select_rows(mask, cn, c[static_cast<size_t>(l)]);
                input = h[static_cast<size_t>(l)];
            }
            top_states.push_back(h[static_cast<size_t>(layers_ - 1)]);
        }
        return Encoded{stack_timesteps(top_states), x.valid, std::move(h), std::move(c)};
    }

    // One decoder step: embeds prev tokens, runs the stack, attends, projects.
    // h/c are updated in place.
    VarT<S> decode_step(TapeT<S>& tape, const std::vector<VarT<S>>& P,
                        const std::vector<int>& prev, std::vector<VarT<S>>& h,
                        std::vector<VarT<S>>& c, const Encoded& enc) const {
        (void)tape;
        VarT<S> input = embed_rows(P[static_cast<size_t>(embed_)], prev);
        for (int l = 0; l < layers_; ++l) {
            auto [hn, cn] =
                lstm_cell(input, h[static_cast<size_t>(l)], c[static_cast<size_t>(l)],
                          P[static_cast<size_t>(dec_wx_[static_cast<size_t>(l)])],
                          P[static_cast<size_t>(dec_wh_[static_cast<size_t>(l)])],
                          P[static_cast<size_t>(dec_b_[static_cast<size_t>(l)])], hidden_);
            h[static_cast<size_t>(l)] = hn;
            c[static_cast<size_t>(l)] = cn;
            input = hn;
        }
        VarT<S> top = h[static_cast<size_t>(layers_ - 1)];
        VarT<S> context = attend(enc.states, top, enc.valid);
        VarT<S> logits = add_rowwise(
            matmul(concat_cols(context, top), P[static_cast<size_t>(out_w_)]),
            P[static_cast<size_t>(out_b_)]);
        return softmax_rows(logits);
    }

    struct Generated {
        VarT<S> rows;                    // [B, T', V]; PAD one-hot after EOS
        std::vector<TokenSequence> hard; // argmax per emitted row, per sequence
        std::vector<int> lengths;        // per sequence: rows up to & incl. EOS
        int emitted = 0;                 // T'
    };

    // Autoregressive generation with argmax feedback. Emits at most max_rows
    // rows; a sequence's rows after its EOS emission are PAD one-hots.
    Generated generate(TapeT<S>& tape, const std::vector<VarT<S>>& P,
                       const TokenBatchT<S>& x, int max_rows) const {
        RGAN_REQUIRE(max_rows >= 1, "generate: max_rows must be >= 1");
        const int B = x.batch, V = vocab_.size;
        Encoded enc = encode(tape, P, x);
        std::vector<VarT<S>> h = enc.h, c = enc.c;

        TensorT<S> pad_rows({B, V});
        for (int b = 0; b < B; ++b) pad_rows.at(b, Vocab::kPad) = S(1);
        VarT<S> pad_const = tape.constant(pad_rows);

        std::vector<int> prev(static_cast<size_t>(B), Vocab::kSos);
        TensorT<S> alive({B});
        alive.fill(S(1));
        std::vector<VarT<S>> steps;
        Generated out;
        out.hard.assign(static_cast<size_t>(B), {});
        out.lengths.assign(static_cast<size_t>(B), 0);
        for (int t = 0; t < max_rows; ++t) {
            VarT<S> soft = decode_step(tape, P, prev, h, c, enc);
            VarT<S> row = select_rows(alive, soft, pad_const);
            steps.push_back(row);
            bool any_alive = false;
            for (int b = 0; b < B; ++b) {
                int arg = 0;
                S best = row.val().at(b, 0);
                for (int v = 1; v < V; ++v)
                    if (row.val().at(b, v) > best) {
                        best = row.val().at(b, v);
                        arg = v;
                    }
                out.hard[static_cast<size_t>(b)].push_back(arg);
                prev[static_cast<size_t>(b)] = arg;
                if (alive[b] != S(0)) {
                    out.lengths[static_cast<size_t>(b)] = t + 1;
                    if (arg == Vocab::kEos) alive[b] = S(0);
                }
                if (alive[b] != S(0)) any_alive = true;
            }
            if (!any_alive) break;
        }
        out.rows = stack_timesteps(steps);
        out.emitted = static_cast<int>(steps.size());
        return out;
    }

    // Teacher-forced soft rows. Decoder inputs are y's wrapped positions
    // 0..W-2 (SOS through the second-to-last), so row t predicts position
    // t+1. Returns [B, W-1, V].
    VarT<S> teacher_forced_rows(TapeT<S>& tape, const std::vector<VarT<S>>& P,
                                const TokenBatchT<S>& x, const TokenBatchT<S>& y) const {
        RGAN_REQUIRE(x.batch == y.batch, "teacher_forced_rows: batch mismatch");
        RGAN_REQUIRE(y.width >= 2, "teacher_forced_rows: target batch too narrow");
        Encoded enc = encode(tape, P, x);
        std::vector<VarT<S>> h = enc.h, c = enc.c;
        std::vector<VarT<S>> steps;
        steps.reserve(static_cast<size_t>(y.width - 1));
        for (int t = 0; t + 1 < y.width; ++t) {
            std::vector<int> prev(static_cast<size_t>(y.batch));
            for (int b = 0; b < y.batch; ++b) prev[static_cast<size_t>(b)] = y.id(b, t);
            steps.push_back(decode_step(tape, P, prev, h, c, enc));
        }
        return stack_timesteps(steps);
    }

    // Targets/mask aligned with teacher_forced_rows: position t+1 of y.
    void shifted_targets(const TokenBatchT<S>& y, std::vector<int>& targets,
                         std::vector<S>& mask) const {
        targets.clear();
        mask.clear();
        for (int b = 0; b < y.batch; ++b)
            for (int t = 1; t < y.width; ++t) {
                targets.push_back(y.id(b, t));
                mask.push_back(y.valid.at(b, t));
            }
    }

private:
    Vocab vocab_;
    int layers_, hidden_;
    ParameterStoreT<S> store_;
    int embed_ = -1, out_w_ = -1, out_b_ = -1;
    std::vector<int> enc_wx_, enc_wh_, enc_b_, dec_wx_, dec_wh_, dec_b_;
};

using Generator = GeneratorT<float>;

// Evaluation-time row budget for an input of length n over a task whose
// longest valid content is task_max tokens: near-length-preserving repairs
// plus slack, capped at task_max content rows plus the EOS row.
inline int eval_max_rows(int input_len, int task_max) {
    const int want = (3 * input_len + 1) / 2 + 5;
    return std::min(want, task_max + 1);
}

// Argmax tokens of each soft row until (and excluding) the first EOS,
// specials stripped: the hard repair a SoftSequence denotes.
template <typename S>
TokenSequence harden(const TensorT<S>& rows) {
    RGAN_REQUIRE(rows.rank() == 2, "harden: rows must be [T,V]");
    TokenSequence out;
    for (int t = 0; t < rows.dim(0); ++t) {
        int arg = 0;
        S best = rows.at(t, 0);
        for (int v = 1; v < rows.dim(1); ++v)
            if (rows.at(t, v) > best) {
                best = rows.at(t, v);
                arg = v;
            }
        if (arg == Vocab::kEos) break;
        if (arg >= Vocab::kTaskOffset) out.push_back(arg);
    }
    return out;
}

// Strip a hard generated sequence (as emitted, possibly with specials) down
// to task tokens before the first EOS.
inline TokenSequence strip_specials(const TokenSequence& seq) {
    TokenSequence out;
    for (int id : seq) {
        if (id == Vocab::kEos) break;
        if (id >= Vocab::kTaskOffset) out.push_back(id);
    }
    return out;
}

}  // namespace rgan
