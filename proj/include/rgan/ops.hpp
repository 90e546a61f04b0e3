#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rgan/tape.hpp"

// Differentiable primitives. Every op appends one node; backward closures read
// parent values straight off the tape, so only op-specific buffers (argmax
// positions, attention weights, im2col blocks) are captured.

namespace rgan {

namespace detail {

template <typename S>
using EMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EMap = Eigen::Map<EMatrix<S>>;
template <typename S>
using ECMap = Eigen::Map<const EMatrix<S>>;

template <typename S>
inline void check_same_tape(VarT<S> a, VarT<S> b, const char* op) {
    RGAN_REQUIRE(a.tape != nullptr && a.tape == b.tape,
                 std::string(op) + ": vars must live on the same tape");
}

constexpr double kProbFloor = 1e-12;

}  // namespace detail

template <typename S>
VarT<S> add(VarT<S> a, VarT<S> b) {
    detail::check_same_tape(a, b, "add");
    const auto& av = a.val();
    const auto& bv = b.val();
    RGAN_REQUIRE(av.same_shape(bv), "add: shape mismatch");
    TensorT<S> out(av.shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    const int aid = a.id, bid = b.id;
    return a.tape->push(std::move(out), a.requires_grad() || b.requires_grad(),
                        [aid, bid](TapeT<S>& t, int self) {
                            const auto& g = t.grad_of(self);
                            t.accumulate(aid, g);
                            t.accumulate(bid, g);
                        });
}

template <typename S>
VarT<S> sub(VarT<S> a, VarT<S> b) {
    detail::check_same_tape(a, b, "sub");
    const auto& av = a.val();
    const auto& bv = b.val();
    RGAN_REQUIRE(av.same_shape(bv), "sub: shape mismatch");
    TensorT<S> out(av.shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    const int aid = a.id, bid = b.id;
    return a.tape->push(std::move(out), a.requires_grad() || b.requires_grad(),
                        [aid, bid](TapeT<S>& t, int self) {
                            const auto& g = t.grad_of(self);
                            t.accumulate(aid, g);
                            if (!t.requires_grad(bid)) return;
                            TensorT<S> neg(g.shape());
                            for (int64_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
                            t.accumulate(bid, neg);
                        });
}

template <typename S>
VarT<S> mul(VarT<S> a, VarT<S> b) {
    detail::check_same_tape(a, b, "mul");
    const auto& av = a.val();
    const auto& bv = b.val();
    RGAN_REQUIRE(av.same_shape(bv), "mul: shape mismatch");
    TensorT<S> out(av.shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    const int aid = a.id, bid = b.id;
    return a.tape->push(std::move(out), a.requires_grad() || b.requires_grad(),
                        [aid, bid](TapeT<S>& t, int self) {
                            const auto& g = t.grad_of(self);
                            if (t.requires_grad(aid)) {
                                const auto& bv2 = t.value(bid);
                                TensorT<S> d(g.shape());
                                for (int64_t i = 0; i < g.size(); ++i) d[i] = g[i] * bv2[i];
                                t.accumulate(aid, d);
                            }
                            if (t.requires_grad(bid)) {
                                const auto& av2 = t.value(aid);
                                TensorT<S> d(g.shape());
                                for (int64_t i = 0; i < g.size(); ++i) d[i] = g[i] * av2[i];
                                t.accumulate(bid, d);
                            }
                        });
}

template <typename S>
VarT<S> scale(VarT<S> a, double c) {
    const auto& av = a.val();
    TensorT<S> out(av.shape());
    const S cs = static_cast<S>(c);
    for (int64_t i = 0; i < out.size(); ++i) out[i] = av[i] * cs;
    const int aid = a.id;
    return a.tape->push(std::move(out), a.requires_grad(),
                        [aid, cs](TapeT<S>& t, int self) {
                            const auto& g = t.grad_of(self);
                            if (!t.requires_grad(aid)) return;
                            TensorT<S> d(g.shape());
                            for (int64_t i = 0; i < g.size(); ++i) d[i] = g[i] * cs;
                            t.accumulate(aid, d);
                        });
}

template <typename S>
VarT<S> neg(VarT<S> a) {
    return scale(a, -1.0);
}

// a: [B,K] x w: [K,N] -> [B,N]
template <typename S>
VarT<S> matmul(VarT<S> a, VarT<S> w) {
    detail::check_same_tape(a, w, "matmul");
    const auto& av = a.val();
    const auto& wv = w.val();
    RGAN_REQUIRE(av.rank() == 2 && wv.rank() == 2 && av.dim(1) == wv.dim(0),
                 "matmul: incompatible shapes " + TensorT<S>::shape_str(av.shape()) + " x " +
                     TensorT<S>::shape_str(wv.shape()));
    const int B = av.dim(0), K = av.dim(1), N = wv.dim(1);
    TensorT<S> out({B, N});
    detail::ECMap<S> A(av.data(), B, K);
    detail::ECMap<S> W(wv.data(), K, N);
    detail::EMap<S> C(out.data(), B, N);
    C.noalias() = A * W;
    const int aid = a.id, wid = w.id;
    return a.tape->push(std::move(out), a.requires_grad() || w.requires_grad(),
                        [aid, wid, B, K, N](TapeT<S>& t, int self) {
                            detail::ECMap<S> G(t.grad_of(self).data(), B, N);
                            if (t.requires_grad(aid)) {
                                detail::ECMap<S> W2(t.value(wid).data(), K, N);
                                detail::EMap<S> dA(t.grad_of(aid).data(), B, K);
                                dA.noalias() += G * W2.transpose();
                            }
                            if (t.requires_grad(wid)) {
                                detail::ECMap<S> A2(t.value(aid).data(), B, K);
                                detail::EMap<S> dW(t.grad_of(wid).data(), K, N);
                                dW.noalias() += A2.transpose() * G;
                            }
                        });
}

// a: [B,N] + bias: [N], broadcast over rows
template <typename S>
VarT<S> add_rowwise(VarT<S> a, VarT<S> bias) {
    detail::check_same_tape(a, bias, "add_rowwise");
    const auto& av = a.val();
    const auto& bv = bias.val();
    RGAN_REQUIRE(av.rank() == 2 && bv.rank() == 1 && av.dim(1) == bv.dim(0),
                 "add_rowwise: shape mismatch");
    const int B = av.dim(0), N = av.dim(1);
    TensorT<S> out({B, N});
    for (int r = 0; r < B; ++r)
        for (int c = 0; c < N; ++c) out.at(r, c) = av.at(r, c) + bv[c];
    const int aid = a.id, bid = bias.id;
    return a.tape->push(std::move(out), a.requires_grad() || bias.requires_grad(),
                        [aid, bid, B, N](TapeT<S>& t, int self) {
                            const auto& g = t.grad_of(self);
                            t.accumulate(aid, g);
                            if (!t.requires_grad(bid)) return;
                            TensorT<S>& db = t.grad_of(bid);
                            for (int r = 0; r < B; ++r)
                                for (int c = 0; c < N; ++c) db[c] += g.at(r, c);
                        });
}

template <typename S>
VarT<S> sigmoid(VarT<S> a) {
    const auto& av = a.val();
    TensorT<S> out(av.shape());
    for (int64_t i = 0; i < out.size(); ++i) {
        const S x = av[i];
        out[i] = x >= 0 ? S(1) / (S(1) + std::exp(-x))
                        : std::exp(x) / (S(1) + std::exp(x));
    }
    const int aid = a.id;
    return a.tape->push(std::move(out), a.requires_grad(),
                        [aid](TapeT<S>& t, int self) {
                            if (!t.requires_grad(aid)) return;
                            const auto& g = t.grad_of(self);
                            const auto& y = t.value(self);
                            TensorT<S> d(g.shape());
                            for (int64_t i = 0; i < g.size(); ++i)
                                d[i] = g[i] * y[i] * (S(1) - y[i]);
                            t.accumulate(aid, d);
                        });
}

template <typename S>
VarT<S> tanh_of(VarT<S> a) {
    const auto& av = a.val();
    TensorT<S> out(av.shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
    const int aid = a.id;
    return a.tape->push(std::move(out), a.requires_grad(),
                        [aid](TapeT<S>& t, int self) {
                            if (!t.requires_grad(aid)) return;
                            const auto& g = t.grad_of(self);
                            const auto& y = t.value(self);
                            TensorT<S> d(g.shape());
                            for (int64_t i = 0; i < g.size(); ++i)
                                d[i] = g[i] * (S(1) - y[i] * y[i]);
                            t.accumulate(aid, d);
                        });
}

template <typename S>
VarT<S> relu(VarT<S> a) {
    const auto& av = a.val();
    TensorT<S> out(av.shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0 ? av[i] : S(0);
    const int aid = a.id;
    return a.tape->push(std::move(out), a.requires_grad(),
                        [aid](TapeT<S>& t, int self) {
                            if (!t.requires_grad(aid)) return;
                            const auto& g = t.grad_of(self);
                            const auto& x = t.value(aid);
                            TensorT<S> d(g.shape());
                            for (int64_t i = 0; i < g.size(); ++i)
                                d[i] = x[i] > 0 ? g[i] : S(0);
                            t.accumulate(aid, d);
                        });
}

// Row-wise softmax with max-subtraction; input [B,V] (or [V] treated as one row).
template <typename S>
VarT<S> softmax_rows(VarT<S> a) {
    const auto& av = a.val();
    RGAN_REQUIRE(!av.empty(), "softmax: empty input");
    RGAN_REQUIRE(av.rank() == 1 || av.rank() == 2, "softmax: expects vector or matrix");
    const int B = av.rank() == 2 ? av.dim(0) : 1;
    const int V = av.rank() == 2 ? av.dim(1) : av.dim(0);
    TensorT<S> out(av.shape());
    for (int r = 0; r < B; ++r) {
        const S* x = av.data() + static_cast<int64_t>(r) * V;
        S* y = out.data() + static_cast<int64_t>(r) * V;
        S m = x[0];
        for (int c = 1; c < V; ++c) m = std::max(m, x[c]);
        S z = S(0);
        for (int c = 0; c < V; ++c) {
            y[c] = std::exp(x[c] - m);
            z += y[c];
        }
        for (int c = 0; c < V; ++c) y[c] /= z;
    }
    const int aid = a.id;
    return a.tape->push(std::move(out), a.requires_grad(),
                        [aid, B, V](TapeT<S>& t, int self) {
                            if (!t.requires_grad(aid)) return;
                            const auto& g = t.grad_of(self);
                            const auto& y = t.value(self);
                            TensorT<S> d(g.shape());
                            for (int r = 0; r < B; ++r) {
                                const int64_t off = static_cast<int64_t>(r) * V;
                                S dot = S(0);
                                for (int c = 0; c < V; ++c) dot += g[off + c] * y[off + c];
                                for (int c = 0; c < V; ++c)
                                    d[off + c] = y[off + c] * (g[off + c] - dot);
                            }
                            t.accumulate(aid, d);
                        });
}

// Columns [c0, c1) of a [B,N] matrix.
template <typename S>
VarT<S> slice_cols(VarT<S> a, int c0, int c1) {
    const auto& av = a.val();
    RGAN_REQUIRE(av.rank() == 2 && 0 <= c0 && c0 < c1 && c1 <= av.dim(1),
                 "slice_cols: bad range");
    const int B = av.dim(0), N = av.dim(1), M = c1 - c0;
    TensorT<S> out({B, M});
    for (int r = 0; r < B; ++r)
        for (int c = 0; c < M; ++c) out.at(r, c) = av.at(r, c0 + c);
    const int aid = a.id;
    return a.tape->push(std::move(out), a.requires_grad(),
                        [aid, B, N, M, c0](TapeT<S>& t, int self) {
                            if (!t.requires_grad(aid)) return;
                            const auto& g = t.grad_of(self);
                            TensorT<S>& da = t.grad_of(aid);
                            for (int r = 0; r < B; ++r)
                                for (int c = 0; c < M; ++c) da.at(r, c0 + c) += g.at(r, c);
                        });
}

template <typename S>
VarT<S> concat_cols(VarT<S> a, VarT<S> b) {
    detail::check_same_tape(a, b, "concat_cols");
    const auto& av = a.val();
    const auto& bv = b.val();
    RGAN_REQUIRE(av.rank() == 2 && bv.rank() == 2 && av.dim(0) == bv.dim(0),
                 "concat_cols: row mismatch");
    const int B = av.dim(0), M = av.dim(1), N = bv.dim(1);
    TensorT<S> out({B, M + N});
    for (int r = 0; r < B; ++r) {
        for (int c = 0; c < M; ++c) out.at(r, c) = av.at(r, c);
        for (int c = 0; c < N; ++c) out.at(r, M + c) = bv.at(r, c);
    }
    const int aid = a.id, bid = b.id;
    return a.tape->push(std::move(out), a.requires_grad() || b.requires_grad(),
                        [aid, bid, B, M, N](TapeT<S>& t, int self) {
                            const auto& g = t.grad_of(self);
                            if (t.requires_grad(aid)) {
                                TensorT<S>& da = t.grad_of(aid);
                                for (int r = 0; r < B; ++r)
                                    for (int c = 0; c < M; ++c) da.at(r, c) += g.at(r, c);
                            }
                            if (t.requires_grad(bid)) {
                                TensorT<S>& db = t.grad_of(bid);
                                for (int r = 0; r < B; ++r)
                                    for (int c = 0; c < N; ++c) db.at(r, c) += g.at(r, M + c);
                            }
                        });
}

// Concatenate [B,T,C_i] blocks along the channel axis.
template <typename S>
VarT<S> concat_channels(const std::vector<VarT<S>>& parts) {
    RGAN_REQUIRE(!parts.empty(), "concat_channels: no parts");
    TapeT<S>& tape = *parts[0].tape;
    const auto& first = parts[0].val();
    RGAN_REQUIRE(first.rank() == 3, "concat_channels: parts must be [B,T,C]");
    const int B = first.dim(0), T = first.dim(1);
    int C = 0;
    bool rg = false;
    std::vector<int> ids, widths;
    for (const auto& p : parts) {
        const auto& v = p.val();
        RGAN_REQUIRE(v.rank() == 3 && v.dim(0) == B && v.dim(1) == T,
                     "concat_channels: shape mismatch");
        ids.push_back(p.id);
        widths.push_back(v.dim(2));
        C += v.dim(2);
        rg = rg || p.requires_grad();
    }
    TensorT<S> out({B, T, C});
    int off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
        const auto& v = parts[i].val();
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < widths[i]; ++c)
                    out.at(b, t, off + c) = v.at(b, t, c);
        off += widths[i];
    }
    return tape.push(std::move(out), rg,
                     [ids = std::move(ids), widths = std::move(widths), B,
                      T](TapeT<S>& t, int self) {
                         const auto& g = t.grad_of(self);
                         int off = 0;
                         for (size_t i = 0; i < ids.size(); ++i) {
                             if (t.requires_grad(ids[i])) {
                                 TensorT<S>& dp = t.grad_of(ids[i]);
                                 for (int b = 0; b < B; ++b)
                                     for (int tt = 0; tt < T; ++tt)
                                         for (int c = 0; c < widths[i]; ++c)
                                             dp.at(b, tt, c) += g.at(b, tt, off + c);
                             }
                             off += widths[i];
                         }
                     });
}

// Concatenate [B,T_i,C] blocks along the time axis.
template <typename S>
VarT<S> concat_time(const std::vector<VarT<S>>& parts) {
    RGAN_REQUIRE(!parts.empty(), "concat_time: no parts");
    TapeT<S>& tape = *parts[0].tape;
    const auto& first = parts[0].val();
    RGAN_REQUIRE(first.rank() == 3, "concat_time: parts must be [B,T,C]");
    const int B = first.dim(0), C = first.dim(2);
    int T = 0;
    bool rg = false;
    std::vector<int> ids, spans;
    for (const auto& p : parts) {
        const auto& v = p.val();
        RGAN_REQUIRE(v.rank() == 3 && v.dim(0) == B && v.dim(2) == C,
                     "concat_time: shape mismatch");
        ids.push_back(p.id);
        spans.push_back(v.dim(1));
        T += v.dim(1);
        rg = rg || p.requires_grad();
    }
    TensorT<S> out({B, T, C});
    int off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
        const auto& v = parts[i].val();
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < spans[i]; ++t)
                for (int c = 0; c < C; ++c) out.at(b, off + t, c) = v.at(b, t, c);
        off += spans[i];
    }
    return tape.push(std::move(out), rg,
                     [ids = std::move(ids), spans = std::move(spans), B,
                      C](TapeT<S>& t, int self) {
                         const auto& g = t.grad_of(self);
                         int off = 0;
                         for (size_t i = 0; i < ids.size(); ++i) {
                             if (t.requires_grad(ids[i])) {
                                 TensorT<S>& dp = t.grad_of(ids[i]);
                                 for (int b = 0; b < B; ++b)
                                     for (int tt = 0; tt < spans[i]; ++tt)
                                         for (int c = 0; c < C; ++c)
                                             dp.at(b, tt, c) += g.at(b, off + tt, c);
                             }
                             off += spans[i];
                         }
                     });
}

// Gather rows of an embedding table: table [V,D], ids length B -> [B,D].
template <typename S>
VarT<S> embed_rows(VarT<S> table, std::vector<int> ids) {
    const auto& tv = table.val();
    RGAN_REQUIRE(tv.rank() == 2, "embed_rows: table must be 2-d");
    const int V = tv.dim(0), D = tv.dim(1);
    const int B = static_cast<int>(ids.size());
    RGAN_REQUIRE(B > 0, "embed_rows: no ids");
    for (int id : ids)
        RGAN_REQUIRE_INDEX(0 <= id && id < V,
                           "embed_rows: token id " + std::to_string(id) + " out of range");
    TensorT<S> out({B, D});
    for (int r = 0; r < B; ++r)
        for (int c = 0; c < D; ++c) out.at(r, c) = tv.at(ids[static_cast<size_t>(r)], c);
    const int tid = table.id;
    return table.tape->push(std::move(out), table.requires_grad(),
                            [tid, ids = std::move(ids), D](TapeT<S>& t, int self) {
                                if (!t.requires_grad(tid)) return;
                                const auto& g = t.grad_of(self);
                                TensorT<S>& dt = t.grad_of(tid);
                                for (size_t r = 0; r < ids.size(); ++r)
                                    for (int c = 0; c < D; ++c)
                                        dt.at(ids[r], c) += g.at(static_cast<int>(r), c);
                            });
}

// Per-row select: out[r] = mask[r] != 0 ? a[r] : b[r]. Mask is a constant.
template <typename S>
VarT<S> select_rows(const TensorT<S>& mask, VarT<S> a, VarT<S> b) {
    detail::check_same_tape(a, b, "select_rows");
    const auto& av = a.val();
    const auto& bv = b.val();
    RGAN_REQUIRE(av.same_shape(bv) && av.rank() == 2, "select_rows: shape mismatch");
    RGAN_REQUIRE(mask.size() == av.dim(0), "select_rows: mask length mismatch");
    const int B = av.dim(0), N = av.dim(1);
    TensorT<S> out({B, N});
    for (int r = 0; r < B; ++r) {
        const bool take_a = mask[r] != S(0);
        for (int c = 0; c < N; ++c) out.at(r, c) = take_a ? av.at(r, c) : bv.at(r, c);
    }
    const int aid = a.id, bid = b.id;
    return a.tape->push(std::move(out), a.requires_grad() || b.requires_grad(),
                        [aid, bid, mask, B, N](TapeT<S>& t, int self) {
                            const auto& g = t.grad_of(self);
                            if (t.requires_grad(aid)) {
                                TensorT<S>& da = t.grad_of(aid);
                                for (int r = 0; r < B; ++r)
                                    if (mask[r] != S(0))
                                        for (int c = 0; c < N; ++c) da.at(r, c) += g.at(r, c);
                            }
                            if (t.requires_grad(bid)) {
                                TensorT<S>& db = t.grad_of(bid);
                                for (int r = 0; r < B; ++r)
                                    if (mask[r] == S(0))
                                        for (int c = 0; c < N; ++c) db.at(r, c) += g.at(r, c);
                            }
                        });
}

template <typename S>
VarT<S> sum_all(VarT<S> a) {
    const auto& av = a.val();
    S acc = S(0);
    for (int64_t i = 0; i < av.size(); ++i) acc += av[i];
    const int aid = a.id;
    return a.tape->push(TensorT<S>::scalar(acc), a.requires_grad(),
                        [aid](TapeT<S>& t, int self) {
                            if (!t.requires_grad(aid)) return;
                            const S g0 = t.grad_of(self)[0];
                            TensorT<S> d(t.value(aid).shape());
                            d.fill(g0);
                            t.accumulate(aid, d);
                        });
}

template <typename S>
VarT<S> mean_all(VarT<S> a) {
    const auto& av = a.val();
    RGAN_REQUIRE(av.size() > 0, "mean_all: empty input");
    return scale(sum_all(a), 1.0 / static_cast<double>(av.size()));
}

// Elementwise ln(max(x, 1e-12)).
template <typename S>
VarT<S> log_floored(VarT<S> a) {
    const auto& av = a.val();
    const S floor = static_cast<S>(detail::kProbFloor);
    TensorT<S> out(av.shape());
    for (int64_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(av[i], floor));
    const int aid = a.id;
    return a.tape->push(std::move(out), a.requires_grad(),
                        [aid, floor](TapeT<S>& t, int self) {
                            if (!t.requires_grad(aid)) return;
                            const auto& g = t.grad_of(self);
                            const auto& x = t.value(aid);
                            TensorT<S> d(g.shape());
                            for (int64_t i = 0; i < g.size(); ++i)
                                d[i] = x[i] > floor ? g[i] / x[i] : S(0);
                            t.accumulate(aid, d);
                        });
}

// Stack T step matrices [B,C] into one [B,T,C] block.
template <typename S>
VarT<S> stack_timesteps(const std::vector<VarT<S>>& steps) {
    RGAN_REQUIRE(!steps.empty(), "stack_timesteps: no steps");
    TapeT<S>& tape = *steps[0].tape;
    const auto& first = steps[0].val();
    RGAN_REQUIRE(first.rank() == 2, "stack_timesteps: steps must be 2-d");
    const int B = first.dim(0), C = first.dim(1);
    const int T = static_cast<int>(steps.size());
    bool rg = false;
    std::vector<int> ids(steps.size());
    for (size_t t = 0; t < steps.size(); ++t) {
        RGAN_REQUIRE(steps[t].val().same_shape(first), "stack_timesteps: shape mismatch");
        ids[t] = steps[t].id;
        rg = rg || steps[t].requires_grad();
    }
    TensorT<S> out({B, T, C});
    for (int t = 0; t < T; ++t) {
        const auto& sv = steps[static_cast<size_t>(t)].val();
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) out.at(b, t, c) = sv.at(b, c);
    }
    return tape.push(std::move(out), rg,
                     [ids = std::move(ids), B, T, C](TapeT<S>& t, int self) {
                         const auto& g = t.grad_of(self);
                         for (int step = 0; step < T; ++step) {
                             const int pid = ids[static_cast<size_t>(step)];
                             if (!t.requires_grad(pid)) continue;
                             TensorT<S>& dp = t.grad_of(pid);
                             for (int b = 0; b < B; ++b)
                                 for (int c = 0; c < C; ++c) dp.at(b, c) += g.at(b, step, c);
                         }
                     });
}

// Global dot-product attention, fused. enc [B,T,C], query [B,C], valid [B,T]
// constant 0/1 mask. Returns the context vector [B,C].
template <typename S>
VarT<S> attend(VarT<S> enc, VarT<S> query, const TensorT<S>& valid) {
    detail::check_same_tape(enc, query, "attend");
    const auto& ev = enc.val();
    const auto& qv = query.val();
    RGAN_REQUIRE(ev.rank() == 3 && qv.rank() == 2, "attend: bad ranks");
    RGAN_REQUIRE(ev.dim(0) == qv.dim(0) && ev.dim(2) == qv.dim(1),
                 "attend: query width must equal encoder state width");
    const int B = ev.dim(0), T = ev.dim(1), C = ev.dim(2);
    RGAN_REQUIRE(T >= 1, "attend: no encoder states");
    RGAN_REQUIRE(valid.rank() == 2 && valid.dim(0) == B && valid.dim(1) == T,
                 "attend: mask shape mismatch");

    TensorT<S> weights({B, T});
    TensorT<S> out({B, C});
    for (int b = 0; b < B; ++b) {
        S m = std::numeric_limits<S>::lowest();
        std::vector<S> scores(static_cast<size_t>(T));
        for (int t = 0; t < T; ++t) {
            S s = S(0);
            for (int c = 0; c < C; ++c) s += qv.at(b, c) * ev.at(b, t, c);
            if (valid.at(b, t) == S(0)) s = S(-1e30);
            scores[static_cast<size_t>(t)] = s;
            m = std::max(m, s);
        }
        S z = S(0);
        for (int t = 0; t < T; ++t) {
            const S e = std::exp(scores[static_cast<size_t>(t)] - m);
            weights.at(b, t) = e;
            z += e;
        }
        for (int t = 0; t < T; ++t) {
            weights.at(b, t) /= z;
            for (int c = 0; c < C; ++c) out.at(b, c) += weights.at(b, t) * ev.at(b, t, c);
        }
    }
    const int eid = enc.id, qid = query.id;
    return enc.tape->push(
        std::move(out), enc.requires_grad() || query.requires_grad(),
        [eid, qid, weights = std::move(weights), B, T, C](TapeT<S>& t, int self) {
            const auto& g = t.grad_of(self);  // [B,C]
            const auto& ev2 = t.value(eid);
            const auto& qv2 = t.value(qid);
            const bool need_e = t.requires_grad(eid);
            const bool need_q = t.requires_grad(qid);
            TensorT<S> de = need_e ? TensorT<S>({B, T, C}) : TensorT<S>();
            TensorT<S> dq = need_q ? TensorT<S>({B, C}) : TensorT<S>();
            std::vector<S> dw(static_cast<size_t>(T));
            for (int b = 0; b < B; ++b) {
                S dot = S(0);
                for (int tt = 0; tt < T; ++tt) {
                    S s = S(0);
                    for (int c = 0; c < C; ++c) s += g.at(b, c) * ev2.at(b, tt, c);
                    dw[static_cast<size_t>(tt)] = s;
                    dot += s * weights.at(b, tt);
                }
                for (int tt = 0; tt < T; ++tt) {
                    const S w = weights.at(b, tt);
                    const S dscore = w * (dw[static_cast<size_t>(tt)] - dot);
                    if (need_q)
                        for (int c = 0; c < C; ++c) dq.at(b, c) += dscore * ev2.at(b, tt, c);
                    if (need_e)
                        for (int c = 0; c < C; ++c)
                            de.at(b, tt, c) += dscore * qv2.at(b, c) + w * g.at(b, c);
                }
            }
            if (need_e) t.accumulate(eid, de);
            if (need_q) t.accumulate(qid, dq);
        });
}

// Attention weights alone (no tape), for inspection and contract tests.
template <typename S>
TensorT<S> attention_weights(const TensorT<S>& enc, const TensorT<S>& query,
                             const TensorT<S>& valid) {
    const int B = enc.dim(0), T = enc.dim(1), C = enc.dim(2);
    TensorT<S> weights({B, T});
    for (int b = 0; b < B; ++b) {
        S m = std::numeric_limits<S>::lowest();
        std::vector<S> scores(static_cast<size_t>(T));
        for (int t = 0; t < T; ++t) {
            S s = S(0);
            for (int c = 0; c < C; ++c) s += query.at(b, c) * enc.at(b, t, c);
            if (valid.at(b, t) == S(0)) s = S(-1e30);
            scores[static_cast<size_t>(t)] = s;
            m = std::max(m, s);
        }
        S z = S(0);
        for (int t = 0; t < T; ++t) {
            weights.at(b, t) = std::exp(scores[static_cast<size_t>(t)] - m);
            z += weights.at(b, t);
        }
        for (int t = 0; t < T; ++t) weights.at(b, t) /= z;
    }
    return weights;
}

// 1-D cross-correlation over time, zero padded, stride 1 ("same" length).
// x [B,T,C], w [k*C,F], bias [F] -> [B,T,F]. Kernel size k must be odd.
template <typename S>
VarT<S> conv1d_same(VarT<S> x, VarT<S> w, VarT<S> bias, int k) {
    detail::check_same_tape(x, w, "conv1d");
    const auto& xv = x.val();
    const auto& wv = w.val();
    const auto& bv = bias.val();
    RGAN_REQUIRE(xv.rank() == 3, "conv1d: input must be [B,T,C]");
    RGAN_REQUIRE(k >= 1 && k % 2 == 1, "conv1d: kernel size must be odd");
    const int B = xv.dim(0), T = xv.dim(1), C = xv.dim(2);
    RGAN_REQUIRE(wv.rank() == 2 && wv.dim(0) == k * C, "conv1d: filter shape mismatch");
    const int F = wv.dim(1);
    RGAN_REQUIRE(bv.rank() == 1 && bv.dim(0) == F, "conv1d: bias shape mismatch");
    const int pad = (k - 1) / 2;

    TensorT<S> patches({B * T, k * C});  // im2col
    for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t) {
            S* row = patches.data() + (static_cast<int64_t>(b) * T + t) * (k * C);
            for (int j = 0; j < k; ++j) {
                const int src = t + j - pad;
                if (src < 0 || src >= T) continue;  // zero padding
                const S* in = xv.data() + (static_cast<int64_t>(b) * T + src) * C;
                std::copy(in, in + C, row + static_cast<int64_t>(j) * C);
            }
        }

    TensorT<S> out({B, T, F});
    detail::ECMap<S> P(patches.data(), B * T, k * C);
    detail::ECMap<S> W(wv.data(), k * C, F);
    detail::EMap<S> O(out.data(), B * T, F);
    O.noalias() = P * W;
    for (int r = 0; r < B * T; ++r)
        for (int f = 0; f < F; ++f) out[static_cast<int64_t>(r) * F + f] += bv[f];

    const int xid = x.id, wid = w.id, bid = bias.id;
    const bool rg = x.requires_grad() || w.requires_grad() || bias.requires_grad();
    return x.tape->push(
        std::move(out), rg,
        [xid, wid, bid, patches = std::move(patches), B, T, C, F, k,
         pad](TapeT<S>& t, int self) {
            detail::ECMap<S> G(t.grad_of(self).data(), B * T, F);
            if (t.requires_grad(wid)) {
                detail::ECMap<S> P2(patches.data(), B * T, k * C);
                detail::EMap<S> dW(t.grad_of(wid).data(), k * C, F);
                dW.noalias() += P2.transpose() * G;
            }
            if (t.requires_grad(bid)) {
                TensorT<S>& db = t.grad_of(bid);
                for (int r = 0; r < B * T; ++r)
                    for (int f = 0; f < F; ++f) db[f] += G(r, f);
            }
            if (t.requires_grad(xid)) {
                TensorT<S> dpatch({B * T, k * C});
                detail::EMap<S> DP(dpatch.data(), B * T, k * C);
                detail::ECMap<S> W2(t.value(wid).data(), k * C, F);
                DP.noalias() = G * W2.transpose();
                TensorT<S>& dx = t.grad_of(xid);
                for (int b = 0; b < B; ++b)
                    for (int tt = 0; tt < T; ++tt) {
                        const S* row = dpatch.data() +
                                       (static_cast<int64_t>(b) * T + tt) * (k * C);
                        for (int j = 0; j < k; ++j) {
                            const int src = tt + j - pad;
                            if (src < 0 || src >= T) continue;
                            S* dst = dx.data() + (static_cast<int64_t>(b) * T + src) * C;
                            const S* s = row + static_cast<int64_t>(j) * C;
                            for (int c = 0; c < C; ++c) dst[c] += s[c];
                        }
                    }
            }
        });
}

// Max over the full time axis: [B,T,F] -> [B,F]. First maximizer wins.
template <typename S>
VarT<S> max_over_time(VarT<S> x) {
    const auto& xv = x.val();
    RGAN_REQUIRE(xv.rank() == 3, "max_over_time: input must be [B,T,F]");
    const int B = xv.dim(0), T = xv.dim(1), F = xv.dim(2);
    TensorT<S> out({B, F});
    std::vector<int> argmax(static_cast<size_t>(B) * F, 0);
    for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) {
            S best = xv.at(b, 0, f);
            int bt = 0;
            for (int t = 1; t < T; ++t)
                if (xv.at(b, t, f) > best) {
                    best = xv.at(b, t, f);
                    bt = t;
                }
            out.at(b, f) = best;
            argmax[static_cast<size_t>(b) * F + f] = bt;
        }
    const int xid = x.id;
    return x.tape->push(std::move(out), x.requires_grad(),
                        [xid, argmax = std::move(argmax), B, F](TapeT<S>& t, int self) {
                            if (!t.requires_grad(xid)) return;
                            const auto& g = t.grad_of(self);
                            TensorT<S>& dx = t.grad_of(xid);
                            for (int b = 0; b < B; ++b)
                                for (int f = 0; f < F; ++f)
                                    dx.at(b, argmax[static_cast<size_t>(b) * F + f], f) +=
                                        g.at(b, f);
                        });
}

// Mean of -log(max(p[target], 1e-12)) over unmasked rows. probs [B,V] or
// [B,T,V] (leading dims flattened to rows).
template <typename S>
VarT<S> cross_entropy_mean(VarT<S> probs, std::vector<int> targets, std::vector<S> mask) {
    const auto& pv = probs.val();
    RGAN_REQUIRE(pv.rank() == 2 || pv.rank() == 3,
                 "cross_entropy: probs must be [rows,V] or [B,T,V]");
    const int V = pv.dim(pv.rank() - 1);
    const int B = static_cast<int>(pv.size() / V);
    RGAN_REQUIRE(static_cast<int>(targets.size()) == B &&
                     static_cast<int>(mask.size()) == B,
                 "cross_entropy: targets/mask length mismatch");
    const S floor = static_cast<S>(detail::kProbFloor);
    S count = S(0);
    for (int b = 0; b < B; ++b)
        if (mask[static_cast<size_t>(b)] != S(0)) {
            RGAN_REQUIRE_INDEX(0 <= targets[static_cast<size_t>(b)] &&
                                   targets[static_cast<size_t>(b)] < V,
                               "cross_entropy: target out of range");
            count += S(1);
        }
    RGAN_REQUIRE(count > 0, "cross_entropy: no unmasked positions");
    S loss = S(0);
    for (int b = 0; b < B; ++b) {
        if (mask[static_cast<size_t>(b)] == S(0)) continue;
        loss -= std::log(std::max(
            pv[static_cast<int64_t>(b) * V + targets[static_cast<size_t>(b)]], floor));
    }
    loss /= count;
    const int pid = probs.id;
    return probs.tape->push(
        TensorT<S>::scalar(loss), probs.requires_grad(),
        [pid, targets = std::move(targets), mask = std::move(mask), floor, count,
         V](TapeT<S>& t, int self) {
            if (!t.requires_grad(pid)) return;
            const S g0 = t.grad_of(self)[0];
            const auto& pv2 = t.value(pid);
            TensorT<S>& dp = t.grad_of(pid);
            for (size_t b = 0; b < targets.size(); ++b) {
                if (mask[b] == S(0)) continue;
                const int64_t at = static_cast<int64_t>(b) * V + targets[b];
                const S p = std::max(pv2[at], floor);
                dp[at] -= g0 / (count * p);
            }
        });
}

// -log(dist[target]) for a single probability vector.
template <typename S>
VarT<S> cross_entropy(VarT<S> dist, int target) {
    const auto& dv = dist.val();
    RGAN_REQUIRE(dv.rank() == 1 && dv.size() >= 1, "cross_entropy: dist must be a vector");
    RGAN_REQUIRE_INDEX(0 <= target && target < dv.dim(0),
                       "cross_entropy: target out of range");
    const S floor = static_cast<S>(detail::kProbFloor);
    const S loss = -std::log(std::max(dv[target], floor));
    const int did = dist.id;
    return dist.tape->push(TensorT<S>::scalar(loss), dist.requires_grad(),
                           [did, target, floor](TapeT<S>& t, int self) {
                               if (!t.requires_grad(did)) return;
                               const S g0 = t.grad_of(self)[0];
                               const auto& dv2 = t.value(did);
                               const S p = std::max(dv2[target], floor);
                               t.grad_of(did)[target] -= g0 / p;
                           });
}

// Squared gap between a fixed target histogram and the soft output histogram.
// soft [B,T,V]; row_mask [B,T] marks content rows; target_hist [B,V]; columns
// below col_begin (the specials) are excluded. Returns the batch mean.
template <typename S>
VarT<S> freq_match_loss(VarT<S> soft, const TensorT<S>& target_hist,
                        const TensorT<S>& row_mask, int col_begin) {
    const auto& sv = soft.val();
    RGAN_REQUIRE(sv.rank() == 3, "freq_match_loss: soft must be [B,T,V]");
    const int B = sv.dim(0), T = sv.dim(1), V = sv.dim(2);
    RGAN_REQUIRE(target_hist.rank() == 2 && target_hist.dim(0) == B &&
                     target_hist.dim(1) == V,
                 "freq_match_loss: histogram shape mismatch");
    RGAN_REQUIRE(row_mask.rank() == 2 && row_mask.dim(0) == B && row_mask.dim(1) == T,
                 "freq_match_loss: mask shape mismatch");
    RGAN_REQUIRE(0 <= col_begin && col_begin < V, "freq_match_loss: bad column offset");

    TensorT<S> diffs({B, V});
    std::vector<S> denom(static_cast<size_t>(B), S(1));
    S loss = S(0);
    for (int b = 0; b < B; ++b) {
        S rows = S(0);
        for (int t = 0; t < T; ++t) rows += row_mask.at(b, t);
        denom[static_cast<size_t>(b)] = std::max(rows, S(1));
        for (int i = col_begin; i < V; ++i) {
            S s = S(0);
            for (int t = 0; t < T; ++t)
                if (row_mask.at(b, t) != S(0)) s += sv.at(b, t, i);
            const S d = target_hist.at(b, i) - s / denom[static_cast<size_t>(b)];
            diffs.at(b, i) = d;
            loss += d * d;
        }
    }
    loss /= static_cast<S>(B);
    const int sid = soft.id;
    return soft.tape->push(
        TensorT<S>::scalar(loss), soft.requires_grad(),
        [sid, diffs = std::move(diffs), denom = std::move(denom), row_mask, col_begin, B,
         T, V](TapeT<S>& t, int self) {
            if (!t.requires_grad(sid)) return;
            const S g0 = t.grad_of(self)[0];
            TensorT<S>& ds = t.grad_of(sid);
            for (int b = 0; b < B; ++b) {
                const S scale = -S(2) * g0 / (static_cast<S>(B) * denom[static_cast<size_t>(b)]);
                for (int tt = 0; tt < T; ++tt) {
                    if (row_mask.at(b, tt) == S(0)) continue;
                    for (int i = col_begin; i < V; ++i)
                        ds.at(b, tt, i) += scale * diffs.at(b, i);
                }
            }
        });
}

}  // namespace rgan
