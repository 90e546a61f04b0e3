#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>

#include "rgan/critic.hpp"
#include "rgan/gradcheck.hpp"
#include "rgan/seqmodel.hpp"

using namespace rgan;

namespace {

DTensor random_rows(int B, int T, int V, Rng& rng) {
    DTensor t({B, T, V});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, 0.5);
    return t;
}

void abs_params(ParameterStoreT<double>& store) {
    for (int i = 0; i < store.size(); ++i) {
        auto& v = store.param(i).value;
        for (int64_t j = 0; j < v.size(); ++j) v[j] = std::fabs(v[j]);
    }
}

}  // namespace

TEST_CASE("critic configuration contracts") {
    const Vocab vocab = sort_vocab(5);
    Rng rng(50);
    CHECK_THROWS_AS(CriticT<double>(vocab, 8, 2, 4, 4, rng), ConfigError);
    CHECK_THROWS_AS(CriticT<double>(vocab, 2, 1, 4, 4, rng), ConfigError);
    CHECK_THROWS_AS(CriticT<double>(vocab, 8, 1, 0, 4, rng), ConfigError);
    CriticT<double> crit(vocab, 8, 1, 4, 4, rng);
    CHECK_THROWS_AS(crit.set_width(2), ConfigError);
}

TEST_CASE("zeroed critic with a final bias is the constant function") {
    const Vocab vocab = sort_vocab(5);
    Rng base(51);
    for (int depth : {1, 3}) {
        Rng rng = base.split(static_cast<uint64_t>(depth));
        CriticT<double> crit(vocab, 7, depth, 3, 4, rng);
        for (int i = 0; i < crit.store().size(); ++i)
            crit.store().param(i).value.fill(0.0);
        crit.store().by_name("crit.fc2.b").value[0] = 4.25;

        Rng in_rng(52);
        DTape tape;
        auto P = crit.store().leaves(tape);
        DVar input = tape.constant(random_rows(2, 7, vocab.size, in_rng));
        DVar s = crit.score(tape, P, input);
        CHECK(s.val().dim(0) == 2);
        CHECK(s.val().at(0, 0) == 4.25);
        CHECK(s.val().at(1, 0) == 4.25);
    }
}

TEST_CASE("hand-wired depth-1 critic scores the largest token id present") {
    // Kernel-3 bank, single filter, center tap weighted by token id. With
    // one-hot input the conv output at position t is the id at t, so
    // max-over-time is the largest id, which the head passes through.
    const Vocab vocab = sort_vocab(10);
    const int V = vocab.size;
    Rng rng(53);
    CriticT<double> crit(vocab, 6, 1, 1, 2, rng);
    for (int i = 0; i < crit.store().size(); ++i)
        crit.store().param(i).value.fill(0.0);
    auto& k3 = crit.store().by_name("crit.conv1.k3.w").value;
    for (int v = 0; v < V; ++v) k3.at(1 * V + v, 0) = static_cast<double>(v);
    crit.store().by_name("crit.fc1.w").value.at(0, 0) = 1.0;  // pass bank 3 through
    crit.store().by_name("crit.fc2.w").value.at(0, 0) = 1.0;

    const auto batch = make_batch<double>({{5, 9, 3}, {13, 4, 6}}, 4, vocab);
    DTape tape;
    auto P = crit.store().leaves(tape);
    DVar input = tape.constant(one_hot_input(batch, vocab));
    DVar s = crit.score(tape, P, input);
    CHECK(s.val().at(0, 0) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(s.val().at(1, 0) == doctest::Approx(13.0).epsilon(1e-12));
}

TEST_CASE("critic input contracts and determinism") {
    const Vocab vocab = sort_vocab(5);
    Rng rng(54);
    CriticT<double> crit(vocab, 8, 3, 3, 4, rng);
    Rng in_rng(55);
    const DTensor good = random_rows(2, 8, vocab.size, in_rng);
    const DTensor narrow = random_rows(2, 7, vocab.size, in_rng);
    const DTensor wrong_v = random_rows(2, 8, vocab.size + 1, in_rng);

    DTape t1;
    auto P1 = crit.store().leaves(t1);
    CHECK_THROWS_AS(crit.score(t1, P1, t1.constant(narrow)), ContractError);
    CHECK_THROWS_AS(crit.score(t1, P1, t1.constant(wrong_v)), ContractError);
    DVar s1 = crit.score(t1, P1, t1.constant(good));

    DTape t2;
    auto P2 = crit.store().leaves(t2);
    DVar s2 = crit.score(t2, P2, t2.constant(good));
    CHECK(std::bit_cast<uint64_t>(s1.val().at(0, 0)) ==
          std::bit_cast<uint64_t>(s2.val().at(0, 0)));
    CHECK(std::bit_cast<uint64_t>(s1.val().at(1, 0)) ==
          std::bit_cast<uint64_t>(s2.val().at(1, 0)));
}

TEST_CASE("critic score gradients match finite differences") {
    const Vocab vocab = sort_vocab(1);  // V = 5
    const int W = 5, B = 2;
    for (int depth : {1, 3}) {
        CAPTURE(depth);
        Rng rng(Rng(56).split(static_cast<uint64_t>(depth)).next_u64());
        CriticT<double> crit(vocab, W, depth, 2, 3, rng);

        // w.r.t. the input rows, parameters fixed.
        auto build_input = [&crit](DTape& t, const std::vector<DVar>& xs) {
            auto P = crit.store().leaves(t);
            return sum_all(crit.score(t, P, xs[0]));
        };
        for (int p = 0; p < 40; ++p) {
            Rng in_rng(Rng(57).split(static_cast<uint64_t>(10 * p + depth)).next_u64());
            auto res = check_gradients("critic_input", build_input,
                                       {random_rows(B, W, vocab.size, in_rng)});
            INFO("depth ", depth, " point ", p, ": ", res.worst);
            CHECK(res.ok());
        }

        // w.r.t. every parameter, input fixed.
        Rng in_rng(58);
        const DTensor input = random_rows(B, W, vocab.size, in_rng);
        std::vector<DTensor> params;
        for (int i = 0; i < crit.store().size(); ++i)
            params.push_back(crit.store().param(i).value);
        auto build_params = [&crit, &input](DTape& t, const std::vector<DVar>& P) {
            return sum_all(crit.score(t, P, t.constant(input)));
        };
        auto res = check_gradients("critic_params", build_params, params);
        INFO("depth ", depth, ": ", res.worst);
        CHECK(res.ok());
    }
}

TEST_CASE("parameters are width-independent: widening preserves scores") {
    // Content occupies the first rows and is followed by enough zero rows that
    // every window past the content sees only zeros. Appending more zero rows
    // (a wider critic) must then change nothing: same pools, same score.
    const Vocab vocab = sort_vocab(5);
    const int V = vocab.size;
    for (int depth : {1, 3}) {
        CAPTURE(depth);
        Rng rng(Rng(59).split(static_cast<uint64_t>(depth)).next_u64());
        CriticT<double> crit(vocab, 12, depth, 3, 4, rng);
        abs_params(crit.store());  // nonnegative activations, maxima in content

        DTensor narrow({2, 12, V});
        Rng in_rng(60);
        for (int b = 0; b < 2; ++b)
            for (int t = 0; t < 5; ++t)  // rows 5..11 stay zero
                for (int v = 0; v < V; ++v)
                    narrow.at(b, t, v) = std::fabs(in_rng.gaussian(0.0, 1.0));
        DTensor wide({2, 16, V});
        for (int b = 0; b < 2; ++b)
            for (int t = 0; t < 5; ++t)
                for (int v = 0; v < V; ++v) wide.at(b, t, v) = narrow.at(b, t, v);

        DTape t1;
        DVar s1 = crit.score(t1, crit.store().leaves(t1), t1.constant(narrow));
        crit.set_width(16);
        DTape t2;
        DVar s2 = crit.score(t2, crit.store().leaves(t2), t2.constant(wide));
        crit.set_width(12);
        DTape t3;
        DVar s3 = crit.score(t3, crit.store().leaves(t3), t3.constant(narrow));

        for (int b = 0; b < 2; ++b) {
            CHECK(std::bit_cast<uint64_t>(s1.val().at(b, 0)) ==
                  std::bit_cast<uint64_t>(s2.val().at(b, 0)));
            CHECK(std::bit_cast<uint64_t>(s1.val().at(b, 0)) ==
                  std::bit_cast<uint64_t>(s3.val().at(b, 0)));
        }
    }
}

TEST_CASE("weight clipping bounds every critic parameter after an update") {
    const Vocab vocab = sort_vocab(5);
    Rng rng(61);
    CriticT<float> crit(vocab, 8, 3, 4, 8, rng);
    RmsProp opt(5e-4f);
    Rng grad_rng(62);
    for (int step = 0; step < 3; ++step) {
        for (int i = 0; i < crit.store().size(); ++i) {
            auto& g = crit.store().param(i).grad;
            for (int64_t j = 0; j < g.size(); ++j)
                g[j] = static_cast<float>(grad_rng.gaussian(0.0, 50.0));
        }
        opt.step(crit.store());
        clip_weights(crit.store(), 0.05f);
    }
    float max_abs = 0.0f;
    for (int i = 0; i < crit.store().size(); ++i) {
        const auto& v = crit.store().param(i).value;
        for (int64_t j = 0; j < v.size(); ++j) max_abs = std::max(max_abs, std::fabs(v[j]));
    }
    CHECK(max_abs <= 0.05f);
    CHECK(max_abs == 0.05f);  // gradients this large always hit the bound
}

TEST_CASE("one-hot critic input encodes tokens and PAD rows exactly") {
    const Vocab vocab = sort_vocab(5);
    const auto batch = make_batch<double>({{4, 7}}, 3, vocab);  // SOS 4 7 EOS PAD
    const DTensor x = one_hot_input(batch, vocab);
    CHECK(x.dim(1) == 5);
    const int expect[5] = {Vocab::kSos, 4, 7, Vocab::kEos, Vocab::kPad};
    for (int t = 0; t < 5; ++t) {
        double sum = 0.0;
        for (int v = 0; v < vocab.size; ++v) sum += x.at(0, t, v);
        CHECK(sum == 1.0);
        CHECK(x.at(0, t, expect[t]) == 1.0);
    }
}

TEST_CASE("soft critic input wraps rows with SOS and PAD one-hots") {
    const Vocab vocab = sort_vocab(2);  // V = 6
    const int V = vocab.size;
    Rng rng(63);
    DTape tape;
    DTensor raw({1, 2, V});
    for (int64_t i = 0; i < raw.size(); ++i) raw[i] = rng.uniform_double();
    DVar rows = tape.leaf(raw, true);
    DVar wrapped = soft_critic_input(tape, rows, 5, vocab);
    CHECK(wrapped.val().dim(1) == 5);
    CHECK(wrapped.val().at(0, 0, Vocab::kSos) == 1.0);
    for (int t = 0; t < 2; ++t)
        for (int v = 0; v < V; ++v)
            CHECK(wrapped.val().at(0, t + 1, v) == raw.at(0, t, v));
    for (int t = 3; t < 5; ++t) {
        CHECK(wrapped.val().at(0, t, Vocab::kPad) == 1.0);
        CHECK(wrapped.val().at(0, t, Vocab::kEos) == 0.0);
    }
    CHECK_THROWS_AS(soft_critic_input(tape, rows, 2, vocab), ContractError);

    // Gradient reaches the generator rows through the wrapper.
    DVar loss = sum_all(mul(wrapped, wrapped));
    tape.backward(loss);
    for (int64_t i = 0; i < raw.size(); ++i)
        CHECK(tape.grad_of(rows.id)[i] == doctest::Approx(2.0 * raw[i]).epsilon(1e-12));
}
