#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rgan/gradcheck.hpp"
#include "rgan/objectives.hpp"

using namespace rgan;

TEST_CASE("regularizer mode names") {
    CHECK(parse_reg_mode("base") == RegMode::base);
    CHECK(parse_reg_mode("auto") == RegMode::auto_reg);
    CHECK(parse_reg_mode("freq") == RegMode::freq_reg);
    CHECK_THROWS_AS(parse_reg_mode("l2"), ConfigError);
}

TEST_CASE("critic and generator losses: frozen oracle") {
    DTape tape;
    DVar real = tape.constant(DTensor({2, 1}, {1.0, 0.5}));
    DVar fake = tape.constant(DTensor({2, 1}, {0.25, 0.25}));
    auto pair = wgan_losses(real, fake);
    CHECK(pair.critic.val()[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(pair.generator.val()[0] == doctest::Approx(-0.25).epsilon(1e-12));

    // Identical score distributions: nothing to separate.
    auto same = wgan_losses(real, real);
    CHECK(same.critic.val()[0] == 0.0);

    // Shifting both batches by a constant leaves the critic loss unchanged.
    DVar real_k = tape.constant(DTensor({2, 1}, {1.0 + 3.25, 0.5 + 3.25}));
    DVar fake_k = tape.constant(DTensor({2, 1}, {0.25 + 3.25, 0.25 + 3.25}));
    auto shifted = wgan_losses(real_k, fake_k);
    CHECK(shifted.critic.val()[0] ==
          doctest::Approx(pair.critic.val()[0]).epsilon(1e-12));

    CHECK_THROWS_AS(wgan_losses(tape.constant(DTensor({0, 1})), fake), ContractError);
}

TEST_CASE("critic loss gradients push real scores up and fake scores down") {
    DTape tape;
    DVar real = tape.leaf(DTensor({4, 1}, {0.3, -0.2, 1.1, 0.0}), true);
    DVar fake = tape.leaf(DTensor({2, 1}, {0.6, -0.4}), true);
    auto pair = wgan_losses(real, fake);
    tape.backward(pair.critic);
    for (int i = 0; i < 4; ++i)
        CHECK(tape.grad_of(real.id)[i] == doctest::Approx(-0.25).epsilon(1e-12));
    for (int i = 0; i < 2; ++i)
        CHECK(tape.grad_of(fake.id)[i] == doctest::Approx(0.5).epsilon(1e-12));

    DTape tape2;
    DVar fake2 = tape2.leaf(DTensor({2, 1}, {0.6, -0.4}), true);
    auto pair2 = wgan_losses(tape2.constant(DTensor({1, 1}, {0.0})), fake2);
    tape2.backward(pair2.generator);
    for (int i = 0; i < 2; ++i)
        CHECK(tape2.grad_of(fake2.id)[i] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("reconstruction loss: exact one-hot rows cost zero, PAD rows are free") {
    const Vocab vocab = sort_vocab(5);
    Rng rng(70);
    GeneratorT<double> gen(vocab, 1, 3, rng);
    const auto y = make_batch<double>({{3, 4}, {5, 6, 7, 8}}, 4, vocab);

    DTape tape;
    DTensor rows({y.batch, y.width - 1, vocab.size});
    for (int b = 0; b < y.batch; ++b)
        for (int t = 0; t + 1 < y.width; ++t) {
            if (y.valid.at(b, t + 1) != 0.0) {
                rows.at(b, t, y.id(b, t + 1)) = 1.0;
            } else {
                for (int v = 0; v < vocab.size; ++v)
                    rows.at(b, t, v) = 1.0 / vocab.size;  // arbitrary: masked out
            }
        }
    DVar loss = sequence_nll(gen, tape.constant(rows), y);
    CHECK(loss.val()[0] == doctest::Approx(0.0).epsilon(1e-12));

    // Misaligned rows violate the contract.
    DTensor bad({y.batch, y.width, vocab.size});
    CHECK_THROWS_AS(sequence_nll(gen, tape.constant(bad), y), ContractError);
}

TEST_CASE("frequency loss: worked example") {
    // One input token, one output row spreading mass 0.5/0.5 across the two
    // task tokens: gaps (1-0.5)^2 + (0-0.5)^2 = 0.5.
    const Vocab vocab = sort_vocab(1);  // V = 5, task tokens 3 and 4
    DTensor row({1, vocab.size});
    row.at(0, 3) = 0.5;
    row.at(0, 4) = 0.5;
    CHECK(freq_loss_value({3}, row, vocab) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("frequency loss ignores mass parked on special tokens") {
    const Vocab vocab = sort_vocab(2);  // task tokens 3,4,5
    DTensor rows({3, vocab.size});
    for (int t = 0; t < 3; ++t) rows.at(t, Vocab::kEos) = 1.0;
    // fx = {2/3, 1/3, 0}, fo = 0 everywhere: loss = 4/9 + 1/9.
    CHECK(freq_loss_value({3, 3, 4}, rows, vocab) ==
          doctest::Approx(5.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("frequency loss is exactly zero on any permutation of the input") {
    const Vocab vocab = sort_vocab(7);
    Rng rng(71);
    for (int trial = 0; trial < 200; ++trial) {
        Rng r = rng.split(static_cast<uint64_t>(trial));
        const int len = 1 + static_cast<int>(r.uniform_index(12));
        TokenSequence x(static_cast<size_t>(len));
        for (int& id : x)
            id = Vocab::kTaskOffset +
                 static_cast<int>(r.uniform_index(static_cast<uint64_t>(
                     vocab.size - Vocab::kTaskOffset)));
        TokenSequence perm = x;
        for (int i = len - 1; i > 0; --i)
            std::swap(perm[static_cast<size_t>(i)],
                      perm[r.uniform_index(static_cast<uint64_t>(i) + 1)]);
        DTensor rows({len, vocab.size});
        for (int t = 0; t < len; ++t) rows.at(t, perm[static_cast<size_t>(t)]) = 1.0;
        CHECK(freq_loss_value(x, rows, vocab) == 0.0);
    }
}

TEST_CASE("batched frequency loss agrees with the single-sequence value") {
    const Vocab vocab = sort_vocab(4);
    const int V = vocab.size;
    Rng rng(72);

    // B = 1, every row emitted.
    {
        DTape tape;
        DTensor raw({1, 4, V});
        for (int64_t i = 0; i < raw.size(); ++i) raw[i] = rng.uniform_double();
        TokenSequence x{3, 5, 5};
        DVar loss = freq_loss_batch(tape.constant(raw), {x}, {4}, vocab);
        DTensor single({4, V});
        for (int t = 0; t < 4; ++t)
            for (int v = 0; v < V; ++v) single.at(t, v) = raw.at(0, t, v);
        CHECK(loss.val()[0] ==
              doctest::Approx(freq_loss_value(x, single, vocab)).epsilon(1e-12));
    }

    // B = 2 with differing emitted lengths: mean of the per-sequence values
    // computed over each sequence's own emitted rows.
    {
        DTape tape;
        DTensor raw({2, 5, V});
        for (int64_t i = 0; i < raw.size(); ++i) raw[i] = rng.uniform_double();
        std::vector<TokenSequence> xs{{4, 4, 6}, {7}};
        std::vector<int> lens{5, 3};
        DVar loss = freq_loss_batch(tape.constant(raw), xs, lens, vocab);
        double expect = 0.0;
        for (int b = 0; b < 2; ++b) {
            DTensor part({lens[static_cast<size_t>(b)], V});
            for (int t = 0; t < lens[static_cast<size_t>(b)]; ++t)
                for (int v = 0; v < V; ++v) part.at(t, v) = raw.at(b, t, v);
            expect += freq_loss_value(xs[static_cast<size_t>(b)], part, vocab);
        }
        expect /= 2.0;
        CHECK(loss.val()[0] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("batched frequency loss gradients match finite differences") {
    const Vocab vocab = sort_vocab(2);
    const int V = vocab.size;
    std::vector<TokenSequence> xs{{3, 4}, {5, 5, 3}};
    std::vector<int> lens{3, 4};
    auto build = [&](DTape& t, const std::vector<DVar>& in) {
        return freq_loss_batch(in[0], xs, lens, vocab);
    };
    for (int p = 0; p < 50; ++p) {
        Rng rng(Rng(73).split(static_cast<uint64_t>(p)).next_u64());
        DTensor raw({2, 4, V});
        for (int64_t i = 0; i < raw.size(); ++i) raw[i] = rng.uniform_double();
        auto res = check_gradients("freq_loss_batch", build, {raw});
        INFO("point ", p, ": ", res.worst);
        CHECK(res.ok());
    }
}

TEST_CASE("combined generator loss: frozen oracles and linearity") {
    DTape tape;
    auto scalar = [&tape](double v) { return tape.constant(DTensor::scalar(v)); };

    DVar a = combined_generator_loss(scalar(-0.25), scalar(0.5), RegMode::freq_reg, 1.0);
    CHECK(a.val()[0] == doctest::Approx(0.25).epsilon(1e-12));

    DVar b = combined_generator_loss(scalar(-1.0), scalar(2.0), RegMode::auto_reg, 0.5);
    CHECK(b.val()[0] == doctest::Approx(0.0).epsilon(1e-12));

    DVar w = scalar(-0.7);
    DVar r = scalar(1.3);
    DVar base = combined_generator_loss(w, r, RegMode::base, 1.0);
    CHECK(base.id == w.id);  // base mode never touches the regularizer
    DVar zero_l = combined_generator_loss(w, r, RegMode::freq_reg, 0.0);
    CHECK(zero_l.id == w.id);

    for (double lam : {0.3, 0.7, 2.0}) {
        DVar c = combined_generator_loss(w, r, RegMode::freq_reg, lam);
        CHECK(c.val()[0] - w.val()[0] == doctest::Approx(lam * 1.3).epsilon(1e-12));
        CHECK(combined_generator_loss(-0.7, 1.3, RegMode::freq_reg, lam) ==
              doctest::Approx(c.val()[0]).epsilon(1e-12));
    }

    CHECK_THROWS_AS(combined_generator_loss(w, r, RegMode::freq_reg, -0.1), ConfigError);
    CHECK_THROWS_AS(combined_generator_loss(0.0, 0.0, RegMode::base, -1.0), ConfigError);
}

TEST_CASE("reference minimax losses: zero scores give the textbook values") {
    DTape tape;
    DVar real = tape.constant(DTensor({2, 1}));
    DVar fake = tape.constant(DTensor({3, 1}));
    auto [d_loss, g_loss] = reference_gan_losses(real, fake);
    CHECK(d_loss.val()[0] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(g_loss.val()[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("reference minimax loss gradients match finite differences") {
    auto build_d = [](DTape&, const std::vector<DVar>& in) {
        return reference_gan_losses(in[0], in[1]).first;
    };
    auto build_g = [](DTape&, const std::vector<DVar>& in) {
        return reference_gan_losses(in[0], in[1]).second;
    };
    for (int p = 0; p < 25; ++p) {
        Rng rng(Rng(74).split(static_cast<uint64_t>(p)).next_u64());
        DTensor real({3, 1}), fake({2, 1});
        for (int64_t i = 0; i < real.size(); ++i) real[i] = rng.gaussian(0.0, 2.0);
        for (int64_t i = 0; i < fake.size(); ++i) fake[i] = rng.gaussian(0.0, 2.0);
        auto rd = check_gradients("reference_d", build_d, {real, fake});
        auto rg = check_gradients("reference_g", build_g, {real, fake});
        INFO("point ", p, ": ", rd.worst, " / ", rg.worst);
        CHECK(rd.ok());
        CHECK(rg.ok());
    }
}
