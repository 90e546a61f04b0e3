#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>

#include "rgan/gradcheck.hpp"
#include "rgan/objectives.hpp"
#include "rgan/seqmodel.hpp"

using namespace rgan;

namespace {

void zero_params(ParameterStoreT<double>& store) {
    for (int i = 0; i < store.size(); ++i) store.param(i).value.fill(0.0);
}

bool bitwise_equal(const DTensor& a, const DTensor& b) {
    if (!a.same_shape(b)) return false;
    for (int64_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<uint64_t>(a[i]) != std::bit_cast<uint64_t>(b[i])) return false;
    return true;
}

}  // namespace

TEST_CASE("batch construction wraps, clips, and masks") {
    const Vocab vocab = sort_vocab(20);
    const auto batch = make_batch<double>({{3, 4, 5}, {7, 8, 9, 10, 11}}, 4, vocab);
    CHECK(batch.batch == 2);
    CHECK(batch.width == 6);

    // Row 0: SOS 3 4 5 EOS PAD
    CHECK(batch.id(0, 0) == Vocab::kSos);
    CHECK(batch.id(0, 1) == 3);
    CHECK(batch.id(0, 3) == 5);
    CHECK(batch.id(0, 4) == Vocab::kEos);
    CHECK(batch.id(0, 5) == Vocab::kPad);
    CHECK(batch.valid.at(0, 4) == 1.0);
    CHECK(batch.valid.at(0, 5) == 0.0);

    // Row 1 clipped to 4 tokens, prefix preserved: SOS 7 8 9 10 EOS
    CHECK(batch.id(1, 1) == 7);
    CHECK(batch.id(1, 4) == 10);
    CHECK(batch.id(1, 5) == Vocab::kEos);

    CHECK_THROWS_AS(make_batch<double>({{99}}, 4, vocab), DataError);
    CHECK_THROWS_AS((make_batch<double>({{}}, 4, vocab)), ContractError);
}

TEST_CASE("lstm cell: zero parameters give zero state") {
    DTape tape;
    const int d = 3;
    DVar x = tape.constant(DTensor({2, d}));
    DVar h = tape.constant(DTensor({2, d}));
    DVar c = tape.constant(DTensor({2, d}));
    DVar wx = tape.constant(DTensor({d, 4 * d}));
    DVar wh = tape.constant(DTensor({d, 4 * d}));
    DVar b = tape.constant(DTensor({4 * d}));
    auto [hn, cn] = lstm_cell(x, h, c, wx, wh, b, d);
    for (int64_t i = 0; i < hn.val().size(); ++i) {
        CHECK(hn.val()[i] == 0.0);
        CHECK(cn.val()[i] == 0.0);
    }
}

TEST_CASE("lstm cell: forget-gate bias oracle") {
    // Zero weights, forget bias 1, c_prev = 1, x = 0:
    // c = sigmoid(1) = 0.7311, h = 0.5 * tanh(0.7311) = 0.3116
    DTape tape;
    const int d = 2;
    DTensor bias({4 * d});
    for (int j = d; j < 2 * d; ++j) bias[j] = 1.0;
    DTensor ones({1, d});
    ones.fill(1.0);
    DVar x = tape.constant(DTensor({1, d}));
    DVar h = tape.constant(DTensor({1, d}));
    DVar c = tape.constant(ones);
    DVar wx = tape.constant(DTensor({d, 4 * d}));
    DVar wh = tape.constant(DTensor({d, 4 * d}));
    DVar b = tape.constant(bias);
    auto [hn, cn] = lstm_cell(x, h, c, wx, wh, b, d);
    const double sig1 = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(cn.val().at(0, 0) == doctest::Approx(sig1).epsilon(1e-6));       // 0.7311
    CHECK(hn.val().at(0, 0) == doctest::Approx(0.5 * std::tanh(sig1)).epsilon(1e-6));  // 0.3116
    CHECK(hn.val().at(0, 0) == doctest::Approx(0.3116).epsilon(1e-3));
}

TEST_CASE("lstm cell gradients match finite differences") {
    const int d = 3, B = 2;
    auto build = [d](DTape&, const std::vector<DVar>& xs) {
        auto [h, c] = lstm_cell(xs[0], xs[1], xs[2], xs[3], xs[4], xs[5], d);
        return sum_all(add(mul(h, h), mul(c, c)));
    };
    for (int p = 0; p < 100; ++p) {
        Rng rng(Rng(31).split(static_cast<uint64_t>(p)).next_u64());
        auto rt = [&rng](std::vector<int> shape) {
            DTensor t(shape);
            for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(0.0, 0.5);
            return t;
        };
        auto res = check_gradients("lstm_cell", build,
                                   {rt({B, d}), rt({B, d}), rt({B, d}), rt({d, 4 * d}),
                                    rt({d, 4 * d}), rt({4 * d})});
        INFO("point ", p, ": ", res.worst);
        CHECK(res.ok());
    }
}

TEST_CASE("encoder: zero parameters give zero states, shapes and determinism hold") {
    const Vocab vocab = sort_vocab(5);
    Rng rng(32);
    GeneratorT<double> gen(vocab, 2, 4, rng);
    const auto batch = make_batch<double>({{3, 4, 5}}, 3, vocab);

    {
        GeneratorT<double> zgen(vocab, 2, 4, rng);
        zero_params(zgen.store());
        DTape tape;
        auto P = zgen.store().leaves(tape);
        auto enc = zgen.encode(tape, P, batch);
        CHECK(enc.states.val().dim(1) == batch.width);  // one state per position
        for (int64_t i = 0; i < enc.states.val().size(); ++i)
            CHECK(enc.states.val()[i] == 0.0);
    }

    DTape t1, t2;
    auto e1 = gen.encode(t1, gen.store().leaves(t1), batch);
    auto e2 = gen.encode(t2, gen.store().leaves(t2), batch);
    CHECK(bitwise_equal(e1.states.val(), e2.states.val()));
}

TEST_CASE("decode step: uniform at zero parameters, valid distribution otherwise") {
    const Vocab vocab = sort_vocab(5);  // V = 9
    Rng rng(33);
    GeneratorT<double> gen(vocab, 1, 4, rng);
    const auto batch = make_batch<double>({{3, 4}}, 2, vocab);

    {
        GeneratorT<double> zgen(vocab, 1, 4, rng);
        zero_params(zgen.store());
        DTape tape;
        auto P = zgen.store().leaves(tape);
        auto enc = zgen.encode(tape, P, batch);
        auto h = enc.h, c = enc.c;
        DVar soft = zgen.decode_step(tape, P, {Vocab::kSos}, h, c, enc);
        for (int v = 0; v < vocab.size; ++v)
            CHECK(soft.val().at(0, v) == doctest::Approx(1.0 / vocab.size).epsilon(1e-9));
    }

    DTape tape;
    auto P = gen.store().leaves(tape);
    auto enc = gen.encode(tape, P, batch);
    auto h = enc.h, c = enc.c;
    DVar soft = gen.decode_step(tape, P, {5}, h, c, enc);
    double sum = 0.0;
    for (int v = 0; v < vocab.size; ++v) {
        sum += soft.val().at(0, v);
        CHECK(soft.val().at(0, v) >= 0.0);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    auto h2 = enc.h, c2 = enc.c;
    CHECK_THROWS_AS(gen.decode_step(tape, P, {vocab.size}, h2, c2, enc), IndexError);
}

TEST_CASE("generation: bounded, deterministic, prefix-consistent") {
    const Vocab vocab = sort_vocab(8);
    Rng rng(34);
    GeneratorT<double> gen(vocab, 1, 6, rng);
    const auto batch = make_batch<double>({{4, 6, 8}, {3, 5, 7}}, 3, vocab);

    DTape t1;
    auto g1 = gen.generate(t1, gen.store().leaves(t1), batch, 6);
    CHECK(g1.emitted <= 6);
    CHECK(g1.rows.val().dim(0) == 2);
    for (int b = 0; b < 2; ++b) {
        CHECK(g1.lengths[static_cast<size_t>(b)] >= 1);
        CHECK(g1.lengths[static_cast<size_t>(b)] <= g1.emitted);
    }
    // Rows are valid distributions.
    for (int b = 0; b < 2; ++b)
        for (int t = 0; t < g1.emitted; ++t) {
            double sum = 0.0;
            for (int v = 0; v < vocab.size; ++v) sum += g1.rows.val().at(b, t, v);
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }

    DTape t2;
    auto g2 = gen.generate(t2, gen.store().leaves(t2), batch, 6);
    CHECK(bitwise_equal(g1.rows.val(), g2.rows.val()));
    CHECK(g1.hard == g2.hard);

    // Growing the budget must not change the rows already emitted.
    DTape t3;
    auto g3 = gen.generate(t3, gen.store().leaves(t3), batch, 9);
    for (int b = 0; b < 2; ++b)
        for (int t = 0; t < g1.emitted && t < g3.emitted; ++t)
            for (int v = 0; v < vocab.size; ++v)
                CHECK(std::bit_cast<uint64_t>(g1.rows.val().at(b, t, v)) ==
                      std::bit_cast<uint64_t>(g3.rows.val().at(b, t, v)));

    CHECK_THROWS_AS(gen.generate(t3, gen.store().leaves(t3), batch, 0), ContractError);
}

TEST_CASE("generation stops on EOS and pads dead rows with the PAD one-hot") {
    // Rig the output projection so EOS wins immediately: zero params with a
    // large EOS output bias.
    const Vocab vocab = sort_vocab(5);
    Rng rng(35);
    GeneratorT<double> gen(vocab, 1, 4, rng);
    zero_params(gen.store());
    gen.store().by_name("gen.out.b").value[Vocab::kEos] = 5.0;

    const auto batch = make_batch<double>({{3, 4}}, 2, vocab);
    DTape tape;
    auto g = gen.generate(tape, gen.store().leaves(tape), batch, 5);
    CHECK(g.emitted == 1);  // every sequence died at step one
    CHECK(g.lengths[0] == 1);
    CHECK(g.hard[0][0] == Vocab::kEos);
}

TEST_CASE("teacher forcing: row count, uniform baseline, ln V loss") {
    const Vocab vocab = sort_vocab(0);  // V = 4: PAD, SOS, EOS, one task token
    Rng rng(36);
    GeneratorT<double> gen(vocab, 1, 4, rng);
    zero_params(gen.store());

    const auto x = make_batch<double>({{3, 3}}, 2, vocab);
    DTape tape;
    auto P = gen.store().leaves(tape);
    DVar rows = gen.teacher_forced_rows(tape, P, x, x);
    CHECK(rows.val().dim(1) == x.width - 1);
    for (int64_t i = 0; i < rows.val().size(); ++i)
        CHECK(rows.val()[i] == doctest::Approx(0.25).epsilon(1e-9));

    DVar loss = sequence_nll(gen, rows, x);
    CHECK(loss.val()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("teacher forcing is causal: later targets cannot change earlier rows") {
    const Vocab vocab = sort_vocab(10);
    Rng rng(37);
    GeneratorT<double> gen(vocab, 2, 5, rng);
    const auto x = make_batch<double>({{3, 4, 5, 6}}, 4, vocab);

    auto y1 = make_batch<double>({{7, 8, 9, 10}}, 4, vocab);
    auto y2 = make_batch<double>({{7, 8, 12, 10}}, 4, vocab);  // differs at position 3

    DTape t1, t2;
    DVar r1 = gen.teacher_forced_rows(t1, gen.store().leaves(t1), x, y1);
    DVar r2 = gen.teacher_forced_rows(t2, gen.store().leaves(t2), x, y2);
    // Rows 0..2 take decoder inputs SOS,7,8 in both runs: identical bits.
    for (int t = 0; t < 3; ++t)
        for (int v = 0; v < vocab.size; ++v)
            CHECK(std::bit_cast<uint64_t>(r1.val().at(0, t, v)) ==
                  std::bit_cast<uint64_t>(r2.val().at(0, t, v)));
    // Row 3 consumed the changed token, so it must differ somewhere.
    bool differs = false;
    for (int v = 0; v < vocab.size; ++v)
        if (r1.val().at(0, 3, v) != r2.val().at(0, 3, v)) differs = true;
    CHECK(differs);
}

TEST_CASE("end-to-end teacher-forced gradients on a tiny model") {
    const Vocab vocab = sort_vocab(1);  // V = 5
    Rng rng(38);
    GeneratorT<double> gen(vocab, 1, 4, rng);
    const auto x = make_batch<double>({{3, 4, 3}}, 3, vocab);  // T = 3

    std::vector<DTensor> inputs;
    for (int i = 0; i < gen.store().size(); ++i)
        inputs.push_back(gen.store().param(i).value);
    auto build = [&gen, &x](DTape& t, const std::vector<DVar>& P) {
        DVar rows = gen.teacher_forced_rows(t, P, x, x);
        return sequence_nll(gen, rows, x);
    };
    auto res = check_gradients("teacher_forced_nll", build, inputs);
    INFO(res.worst);
    CHECK(res.ok());
}

TEST_CASE("generation budget helper and hardening utilities") {
    CHECK(eval_max_rows(4, 20) == 11);   // ceil(1.5*4)+5
    CHECK(eval_max_rows(5, 20) == 13);   // ceil(7.5)+5 = 13
    CHECK(eval_max_rows(20, 13) == 14);  // capped at task max + EOS row

    DTensor rows({4, 5});
    rows.at(0, 3) = 1.0;              // task token 3
    rows.at(1, 4) = 1.0;              // task token 4
    rows.at(2, Vocab::kEos) = 1.0;    // stop here
    rows.at(3, 3) = 1.0;              // ignored after EOS
    CHECK(harden(rows) == TokenSequence{3, 4});

    CHECK(strip_specials({Vocab::kSos, 3, Vocab::kPad, 4, Vocab::kEos, 5}) ==
          TokenSequence{3, 4});
}
