#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "rgan/datagen.hpp"

using namespace rgan;

namespace {

// Brute-force enumeration of every terminal string a nonterminal derives.
// Exponential and only safe on finite grammars; this is the test oracle the
// fast counting path is measured against.
void enumerate_strings(const Grammar& g, int nt, std::vector<std::string>& out,
                       const std::string& prefix, const std::vector<Grammar::Symbol>& rest,
                       size_t rest_pos) {
    if (rest_pos == rest.size()) {
        out.push_back(prefix);
        return;
    }
    const Grammar::Symbol sym = rest[rest_pos];
    if (!Grammar::is_nonterminal(sym)) {
        std::string next = prefix;
        if (!next.empty()) next += ' ';
        next += std::to_string(sym);
        enumerate_strings(g, nt, out, next, rest, rest_pos + 1);
        return;
    }
    for (const auto& alt : g.rules[static_cast<size_t>(Grammar::nt_index(sym))]) {
        std::vector<Grammar::Symbol> expanded = alt;
        expanded.insert(expanded.end(), rest.begin() + static_cast<long>(rest_pos) + 1,
                        rest.end());
        enumerate_strings(g, nt, out, prefix, expanded, 0);
    }
}

std::vector<std::string> all_sentences(const Grammar& g, int nt) {
    std::vector<std::string> out;
    enumerate_strings(g, nt, out, "", {Grammar::nt(nt)}, 0);
    return out;
}

std::string labels_key(const std::vector<int>& labels) {
    std::string key;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (i) key += ' ';
        key += std::to_string(labels[i]);
    }
    return key;
}

}  // namespace

TEST_CASE("sorted sequence generation: forced case and contracts") {
    Rng rng(1);
    CHECK(gen_sorted_sequence(rng, 3, 2) ==
          TokenSequence{sort_id_of(0), sort_id_of(1), sort_id_of(2)});
    CHECK_THROWS_AS(gen_sorted_sequence(rng, 4, 2), ConfigError);

    for (int trial = 0; trial < 1000; ++trial) {
        Rng r(Rng(2).split(static_cast<uint64_t>(trial)).next_u64());
        const TokenSequence seq = gen_sorted_sequence(r, 20, 50);
        REQUIRE(seq.size() == 20);
        for (size_t i = 1; i < seq.size(); ++i) CHECK(seq[i] > seq[i - 1]);
        for (int id : seq) {
            CHECK(id >= sort_id_of(0));
            CHECK(id <= sort_id_of(50));
        }
    }
}

TEST_CASE("sorted sequence generation: uniform marginals") {
    std::vector<int> hits(51, 0);
    const int draws = 100000;
    Rng rng(3);
    for (int i = 0; i < draws; ++i) {
        Rng r(rng.split(static_cast<uint64_t>(i)).next_u64());
        for (int id : gen_sorted_sequence(r, 20, 50)) ++hits[static_cast<size_t>(sort_value_of(id))];
    }
    const double expected = 20.0 / 51.0;
    for (int v = 0; v <= 50; ++v) {
        const double freq = static_cast<double>(hits[static_cast<size_t>(v)]) / draws;
        CHECK(std::abs(freq - expected) < 0.01);
    }
}

TEST_CASE("sort error injection preserves the multiset") {
    Rng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        Rng r(rng.split(static_cast<uint64_t>(trial)).next_u64());
        const TokenSequence clean = gen_sorted_sequence(r, 10, 20);
        const TokenSequence bad = inject_sort_errors(clean, r);
        TokenSequence a = clean, b = bad;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
        CHECK(b == clean);  // the repair oracle: sorting restores the original
    }

    // Degenerate Gaussian far below zero clamps the swap count to 0.
    Rng r0(5);
    const TokenSequence seq{3, 4, 5};
    CHECK(inject_sort_errors(seq, r0, -100.0, 0.001) == seq);

    // A 2-token sequence admits exactly one adjacent swap position.
    Rng r1(6);
    CHECK(inject_sort_errors({7, 9}, r1, 1.0, 0.0) == TokenSequence{9, 7});

    CHECK_THROWS_AS(inject_sort_errors({3}, r1), ContractError);
}

TEST_CASE("grammar counting matches hand-computed structure") {
    const Grammar g = benchmark_grammar();
    const GrammarCounts counts = count_cfg_sentences(g);
    CHECK(counts.sentences[static_cast<size_t>(g.find("NP"))] == 63);
    CHECK(counts.sentences[static_cast<size_t>(g.find("Nom"))] == 30);
    CHECK(counts.sentences[static_cast<size_t>(g.find("VP"))] == 32004);
    CHECK(counts.total() == 2016252);
    CHECK(counts.min_len[static_cast<size_t>(g.start)] == 5);
    CHECK(counts.max_len[static_cast<size_t>(g.start)] == 13);
    CHECK(counts.max_len[static_cast<size_t>(g.start)] < 20);
}

TEST_CASE("grammar counting rejects recursive grammars") {
    Grammar g;
    g.nonterminal_names = {"A"};
    g.rules = {{{1, Grammar::nt(0)}, {1}}};
    g.start = 0;
    CHECK_THROWS_AS(count_cfg_sentences(g), GrammarError);
}

TEST_CASE("full-language enumeration agrees with the counter") {
    const Grammar g = benchmark_grammar();
    const GrammarCounts counts = count_cfg_sentences(g);

    // NP first: small enough to eyeball.
    auto np = all_sentences(g, g.find("NP"));
    std::sort(np.begin(), np.end());
    CHECK(np.size() == 63);
    CHECK(std::adjacent_find(np.begin(), np.end()) == np.end());

    // The full language: ~2M sentences. Distinctness here certifies that the
    // grammar is unambiguous, which the uniform sampler relies on.
    auto sentences = all_sentences(g, g.start);
    CHECK(sentences.size() == counts.total());
    std::sort(sentences.begin(), sentences.end());
    CHECK(std::adjacent_find(sentences.begin(), sentences.end()) == sentences.end());

    size_t max_tokens = 0, min_tokens = 1000;
    for (const auto& s : sentences) {
        const size_t toks = static_cast<size_t>(std::count(s.begin(), s.end(), ' ')) + 1;
        max_tokens = std::max(max_tokens, toks);
        min_tokens = std::min(min_tokens, toks);
    }
    CHECK(max_tokens == 13);
    CHECK(min_tokens == 5);
}

TEST_CASE("cfg sampler is sound and uniform") {
    const Grammar g = benchmark_grammar();
    const GrammarCounts counts = count_cfg_sentences(g);

    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const TokenSequence s = sample_cfg_sentence(rng, g, counts);
        CHECK(s.size() >= 5);
        CHECK(s.size() <= 13);
        CHECK(cfg_accepts(s, g));
        CHECK(s.front() == cfg_id_of(1));
        CHECK(s.back() == cfg_id_of(2));
    }

    // Frequency of one fixed sentence over 1M draws vs the exact uniform
    // probability 1/2,016,252: stay within 5 binomial standard deviations.
    const std::string target = "1 3 18 3 2";
    const int draws = 1000000;
    int hits = 0;
    int len5 = 0;
    Rng r2(8);
    for (int i = 0; i < draws; ++i) {
        const auto labels = sample_cfg_labels(r2, g, counts);
        if (labels.size() == 5) ++len5;
        if (labels_key(labels) == target) ++hits;
    }
    const double p = 1.0 / 2016252.0;
    const double sd = std::sqrt(draws * p * (1 - p));
    CHECK(std::abs(hits - draws * p) <= 5 * sd);

    // Aggregate cross-check: exactly 36 sentences have length 5.
    const double p5 = 36.0 / 2016252.0;
    const double sd5 = std::sqrt(draws * p5 * (1 - p5));
    CHECK(std::abs(len5 - draws * p5) <= 5 * sd5);
}

TEST_CASE("recognizer oracle values") {
    const Grammar g = benchmark_grammar();
    CHECK(cfg_accepts_labels({1, 3, 18, 3, 2}, g));
    CHECK_FALSE(cfg_accepts_labels({1, 3, 18, 2}, g));
    CHECK_FALSE(cfg_accepts_labels({}, g));
    CHECK_FALSE(cfg_accepts_labels({3, 18, 3}, g));
    CHECK_FALSE(cfg_accepts_labels({1, 3, 18, 3, 2, 2}, g));
    // Ambiguity-prone spot: V NP PP needs the chart to consider both VP arms.
    CHECK(cfg_accepts_labels({1, 3, 18, 3, 22, 3, 2}, g));

    // Vocabulary-id interface: unknown ids are simply rejected.
    CHECK(cfg_accepts({cfg_id_of(1), cfg_id_of(3), cfg_id_of(18), cfg_id_of(3), cfg_id_of(2)}, g));
    CHECK_FALSE(cfg_accepts({Vocab::kPad, cfg_id_of(3)}, g));
    CHECK_FALSE(cfg_accepts({}, g));
}

TEST_CASE("recognizer agrees with exhaustive enumeration on a sub-alphabet") {
    const Grammar g = benchmark_grammar();
    const std::vector<int> alphabet{1, 2, 3, 6, 8, 18};

    // Ground truth: the language restricted to these terminals, length <= 7.
    std::set<std::string> truth;
    for (const auto& s : all_sentences(g, g.start)) {
        bool inside = true;
        size_t toks = 1;
        for (char c : s)
            if (c == ' ') ++toks;
        std::istringstream is(s);
        int label;
        while (is >> label)
            if (std::find(alphabet.begin(), alphabet.end(), label) == alphabet.end())
                inside = false;
        if (inside && toks <= 7) truth.insert(s);
    }
    CHECK(truth.size() == 4);

    // Every string of length 1..7 over the sub-alphabet, checked both ways.
    std::vector<int> current;
    long checked = 0;
    std::function<void()> walk = [&]() {
        if (!current.empty()) {
            const bool accepted = cfg_accepts_labels(current, g);
            const bool expected = truth.count(labels_key(current)) != 0;
            ++checked;
            if (accepted != expected) {
                CAPTURE(labels_key(current));
                REQUIRE(accepted == expected);
            }
        }
        if (current.size() == 7) return;
        for (int label : alphabet) {
            current.push_back(label);
            walk();
            current.pop_back();
        }
    };
    walk();
    CHECK(checked == 335922);  // 6 + 6^2 + ... + 6^7
}

TEST_CASE("cfg error injection") {
    const Grammar g = benchmark_grammar();
    const GrammarCounts counts = count_cfg_sentences(g);
    const Vocab vocab = cfg_vocab();

    Rng rng(9);
    const TokenSequence clean = sample_cfg_sentence(rng, g, counts);
    CHECK(inject_cfg_errors(clean, rng, vocab, -100.0, 0.001) == clean);

    for (int trial = 0; trial < 500; ++trial) {
        Rng r(rng.split(static_cast<uint64_t>(trial)).next_u64());
        const TokenSequence x = sample_cfg_sentence(r, g, counts);
        const TokenSequence bad = inject_cfg_errors(x, r, vocab);
        CHECK(!bad.empty());
        for (int id : bad) CHECK(vocab.is_task(id));
    }

    // Single-token sequences survive deletion attempts.
    for (int trial = 0; trial < 50; ++trial) {
        Rng r(rng.split(1000 + static_cast<uint64_t>(trial)).next_u64());
        const TokenSequence bad = inject_cfg_errors({cfg_id_of(3)}, r, vocab, 10.0, 0.0);
        CHECK(!bad.empty());
    }

    // Determinism: same seed, same corruption.
    Rng a(10), b(10);
    CHECK(inject_cfg_errors(clean, a, vocab) == inject_cfg_errors(clean, b, vocab));
}

TEST_CASE("pretraining noiser") {
    const Vocab vocab = sort_vocab(20);
    Rng rng(11);
    const TokenSequence y = gen_sorted_sequence(rng, 10, 20);

    Rng r0(12);
    CHECK(noise_sequence(y, r0, vocab, 0.0, 0.0) == y);

    // Kept fraction after the drop stage alone: 0.8 within 0.01 over 100k tokens.
    long kept = 0, total = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        Rng r(Rng(13).split(static_cast<uint64_t>(trial)).next_u64());
        const TokenSequence out = noise_sequence(y, r, vocab, 0.2, 0.0);
        kept += static_cast<long>(out.size());
        total += static_cast<long>(y.size());
    }
    CHECK(std::abs(static_cast<double>(kept) / static_cast<double>(total) - 0.8) < 0.01);

    // Never empties, even at certain drop.
    for (int trial = 0; trial < 100; ++trial) {
        Rng r(Rng(14).split(static_cast<uint64_t>(trial)).next_u64());
        CHECK(!noise_sequence(y, r, vocab, 1.0, 0.0).empty());
    }

    // Insert/delete stage roughly balances length.
    TokenSequence longseq;
    for (int v = 0; v <= 20; ++v) longseq.push_back(sort_id_of(v));
    Rng r1(15);
    const TokenSequence noised = noise_sequence(longseq, r1, vocab, 0.0, 0.1);
    CHECK(noised.size() >= 1);
    for (int id : noised) CHECK(vocab.is_task(id));
}

TEST_CASE("dataset files round-trip with sidecar metadata") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "rgan_datagen_test";
    fs::create_directories(dir);
    const std::string path = (dir / "train.txt").string();

    Rng rng(16);
    std::vector<TokenSequence> seqs;
    for (int i = 0; i < 50; ++i) {
        Rng r(rng.split(static_cast<uint64_t>(i)).next_u64());
        seqs.push_back(gen_sorted_sequence(r, 10, 20));
    }
    write_dataset(path, seqs);
    CHECK(read_dataset(path) == seqs);

    DatasetMeta meta{"sort", sort_vocab(20).size, 16, "adjacent swaps n~N(8,4)"};
    write_dataset_meta(path, meta);
    const DatasetMeta back = read_dataset_meta(path);
    CHECK(back.task == meta.task);
    CHECK(back.vocab_size == meta.vocab_size);
    CHECK(back.seed == meta.seed);
    CHECK(back.injector == meta.injector);

    CHECK_THROWS_AS(read_dataset((dir / "missing.txt").string()), IoError);

    const std::string junk = (dir / "junk.txt").string();
    std::ofstream(junk) << "3 4 oops\n";
    CHECK_THROWS_AS(read_dataset(junk), DataError);

    fs::remove_all(dir);
}

TEST_CASE("generators are reproducible from the seed") {
    auto make = [](uint64_t seed) {
        std::vector<TokenSequence> seqs;
        const Grammar g = benchmark_grammar();
        const GrammarCounts counts = count_cfg_sentences(g);
        Rng rng(seed);
        for (int i = 0; i < 100; ++i) {
            Rng r(rng.split(static_cast<uint64_t>(i)).next_u64());
            seqs.push_back(gen_sorted_sequence(r, 10, 20));
            seqs.push_back(sample_cfg_sentence(r, g, counts));
        }
        return seqs;
    };
    CHECK(make(42) == make(42));
    CHECK(make(42) != make(43));
}
