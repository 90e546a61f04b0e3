#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rgan/rng.hpp"
#include "rgan/vocab.hpp"

// The finite context-free grammar behind the CFG benchmark, with exact
// sentence counting (for uniform sampling), a uniform sampler, and a general
// chart recognizer. Symbols are ints: positive values are terminal labels,
// negative values index nonterminals.

namespace rgan {

struct Grammar {
    using Symbol = int;  // > 0: terminal label; < 0: nonterminal ~index

    static Symbol nt(int index) { return -(index + 1); }
    static bool is_nonterminal(Symbol s) { return s < 0; }
    static int nt_index(Symbol s) { return -s - 1; }

    std::vector<std::string> nonterminal_names;
    std::vector<std::vector<std::vector<Symbol>>> rules;  // per NT: alternatives
    int start = 0;  // nonterminal index of S

    int find(const std::string& name) const;
};

// The benchmark grammar: a small English-like fragment whose sentences open
// with terminal '1' and close with terminal '2'.
Grammar benchmark_grammar();

struct GrammarCounts {
    std::vector<uint64_t> sentences;  // distinct terminal strings per NT
    std::vector<int> min_len, max_len;
    // per NT, per alternative: number of strings that alternative derives
    std::vector<std::vector<uint64_t>> alt_counts;

    uint64_t total() const { return sentences[0]; }
};

// Exact bottom-up counting. Throws GrammarError if any nonterminal can reach
// itself (the language would be infinite).
GrammarCounts count_cfg_sentences(const Grammar& g);

// Uniform draw over the grammar's distinct sentences, as terminal labels.
std::vector<int> sample_cfg_labels(Rng& rng, const Grammar& g, const GrammarCounts& counts);

// Same draw mapped into vocabulary ids.
TokenSequence sample_cfg_sentence(Rng& rng, const Grammar& g, const GrammarCounts& counts);

// Chart-based (Earley) recognition of a terminal-label string.
bool cfg_accepts_labels(const std::vector<int>& labels, const Grammar& g);

// Recognition of a vocabulary-id sequence; ids outside the task range are
// simply not terminals, so the answer is false, never an error.
bool cfg_accepts(const TokenSequence& tokens, const Grammar& g);

}  // namespace rgan
