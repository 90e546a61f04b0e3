#include "rgan/grammar.hpp"

#include <algorithm>

namespace rgan {

int Grammar::find(const std::string& name) const {
    for (size_t i = 0; i < nonterminal_names.size(); ++i)
        if (nonterminal_names[i] == name) return static_cast<int>(i);
    throw GrammarError("unknown nonterminal: " + name);
}

Grammar benchmark_grammar() {
    Grammar g;
    g.nonterminal_names = {"S",  "SOS", "EOS",  "NP",  "Nom",
                           "VP", "PP",  "PropN", "Det", "N",
                           "Adj", "V",  "P"};
    auto nt = [&](const char* name) { return Grammar::nt(g.find(name)); };
    g.rules.resize(g.nonterminal_names.size());
    g.start = g.find("S");

    g.rules[g.find("S")] = {{nt("SOS"), nt("NP"), nt("VP"), nt("EOS")}};
    g.rules[g.find("SOS")] = {{1}};
    g.rules[g.find("EOS")] = {{2}};
    g.rules[g.find("NP")] = {{nt("Det"), nt("Nom")}, {nt("PropN")}};
    g.rules[g.find("Nom")] = {{nt("Adj"), nt("N")}, {nt("N")}};
    g.rules[g.find("VP")] = {{nt("V"), nt("NP")}, {nt("V"), nt("NP"), nt("PP")}};
    g.rules[g.find("PP")] = {{nt("P"), nt("NP")}};
    g.rules[g.find("PropN")] = {{3}, {4}, {5}};
    g.rules[g.find("Det")] = {{6}, {7}};
    g.rules[g.find("N")] = {{8}, {9}, {10}, {11}, {12}};
    g.rules[g.find("Adj")] = {{13}, {14}, {15}, {16}, {17}};
    g.rules[g.find("V")] = {{18}, {19}, {20}, {21}};
    g.rules[g.find("P")] = {{22}, {23}};
    return g;
}

namespace {

struct CountWork {
    const Grammar& g;
    GrammarCounts out;
    std::vector<int> state;  // 0 unvisited, 1 in progress, 2 done

    explicit CountWork(const Grammar& g)
        : g(g), state(g.rules.size(), 0) {
        const size_t n = g.rules.size();
        out.sentences.assign(n, 0);
        out.min_len.assign(n, 0);
        out.max_len.assign(n, 0);
        out.alt_counts.assign(n, {});
    }

    void visit(int nt) {
        if (state[static_cast<size_t>(nt)] == 2) return;
        if (state[static_cast<size_t>(nt)] == 1)
            throw GrammarError("grammar is recursive at " +
                               g.nonterminal_names[static_cast<size_t>(nt)] +
                               "; finite language required");
        state[static_cast<size_t>(nt)] = 1;
        const auto& alts = g.rules[static_cast<size_t>(nt)];
        if (alts.empty())
            throw GrammarError("nonterminal without productions: " +
                               g.nonterminal_names[static_cast<size_t>(nt)]);
        uint64_t total = 0;
        int lo = 0, hi = 0;
        bool first = true;
        auto& per_alt = out.alt_counts[static_cast<size_t>(nt)];
        for (const auto& alt : alts) {
            uint64_t count = 1;
            int amin = 0, amax = 0;
            for (Grammar::Symbol s : alt) {
                if (Grammar::is_nonterminal(s)) {
                    const int child = Grammar::nt_index(s);
                    visit(child);
                    count *= out.sentences[static_cast<size_t>(child)];
                    amin += out.min_len[static_cast<size_t>(child)];
                    amax += out.max_len[static_cast<size_t>(child)];
                } else {
                    amin += 1;
                    amax += 1;
                }
            }
            per_alt.push_back(count);
            total += count;
            lo = first ? amin : std::min(lo, amin);
            hi = first ? amax : std::max(hi, amax);
            first = false;
        }
        out.sentences[static_cast<size_t>(nt)] = total;
        out.min_len[static_cast<size_t>(nt)] = lo;
        out.max_len[static_cast<size_t>(nt)] = hi;
        state[static_cast<size_t>(nt)] = 2;
    }
};

void expand(Rng& rng, const Grammar& g, const GrammarCounts& counts, int nt,
            std::vector<int>& out) {
    const auto& alts = g.rules[static_cast<size_t>(nt)];
    const auto& weights = counts.alt_counts[static_cast<size_t>(nt)];
    // Weighted alternative choice: P(alt) = count(alt) / count(nt) makes the
    // sentence distribution uniform because the grammar is unambiguous.
    uint64_t pick = rng.uniform_index(counts.sentences[static_cast<size_t>(nt)]);
    size_t a = 0;
    while (a + 1 < weights.size() && pick >= weights[a]) {
        pick -= weights[a];
        ++a;
    }
    for (Grammar::Symbol s : alts[a]) {
        if (Grammar::is_nonterminal(s))
            expand(rng, g, counts, Grammar::nt_index(s), out);
        else
            out.push_back(s);
    }
}

}  // namespace

GrammarCounts count_cfg_sentences(const Grammar& g) {
    CountWork work(g);
    for (size_t i = 0; i < g.rules.size(); ++i) work.visit(static_cast<int>(i));
    return std::move(work.out);
}

std::vector<int> sample_cfg_labels(Rng& rng, const Grammar& g, const GrammarCounts& counts) {
    std::vector<int> labels;
    expand(rng, g, counts, g.start, labels);
    return labels;
}

TokenSequence sample_cfg_sentence(Rng& rng, const Grammar& g, const GrammarCounts& counts) {
    const auto labels = sample_cfg_labels(rng, g, counts);
    TokenSequence ids;
    ids.reserve(labels.size());
    for (int l : labels) ids.push_back(cfg_id_of(l));
    return ids;
}

// Earley recognition. States are (nonterminal, alternative, dot, origin);
// the chart keeps one state set per input position.
bool cfg_accepts_labels(const std::vector<int>& labels, const Grammar& g) {
    struct State {
        int nt, alt, dot, origin;
        bool operator==(const State& o) const {
            return nt == o.nt && alt == o.alt && dot == o.dot && origin == o.origin;
        }
    };
    const int n = static_cast<int>(labels.size());
    std::vector<std::vector<State>> chart(static_cast<size_t>(n) + 1);

    auto add = [&](int pos, State s) {
        auto& set = chart[static_cast<size_t>(pos)];
        if (std::find(set.begin(), set.end(), s) == set.end()) set.push_back(s);
    };

    for (int alt = 0; alt < static_cast<int>(g.rules[static_cast<size_t>(g.start)].size()); ++alt)
        add(0, {g.start, alt, 0, 0});

    for (int pos = 0; pos <= n; ++pos) {
        auto& set = chart[static_cast<size_t>(pos)];
        for (size_t i = 0; i < set.size(); ++i) {
            const State s = set[i];  // copy: `set` may grow
            const auto& body = g.rules[static_cast<size_t>(s.nt)][static_cast<size_t>(s.alt)];
            if (s.dot < static_cast<int>(body.size())) {
                const Grammar::Symbol sym = body[static_cast<size_t>(s.dot)];
                if (Grammar::is_nonterminal(sym)) {
                    const int child = Grammar::nt_index(sym);
                    const auto& alts = g.rules[static_cast<size_t>(child)];
                    for (int alt = 0; alt < static_cast<int>(alts.size()); ++alt)
                        add(pos, {child, alt, 0, pos});
                } else if (pos < n && labels[static_cast<size_t>(pos)] == sym) {
                    add(pos + 1, {s.nt, s.alt, s.dot + 1, s.origin});
                }
            } else {
                // Completion: advance every state waiting on s.nt at s.origin.
                const auto& origin_set = chart[static_cast<size_t>(s.origin)];
                for (size_t k = 0; k < origin_set.size(); ++k) {
                    const State w = origin_set[k];
                    const auto& wbody =
                        g.rules[static_cast<size_t>(w.nt)][static_cast<size_t>(w.alt)];
                    if (w.dot < static_cast<int>(wbody.size()) &&
                        wbody[static_cast<size_t>(w.dot)] == Grammar::nt(s.nt))
                        add(pos, {w.nt, w.alt, w.dot + 1, w.origin});
                }
            }
        }
    }

    for (const State& s : chart[static_cast<size_t>(n)]) {
        const auto& body = g.rules[static_cast<size_t>(s.nt)][static_cast<size_t>(s.alt)];
        if (s.nt == g.start && s.origin == 0 && s.dot == static_cast<int>(body.size()))
            return true;
    }
    return false;
}

bool cfg_accepts(const TokenSequence& tokens, const Grammar& g) {
    if (tokens.empty()) return false;
    std::vector<int> labels;
    labels.reserve(tokens.size());
    for (int id : tokens) {
        const int label = cfg_label_of(id);
        if (label < 1) return false;  // specials and junk are not terminals
        labels.push_back(label);
    }
    return cfg_accepts_labels(labels, g);
}

}  // namespace rgan
