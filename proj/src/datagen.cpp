#include "rgan/datagen.hpp"

#include <cmath>
#include <set>

namespace rgan {

TokenSequence gen_sorted_sequence(Rng& rng, int len, int domain_max) {
    const int m = domain_max + 1;
    RGAN_REQUIRE_CONFIG(len >= 1 && len <= m,
                        "gen_sorted_sequence: need 1 <= len <= domain size, got len=" +
                            std::to_string(len) + " over " + std::to_string(m) + " values");
    // Floyd's subset sampling: uniform over all len-element subsets.
    std::set<int> chosen;
    for (int j = m - len; j < m; ++j) {
        const int r = rng.uniform_int(0, j);
        if (!chosen.insert(r).second) chosen.insert(j);
    }
    TokenSequence seq;
    seq.reserve(static_cast<size_t>(len));
    for (int v : chosen) seq.push_back(sort_id_of(v));  // set iterates ascending
    return seq;
}

TokenSequence inject_sort_errors(const TokenSequence& seq, Rng& rng, double mean, double sd) {
    RGAN_REQUIRE(seq.size() >= 2, "inject_sort_errors: need at least 2 tokens");
    const int len = static_cast<int>(seq.size());
    long n = std::lround(rng.gaussian(mean, sd));
    n = std::clamp(n, 0L, static_cast<long>(len - 1));
    TokenSequence out = seq;
    for (long i = 0; i < n; ++i) {
        const size_t pos = rng.uniform_index(static_cast<uint64_t>(len - 1));
        std::swap(out[pos], out[pos + 1]);
    }
    return out;
}

TokenSequence inject_cfg_errors(const TokenSequence& seq, Rng& rng, const Vocab& vocab,
                                double mean, double sd) {
    RGAN_REQUIRE(!seq.empty(), "inject_cfg_errors: empty sequence");
    long n = std::lround(rng.gaussian(mean, sd));
    if (n < 0) n = 0;
    TokenSequence out = seq;
    for (long i = 0; i < n; ++i) {
        switch (rng.uniform_index(3)) {
            case 0: {  // deletion; a 1-token sequence is left alone
                if (out.size() > 1)
                    out.erase(out.begin() +
                              static_cast<long>(rng.uniform_index(out.size())));
                break;
            }
            case 1: {  // insertion of a uniform task token
                const size_t pos = rng.uniform_index(out.size() + 1);
                const int tok = Vocab::kTaskOffset +
                                static_cast<int>(rng.uniform_index(
                                    static_cast<uint64_t>(vocab.task_tokens())));
                out.insert(out.begin() + static_cast<long>(pos), tok);
                break;
            }
            default: {  // swap of two uniform positions
                const size_t a = rng.uniform_index(out.size());
                const size_t b = rng.uniform_index(out.size());
                std::swap(out[a], out[b]);
                break;
            }
        }
    }
    return out;
}

TokenSequence noise_sequence(const TokenSequence& y, Rng& rng, const Vocab& vocab,
                             double p_drop, double rate) {
    RGAN_REQUIRE(!y.empty(), "noise_sequence: empty sequence");
    TokenSequence out;
    out.reserve(y.size());
    for (int tok : y)
        if (!rng.bernoulli(p_drop)) out.push_back(tok);
    if (out.empty()) out.push_back(y[rng.uniform_index(y.size())]);

    const long n = std::lround(rate * static_cast<double>(y.size()));
    for (long i = 0; i < n; ++i) {
        const size_t pos = rng.uniform_index(out.size() + 1);
        const int tok =
            Vocab::kTaskOffset +
            static_cast<int>(rng.uniform_index(static_cast<uint64_t>(vocab.task_tokens())));
        out.insert(out.begin() + static_cast<long>(pos), tok);
    }
    for (long i = 0; i < n && out.size() > 1; ++i)
        out.erase(out.begin() + static_cast<long>(rng.uniform_index(out.size())));
    return out;
}

}  // namespace rgan
