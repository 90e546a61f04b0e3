#pragma once

#include "rgan/grammar.hpp"
#include "rgan/rng.hpp"
#include "rgan/vocab.hpp"

// Seeded benchmark data: sorted-sequence generation with adjacent-swap
// corruption, CFG sampling with edit corruption, and the denoising-pretrain
// noiser. Everything works in vocabulary ids and is bitwise reproducible.

namespace rgan {

// `len` distinct values drawn uniformly from {0..domain_max}, ascending,
// returned as token ids.
TokenSequence gen_sorted_sequence(Rng& rng, int len, int domain_max);

// n ~ round(N(mean, sd)) clamped to [0, |seq|-1] adjacent-pair swaps at
// uniformly random positions.
TokenSequence inject_sort_errors(const TokenSequence& seq, Rng& rng, double mean = 8.0,
                                 double sd = 4.0);

// n ~ max(0, round(N(mean, sd))) independent edits; each is a uniformly typed
// deletion, insertion (uniform task token), or swap of two uniform positions.
TokenSequence inject_cfg_errors(const TokenSequence& seq, Rng& rng, const Vocab& vocab,
                                double mean = 5.0, double sd = 2.0);

// Denoising-pretrain corruption: token dropout then balanced insert/delete.
// Never returns an empty sequence.
TokenSequence noise_sequence(const TokenSequence& y, Rng& rng, const Vocab& vocab,
                             double p_drop = 0.2, double rate = 0.03);

}  // namespace rgan
