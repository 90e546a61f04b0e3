#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rgan/grammar.hpp"
#include "rgan/tensor.hpp"
#include "rgan/vocab.hpp"

// Evaluation metrics and critic diagnostics: exact-match and ordering
// accuracy, grammar validity, corpus BLEU-4, the paired loss-ratio
// diagnostic, and convolutional filter sparsity profiles.

namespace rgan {

// Fraction of predictions that match their target token-for-token.
double sequence_accuracy(const std::vector<TokenSequence>& preds,
                         const std::vector<TokenSequence>& targets);

// Fraction of predictions whose task tokens are strictly increasing. The
// empty sequence is vacuously ordered; duplicates break strictness.
double order_accuracy(const std::vector<TokenSequence>& preds);

// Fraction of predictions accepted by the grammar recognizer.
double cfg_validity_rate(const std::vector<TokenSequence>& preds, const Grammar& g);

// Corpus-level BLEU-4: clipped n-gram precisions with uniform 1..4-gram
// weights, standard brevity penalty, no smoothing. Zero if any corpus-level
// precision is zero.
double bleu4(const std::vector<TokenSequence>& candidates,
             const std::vector<TokenSequence>& references);

// Wasserstein loss (mean fake score - mean real score) evaluated separately
// on the pairs the generator repaired exactly and on those it did not.
// The ratio incorrect/correct is reported absent unless both partitions are
// populated and the division is finite (a constant critic zeroes both).
struct LossRatioReport {
    int n_correct = 0;
    int n_incorrect = 0;
    double value_correct = 0.0;
    double value_incorrect = 0.0;
    bool has_ratio = false;
    double ratio = 0.0;
};

LossRatioReport loss_ratio_from_scores(const std::vector<double>& real_scores,
                                       const std::vector<double>& fake_scores,
                                       const std::vector<bool>& correct);

// Hoyer sparsity (sqrt(n) - |w|_1/|w|_2) / (sqrt(n) - 1): 1 for a one-hot
// profile, 0 for a uniform one. The all-zero profile is defined as 0.
double hoyer_sparsity(const std::vector<double>& profile);

// Temporal profile of one first-layer filter: per-position L2 norm across
// vocabulary channels, normalized by the profile's largest value, plus its
// Hoyer sparsity (scale-invariant, computed on the raw profile).
struct FilterProfile {
    int filter = 0;
    std::vector<double> profile;  // normalized, length = kernel size
    double sparsity = 0.0;
};

// weights: [kernel * vocab, filters] as stored by the critic's conv banks.
std::vector<FilterProfile> filter_profiles(const TensorT<float>& weights, int kernel,
                                           int vocab);

// CSV dump, one row per (filter, position): filter,position,weight,sparsity.
std::string filter_profiles_csv(const std::vector<FilterProfile>& profiles);

// An ordered bundle of named metric values over `count` sequences.
struct EvalReport {
    std::string task;
    int count = 0;
    std::vector<std::pair<std::string, double>> metrics;

    void add(const std::string& name, double value) { metrics.emplace_back(name, value); }
    bool has(const std::string& name) const;
    double get(const std::string& name) const;  // IndexError if absent
    std::string to_csv() const;                 // header metric,value,count
};

}  // namespace rgan
