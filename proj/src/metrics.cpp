#include "rgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "rgan/common.hpp"

namespace rgan {

double sequence_accuracy(const std::vector<TokenSequence>& preds,
                         const std::vector<TokenSequence>& targets) {
    RGAN_REQUIRE(!preds.empty(), "sequence_accuracy: empty prediction set");
    RGAN_REQUIRE(preds.size() == targets.size(), "sequence_accuracy: size mismatch");
    int64_t hits = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == targets[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double order_accuracy(const std::vector<TokenSequence>& preds) {
    RGAN_REQUIRE(!preds.empty(), "order_accuracy: empty prediction set");
    int64_t hits = 0;
    for (const TokenSequence& p : preds) {
        bool ordered = true;
        for (size_t i = 1; i < p.size(); ++i)
            if (p[i - 1] >= p[i]) {
                ordered = false;
                break;
            }
        if (ordered) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double cfg_validity_rate(const std::vector<TokenSequence>& preds, const Grammar& g) {
    RGAN_REQUIRE(!preds.empty(), "cfg_validity_rate: empty prediction set");
    int64_t hits = 0;
    for (const TokenSequence& p : preds)
        if (cfg_accepts(p, g)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double bleu4(const std::vector<TokenSequence>& candidates,
             const std::vector<TokenSequence>& references) {
    RGAN_REQUIRE(!candidates.empty(), "bleu4: empty corpus");
    RGAN_REQUIRE(candidates.size() == references.size(), "bleu4: size mismatch");

    int64_t cand_len = 0, ref_len = 0;
    int64_t matched[4] = {0, 0, 0, 0};
    int64_t total[4] = {0, 0, 0, 0};
    for (size_t i = 0; i < candidates.size(); ++i) {
        const TokenSequence& c = candidates[i];
        const TokenSequence& r = references[i];
        cand_len += static_cast<int64_t>(c.size());
        ref_len += static_cast<int64_t>(r.size());
        for (int n = 1; n <= 4; ++n) {
            if (static_cast<int>(c.size()) < n) continue;
            std::map<TokenSequence, int64_t> ref_counts;
            for (size_t j = 0; j + n <= r.size(); ++j)
                ++ref_counts[TokenSequence(r.begin() + static_cast<int64_t>(j),
                                           r.begin() + static_cast<int64_t>(j + n))];
            std::map<TokenSequence, int64_t> cand_counts;
            for (size_t j = 0; j + n <= c.size(); ++j)
                ++cand_counts[TokenSequence(c.begin() + static_cast<int64_t>(j),
                                            c.begin() + static_cast<int64_t>(j + n))];
            for (const auto& [gram, cnt] : cand_counts) {
                total[n - 1] += cnt;
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) matched[n - 1] += std::min(cnt, it->second);
            }
        }
    }
    if (cand_len == 0) return 0.0;
    double log_prec = 0.0;
    for (int n = 0; n < 4; ++n) {
        if (total[n] == 0 || matched[n] == 0) return 0.0;
        log_prec += 0.25 * std::log(static_cast<double>(matched[n]) /
                                    static_cast<double>(total[n]));
    }
    const double bp = cand_len >= ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(cand_len));
    return bp * std::exp(log_prec);
}

LossRatioReport loss_ratio_from_scores(const std::vector<double>& real_scores,
                                       const std::vector<double>& fake_scores,
                                       const std::vector<bool>& correct) {
    RGAN_REQUIRE(real_scores.size() == fake_scores.size() &&
                     real_scores.size() == correct.size(),
                 "loss_ratio: misaligned inputs");
    RGAN_REQUIRE(!correct.empty(), "loss_ratio: empty probe set");
    LossRatioReport rep;
    double sum_real[2] = {0.0, 0.0};  // [incorrect, correct]
    double sum_fake[2] = {0.0, 0.0};
    int counts[2] = {0, 0};
    for (size_t i = 0; i < correct.size(); ++i) {
        const int k = correct[i] ? 1 : 0;
        sum_real[k] += real_scores[i];
        sum_fake[k] += fake_scores[i];
        ++counts[k];
    }
    rep.n_incorrect = counts[0];
    rep.n_correct = counts[1];
    if (counts[0] > 0)
        rep.value_incorrect = (sum_fake[0] - sum_real[0]) / counts[0];
    if (counts[1] > 0) rep.value_correct = (sum_fake[1] - sum_real[1]) / counts[1];
    if (counts[0] > 0 && counts[1] > 0) {
        const double r = rep.value_incorrect / rep.value_correct;
        if (std::isfinite(r)) {
            rep.ratio = r;
            rep.has_ratio = true;
        }
    }
    return rep;
}

double hoyer_sparsity(const std::vector<double>& profile) {
    const auto n = static_cast<double>(profile.size());
    RGAN_REQUIRE(profile.size() >= 2, "hoyer_sparsity: profile too short");
    double l1 = 0.0, l2 = 0.0;
    for (double w : profile) {
        l1 += std::fabs(w);
        l2 += w * w;
    }
    if (l2 == 0.0) return 0.0;
    return (std::sqrt(n) - l1 / std::sqrt(l2)) / (std::sqrt(n) - 1.0);
}

std::vector<FilterProfile> filter_profiles(const TensorT<float>& weights, int kernel,
                                           int vocab) {
    RGAN_REQUIRE(weights.rank() == 2 && weights.dim(0) == kernel * vocab,
                 "filter_profiles: weights must be [kernel*vocab, filters]");
    const int F = weights.dim(1);
    std::vector<FilterProfile> out;
    out.reserve(static_cast<size_t>(F));
    for (int f = 0; f < F; ++f) {
        FilterProfile fp;
        fp.filter = f;
        fp.profile.resize(static_cast<size_t>(kernel));
        for (int p = 0; p < kernel; ++p) {
            double sq = 0.0;
            for (int v = 0; v < vocab; ++v) {
                const double w = weights.at(p * vocab + v, f);
                sq += w * w;
            }
            fp.profile[static_cast<size_t>(p)] = std::sqrt(sq);
        }
        fp.sparsity = hoyer_sparsity(fp.profile);
        const double peak =
            *std::max_element(fp.profile.begin(), fp.profile.end());
        if (peak > 0.0)
            for (double& w : fp.profile) w /= peak;
        out.push_back(std::move(fp));
    }
    return out;
}

std::string filter_profiles_csv(const std::vector<FilterProfile>& profiles) {
    std::ostringstream os;
    os << "filter,position,weight,sparsity\n";
    for (const FilterProfile& fp : profiles)
        for (size_t p = 0; p < fp.profile.size(); ++p)
            os << fp.filter << ',' << p << ',' << fp.profile[p] << ','
               << fp.sparsity << '\n';
    return os.str();
}

bool EvalReport::has(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return true;
    return false;
}

double EvalReport::get(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw IndexError("EvalReport: no metric named " + name);
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "metric,value,count\n";
    for (const auto& [k, v] : metrics) os << k << ',' << v << ',' << count << '\n';
    return os.str();
}

}  // namespace rgan
