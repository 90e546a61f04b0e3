#pragma once

#include <string>
#include <vector>

#include "rgan/common.hpp"

// Token id layout shared by every task: three framework specials up front,
// task tokens packed contiguously behind them. Dataset files on disk hold
// task-token ids only; specials are added at batch construction time.

namespace rgan {

using TokenSequence = std::vector<int>;

struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kSos = 1;
    static constexpr int kEos = 2;
    static constexpr int kTaskOffset = 3;

    int size = 0;  // V, specials included

    int task_tokens() const { return size - kTaskOffset; }
    bool is_task(int id) const { return id >= kTaskOffset && id < size; }
    bool is_special(int id) const { return id >= 0 && id < kTaskOffset; }

    void check(const TokenSequence& seq) const {
        for (int id : seq)
            if (!is_task(id))
                throw DataError("token id " + std::to_string(id) +
                                " outside task range [3, " + std::to_string(size) + ")");
    }
};

// Sorting over integer values 0..domain_max; value v <-> id v + 3.
inline Vocab sort_vocab(int domain_max) {
    RGAN_REQUIRE_CONFIG(domain_max >= 0, "sort vocab: domain must be nonempty");
    return Vocab{Vocab::kTaskOffset + domain_max + 1};
}

// Grammar terminals are labeled '1'..'23'; label k <-> id k + 2.
inline Vocab cfg_vocab() { return Vocab{26}; }

inline int sort_value_of(int id) { return id - Vocab::kTaskOffset; }
inline int sort_id_of(int value) { return value + Vocab::kTaskOffset; }
inline int cfg_label_of(int id) { return id - 2; }
inline int cfg_id_of(int label) { return label + 2; }

// --- dataset files ------------------------------------------------------
// One sequence per line, space-separated decimal task-token ids. The sidecar
// carries enough provenance to validate and regenerate the file.

struct DatasetMeta {
    std::string task;          // "sort" or "cfg"
    int vocab_size = 0;
    uint64_t seed = 0;
    std::string injector;      // description of the corruption applied, if any
};

void write_dataset(const std::string& path, const std::vector<TokenSequence>& seqs);
std::vector<TokenSequence> read_dataset(const std::string& path);

void write_dataset_meta(const std::string& dataset_path, const DatasetMeta& meta);
DatasetMeta read_dataset_meta(const std::string& dataset_path);

}  // namespace rgan
