#pragma once

#include <cstdint>
#include <string>

#include "rgan/vocab.hpp"

// Run configuration: every training, data, and model knob in one strict
// JSON-backed record. Unknown keys and malformed values are rejected so a
// config file always means exactly what it says.

namespace rgan {

struct CurriculumConfig {
    bool enabled = false;
    int start = 5;  // initial max content length
    int step = 2;   // growth per advance

    bool operator==(const CurriculumConfig&) const = default;
};

struct TrainConfig {
    // Task and objective.
    std::string task = "sort";       // sort | cfg
    std::string model = "gan-base";  // gan-base | gan-auto | gan-freq | seq2seq
    double lambda = 1.0;             // regularizer weight

    // Adversarial schedule.
    double clip = 0.05;         // critic weight-clipping threshold
    double lr_critic = 5e-4;    // RMSprop
    double lr_generator = 1e-5; // RMSprop
    double lr_pretrain = 1e-4;  // Adam (denoising and seq2seq)
    int critic_ratio = 15;      // critic updates per generator update
    int warmup_epochs = 10;     // critic-only epochs at the start
    int retrain_epochs = 2;     // critic-only epochs after a curriculum advance

    // Run length and batching.
    int epochs = 200;
    int batch_size = 32;
    CurriculumConfig curriculum;
    double decay_factor = 0.9;  // generator learning-rate decay...
    int decay_every = 10;       // ...applied every this many epochs
    uint64_t seed = 1;

    // Model scale.
    int layers = 3;
    int hidden = 512;
    int filters = 300;   // per conv bank
    int fc_hidden = 512; // critic head
    int critic_depth = 1;

    // Data.
    int sort_len = 10;     // sorting content length
    int sort_domain = 50;  // sorting draws values 0..sort_domain
    int train_size = 5000; // sequences per generated dataset
    int eval_size = 500;
    double noise_drop = 0.2;   // denoising corruption
    double noise_rate = 0.03;  // insertions/deletions per token
    double sort_err_mean = 8.0;
    double sort_err_sd = 4.0;
    double cfg_err_mean = 5.0;
    double cfg_err_sd = 2.0;
    int probe_pairs = 256;  // critic-accuracy probe size

    // Paths. good/bad are the unpaired adversarial training sets; the pair_*
    // files are aligned line-for-line (seq2seq training), as are the eval_*
    // files (held-out evaluation and diagnostics).
    std::string good_path;
    std::string bad_path;
    std::string pair_good_path;
    std::string pair_bad_path;
    std::string eval_good_path;
    std::string eval_bad_path;
    std::string pretrained_path;
    std::string out_dir = ".";

    // Longest task-token content a sequence of this task may carry.
    int task_max_len() const;
    Vocab vocab() const;
    bool is_gan() const { return model != "seq2seq"; }

    // Enforces every invariant; throws ConfigError naming the bad field.
    void validate() const;

    // Strict JSON round-trip. Parsing starts from defaults, overlays the
    // file, and rejects unknown keys; serialization emits every field.
    static TrainConfig from_json_text(const std::string& text);
    static TrainConfig load(const std::string& path);  // IoError on failure
    std::string to_json_text() const;

    bool operator==(const TrainConfig&) const = default;
};

}  // namespace rgan
