#pragma once

#include <string>
#include <vector>

#include "rgan/checkpoint.hpp"
#include "rgan/config.hpp"
#include "rgan/metrics.hpp"

// Orchestration: dataset generation, denoising pretraining, adversarial
// training with curriculum, the paired seq2seq baseline, evaluation, and the
// critic diagnostics. Every entry point is deterministic in (config, seed)
// and writes its artifacts under config.out_dir.

namespace rgan {

// Curriculum thresholds (Appendix-style schedule): advance when the critic
// ranks real above fake on fewer than 55% of probe pairs, or after 40 epochs
// at the current level, whichever comes first.
inline constexpr double kCurriculumAccTrigger = 0.55;
inline constexpr int kCurriculumEpochTrigger = 40;

struct CurriculumState {
    int length = 5;
    int epochs_at_level = 0;
    double accuracy = 1.0;

    bool operator==(const CurriculumState&) const = default;
};

// Post-epoch transition: records the accuracy estimate; advances length by
// `step` (never past task_max) and resets the level counter when either
// trigger fires, otherwise keeps the level with the counter updated.
CurriculumState curriculum_advance(CurriculumState state, double critic_accuracy,
                                   int epochs_at_level, int step, int task_max);

// Canonical dataset file names under a data directory.
struct DatasetPaths {
    std::string good, bad, pair_good, pair_bad, eval_good, eval_bad;
};
DatasetPaths dataset_paths(const std::string& dir);

// Writes the six dataset files (plus JSON sidecars) for the configured task:
// unpaired good/bad training sets, aligned seq2seq pairs, aligned eval pairs.
DatasetPaths generate_datasets(const TrainConfig& cfg);

// Denoising-autoencoder pretraining on the good dataset. Writes
// pretrain_metrics.csv and pretrain.ckpt; returns the checkpoint.
Checkpoint pretrain(const TrainConfig& cfg);

// Adversarial training (gan-base / gan-auto / gan-freq). Critic-only warm-up,
// then `critic_ratio` critic updates (RMSprop + weight clipping) per
// generator update, curriculum as configured. Writes train_metrics.csv and
// model.ckpt.
Checkpoint train_gan(const TrainConfig& cfg);

// Teacher-forced baseline on the aligned pair files (Adam at lr_pretrain).
// Writes train_metrics.csv and model.ckpt.
Checkpoint train_seq2seq(const TrainConfig& cfg);

// Loads the model checkpoint, repairs the eval inputs, and computes the
// task's metric set (sorting: sequence/order accuracy vs the sort oracle;
// cfg: grammar validity and BLEU-4 vs the aligned originals). Writes
// eval_report.csv.
EvalReport evaluate(const TrainConfig& cfg, const std::string& checkpoint_path);

// Trains a fresh critic of cfg.critic_depth against the frozen generator and
// emits the loss-ratio time series (diagnose_ratio.csv) and the kernel-11
// filter profiles (diagnose_filters.csv).
void diagnose(const TrainConfig& cfg, const std::string& generator_checkpoint);

// The per-epoch adversarial log row (also parsed back by tests).
struct GanEpochLog {
    int epoch = 0;
    double wgan_d = 0.0;  // mean critic loss over the epoch's critic steps
    double wgan_g = 0.0;  // mean generator loss over the epoch's generator steps
    double reg = 0.0;     // mean regularizer value
    double critic_accuracy = 0.0;
    int curriculum_length = 0;
    int critic_steps = 0;
    int generator_steps = 0;
    double generator_lr = 0.0;
};

}  // namespace rgan
