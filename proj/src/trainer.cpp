#include "rgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rgan/critic.hpp"
#include "rgan/datagen.hpp"
#include "rgan/objectives.hpp"
#include "rgan/seqmodel.hpp"

namespace rgan {

namespace {

namespace fs = std::filesystem;

// Substream labels hung off the run seed. Every consumer of randomness gets
// its own split so adding one never perturbs the others.
enum : uint64_t {
    kStreamGenInit = 1,
    kStreamCriticInit = 2,
    kStreamGoodData = 10,
    kStreamBadSource = 11,
    kStreamBadInject = 12,
    kStreamPairData = 13,
    kStreamPairInject = 14,
    kStreamEvalData = 15,
    kStreamEvalInject = 16,
    kStreamEpochShuffle = 1000,
    kStreamEpochGood = 2000,
    kStreamEpochNoise = 3000,
    kStreamEpochProbe = 4000,
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

std::vector<size_t> shuffled_indices(size_t n, Rng rng) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(static_cast<uint64_t>(i))]);
    return idx;
}

// Deterministic cyclic batch source: walks a shuffled order, reshuffling
// with a fresh substream every time the data is exhausted.
class Sampler {
public:
    Sampler(const std::vector<TokenSequence>& data, Rng rng)
        : data_(&data), rng_(rng) {
        reshuffle();
    }

    std::vector<TokenSequence> take(int n) {
        std::vector<TokenSequence> out;
        out.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            if (pos_ == order_.size()) reshuffle();
            out.push_back((*data_)[order_[pos_++]]);
        }
        return out;
    }

private:
    void reshuffle() {
        order_ = shuffled_indices(data_->size(), rng_.split(era_++));
        pos_ = 0;
    }

    const std::vector<TokenSequence>* data_;
    Rng rng_;
    uint64_t era_ = 0;
    std::vector<size_t> order_;
    size_t pos_ = 0;
};

TokenSequence clipped(const TokenSequence& s, int max_len) {
    if (static_cast<int>(s.size()) <= max_len) return s;
    return TokenSequence(s.begin(), s.begin() + max_len);
}

std::vector<TokenSequence> clip_all(const std::vector<TokenSequence>& seqs, int max_len) {
    std::vector<TokenSequence> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) out.push_back(clipped(s, max_len));
    return out;
}

std::vector<TokenSequence> draw_clean(const TrainConfig& cfg, int n, Rng rng,
                                      const Grammar* g, const GrammarCounts* counts) {
    std::vector<TokenSequence> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng r = rng.split(static_cast<uint64_t>(i));
        if (cfg.task == "sort")
            out.push_back(gen_sorted_sequence(r, cfg.sort_len, cfg.sort_domain));
        else
            out.push_back(sample_cfg_sentence(r, *g, *counts));
    }
    return out;
}

std::vector<TokenSequence> corrupt_all(const TrainConfig& cfg,
                                       const std::vector<TokenSequence>& seqs, Rng rng,
                                       const Vocab& vocab) {
    std::vector<TokenSequence> out;
    out.reserve(seqs.size());
    for (size_t i = 0; i < seqs.size(); ++i) {
        Rng r = rng.split(static_cast<uint64_t>(i));
        if (cfg.task == "sort")
            out.push_back(inject_sort_errors(seqs[i], r, cfg.sort_err_mean, cfg.sort_err_sd));
        else
            out.push_back(inject_cfg_errors(seqs[i], r, vocab, cfg.cfg_err_mean, cfg.cfg_err_sd));
    }
    return out;
}

Generator build_generator(const TrainConfig& cfg) {
    Rng rng = Rng(cfg.seed).split(kStreamGenInit);
    return Generator(cfg.vocab(), cfg.layers, cfg.hidden, rng);
}

void maybe_load_pretrained(const TrainConfig& cfg, Generator& gen) {
    if (cfg.pretrained_path.empty()) return;
    const Checkpoint ck = load_checkpoint(cfg.pretrained_path);
    RGAN_REQUIRE_CONFIG(ck.config.task == cfg.task,
                        "pretrained checkpoint task mismatch: " + ck.config.task);
    RGAN_REQUIRE_CONFIG(ck.config.vocab().size == cfg.vocab().size,
                        "pretrained checkpoint vocab mismatch");
    checkpoint_to_store(ck, gen.store());
}

void require_finite(double v, const char* what, int epoch, int batch) {
    if (std::isfinite(v)) return;
    throw DataError(std::string("non-finite ") + what + " at epoch " +
                    std::to_string(epoch) + ", batch " + std::to_string(batch));
}

// Runs the generator forward with frozen parameters and hands back plain
// tensors, so critic-side tapes never drag the generator graph along.
struct FrozenSample {
    Tensor rows;  // [B, T', V]
    std::vector<TokenSequence> hard;
    std::vector<int> lengths;
};

FrozenSample frozen_generate(const Generator& gen, const TokenBatchT<float>& batch,
                             int max_rows) {
    Tape tape;
    auto P = gen.store().leaves(tape, false);
    auto g = gen.generate(tape, P, batch, max_rows);
    return FrozenSample{g.rows.val(), std::move(g.hard), std::move(g.lengths)};
}

// SOS one-hot, the soft rows, then PAD one-hots out to `width` — the plain
// tensor twin of soft_critic_input for detached (critic-side) scoring.
Tensor wrap_rows_tensor(const Tensor& rows, int width, const Vocab& vocab) {
    RGAN_REQUIRE(rows.rank() == 3 && rows.dim(2) == vocab.size,
                 "wrap_rows: rows must be [B,T,V]");
    const int B = rows.dim(0), T = rows.dim(1), V = vocab.size;
    RGAN_REQUIRE(T + 1 <= width, "wrap_rows: rows exceed critic width");
    Tensor out({B, width, V});
    for (int b = 0; b < B; ++b) {
        out.at(b, 0, Vocab::kSos) = 1.0f;
        for (int t = 0; t < T; ++t)
            for (int v = 0; v < V; ++v) out.at(b, t + 1, v) = rows.at(b, t, v);
        for (int t = T + 1; t < width; ++t) out.at(b, t, Vocab::kPad) = 1.0f;
    }
    return out;
}

double tensor_mean(const Tensor& scores) {
    double sum = 0.0;
    for (int64_t i = 0; i < scores.size(); ++i) sum += scores[i];
    return sum / static_cast<double>(scores.size());
}

// One clipped-WGAN critic update on detached real/fake inputs. Returns the
// critic loss value.
template <typename CriticT_>
double critic_update(CriticT_& critic, RmsProp& opt, double clip, const Tensor& real_in,
                     const Tensor& fake_in) {
    Tape tape;
    auto P = critic.store().leaves(tape);
    auto real_s = critic.score(tape, P, tape.constant(real_in));
    auto fake_s = critic.score(tape, P, tape.constant(fake_in));
    auto pair = wgan_losses(real_s, fake_s);
    const double loss = pair.critic.val()[0];
    tape.backward(pair.critic);
    critic.store().zero_grads();
    critic.store().accumulate_from(tape, P);
    opt.step(critic.store());
    clip_weights(critic.store(), static_cast<float>(clip));
    return loss;
}

// Scores a set of (clean, corrupted) pairs with the current critic and the
// frozen generator: per-pair real/fake scores plus exact-repair flags.
struct ProbeScores {
    std::vector<double> real, fake;
    std::vector<bool> correct;
};

ProbeScores score_pairs(const Generator& gen, const Critic& critic,
                        const std::vector<TokenSequence>& good,
                        const std::vector<TokenSequence>& bad, int clip_len,
                        int batch_size, const Vocab& vocab) {
    RGAN_REQUIRE(good.size() == bad.size(), "score_pairs: unaligned sets");
    const int width = clip_len + 2;
    ProbeScores out;
    for (size_t begin = 0; begin < good.size(); begin += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(good.size(), begin + static_cast<size_t>(batch_size));
        std::vector<TokenSequence> gs(good.begin() + static_cast<int64_t>(begin),
                                      good.begin() + static_cast<int64_t>(end));
        std::vector<TokenSequence> bs(bad.begin() + static_cast<int64_t>(begin),
                                      bad.begin() + static_cast<int64_t>(end));
        const auto real_batch = make_batch<float>(clip_all(gs, clip_len), clip_len, vocab);
        const auto bad_batch = make_batch<float>(clip_all(bs, clip_len), clip_len, vocab);
        const FrozenSample sample = frozen_generate(gen, bad_batch, clip_len + 1);

        Tape tape;
        auto P = critic.store().leaves(tape, false);
        auto real_s =
            critic.score(tape, P, tape.constant(one_hot_input(real_batch, vocab)));
        auto fake_s = critic.score(
            tape, P, tape.constant(wrap_rows_tensor(sample.rows, width, vocab)));
        for (size_t i = 0; i < gs.size(); ++i) {
            out.real.push_back(real_s.val().at(static_cast<int>(i), 0));
            out.fake.push_back(fake_s.val().at(static_cast<int>(i), 0));
            out.correct.push_back(strip_specials(sample.hard[i]) ==
                                  clipped(gs[i], clip_len));
        }
    }
    return out;
}

double probe_accuracy(const ProbeScores& s) {
    if (s.real.empty()) return 0.0;
    int hits = 0;
    for (size_t i = 0; i < s.real.size(); ++i)
        if (s.real[i] > s.fake[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(s.real.size());
}

void add_optimizer_arrays(Checkpoint& ck, const std::string& prefix,
                          const ParameterStore& store,
                          const std::vector<Tensor>& moments) {
    if (moments.empty()) return;  // optimizer never stepped; nothing to carry
    RGAN_REQUIRE(static_cast<int>(moments.size()) == store.size(),
                 "checkpoint: optimizer state size mismatch");
    for (int i = 0; i < store.size(); ++i)
        ck.add(prefix + store.param(i).name, moments[static_cast<size_t>(i)]);
}

std::string csv_num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

CurriculumState curriculum_advance(CurriculumState state, double critic_accuracy,
                                   int epochs_at_level, int step, int task_max) {
    RGAN_REQUIRE(step >= 1, "curriculum_advance: step must be >= 1");
    state.accuracy = critic_accuracy;
    state.epochs_at_level = epochs_at_level;
    if (state.length >= task_max) return state;  // already at the ceiling
    if (critic_accuracy < kCurriculumAccTrigger ||
        epochs_at_level >= kCurriculumEpochTrigger) {
        state.length = std::min(state.length + step, task_max);
        state.epochs_at_level = 0;
    }
    return state;
}

DatasetPaths dataset_paths(const std::string& dir) {
    auto join = [&dir](const char* name) { return (fs::path(dir) / name).string(); };
    return DatasetPaths{join("good.txt"),      join("bad.txt"),
                        join("pair_good.txt"), join("pair_bad.txt"),
                        join("eval_good.txt"), join("eval_bad.txt")};
}

DatasetPaths generate_datasets(const TrainConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const Vocab vocab = cfg.vocab();
    Rng rng(cfg.seed);

    const Grammar grammar = benchmark_grammar();
    GrammarCounts counts;
    const Grammar* gp = nullptr;
    const GrammarCounts* cp = nullptr;
    if (cfg.task == "cfg") {
        counts = count_cfg_sentences(grammar);
        gp = &grammar;
        cp = &counts;
    }

    const DatasetPaths paths = dataset_paths(cfg.out_dir);
    auto write = [&](const std::string& path, const std::vector<TokenSequence>& seqs,
                     const std::string& injector) {
        write_dataset(path, seqs);
        write_dataset_meta(path, DatasetMeta{cfg.task, vocab.size, cfg.seed, injector});
    };

    const auto good = draw_clean(cfg, cfg.train_size, rng.split(kStreamGoodData), gp, cp);
    write(paths.good, good, "");

    const auto bad_src =
        draw_clean(cfg, cfg.train_size, rng.split(kStreamBadSource), gp, cp);
    write(paths.bad, corrupt_all(cfg, bad_src, rng.split(kStreamBadInject), vocab),
          cfg.task + "-errors");

    const auto pair_good =
        draw_clean(cfg, cfg.train_size, rng.split(kStreamPairData), gp, cp);
    write(paths.pair_good, pair_good, "");
    write(paths.pair_bad,
          corrupt_all(cfg, pair_good, rng.split(kStreamPairInject), vocab),
          cfg.task + "-errors");

    const auto eval_good =
        draw_clean(cfg, cfg.eval_size, rng.split(kStreamEvalData), gp, cp);
    write(paths.eval_good, eval_good, "");
    write(paths.eval_bad,
          corrupt_all(cfg, eval_good, rng.split(kStreamEvalInject), vocab),
          cfg.task + "-errors");
    return paths;
}

Checkpoint pretrain(const TrainConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const Vocab vocab = cfg.vocab();
    const auto good = read_dataset(cfg.good_path);
    RGAN_REQUIRE(static_cast<int>(good.size()) >= cfg.batch_size,
                 "pretrain: dataset smaller than one batch");

    Generator gen = build_generator(cfg);
    Adam opt(cfg.lr_pretrain);
    const int L = cfg.task_max_len();
    Rng run_rng(cfg.seed);

    std::ostringstream csv;
    csv << "epoch,loss\n";
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(
            good.size(), run_rng.split(kStreamEpochShuffle + static_cast<uint64_t>(epoch)));
        Rng noise_rng = run_rng.split(kStreamEpochNoise + static_cast<uint64_t>(epoch));
        double sum = 0.0;
        int batches = 0;
        for (size_t begin = 0; begin + static_cast<size_t>(cfg.batch_size) <= order.size();
             begin += static_cast<size_t>(cfg.batch_size)) {
            std::vector<TokenSequence> ys, xs;
            for (int i = 0; i < cfg.batch_size; ++i) {
                const TokenSequence& y = good[order[begin + static_cast<size_t>(i)]];
                ys.push_back(y);
                Rng r = noise_rng.split(begin + static_cast<size_t>(i));
                xs.push_back(noise_sequence(y, r, vocab, cfg.noise_drop, cfg.noise_rate));
            }
            const auto yb = make_batch<float>(ys, L, vocab);
            const auto xb = make_batch<float>(clip_all(xs, L), L, vocab);

            Tape tape;
            auto P = gen.store().leaves(tape);
            auto rows = gen.teacher_forced_rows(tape, P, xb, yb);
            auto loss = sequence_nll(gen, rows, yb);
            require_finite(loss.val()[0], "pretrain loss", epoch, batches);
            tape.backward(loss);
            gen.store().zero_grads();
            gen.store().accumulate_from(tape, P);
            opt.step(gen.store());
            sum += loss.val()[0];
            ++batches;
        }
        csv << epoch << ',' << csv_num(batches ? sum / batches : 0.0) << '\n';
    }

    Checkpoint ck;
    ck.config = cfg;
    ck.epoch = cfg.epochs;
    store_to_checkpoint(gen.store(), ck);
    add_optimizer_arrays(ck, "adam.m.", gen.store(), opt.first_moments());
    add_optimizer_arrays(ck, "adam.v.", gen.store(), opt.second_moments());
    ck.optimizer["adam_steps"] = static_cast<double>(opt.steps());
    ck.optimizer["lr_pretrain"] = opt.lr();

    write_text((fs::path(cfg.out_dir) / "pretrain_metrics.csv").string(), csv.str());
    save_checkpoint((fs::path(cfg.out_dir) / "pretrain.ckpt").string(), ck);
    return ck;
}

Checkpoint train_gan(const TrainConfig& cfg) {
    cfg.validate();
    RGAN_REQUIRE_CONFIG(cfg.is_gan(), "train_gan: model must be a gan variant");
    fs::create_directories(cfg.out_dir);
    const Vocab vocab = cfg.vocab();
    const RegMode mode = parse_reg_mode(
        cfg.model == "gan-base" ? "base" : (cfg.model == "gan-auto" ? "auto" : "freq"));

    const auto good = read_dataset(cfg.good_path);
    const auto bad = read_dataset(cfg.bad_path);
    RGAN_REQUIRE(static_cast<int>(good.size()) >= cfg.batch_size &&
                     static_cast<int>(bad.size()) >= cfg.batch_size,
                 "train_gan: datasets smaller than one batch");

    Generator gen = build_generator(cfg);
    maybe_load_pretrained(cfg, gen);
    const int task_max = cfg.task_max_len();
    CurriculumState cur;
    cur.length = cfg.curriculum.enabled ? std::min(cfg.curriculum.start, task_max)
                                        : task_max;

    Rng critic_rng = Rng(cfg.seed).split(kStreamCriticInit);
    Critic critic(vocab, cur.length + 2, cfg.critic_depth, cfg.filters, cfg.fc_hidden,
                  critic_rng);
    RmsProp opt_c(cfg.lr_critic);
    RmsProp opt_g(cfg.lr_generator);

    Rng run_rng(cfg.seed);
    std::ostringstream csv;
    csv << "epoch,wgan_d,wgan_g,reg,critic_accuracy,curriculum_length,critic_steps,"
           "generator_steps,generator_lr\n";

    int retrain_left = 0;
    int decay_epochs = 0;
    int64_t total_critic_steps = 0, total_gen_steps = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Sampler good_s(good, run_rng.split(kStreamEpochGood + static_cast<uint64_t>(epoch)));
        Sampler bad_s(bad, run_rng.split(kStreamEpochShuffle + static_cast<uint64_t>(epoch)));
        const int L = cur.length;
        const int width = L + 2;

        const int nb = static_cast<int>(bad.size()) / cfg.batch_size;
        const bool critic_only = epoch < cfg.warmup_epochs || retrain_left > 0;
        const int groups = critic_only ? 0 : std::max(1, nb / (cfg.critic_ratio + 1));
        const int critic_steps = critic_only ? nb : groups * cfg.critic_ratio;
        const int gen_steps = groups;

        double d_sum = 0.0, g_sum = 0.0, r_sum = 0.0;
        int batch_index = 0;
        auto one_critic_step = [&]() {
            const auto real_batch =
                make_batch<float>(clip_all(good_s.take(cfg.batch_size), L), L, vocab);
            const auto bad_batch =
                make_batch<float>(clip_all(bad_s.take(cfg.batch_size), L), L, vocab);
            const FrozenSample fake = frozen_generate(gen, bad_batch, L + 1);
            const double loss =
                critic_update(critic, opt_c, cfg.clip, one_hot_input(real_batch, vocab),
                              wrap_rows_tensor(fake.rows, width, vocab));
            require_finite(loss, "critic loss", epoch, batch_index);
            d_sum += loss;
            ++batch_index;
            ++total_critic_steps;
        };
        auto one_generator_step = [&]() {
            const auto raw = bad_s.take(cfg.batch_size);
            const auto inputs = clip_all(raw, L);
            const auto xb = make_batch<float>(inputs, L, vocab);

            Tape tape;
            auto Pg = gen.store().leaves(tape);
            auto Pc = critic.store().leaves(tape, false);
            auto g = gen.generate(tape, Pg, xb, L + 1);
            auto fake_in = soft_critic_input(tape, g.rows, width, vocab);
            auto fake_s = critic.score(tape, Pc, fake_in);
            auto wgan_g = neg(mean_all(fake_s));

            Var reg = tape.constant(Tensor::scalar(0.0f));
            if (mode == RegMode::auto_reg) {
                const auto yb =
                    make_batch<float>(clip_all(good_s.take(cfg.batch_size), L), L, vocab);
                auto rows = gen.teacher_forced_rows(tape, Pg, yb, yb);
                reg = sequence_nll(gen, rows, yb);
            } else if (mode == RegMode::freq_reg) {
                // Histogram over content rows only: the EOS row carries no
                // task mass and must not dilute the output frequencies.
                std::vector<int> content(g.lengths.size());
                for (size_t b = 0; b < g.lengths.size(); ++b) {
                    int len = g.lengths[b];
                    const TokenSequence& h = g.hard[b];
                    if (len >= 1 && len <= static_cast<int>(h.size()) &&
                        h[static_cast<size_t>(len) - 1] == Vocab::kEos)
                        --len;
                    content[b] = len;
                }
                reg = freq_loss_batch(g.rows, inputs, content, vocab);
            }
            auto combined = combined_generator_loss(wgan_g, reg, mode, cfg.lambda);
            require_finite(combined.val()[0], "generator loss", epoch, batch_index);
            tape.backward(combined);
            gen.store().zero_grads();
            gen.store().accumulate_from(tape, Pg);
            opt_g.step(gen.store());
            g_sum += wgan_g.val()[0];
            r_sum += reg.val()[0];
            ++batch_index;
            ++total_gen_steps;
        };

        if (critic_only) {
            for (int s = 0; s < critic_steps; ++s) one_critic_step();
        } else {
            for (int g = 0; g < groups; ++g) {
                for (int s = 0; s < cfg.critic_ratio; ++s) one_critic_step();
                one_generator_step();
            }
        }

        // Critic ranking accuracy on a fresh probe of unpaired good/bad draws.
        Rng probe_rng = run_rng.split(kStreamEpochProbe + static_cast<uint64_t>(epoch));
        std::vector<TokenSequence> probe_good, probe_bad;
        for (int i = 0; i < cfg.probe_pairs; ++i) {
            probe_good.push_back(good[probe_rng.uniform_index(good.size())]);
            probe_bad.push_back(bad[probe_rng.uniform_index(bad.size())]);
        }
        const double acc = probe_accuracy(
            score_pairs(gen, critic, probe_good, probe_bad, L, cfg.batch_size, vocab));

        csv << epoch << ',' << csv_num(critic_steps ? d_sum / critic_steps : 0.0) << ','
            << csv_num(gen_steps ? g_sum / gen_steps : 0.0) << ','
            << csv_num(gen_steps ? r_sum / gen_steps : 0.0) << ',' << csv_num(acc) << ','
            << L << ',' << critic_steps << ',' << gen_steps << ','
            << csv_num(opt_g.lr()) << '\n';

        if (retrain_left > 0) --retrain_left;

        const bool past_warmup = epoch >= cfg.warmup_epochs;
        if (cfg.curriculum.enabled && past_warmup && retrain_left == 0) {
            const CurriculumState next = curriculum_advance(
                cur, acc, cur.epochs_at_level + 1, cfg.curriculum.step, task_max);
            if (next.length != cur.length) {
                critic.set_width(next.length + 2);
                retrain_left = cfg.retrain_epochs;
            }
            cur = next;
        } else {
            cur.accuracy = acc;
        }

        // Generator decay: counts epochs once the curriculum has finished
        // growing (or immediately when curriculum is off).
        if (!cfg.curriculum.enabled || cur.length >= task_max) {
            ++decay_epochs;
            if (decay_epochs % cfg.decay_every == 0)
                opt_g.set_lr(opt_g.lr() * cfg.decay_factor);
        }
    }

    Checkpoint ck;
    ck.config = cfg;
    ck.epoch = cfg.epochs;
    ck.curriculum_length = cur.length;
    ck.curriculum_epochs = cur.epochs_at_level;
    ck.curriculum_accuracy = cur.accuracy;
    store_to_checkpoint(gen.store(), ck);
    store_to_checkpoint(critic.store(), ck);
    add_optimizer_arrays(ck, "rmsprop.v.g.", gen.store(), opt_g.state());
    add_optimizer_arrays(ck, "rmsprop.v.c.", critic.store(), opt_c.state());
    ck.optimizer["lr_generator"] = opt_g.lr();
    ck.optimizer["lr_critic"] = opt_c.lr();
    ck.optimizer["generator_steps"] = static_cast<double>(total_gen_steps);
    ck.optimizer["critic_steps"] = static_cast<double>(total_critic_steps);

    write_text((fs::path(cfg.out_dir) / "train_metrics.csv").string(), csv.str());
    save_checkpoint((fs::path(cfg.out_dir) / "model.ckpt").string(), ck);
    return ck;
}

Checkpoint train_seq2seq(const TrainConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const Vocab vocab = cfg.vocab();
    const auto pair_good = read_dataset(cfg.pair_good_path);
    const auto pair_bad = read_dataset(cfg.pair_bad_path);
    if (pair_good.size() != pair_bad.size())
        throw DataError("train_seq2seq: pair files differ in length: " +
                        std::to_string(pair_good.size()) + " vs " +
                        std::to_string(pair_bad.size()));
    RGAN_REQUIRE(static_cast<int>(pair_good.size()) >= cfg.batch_size,
                 "train_seq2seq: dataset smaller than one batch");

    Generator gen = build_generator(cfg);
    maybe_load_pretrained(cfg, gen);
    Adam opt(cfg.lr_pretrain);
    const int task_max = cfg.task_max_len();
    CurriculumState cur;
    cur.length = cfg.curriculum.enabled ? std::min(cfg.curriculum.start, task_max)
                                        : task_max;
    Rng run_rng(cfg.seed);

    std::ostringstream csv;
    csv << "epoch,loss,curriculum_length\n";
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(
            pair_good.size(),
            run_rng.split(kStreamEpochShuffle + static_cast<uint64_t>(epoch)));
        const int L = cur.length;
        double sum = 0.0;
        int batches = 0;
        for (size_t begin = 0; begin + static_cast<size_t>(cfg.batch_size) <= order.size();
             begin += static_cast<size_t>(cfg.batch_size)) {
            std::vector<TokenSequence> xs, ys;
            for (int i = 0; i < cfg.batch_size; ++i) {
                const size_t j = order[begin + static_cast<size_t>(i)];
                xs.push_back(clipped(pair_bad[j], L));
                ys.push_back(clipped(pair_good[j], L));
            }
            const auto xb = make_batch<float>(xs, L, vocab);
            const auto yb = make_batch<float>(ys, L, vocab);
            Tape tape;
            auto P = gen.store().leaves(tape);
            auto rows = gen.teacher_forced_rows(tape, P, xb, yb);
            auto loss = sequence_nll(gen, rows, yb);
            require_finite(loss.val()[0], "seq2seq loss", epoch, batches);
            tape.backward(loss);
            gen.store().zero_grads();
            gen.store().accumulate_from(tape, P);
            opt.step(gen.store());
            sum += loss.val()[0];
            ++batches;
        }
        csv << epoch << ',' << csv_num(batches ? sum / batches : 0.0) << ',' << L << '\n';

        // Supervised curriculum has no critic signal: only the epoch trigger.
        if (cfg.curriculum.enabled) {
            cur = curriculum_advance(cur, 1.0, cur.epochs_at_level + 1,
                                     cfg.curriculum.step, task_max);
        }
    }

    Checkpoint ck;
    ck.config = cfg;
    ck.epoch = cfg.epochs;
    ck.curriculum_length = cur.length;
    ck.curriculum_epochs = cur.epochs_at_level;
    ck.curriculum_accuracy = cur.accuracy;
    store_to_checkpoint(gen.store(), ck);
    add_optimizer_arrays(ck, "adam.m.", gen.store(), opt.first_moments());
    add_optimizer_arrays(ck, "adam.v.", gen.store(), opt.second_moments());
    ck.optimizer["adam_steps"] = static_cast<double>(opt.steps());
    ck.optimizer["lr_pretrain"] = opt.lr();

    write_text((fs::path(cfg.out_dir) / "train_metrics.csv").string(), csv.str());
    save_checkpoint((fs::path(cfg.out_dir) / "model.ckpt").string(), ck);
    return ck;
}

EvalReport evaluate(const TrainConfig& cfg, const std::string& checkpoint_path) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    RGAN_REQUIRE_CONFIG(ck.config.task == cfg.task,
                        "evaluate: checkpoint task mismatch: " + ck.config.task);
    const Vocab vocab = cfg.vocab();
    RGAN_REQUIRE_CONFIG(ck.config.vocab().size == vocab.size,
                        "evaluate: checkpoint vocab mismatch");

    Rng rng = Rng(cfg.seed).split(kStreamGenInit);
    Generator gen(vocab, ck.config.layers, ck.config.hidden, rng);
    checkpoint_to_store(ck, gen.store());

    const auto inputs = read_dataset(cfg.eval_bad_path);
    RGAN_REQUIRE(!inputs.empty(), "evaluate: empty eval set");
    const int task_max = cfg.task_max_len();

    std::vector<TokenSequence> outputs;
    outputs.reserve(inputs.size());
    for (size_t begin = 0; begin < inputs.size();
         begin += static_cast<size_t>(cfg.batch_size)) {
        const size_t end =
            std::min(inputs.size(), begin + static_cast<size_t>(cfg.batch_size));
        std::vector<TokenSequence> xs(inputs.begin() + static_cast<int64_t>(begin),
                                      inputs.begin() + static_cast<int64_t>(end));
        int longest = 1;
        for (const auto& x : xs) longest = std::max(longest, static_cast<int>(x.size()));
        const auto xb = make_batch<float>(clip_all(xs, task_max), task_max, vocab);
        const FrozenSample sample =
            frozen_generate(gen, xb, eval_max_rows(longest, task_max));
        for (const auto& hard : sample.hard) outputs.push_back(strip_specials(hard));
    }

    EvalReport report;
    report.task = cfg.task;
    report.count = static_cast<int>(inputs.size());
    if (cfg.task == "sort") {
        std::vector<TokenSequence> targets;
        targets.reserve(inputs.size());
        for (const auto& x : inputs) {
            TokenSequence t = clipped(x, task_max);
            std::sort(t.begin(), t.end());
            targets.push_back(std::move(t));
        }
        report.add("seq_acc", sequence_accuracy(outputs, targets));
        report.add("order_acc", order_accuracy(outputs));
    } else {
        const auto refs = read_dataset(cfg.eval_good_path);
        if (refs.size() != inputs.size())
            throw DataError("evaluate: eval files differ in length");
        const Grammar grammar = benchmark_grammar();
        report.add("cfg_validity", cfg_validity_rate(outputs, grammar));
        report.add("bleu4", bleu4(outputs, refs));
    }

    write_text((fs::path(cfg.out_dir) / "eval_report.csv").string(), report.to_csv());
    return report;
}

void diagnose(const TrainConfig& cfg, const std::string& generator_checkpoint) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const Checkpoint ck = load_checkpoint(generator_checkpoint);
    RGAN_REQUIRE_CONFIG(ck.config.task == cfg.task,
                        "diagnose: checkpoint task mismatch: " + ck.config.task);
    const Vocab vocab = cfg.vocab();
    RGAN_REQUIRE_CONFIG(ck.config.vocab().size == vocab.size,
                        "diagnose: checkpoint vocab mismatch");

    Rng rng = Rng(cfg.seed).split(kStreamGenInit);
    Generator gen(vocab, ck.config.layers, ck.config.hidden, rng);
    checkpoint_to_store(ck, gen.store());

    const auto good = read_dataset(cfg.eval_good_path);
    const auto bad = read_dataset(cfg.eval_bad_path);
    if (good.size() != bad.size())
        throw DataError("diagnose: eval files differ in length");
    RGAN_REQUIRE(static_cast<int>(good.size()) >= cfg.batch_size,
                 "diagnose: probe set smaller than one batch");

    const int L = cfg.task_max_len();
    const int width = L + 2;

    // The generator is frozen: repair every probe input once, cache the soft
    // rows (wrapped to critic width) and the correctness flags.
    std::vector<Tensor> fake_rows(good.size());   // each [width, V]
    std::vector<Tensor> real_rows(good.size());   // each [width, V]
    std::vector<bool> correct(good.size());
    for (size_t begin = 0; begin < good.size();
         begin += static_cast<size_t>(cfg.batch_size)) {
        const size_t end =
            std::min(good.size(), begin + static_cast<size_t>(cfg.batch_size));
        std::vector<TokenSequence> gs(good.begin() + static_cast<int64_t>(begin),
                                      good.begin() + static_cast<int64_t>(end));
        std::vector<TokenSequence> bs(bad.begin() + static_cast<int64_t>(begin),
                                      bad.begin() + static_cast<int64_t>(end));
        const auto good_batch = make_batch<float>(clip_all(gs, L), L, vocab);
        const auto bad_batch = make_batch<float>(clip_all(bs, L), L, vocab);
        const FrozenSample sample = frozen_generate(gen, bad_batch, L + 1);
        const Tensor wrapped = wrap_rows_tensor(sample.rows, width, vocab);
        const Tensor real = one_hot_input(good_batch, vocab);
        for (size_t i = begin; i < end; ++i) {
            const int b = static_cast<int>(i - begin);
            Tensor fr({width, vocab.size}), rr({width, vocab.size});
            for (int t = 0; t < width; ++t)
                for (int v = 0; v < vocab.size; ++v) {
                    fr.at(t, v) = wrapped.at(b, t, v);
                    rr.at(t, v) = real.at(b, t, v);
                }
            fake_rows[i] = std::move(fr);
            real_rows[i] = std::move(rr);
            correct[i] = strip_specials(sample.hard[static_cast<size_t>(b)]) ==
                         clipped(gs[static_cast<size_t>(b)], L);
        }
    }

    auto batch_of = [&](const std::vector<Tensor>& rows, const std::vector<size_t>& idx,
                        size_t begin, size_t end) {
        Tensor out({static_cast<int>(end - begin), width, vocab.size});
        for (size_t i = begin; i < end; ++i) {
            const Tensor& src = rows[idx[i]];
            const int b = static_cast<int>(i - begin);
            for (int t = 0; t < width; ++t)
                for (int v = 0; v < vocab.size; ++v) out.at(b, t, v) = src.at(t, v);
        }
        return out;
    };

    Rng critic_rng = Rng(cfg.seed).split(kStreamCriticInit);
    Critic critic(vocab, width, cfg.critic_depth, cfg.filters, cfg.fc_hidden, critic_rng);
    RmsProp opt_c(cfg.lr_critic);
    Rng run_rng(cfg.seed);

    std::ostringstream ratio_csv;
    ratio_csv << "epoch,depth,n_correct,n_incorrect,value_correct,value_incorrect,"
                 "has_ratio,ratio\n";
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(
            good.size(), run_rng.split(kStreamEpochShuffle + static_cast<uint64_t>(epoch)));
        int batch_index = 0;
        for (size_t begin = 0; begin + static_cast<size_t>(cfg.batch_size) <= order.size();
             begin += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = begin + static_cast<size_t>(cfg.batch_size);
            const double loss =
                critic_update(critic, opt_c, cfg.clip,
                              batch_of(real_rows, order, begin, end),
                              batch_of(fake_rows, order, begin, end));
            require_finite(loss, "critic loss", epoch, batch_index);
            ++batch_index;
        }

        // Score every probe pair with this epoch's critic.
        std::vector<double> real_scores, fake_scores;
        std::vector<size_t> ident(good.size());
        for (size_t i = 0; i < ident.size(); ++i) ident[i] = i;
        for (size_t begin = 0; begin < good.size();
             begin += static_cast<size_t>(cfg.batch_size)) {
            const size_t end =
                std::min(good.size(), begin + static_cast<size_t>(cfg.batch_size));
            Tape tape;
            auto P = critic.store().leaves(tape, false);
            auto rs = critic.score(tape, P,
                                   tape.constant(batch_of(real_rows, ident, begin, end)));
            auto fs_ = critic.score(tape, P,
                                    tape.constant(batch_of(fake_rows, ident, begin, end)));
            for (int b = 0; b < rs.val().dim(0); ++b) {
                real_scores.push_back(rs.val().at(b, 0));
                fake_scores.push_back(fs_.val().at(b, 0));
            }
        }
        const LossRatioReport rep =
            loss_ratio_from_scores(real_scores, fake_scores, correct);
        ratio_csv << epoch << ',' << cfg.critic_depth << ',' << rep.n_correct << ','
                  << rep.n_incorrect << ',' << csv_num(rep.value_correct) << ','
                  << csv_num(rep.value_incorrect) << ',' << (rep.has_ratio ? 1 : 0)
                  << ',';
        if (rep.has_ratio) ratio_csv << csv_num(rep.ratio);
        ratio_csv << '\n';
    }

    std::ostringstream filter_csv;
    filter_csv << "depth,filter,position,weight,sparsity\n";
    for (const FilterProfile& fp :
         filter_profiles(critic.kernel11_weights(), 11, vocab.size))
        for (size_t p = 0; p < fp.profile.size(); ++p)
            filter_csv << cfg.critic_depth << ',' << fp.filter << ',' << p << ','
                       << csv_num(fp.profile[p]) << ',' << csv_num(fp.sparsity) << '\n';

    write_text((fs::path(cfg.out_dir) / "diagnose_ratio.csv").string(), ratio_csv.str());
    write_text((fs::path(cfg.out_dir) / "diagnose_filters.csv").string(),
               filter_csv.str());
}

}  // namespace rgan
