// Command-line driver: dataset generation, pretraining, adversarial or
// supervised training, evaluation, and critic diagnostics. Every subcommand
// is a pure function of (config, seed) and writes its artifacts under the
// configured output directory.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rgan/checkpoint.hpp"
#include "rgan/config.hpp"
#include "rgan/trainer.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "override the config seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--out", args.out_dir, "override the output directory");
}

rgan::TrainConfig load_config(const CommonArgs& args) {
    rgan::TrainConfig cfg = rgan::TrainConfig::load(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    cfg.validate();
    return cfg;
}

std::string default_checkpoint(const rgan::TrainConfig& cfg) {
    return (std::filesystem::path(cfg.out_dir) / "model.ckpt").string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unpaired sequence repair: WGAN training and diagnostics"};
    app.require_subcommand(1);

    CommonArgs gen_args, pre_args, train_args, eval_args, diag_args;
    std::string train_model, train_curriculum, eval_ckpt, diag_ckpt;

    CLI::App* gen = app.add_subcommand("gen-data", "write the task's dataset files");
    add_common(gen, gen_args);

    CLI::App* pre = app.add_subcommand("pretrain", "denoising-autoencoder pretraining");
    add_common(pre, pre_args);

    CLI::App* train = app.add_subcommand("train", "train the configured model");
    add_common(train, train_args);
    train->add_option("--model", train_model, "override the config model")
        ->check(CLI::IsMember({"gan-base", "gan-auto", "gan-freq", "seq2seq"}));
    train->add_option("--curriculum", train_curriculum, "force curriculum on or off")
        ->check(CLI::IsMember({"on", "off"}));

    CLI::App* eval = app.add_subcommand("eval", "evaluate a trained checkpoint");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_ckpt,
                     "model checkpoint (default: <out>/model.ckpt)");

    CLI::App* diag = app.add_subcommand("diagnose",
                                        "critic loss-ratio and filter diagnostics");
    add_common(diag, diag_args);
    diag->add_option("--checkpoint", diag_ckpt,
                     "generator checkpoint (default: <out>/model.ckpt)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const rgan::TrainConfig cfg = load_config(gen_args);
            const rgan::DatasetPaths paths = rgan::generate_datasets(cfg);
            std::cout << "wrote " << paths.good << "\nwrote " << paths.bad << "\nwrote "
                      << paths.pair_good << "\nwrote " << paths.pair_bad << "\nwrote "
                      << paths.eval_good << "\nwrote " << paths.eval_bad << "\n";
        } else if (pre->parsed()) {
            const rgan::TrainConfig cfg = load_config(pre_args);
            rgan::pretrain(cfg);
            std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "pretrain.ckpt").string()
                      << "\n";
        } else if (train->parsed()) {
            rgan::TrainConfig cfg = load_config(train_args);
            if (!train_model.empty()) cfg.model = train_model;
            if (!train_curriculum.empty()) cfg.curriculum.enabled = train_curriculum == "on";
            cfg.validate();
            if (cfg.is_gan())
                rgan::train_gan(cfg);
            else
                rgan::train_seq2seq(cfg);
            std::cout << "wrote " << default_checkpoint(cfg) << "\n";
        } else if (eval->parsed()) {
            const rgan::TrainConfig cfg = load_config(eval_args);
            const std::string ckpt = eval_ckpt.empty() ? default_checkpoint(cfg) : eval_ckpt;
            const rgan::EvalReport report = rgan::evaluate(cfg, ckpt);
            std::cout << report.to_csv();
        } else if (diag->parsed()) {
            const rgan::TrainConfig cfg = load_config(diag_args);
            const std::string ckpt = diag_ckpt.empty() ? default_checkpoint(cfg) : diag_ckpt;
            rgan::diagnose(cfg, ckpt);
            std::cout << "wrote "
                      << (std::filesystem::path(cfg.out_dir) / "diagnose_ratio.csv").string()
                      << "\nwrote "
                      << (std::filesystem::path(cfg.out_dir) / "diagnose_filters.csv").string()
                      << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
