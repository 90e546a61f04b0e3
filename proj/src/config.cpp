#include "rgan/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rgan/common.hpp"

namespace rgan {

namespace {

using nlohmann::json;

double as_number(const json& j, const std::string& key) {
    RGAN_REQUIRE_CONFIG(j.is_number(), "config: " + key + " must be a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& key) {
    RGAN_REQUIRE_CONFIG(j.is_number_integer(), "config: " + key + " must be an integer");
    return j.get<int>();
}

uint64_t as_u64(const json& j, const std::string& key) {
    RGAN_REQUIRE_CONFIG(j.is_number_unsigned() || (j.is_number_integer() && j.get<int64_t>() >= 0),
                        "config: " + key + " must be a nonnegative integer");
    return j.get<uint64_t>();
}

std::string as_string(const json& j, const std::string& key) {
    RGAN_REQUIRE_CONFIG(j.is_string(), "config: " + key + " must be a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& key) {
    RGAN_REQUIRE_CONFIG(j.is_boolean(), "config: " + key + " must be a boolean");
    return j.get<bool>();
}

void apply_curriculum(const json& j, CurriculumConfig& c) {
    RGAN_REQUIRE_CONFIG(j.is_object(), "config: curriculum must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "enabled")
            c.enabled = as_bool(value, "curriculum.enabled");
        else if (key == "start")
            c.start = as_int(value, "curriculum.start");
        else if (key == "step")
            c.step = as_int(value, "curriculum.step");
        else
            throw ConfigError("config: unknown key curriculum." + key);
    }
}

}  // namespace

int TrainConfig::task_max_len() const {
    if (task == "sort") return sort_len;
    if (task == "cfg") return 13;  // longest sentence the benchmark grammar derives
    throw ConfigError("config: unknown task " + task);
}

Vocab TrainConfig::vocab() const {
    if (task == "sort") return sort_vocab(sort_domain);
    if (task == "cfg") return cfg_vocab();
    throw ConfigError("config: unknown task " + task);
}

void TrainConfig::validate() const {
    RGAN_REQUIRE_CONFIG(task == "sort" || task == "cfg", "config: task must be sort or cfg");
    RGAN_REQUIRE_CONFIG(model == "gan-base" || model == "gan-auto" ||
                            model == "gan-freq" || model == "seq2seq",
                        "config: model must be gan-base, gan-auto, gan-freq, or seq2seq");
    RGAN_REQUIRE_CONFIG(lambda >= 0.0, "config: lambda must be >= 0");
    RGAN_REQUIRE_CONFIG(clip > 0.0, "config: clip must be > 0");
    RGAN_REQUIRE_CONFIG(lr_critic > 0.0, "config: lr_critic must be > 0");
    RGAN_REQUIRE_CONFIG(lr_generator > 0.0, "config: lr_generator must be > 0");
    RGAN_REQUIRE_CONFIG(lr_pretrain > 0.0, "config: lr_pretrain must be > 0");
    RGAN_REQUIRE_CONFIG(critic_ratio >= 1, "config: critic_ratio must be >= 1");
    RGAN_REQUIRE_CONFIG(warmup_epochs >= 0, "config: warmup_epochs must be >= 0");
    RGAN_REQUIRE_CONFIG(retrain_epochs >= 0, "config: retrain_epochs must be >= 0");
    RGAN_REQUIRE_CONFIG(epochs >= 0, "config: epochs must be >= 0");
    RGAN_REQUIRE_CONFIG(batch_size >= 1, "config: batch_size must be >= 1");
    RGAN_REQUIRE_CONFIG(curriculum.start >= 1, "config: curriculum.start must be >= 1");
    RGAN_REQUIRE_CONFIG(curriculum.step >= 1, "config: curriculum.step must be >= 1");
    RGAN_REQUIRE_CONFIG(decay_factor > 0.0 && decay_factor <= 1.0,
                        "config: decay_factor must be in (0,1]");
    RGAN_REQUIRE_CONFIG(decay_every >= 1, "config: decay_every must be >= 1");
    RGAN_REQUIRE_CONFIG(layers >= 1, "config: layers must be >= 1");
    RGAN_REQUIRE_CONFIG(hidden >= 1, "config: hidden must be >= 1");
    RGAN_REQUIRE_CONFIG(filters >= 1, "config: filters must be >= 1");
    RGAN_REQUIRE_CONFIG(fc_hidden >= 1, "config: fc_hidden must be >= 1");
    RGAN_REQUIRE_CONFIG(critic_depth == 1 || critic_depth == 3,
                        "config: critic_depth must be 1 or 3");
    RGAN_REQUIRE_CONFIG(sort_len >= 1, "config: sort_len must be >= 1");
    RGAN_REQUIRE_CONFIG(sort_domain >= 1, "config: sort_domain must be >= 1");
    RGAN_REQUIRE_CONFIG(sort_len <= sort_domain + 1,
                        "config: sort_len exceeds the number of distinct values");
    RGAN_REQUIRE_CONFIG(train_size >= 1, "config: train_size must be >= 1");
    RGAN_REQUIRE_CONFIG(eval_size >= 1, "config: eval_size must be >= 1");
    RGAN_REQUIRE_CONFIG(noise_drop >= 0.0 && noise_drop < 1.0,
                        "config: noise_drop must be in [0,1)");
    RGAN_REQUIRE_CONFIG(noise_rate >= 0.0, "config: noise_rate must be >= 0");
    RGAN_REQUIRE_CONFIG(sort_err_sd >= 0.0 && cfg_err_sd >= 0.0,
                        "config: error-injection spreads must be >= 0");
    RGAN_REQUIRE_CONFIG(probe_pairs >= 1, "config: probe_pairs must be >= 1");
}

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    RGAN_REQUIRE_CONFIG(j.is_object(), "config: top level must be an object");

    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "task")
            c.task = as_string(value, key);
        else if (key == "model")
            c.model = as_string(value, key);
        else if (key == "lambda")
            c.lambda = as_number(value, key);
        else if (key == "clip")
            c.clip = as_number(value, key);
        else if (key == "lr_critic")
            c.lr_critic = as_number(value, key);
        else if (key == "lr_generator")
            c.lr_generator = as_number(value, key);
        else if (key == "lr_pretrain")
            c.lr_pretrain = as_number(value, key);
        else if (key == "critic_ratio")
            c.critic_ratio = as_int(value, key);
        else if (key == "warmup_epochs")
            c.warmup_epochs = as_int(value, key);
        else if (key == "retrain_epochs")
            c.retrain_epochs = as_int(value, key);
        else if (key == "epochs")
            c.epochs = as_int(value, key);
        else if (key == "batch_size")
            c.batch_size = as_int(value, key);
        else if (key == "curriculum")
            apply_curriculum(value, c.curriculum);
        else if (key == "decay_factor")
            c.decay_factor = as_number(value, key);
        else if (key == "decay_every")
            c.decay_every = as_int(value, key);
        else if (key == "seed")
            c.seed = as_u64(value, key);
        else if (key == "layers")
            c.layers = as_int(value, key);
        else if (key == "hidden")
            c.hidden = as_int(value, key);
        else if (key == "filters")
            c.filters = as_int(value, key);
        else if (key == "fc_hidden")
            c.fc_hidden = as_int(value, key);
        else if (key == "critic_depth")
            c.critic_depth = as_int(value, key);
        else if (key == "sort_len")
            c.sort_len = as_int(value, key);
        else if (key == "sort_domain")
            c.sort_domain = as_int(value, key);
        else if (key == "train_size")
            c.train_size = as_int(value, key);
        else if (key == "eval_size")
            c.eval_size = as_int(value, key);
        else if (key == "noise_drop")
            c.noise_drop = as_number(value, key);
        else if (key == "noise_rate")
            c.noise_rate = as_number(value, key);
        else if (key == "sort_err_mean")
            c.sort_err_mean = as_number(value, key);
        else if (key == "sort_err_sd")
            c.sort_err_sd = as_number(value, key);
        else if (key == "cfg_err_mean")
            c.cfg_err_mean = as_number(value, key);
        else if (key == "cfg_err_sd")
            c.cfg_err_sd = as_number(value, key);
        else if (key == "probe_pairs")
            c.probe_pairs = as_int(value, key);
        else if (key == "good_path")
            c.good_path = as_string(value, key);
        else if (key == "bad_path")
            c.bad_path = as_string(value, key);
        else if (key == "pair_good_path")
            c.pair_good_path = as_string(value, key);
        else if (key == "pair_bad_path")
            c.pair_bad_path = as_string(value, key);
        else if (key == "eval_good_path")
            c.eval_good_path = as_string(value, key);
        else if (key == "eval_bad_path")
            c.eval_bad_path = as_string(value, key);
        else if (key == "pretrained_path")
            c.pretrained_path = as_string(value, key);
        else if (key == "out_dir")
            c.out_dir = as_string(value, key);
        else
            throw ConfigError("config: unknown key " + key);
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string TrainConfig::to_json_text() const {
    json j;
    j["task"] = task;
    j["model"] = model;
    j["lambda"] = lambda;
    j["clip"] = clip;
    j["lr_critic"] = lr_critic;
    j["lr_generator"] = lr_generator;
    j["lr_pretrain"] = lr_pretrain;
    j["critic_ratio"] = critic_ratio;
    j["warmup_epochs"] = warmup_epochs;
    j["retrain_epochs"] = retrain_epochs;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["curriculum"] = {{"enabled", curriculum.enabled},
                       {"start", curriculum.start},
                       {"step", curriculum.step}};
    j["decay_factor"] = decay_factor;
    j["decay_every"] = decay_every;
    j["seed"] = seed;
    j["layers"] = layers;
    j["hidden"] = hidden;
    j["filters"] = filters;
    j["fc_hidden"] = fc_hidden;
    j["critic_depth"] = critic_depth;
    j["sort_len"] = sort_len;
    j["sort_domain"] = sort_domain;
    j["train_size"] = train_size;
    j["eval_size"] = eval_size;
    j["noise_drop"] = noise_drop;
    j["noise_rate"] = noise_rate;
    j["sort_err_mean"] = sort_err_mean;
    j["sort_err_sd"] = sort_err_sd;
    j["cfg_err_mean"] = cfg_err_mean;
    j["cfg_err_sd"] = cfg_err_sd;
    j["probe_pairs"] = probe_pairs;
    j["good_path"] = good_path;
    j["bad_path"] = bad_path;
    j["pair_good_path"] = pair_good_path;
    j["pair_bad_path"] = pair_bad_path;
    j["eval_good_path"] = eval_good_path;
    j["eval_bad_path"] = eval_bad_path;
    j["pretrained_path"] = pretrained_path;
    j["out_dir"] = out_dir;
    return j.dump(2) + "\n";
}

}  // namespace rgan
