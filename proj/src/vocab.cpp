#include "rgan/vocab.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rgan {

namespace {
std::string meta_path(const std::string& dataset_path) { return dataset_path + ".meta.json"; }
}  // namespace

void write_dataset(const std::string& path, const std::vector<TokenSequence>& seqs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& seq : seqs) {
        for (size_t i = 0; i < seq.size(); ++i) {
            if (i) out << ' ';
            out << seq[i];
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<TokenSequence> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<TokenSequence> seqs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        TokenSequence seq;
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) {
            try {
                size_t used = 0;
                const int id = std::stoi(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
                seq.push_back(id);
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": not a token id: '" + tok + "'");
            }
        }
        seqs.push_back(std::move(seq));
    }
    return seqs;
}

void write_dataset_meta(const std::string& dataset_path, const DatasetMeta& meta) {
    nlohmann::json j;
    j["task"] = meta.task;
    j["vocab_size"] = meta.vocab_size;
    j["seed"] = meta.seed;
    j["injector"] = meta.injector;
    std::ofstream out(meta_path(dataset_path));
    if (!out) throw IoError("cannot open for writing: " + meta_path(dataset_path));
    out << j.dump(2) << '\n';
}

DatasetMeta read_dataset_meta(const std::string& dataset_path) {
    std::ifstream in(meta_path(dataset_path));
    if (!in) throw IoError("cannot open: " + meta_path(dataset_path));
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(meta_path(dataset_path) + ": " + e.what());
    }
    DatasetMeta meta;
    meta.task = j.value("task", "");
    meta.vocab_size = j.value("vocab_size", 0);
    meta.seed = j.value("seed", uint64_t{0});
    meta.injector = j.value("injector", "");
    return meta;
}

}  // namespace rgan
