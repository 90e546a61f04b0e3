#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rgan/config.hpp"
#include "rgan/optim.hpp"
#include "rgan/tensor.hpp"

// Checkpoint container and its on-disk format:
//   magic "RGAN" | version u32 LE | array count u32 LE |
//   per array: name length u32 LE, UTF-8 name, rank u32 LE,
//              dims u32 LE each, raw float32 LE values |
//   JSON trailer: config snapshot, curriculum state, optimizer scalars, epoch.
// Optimizer moment tensors travel as ordinary named arrays.

namespace rgan {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    uint32_t version = kCheckpointVersion;
    std::vector<std::pair<std::string, Tensor>> arrays;  // insertion-ordered

    TrainConfig config;
    int curriculum_length = 0;  // 0: curriculum inactive
    int curriculum_epochs = 0;  // epochs spent at the current level
    double curriculum_accuracy = 1.0;
    int epoch = 0;
    std::map<std::string, double> optimizer;  // scalar state by name

    void add(const std::string& name, Tensor t);     // duplicate name: contract error
    const Tensor* find(const std::string& name) const;  // nullptr if absent
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);  // IoError
Checkpoint load_checkpoint(const std::string& path);  // IoError / DataError

// Copies every parameter of the store into the checkpoint under its own name.
void store_to_checkpoint(const ParameterStore& store, Checkpoint& ck);

// Fills every parameter of the store from the checkpoint by name; missing
// arrays or shape mismatches are data errors naming the parameter.
void checkpoint_to_store(const Checkpoint& ck, ParameterStore& store);

}  // namespace rgan
