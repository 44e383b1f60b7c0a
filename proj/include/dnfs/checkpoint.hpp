#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dnfs/arch.hpp"
#include "dnfs/network.hpp"
#include "dnfs/optimizer.hpp"

namespace dnfs {

/// On-disk snapshot of a training run. Binary layout, all little-endian:
/// magic "DNFS", u32 version (1), length-prefixed architecture string, then
/// per parameter array: length-prefixed name, u32 rank, rank u32 dims and
/// f32 payload; then optimizer state (u64 step, f32 lr/beta1/beta2/eps and
/// moment arrays in the same array layout), u32 epoch and a length-prefixed
/// RNG descriptor.
struct Checkpoint {
    struct Array {
        std::string name;
        std::vector<std::uint32_t> dims;
        std::vector<float> values;
    };

    std::uint32_t version = 1;
    std::string arch;
    std::vector<Array> params;
    std::uint64_t step_count = 0;
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    std::vector<Array> moments;  // <param>.m and <param>.v, in param order
    std::uint32_t epoch = 0;
    std::string rng_descriptor;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const Network& net, const OptimizerState& state,
                           const ArchSpec& arch, std::uint32_t epoch, std::uint64_t seed);

/// Rebuilds the checkpoint's network and optimizer state. Array names and
/// dims must match the freshly built architecture exactly.
struct RestoredRun {
    ArchSpec arch;
    Network net;
    OptimizerState state;
    std::uint32_t epoch = 0;
    std::uint64_t seed = 0;
};
RestoredRun restore_checkpoint(const Checkpoint& ckpt);

std::string rng_descriptor_from_seed(std::uint64_t seed);
std::uint64_t seed_from_rng_descriptor(const std::string& descriptor);

}  // namespace dnfs
