#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fat/binary_io.hpp"
#include "fat/model.hpp"

namespace fat {

inline constexpr char kCheckpointMagic[] = "FATCKPT1";

struct Checkpoint {
    FatModel<float> model;
    std::vector<std::string> channel_names;  // empty, or one per channel
};

// Layout: "FATCKPT1" | u64 LE json length | json {"config", "channel_names"}
//         | parameters as LE float32 in declaration order
//         | BatchNorm running statistics as LE float32
io::Bytes encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fat
