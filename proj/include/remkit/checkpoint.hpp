#pragma once

#include "remkit/masking.hpp"
#include "remkit/network.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace remkit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint layout (all integers little-endian):
///
///     "RMCK" | u32 version | u32 0x01020304 | u64 master seed | f64 capacity fraction
///     u32 input dim | u32 classes | u32 hidden layers | per hidden layer: u32 gen, u32 mem
///     f32 parameters, layer by layer, blocks in DenseLayer::visit order, row-major
///     u8 has mask table | [f64 density | u8 provenance | u32 layers | u32 widths...
///                          | u64 entries | per entry: i64 id, u8 per unit]
///
/// Parameters are stored as 32-bit floats; in-memory doubles are rounded on
/// save, so load(save(net)) is bit-exact only for float-representable values.
struct Checkpoint {
    PartitionedNetwork net;
    std::optional<MaskTable> masks;
    std::uint64_t master_seed = 0;
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Rounds every parameter to the nearest 32-bit float.
PartitionedNetwork round_to_storage(const PartitionedNetwork& net);

}  // namespace remkit
