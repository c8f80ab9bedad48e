#pragma once

#include "mhm/tensor.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mhm {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes "MHM1" followed by one record per tensor:
///   u32 name length, name bytes, u32 rank, u64 extents[rank], f64 data[numel]
/// All integers and doubles little-endian.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
std::string encode_checkpoint(const NamedTensors& tensors);

NamedTensors load_checkpoint(const std::filesystem::path& path);
NamedTensors decode_checkpoint(const std::string& bytes);

/// Copies checkpoint values into existing tensors, matching by name and shape.
void assign_from(const NamedTensors& source, const NamedTensors& destination);

}  // namespace mhm
