#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kseg/tensor.hpp"

namespace kseg {

/// Binary archive of named n-dimensional arrays. Little-endian, fixed magic,
/// one dtype byte per entry. Used for preprocessed cases and checkpoints.
struct ArchiveEntry {
    enum class DType : uint8_t { F64 = 0, U8 = 1 };
    DType dtype = DType::F64;
    std::vector<int64_t> shape;
    std::vector<double> f64;
    std::vector<uint8_t> u8;

    static ArchiveEntry from_tensor(const Tensor& t);
    static ArchiveEntry from_bytes(const std::vector<uint8_t>& b);
    static ArchiveEntry from_string(const std::string& s);
    Tensor to_tensor() const;
    std::string to_string() const;
};

using Archive = std::map<std::string, ArchiveEntry>;

void write_archive(const std::string& path, const Archive& a);
Archive read_archive(const std::string& path);

/// Flat "key = value" sidecar records (one per line).
using KeyValueMap = std::map<std::string, std::string>;
void write_keyvalue(const std::string& path, const KeyValueMap& kv);
KeyValueMap read_keyvalue(const std::string& path);

}  // namespace kseg
