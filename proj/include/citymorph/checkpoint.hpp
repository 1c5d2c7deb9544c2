#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace citymorph {

// Named f32 block, URG1-style: u32 name-length, name bytes, u32 rank,
// u32 dims[rank], then the payload.
struct NamedBlock {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;
};

// Container: magic 'U','C','K','1', u32 format version, u64 config hash,
// u32 block count, then the blocks. All little-endian.
struct BlockFile {
    uint64_t config_hash = 0;
    std::vector<NamedBlock> blocks;

    const NamedBlock* find(const std::string& name) const;
};

void write_blocks(const BlockFile& file, const std::string& path);
BlockFile read_blocks(const std::string& path);

// FNV-1a over the canonical resolved-config JSON.
uint64_t fnv1a_hash(const std::string& text);

} // namespace citymorph
