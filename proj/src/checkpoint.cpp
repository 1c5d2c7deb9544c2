#include "citymorph/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "citymorph/errors.hpp"

namespace citymorph {

namespace {

constexpr char kMagic[4] = {'U', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* p;
    size_t remaining;
    std::string path;

    void need(size_t n) const {
        if (remaining < n) throw DataError("truncated checkpoint: " + path);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        p += 8;
        remaining -= 8;
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        remaining -= n;
        return s;
    }
    void f32s(float* dst, size_t count) {
        need(count * 4);
        std::memcpy(dst, p, count * 4);
        p += count * 4;
        remaining -= count * 4;
    }
};

} // namespace

const NamedBlock* BlockFile::find(const std::string& name) const {
    for (const auto& b : blocks)
        if (b.name == name) return &b;
    return nullptr;
}

void write_blocks(const BlockFile& file, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, file.config_hash);
    put_u32(out, static_cast<uint32_t>(file.blocks.size()));
    for (const auto& b : file.blocks) {
        put_u32(out, static_cast<uint32_t>(b.name.size()));
        out.append(b.name);
        put_u32(out, static_cast<uint32_t>(b.dims.size()));
        uint64_t numel = 1;
        for (uint32_t d : b.dims) {
            put_u32(out, d);
            numel *= d;
        }
        if (numel != b.data.size())
            throw ArgumentError("block '" + b.name + "' dims do not match payload size");
        const size_t offset = out.size();
        out.resize(offset + b.data.size() * 4);
        std::memcpy(out.data() + offset, b.data.data(), b.data.size() * 4);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write checkpoint: " + path);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw DataError("checkpoint write failed: " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move checkpoint into place: " + path);
}

BlockFile read_blocks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), path};
    r.need(4);
    if (std::memcmp(r.p, kMagic, 4) != 0) throw DataError("bad checkpoint magic: " + path);
    r.p += 4;
    r.remaining -= 4;
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    BlockFile file;
    file.config_hash = r.u64();
    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        NamedBlock b;
        const uint32_t name_len = r.u32();
        b.name = r.str(name_len);
        const uint32_t rank = r.u32();
        uint64_t numel = 1;
        for (uint32_t k = 0; k < rank; ++k) {
            b.dims.push_back(r.u32());
            numel *= b.dims.back();
        }
        b.data.resize(numel);
        r.f32s(b.data.data(), numel);
        file.blocks.push_back(std::move(b));
    }
    return file;
}

uint64_t fnv1a_hash(const std::string& text) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace citymorph
