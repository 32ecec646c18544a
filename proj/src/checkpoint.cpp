// SPDX-License-Identifier: Apache-2.0

#include "fovseg/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "fovseg/common.hpp"

namespace fovseg {

namespace {

constexpr char kMagic[8] = {'F', 'O', 'V', 'S', 'E', 'G', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint: " + path);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<const ParamSet*>& sets) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    std::size_t total = 0;
    for (const ParamSet* s : sets) total += s->size();
    os.write(kMagic, 8);
    put_u32(os, kCkptVersion);
    put_u32(os, static_cast<std::uint32_t>(total));
    for (const ParamSet* s : sets) {
        for (const auto& p : s->items()) {
            put_u32(os, static_cast<std::uint32_t>(p->name.size()));
            os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
            put_u32(os, static_cast<std::uint32_t>(p->shape.size()));
            for (int d : p->shape) put_u32(os, static_cast<std::uint32_t>(d));
            for (double v : p->value) put_f64(os, v);
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

void save_checkpoint(const std::string& path, const ParamSet& params) {
    save_checkpoint(path, std::vector<const ParamSet*>{&params});
}

void load_checkpoint(const std::string& path, const std::vector<ParamSet*>& sets) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path);
    const std::uint32_t version = get_u32(is, path);
    if (version != kCkptVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    const std::uint32_t count = get_u32(is, path);
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is, path);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw IoError("truncated checkpoint: " + path);
        const std::uint32_t ndim = get_u32(is, path);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(get_u32(is, path));
        Parameter* p = nullptr;
        for (ParamSet* s : sets)
            if ((p = s->find(name)) != nullptr) break;
        if (!p) throw IoError("checkpoint entry '" + name + "' has no matching parameter: " + path);
        if (p->shape != shape)
            throw IoError("checkpoint entry '" + name + "' shape mismatch: " + path);
        for (auto& v : p->value) v = get_f64(is, path);
        seen.insert(name);
    }
    for (const ParamSet* s : sets)
        for (const auto& p : s->items())
            if (!seen.count(p->name))
                throw IoError("checkpoint missing parameter '" + p->name + "': " + path);
}

void load_checkpoint(const std::string& path, ParamSet& params) {
    load_checkpoint(path, std::vector<ParamSet*>{&params});
}

}  // namespace fovseg
