// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` run configuration. Every command writes its fully
// resolved config next to its outputs; re-running from that file reproduces
// the run. Keys are written sorted; doubles round-trip exactly.

#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace fovseg {

class RunConfig {
public:
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void set(const std::string& key, long value);
    void set(const std::string& key, int value) { set(key, static_cast<long>(value)); }
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, double value);

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_long(const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace fovseg
