// SPDX-License-Identifier: Apache-2.0

#include "fovseg/runconfig.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fovseg/common.hpp"

namespace fovseg {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    RunConfig cfg;
    std::string line;
    while (std::getline(is, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw IoError("malformed config line '" + line + "' in " + path);
        cfg.kv_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
}

void RunConfig::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open config for writing: " + path);
    for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
    if (!os) throw IoError("config write failed: " + path);
}

void RunConfig::set(const std::string& key, const std::string& value) { kv_[key] = value; }

void RunConfig::set(const std::string& key, long value) { kv_[key] = std::to_string(value); }

void RunConfig::set(const std::string& key, std::uint64_t value) { kv_[key] = std::to_string(value); }

void RunConfig::set(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    kv_[key] = buf;
}

std::string RunConfig::get_string(const std::string& key) const {
    const auto it = kv_.find(key);
    FOV_CONFIG_REQUIRE(it != kv_.end(), "missing config key: " + key);
    return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it != kv_.end() ? it->second : fallback;
}

long RunConfig::get_long(const std::string& key, long fallback) const {
    const auto it = kv_.find(key);
    return it != kv_.end() ? std::stol(it->second) : fallback;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = kv_.find(key);
    return it != kv_.end() ? std::stoull(it->second) : fallback;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    return it != kv_.end() ? std::stod(it->second) : fallback;
}

}  // namespace fovseg
