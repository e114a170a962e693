#pragma once

#include <map>
#include <string>

#include "rollnet/errors.hpp"

namespace rollnet {

// Flat key=value configuration; '#' starts a comment. Flags override file
// values by calling set() after load.
class RunConfig {
public:
    static RunConfig load(const std::string& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;

    // full provenance dump, one key=value per line, sorted
    std::string serialize() const;
    void save(const std::string& path) const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace rollnet
