#pragma once

#include "tdslab/real.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tdslab {

/// Ordered `key = value` document. Blank lines and lines starting with '#'
/// are ignored on parse.
class KeyValueDoc {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, real value) { set(key, format_real(value)); }
    void set(const std::string& key, long value) { set(key, std::to_string(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }

    bool contains(const std::string& key) const { return find(key) != nullptr; }
    const std::string* find(const std::string& key) const;
    /// Throw std::runtime_error for a missing key, std::invalid_argument for a
    /// malformed number.
    const std::string& get(const std::string& key) const;
    real get_real(const std::string& key) const;
    long get_long(const std::string& key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    std::string to_text() const;
    /// Throws std::invalid_argument on a line without '=' or with an empty key.
    static KeyValueDoc parse(std::string_view text);
    void write_file(const std::filesystem::path& path) const;
    static KeyValueDoc read_file(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace tdslab
