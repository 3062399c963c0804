#include "tdslab/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tdslab {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void KeyValueDoc::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
        if (k == key) {
            v = value;
            return;
        }
    entries_.emplace_back(key, value);
}

const std::string* KeyValueDoc::find(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

const std::string& KeyValueDoc::get(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw std::runtime_error("missing key '" + key + "'");
    return *v;
}

real KeyValueDoc::get_real(const std::string& key) const { return parse_real(get(key)); }

long KeyValueDoc::get_long(const std::string& key) const {
    const std::string& s = get(key);
    long out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::invalid_argument("key '" + key + "': not an integer: " + s);
    return out;
}

std::string KeyValueDoc::to_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
    KeyValueDoc doc;
    std::size_t lineno = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
        doc.set(std::string(key), std::string(trim(line.substr(eq + 1))));
    }
    return doc;
}

void KeyValueDoc::write_file(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << to_text();
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

KeyValueDoc KeyValueDoc::read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str());
}

}  // namespace tdslab
