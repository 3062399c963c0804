#include "tdslab/real.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace tdslab {

std::string format_real(real value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*Lg", kRealDigits, value);
    return buf;
}

real parse_real(std::string_view text) {
    std::string s(text);
    char* end = nullptr;
    errno = 0;
    const real v = std::strtold(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw std::invalid_argument("parse_real: malformed number '" + s + "'");
    return v;
}

}  // namespace tdslab
