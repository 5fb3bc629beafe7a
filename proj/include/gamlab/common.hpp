// Shared error types and small utilities.
#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gamlab {

// Error taxonomy. Every failure mode in the library throws one of these;
// the CLI maps them to exit codes (usage errors are handled by the parser).
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void cat_one(std::ostringstream&) {}
template <typename A, typename... Rest>
void cat_one(std::ostringstream& os, const A& a, const Rest&... rest) {
    os << a;
    cat_one(os, rest...);
}
} // namespace detail

// str_cat(1, " + ", 2.5) -> "1 + 2.5"
template <typename... Args>
std::string str_cat(const Args&... args) {
    std::ostringstream os;
    detail::cat_one(os, args...);
    return os.str();
}

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

inline bool shape_eq(const Shape& a, const Shape& b) { return a == b; }

// True when `suffix` matches the trailing dims of `full` (leading-dim broadcast).
inline bool shape_is_suffix(const Shape& suffix, const Shape& full) {
    if (suffix.size() > full.size()) return false;
    size_t off = full.size() - suffix.size();
    for (size_t i = 0; i < suffix.size(); ++i)
        if (suffix[i] != full[off + i]) return false;
    return true;
}

} // namespace gamlab
