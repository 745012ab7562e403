#ifndef NGM_ERROR_HPP
#define NGM_ERROR_HPP

#include <sstream>
#include <stdexcept>
#include <string>

namespace ngm {

// User-facing failure (bad input, bad config, unusable data). The CLI maps
// these to exit code 1; anything else escaping is an internal error (exit 2).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void sink(std::ostringstream&) {}
template <typename T, typename... Rest>
void sink(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  sink(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  detail::sink(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  throw Error(cat(args...));
}

template <typename... Args>
void require(bool cond, const Args&... args) {
  if (!cond) fail(args...);
}

}  // namespace ngm

#endif  // NGM_ERROR_HPP
