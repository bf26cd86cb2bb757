#pragma once

#include <stdexcept>
#include <string>

namespace patemb {

enum class Errc {
  usage,
  data,
  numeric,
};

/// Project-wide error type; `code` maps onto the CLI exit-code classes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

inline Error usage_error(const std::string& what) { return Error(Errc::usage, what); }
inline Error data_error(const std::string& what) { return Error(Errc::data, what); }
inline Error numeric_error(const std::string& what) { return Error(Errc::numeric, what); }

}  // namespace patemb
