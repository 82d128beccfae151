#pragma once

#include <stdexcept>
#include <string>

namespace lightcone {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  no_interior_cones,
  undefined_statistic,
  // field/model file parsing
  io,
  bad_magic,
  truncated,
  size_mismatch,
  non_finite,
  bad_version,
  // front end
  config,
  unsupported,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace lightcone
