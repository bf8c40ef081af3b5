#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlc {

enum class Errc {
  invalid_argument,  // bad configuration or CLI usage
  shape_mismatch,    // batch/state/trace dimensions disagree
  format,            // malformed or truncated file
  io,                // open/read/write failure
  not_fitted,        // range-based criterion used before fit
  empty_input,       // empty batch, trace, or seed set
  runner,            // external model process failure
  training,          // toy model training did not converge
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::format: return "format";
    case Errc::io: return "io";
    case Errc::not_fitted: return "not_fitted";
    case Errc::empty_input: return "empty_input";
    case Errc::runner: return "runner";
    case Errc::training: return "training";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace nlc
