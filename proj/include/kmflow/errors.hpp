#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kmflow {

enum class ErrorCode {
  precondition,
  unsupported_dimension,
  invalid_grid,
  cut_locus_violation,
  unsupported_order,
  singular_hessian,
  null_pair_unavailable,
  nonpositive_density,
  newton_divergence,
  spacelike_violation,
  route_mismatch,
  insufficient_tail,
  mass_mismatch,
  non_convergence,
  grid_mismatch,
  parse_error,
  validation_error,
  io_error,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports carries one of the codes above; the
// message holds the context (node index, residual, field name, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

// Literal messages are only turned into strings on failure.
inline void require(bool cond, ErrorCode code, const char* what) {
  if (!cond) throw Error(code, what);
}

}  // namespace kmflow
