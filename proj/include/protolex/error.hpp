#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protolex {

enum class Errc {
  empty_text,
  cache_miss,
  io,
  format,
  network,
  protocol,
  dim_mismatch,
  zero_vector,
  degenerate_weights,
  missing_class_samples,
  empty_dataset,
  shape_mismatch,
  missing_source_text,
  schema,
  invalid_argument,
};

std::string_view errc_name(Errc code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace protolex
