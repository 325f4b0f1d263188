#pragma once

#include <stdexcept>
#include <string>

namespace hst {

// Domain error with a stable machine-readable code slug.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

  private:
    std::string code_;
};

namespace errc {
inline constexpr const char* missing_file = "missing_file";
inline constexpr const char* io_error = "io_error";
inline constexpr const char* corrupt_header = "corrupt_header";
inline constexpr const char* unsupported_format = "unsupported_format";
inline constexpr const char* unsupported_bitdepth = "unsupported_bitdepth";
inline constexpr const char* unsupported_channels = "unsupported_channels";
inline constexpr const char* invalid_sample = "invalid_sample";
inline constexpr const char* image_too_small = "image_too_small";
inline constexpr const char* dimension_mismatch = "dimension_mismatch";
inline constexpr const char* invalid_argument = "invalid_argument";
inline constexpr const char* invalid_config = "invalid_config";
inline constexpr const char* divergence = "divergence";
}  // namespace errc

[[noreturn]] inline void fail(const char* code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool ok, const char* code, const std::string& msg) {
    if (!ok) fail(code, msg);
}

}  // namespace hst
