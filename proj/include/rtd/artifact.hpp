#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rtd {

/// Raised for missing, corrupt, version-mismatched or config-mismatched artifacts.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);

std::string hash_to_hex(std::uint64_t h);

/// Throws ArtifactError when `found` differs from `expected`, unless `force`.
void check_config_hash(std::string_view artifact, std::uint64_t expected, std::uint64_t found,
                       bool force);

}  // namespace rtd
