#include "rtd/artifact.hpp"

#include <cstdio>

namespace rtd {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_to_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_config_hash(std::string_view artifact, std::uint64_t expected, std::uint64_t found,
                       bool force) {
  if (expected == found || force) return;
  throw ArtifactError(std::string(artifact) + " was built with config hash " + hash_to_hex(found) +
                      " but the active config hashes to " + hash_to_hex(expected) +
                      " (rebuild it or pass --force)");
}

}  // namespace rtd
