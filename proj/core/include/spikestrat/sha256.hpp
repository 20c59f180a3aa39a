#pragma once

#include <string>

namespace spikestrat {

// SHA-256 of a byte string / file, hex-encoded. Used for manifest artifact
// fingerprints only.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

}  // namespace spikestrat
