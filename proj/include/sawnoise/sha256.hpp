#ifndef SAWNOISE_SHA256_HPP
#define SAWNOISE_SHA256_HPP

#include <filesystem>
#include <string>

namespace sawnoise {

// Lowercase hex SHA-256 digests (OpenSSL EVP under the hood).
std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

} // namespace sawnoise

#endif
