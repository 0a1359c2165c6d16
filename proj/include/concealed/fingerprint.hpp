#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "concealed/bytes.hpp"

namespace concealed {

using KeyId = std::uint32_t;

struct FingerprintEntry {
    KeyId key_id;
    Bytes public_key;
};

/// 2^14 words; index = line number of the shipped data file.
class Wordlist {
  public:
    static constexpr std::size_t size = 16384;
    static constexpr std::string_view version = "wordlist-v1";

    explicit Wordlist(std::vector<std::string> words);

    /// The copy compiled into the library from data/wordlist-v1.txt.
    static const Wordlist& builtin();
    static Wordlist parse(std::string_view text);
    static Wordlist load(const std::string& path);

    const std::string& operator[](std::size_t i) const { return words_.at(i); }

  private:
    std::vector<std::string> words_;
};

inline constexpr std::size_t fingerprint_words = 8;

/// Sorts by ascending key id, hashes the framed concatenation (id, length, key bytes) with
/// SHA-256 and renders the first 112 bits as 8 space-separated words. Throws
/// std::invalid_argument on duplicate key ids.
std::string fingerprint(std::vector<FingerprintEntry> keys, const Wordlist& words = Wordlist::builtin());

}  // namespace concealed
