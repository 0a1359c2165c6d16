#include "concealed/fingerprint.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "concealed/sealing.hpp"

namespace concealed {

namespace detail {
extern const char* const builtin_wordlist;
}

Wordlist::Wordlist(std::vector<std::string> words) : words_{std::move(words)} {
    if (words_.size() != size)
        throw std::invalid_argument{"wordlist must contain exactly 16384 words"};
}

const Wordlist& Wordlist::builtin() {
    static const Wordlist list = parse(detail::builtin_wordlist);
    return list;
}

Wordlist Wordlist::parse(std::string_view text) {
    std::vector<std::string> words;
    words.reserve(size);
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        auto word = text.substr(pos, end - pos);
        if (!word.empty())
            words.emplace_back(word);
        pos = end + 1;
    }
    return Wordlist{std::move(words)};
}

Wordlist Wordlist::load(const std::string& path) {
    std::ifstream in{path};
    if (!in)
        throw std::runtime_error{"cannot open wordlist " + path};
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string fingerprint(std::vector<FingerprintEntry> keys, const Wordlist& words) {
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.key_id < b.key_id; });
    if (std::adjacent_find(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
            return a.key_id == b.key_id;
        }) != keys.end())
        throw std::invalid_argument{"duplicate key id in fingerprint input"};

    Bytes material;
    for (const auto& k : keys) {
        append_u32(material, k.key_id);
        append_u32(material, static_cast<std::uint32_t>(k.public_key.size()));
        append(material, k.public_key);
    }
    auto digest = sha256(material);

    std::string out;
    for (std::size_t w = 0; w < fingerprint_words; ++w) {
        std::size_t index = 0;
        for (std::size_t bit = w * 14; bit < (w + 1) * 14; ++bit)
            index = (index << 1) | ((digest[bit / 8] >> (7 - bit % 8)) & 1);
        if (!out.empty())
            out.push_back(' ');
        out += words[index];
    }
    return out;
}

}  // namespace concealed
