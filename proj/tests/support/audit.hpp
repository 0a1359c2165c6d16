#pragma once

#include <sstream>

#include "concealed/envelope.hpp"

namespace concealed::testing {

/// Every stored payload in a snapshot, decoded from hex.
inline std::vector<Bytes> stored_payloads(const std::string& snapshot) {
    std::vector<Bytes> out;
    std::istringstream in{snapshot};
    std::string line;
    while (std::getline(in, line))
        if (line.starts_with("m "))
            out.push_back(line == "m -" ? Bytes{} : from_hex(line.substr(2)));
    return out;
}

/// Inner bytes of every real item in every stored envelope; dummies and non-envelopes skipped.
inline std::vector<Bytes> stored_items(const std::string& snapshot, const EnvelopeFormat& format = {}) {
    std::vector<Bytes> out;
    for (const auto& payload : stored_payloads(snapshot)) {
        std::vector<Bytes> items;
        try {
            items = split(payload);
        } catch (const EnvelopeError&) {
            continue;
        }
        for (const auto& item : items) {
            try {
                out.push_back(item_inner(format, item));
            } catch (const std::exception&) {
            }
        }
    }
    return out;
}

/// Snapshot text followed by the raw bytes of every payload, for substring scans.
inline std::string audit_text(const std::string& snapshot) {
    std::string out = snapshot;
    for (const auto& p : stored_payloads(snapshot))
        out += "\n" + to_string(p);
    return out;
}

}  // namespace concealed::testing
