#pragma once

#include <map>
#include <set>

#include "concealed/harness/trace.hpp"

namespace concealed::harness {

/// Reference social-network server that manages every key and message itself: accounts,
/// contact lists, per-user mailboxes, feeds and chats are stored in plaintext, and each
/// request names its sender and recipient.
class BaselineStore {
  public:
    struct Result {
        Json response;
        std::vector<TraceDelta> deltas;
    };

    /// Ops: register, add_contact, publish, grant, send, fetch, post, lookup, chat_create,
    /// chat_send, chat_read, chat_remove.
    Result handle(const Json& request);

  private:
    struct Account {
        std::set<std::string> contacts;
        Json profile = Json::object();
        std::map<std::string, std::set<std::string>> grants;
        std::vector<Json> mailbox;
        std::size_t fetched = 0;
        std::vector<Json> feed;
    };
    struct Chat {
        std::string owner;
        std::set<std::string> members;
        std::vector<Json> lines;
    };

    Account& account(const std::string& user);

    std::map<std::string, Account> accounts_;
    std::map<std::string, Chat> chats_;
};

}  // namespace concealed::harness
