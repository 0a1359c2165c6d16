#include "concealed/harness/baseline.hpp"

#include <stdexcept>

namespace concealed::harness {

BaselineStore::Account& BaselineStore::account(const std::string& user) {
    auto it = accounts_.find(user);
    if (it == accounts_.end())
        throw std::invalid_argument{"unknown account " + user};
    return it->second;
}

BaselineStore::Result BaselineStore::handle(const Json& request) {
    const auto op = request.at("op").get<std::string>();
    auto ok = [](Json extra = Json::object()) {
        extra["ok"] = true;
        return extra;
    };
    auto size_of = [](const Json& r) { return r.value("body", std::string{}).size(); };

    if (op == "register") {
        auto user = request.at("user").get<std::string>();
        accounts_[user];
        return {ok(), {{"created", "account/" + user, 0, 0}}};
    }
    if (op == "add_contact") {
        auto user = request.at("user").get<std::string>();
        auto contact = request.at("contact").get<std::string>();
        account(user).contacts.insert(contact);
        account(contact).contacts.insert(user);
        return {ok(), {{"updated", "contacts/" + user, 0, 0}, {"updated", "contacts/" + contact, 0, 0}}};
    }
    if (op == "publish") {
        auto user = request.at("user").get<std::string>();
        account(user).profile = request.at("profile");
        return {ok(), {{"updated", "profile/" + user, 0, request.at("profile").dump().size()}}};
    }
    if (op == "grant") {
        auto owner = request.at("owner").get<std::string>();
        account(owner).grants[request.at("key").get<std::string>()].insert(request.at("reader").get<std::string>());
        return {ok(), {{"updated", "grants/" + owner, 0, 0}}};
    }
    if (op == "send") {
        auto to = request.at("to").get<std::string>();
        auto& box = account(to).mailbox;
        box.push_back(request);
        return {ok(), {{"appended", "mailbox/" + to, box.size() - 1, size_of(request)}}};
    }
    if (op == "fetch") {
        auto& a = account(request.at("user").get<std::string>());
        Json messages = Json::array();
        for (auto i = a.fetched; i < a.mailbox.size(); ++i)
            messages.push_back(a.mailbox[i]);
        a.fetched = a.mailbox.size();
        return {ok({{"messages", messages}}), {}};
    }
    if (op == "post") {
        auto user = request.at("user").get<std::string>();
        auto& feed = account(user).feed;
        feed.push_back(request);
        return {ok(), {{"appended", "feed/" + user, feed.size() - 1, size_of(request)}}};
    }
    if (op == "lookup") {
        const auto& target = account(request.at("target").get<std::string>());
        return {ok({{"profile", target.profile}}), {}};
    }
    if (op == "chat_create") {
        auto title = request.at("chat").get<std::string>();
        auto& c = chats_[title];
        c.owner = request.at("owner").get<std::string>();
        c.members = request.at("members").get<std::set<std::string>>();
        c.members.insert(c.owner);
        return {ok(), {{"created", "chat/" + title, 0, 0}}};
    }
    if (op == "chat_send" || op == "chat_read" || op == "chat_remove") {
        auto title = request.at("chat").get<std::string>();
        auto it = chats_.find(title);
        if (it == chats_.end())
            throw std::invalid_argument{"unknown chat " + title};
        auto& c = it->second;
        auto user = request.at(op == "chat_remove" ? "owner" : "user").get<std::string>();
        if (!c.members.count(user))
            return {{{"ok", false}, {"error", "not a member"}}, {}};
        if (op == "chat_send") {
            c.lines.push_back(request);
            return {ok(), {{"appended", "chat/" + title, c.lines.size() - 1, size_of(request)}}};
        }
        if (op == "chat_read")
            return {ok({{"lines", c.lines}}), {}};
        if (user != c.owner)
            return {{{"ok", false}, {"error", "not the owner"}}, {}};
        c.members.erase(request.at("member").get<std::string>());
        return {ok(), {{"updated", "chat/" + title, 0, 0}}};
    }
    throw std::invalid_argument{"unknown baseline op " + op};
}

}  // namespace concealed::harness
