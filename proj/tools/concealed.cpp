#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "concealed/harness/report.hpp"
#include "concealed/osn.hpp"
#include "concealed/tcp.hpp"

namespace fs = std::filesystem;
using namespace concealed;

namespace {

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
    std::ifstream in{path, std::ios::binary};
    if (!in)
        throw UsageError{"cannot read " + path.string()};
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out{path, std::ios::binary | std::ios::trunc};
    if (!out)
        throw UsageError{"cannot write " + path.string()};
    out << contents;
}

/// "-" is stdin, "@path" and plain paths are files, anything starting with '{' is inline.
std::string read_argument(const std::string& value) {
    if (value == "-") {
        std::ostringstream out;
        out << std::cin.rdbuf();
        return out.str();
    }
    if (!value.empty() && value.front() == '{')
        return value;
    return read_file(value.front() == '@' ? value.substr(1) : value);
}

std::string trim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.pop_back();
    return s;
}

HybridPublicKey parse_public_key(const std::string& text) {
    auto hex = trim(!text.empty() && text.front() == '@' ? read_file(text.substr(1)) : text);
    auto bytes = from_hex(hex);
    if (bytes.size() != 32)
        throw UsageError{"server key must be 32 bytes of hex"};
    HybridPublicKey key;
    std::copy(bytes.begin(), bytes.end(), key.begin());
    return key;
}

sigset_t stop_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    return set;
}

void wait_for_stop() {
    auto set = stop_signals();
    int sig = 0;
    sigwait(&set, &sig);
}

struct Globals {
    std::string data_dir = "concealed-data";
    std::optional<std::uint64_t> seed;
    std::string passphrase;
};

/// Seeded runs derive a fresh stream per invocation so repeated commands never reuse nonces.
std::unique_ptr<Rng> make_rng(const Globals& g, const std::string& purpose) {
    if (!g.seed)
        return std::make_unique<SystemRng>();
    fs::path counter_file = fs::path{g.data_dir} / "seed-counter";
    std::uint64_t counter = 0;
    if (fs::exists(counter_file))
        counter = std::stoull(read_file(counter_file));
    write_file(counter_file, std::to_string(counter + 1));
    return std::make_unique<SeededRng>(SeededRng{*g.seed}.derive(purpose + "/" + std::to_string(counter)));
}

HybridKeyPair load_or_create_key(const fs::path& path, Rng& rng) {
    if (fs::exists(path))
        return HybridKeyPair::from_secret(from_hex(trim(read_file(path))));
    auto key = HybridKeyPair::generate(rng);
    write_file(path, to_hex(key.secret_key()) + "\n");
    fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write);
    return key;
}

// ---- server and mix ----

int server_run(const Globals& g, const std::string& listen) {
    fs::path dir = g.data_dir;
    fs::create_directories(dir);
    auto rng = make_rng(g, "server");
    auto key = load_or_create_key(dir / "server.key", *rng);
    write_file(dir / "server.pub", to_hex(key.public_key()) + "\n");
    SteadyClock clock;
    AddressStore store{GroupParams::production(), key, clock, std::move(rng)};
    if (fs::exists(dir / "store.snapshot"))
        store.restore(read_file(dir / "store.snapshot"));
    TcpServer server{store, Endpoint::parse(listen)};
    auto bound = Endpoint::parse(listen);
    bound.port = server.port();
    write_file(dir / "server.endpoint", bound.to_string() + "\n");
    std::cout << "listening on " << bound.to_string() << std::endl;
    std::thread worker{[&] { server.run(); }};
    wait_for_stop();
    server.stop();
    worker.join();
    write_file(dir / "store.snapshot", store.snapshot());
    return 0;
}

struct MixArgs {
    std::string server;
    std::string server_key;
    std::string name = "mix0";
    std::string directory;
    std::size_t batch = 5;
    std::int64_t timeout_ms = 2000;
    std::int64_t poll_ms = 200;
};

int mix_run(const Globals& g, const MixArgs& a) {
    fs::path dir = g.data_dir;
    fs::create_directories(dir);
    auto rng = make_rng(g, "mix/" + a.name);
    auto key = load_or_create_key(dir / (a.name + ".key"), *rng);
    auto server = Endpoint::parse(a.server);
    TcpConnection collector{server};
    TcpConnection forwarder{server};
    SteadyClock clock;
    MixConfig config;
    config.batch_threshold = a.batch;
    config.flush_timeout = Millis{a.timeout_ms};
    MixNode mix{a.name, key, collector, forwarder, GroupParams::production(), parse_public_key(a.server_key), clock,
                std::move(rng), config};
    mix.register_inboxes(1);

    fs::path directory = a.directory.empty() ? dir / "mix-directory.json" : fs::path{a.directory};
    std::vector<MixDirectoryEntry> entries;
    if (fs::exists(directory))
        entries = read_directory(read_file(directory));
    std::erase_if(entries, [&](const MixDirectoryEntry& e) { return e.name == a.name; });
    entries.push_back(mix.directory_entry());
    write_file(directory, write_directory(entries) + "\n");
    std::cout << "mix " << a.name << " ready" << std::endl;

    std::atomic<bool> stop{false};
    std::thread collect{[&] { mix.run_collector(stop, Millis{a.poll_ms}); }};
    std::thread flush{[&] { mix.run_flusher(stop, Millis{a.poll_ms}); }};
    wait_for_stop();
    stop = true;
    collect.join();
    flush.join();
    return 0;
}

// ---- client ----

/// A loaded identity: keyring, connection and OSN layer, saved back on commit().
class Session {
  public:
    Session(const Globals& g, const std::string& mixes_file, const std::string& purpose) : g_{g} {
        fs::path dir = g.data_dir;
        if (!fs::exists(dir / "client.json"))
            throw UsageError{"no identity in " + dir.string() + "; run client init first"};
        settings_ = Json::parse(read_file(dir / "client.json"));
        keyring_ = Keyring::load(read_file(dir / "keyring"), g.passphrase);
        rng_ = make_rng(g, purpose);
        connection_ = std::make_unique<TcpConnection>(Endpoint::parse(settings_.at("server").get<std::string>()));
        client_ = std::make_unique<Client>(keyring_, *connection_, GroupParams::production(),
                                           parse_public_key(settings_.at("server_key").get<std::string>()), *rng_);
        std::vector<MixDirectoryEntry> mixes;
        if (!mixes_file.empty())
            mixes = read_directory(read_file(mixes_file));
        osn_ = std::make_unique<Osn>(*client_, mixes);
    }

    Client& client() { return *client_; }
    Osn& osn() { return *osn_; }

    void commit() {
        fs::path dir = g_.data_dir;
        write_file(dir / "keyring", keyring_.save(g_.passphrase, *rng_, settings_.value("fast_kdf", false)));
        write_file(dir / "card.json", osn_->profile_card().to_blob() + "\n");
    }

  private:
    const Globals& g_;
    Json settings_;
    Keyring keyring_;
    std::unique_ptr<Rng> rng_;
    std::unique_ptr<TcpConnection> connection_;
    std::unique_ptr<Client> client_;
    std::unique_ptr<Osn> osn_;
};

int client_init(const Globals& g, const std::string& name, const std::string& server, const std::string& server_key,
                bool fast_kdf) {
    fs::path dir = g.data_dir;
    if (fs::exists(dir / "keyring"))
        throw UsageError{"an identity already exists in " + dir.string()};
    fs::create_directories(dir);
    parse_public_key(server_key);
    Json settings{{"server", Endpoint::parse(server).to_string()},
                  {"server_key", to_hex(parse_public_key(server_key))},
                  {"fast_kdf", fast_kdf}};
    auto rng = make_rng(g, "init");
    auto keyring = Keyring::generate(name, *rng);
    write_file(dir / "keyring", keyring.save(g.passphrase, *rng, fast_kdf));
    write_file(dir / "client.json", canonical(settings) + "\n");
    Session session{g, "", "init-inbox"};
    session.client().ensure_inbox();
    session.commit();
    std::cout << session.osn().profile_card().to_blob() << std::endl;
    return 0;
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
    auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw UsageError{"expected LABEL=VALUE, got " + text};
    return {text.substr(0, eq), text.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
    // Worker threads inherit the mask, so only sigwait() sees the stop signals.
    auto signals = stop_signals();
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    CLI::App app{"Concealed-address social network: server, mix, demo client and leakage harness"};
    app.require_subcommand(1);
    Globals g;
    app.set_config("--config", "", "Read options from a TOML/INI file");
    app.add_option("--data-dir", g.data_dir, "State directory")->envname("CONCEALED_DATA_DIR")->capture_default_str();
    app.add_option("--seed", g.seed, "Seed all randomness (reproducible demos)");
    app.add_option("--passphrase", g.passphrase, "Keyring passphrase")->envname("CONCEALED_PASSPHRASE");

    auto* server = app.add_subcommand("server", "Address store server")->require_subcommand(1);
    std::string listen = "127.0.0.1:7007";
    auto* server_run_cmd = server->add_subcommand("run", "Serve frames over TCP until SIGINT/SIGTERM");
    server_run_cmd->add_option("--listen", listen, "host:port")->capture_default_str();

    auto* mix = app.add_subcommand("mix", "Mix node")->require_subcommand(1);
    MixArgs mix_args;
    auto* mix_run_cmd = mix->add_subcommand("run", "Collect, shuffle and forward until SIGINT/SIGTERM");
    mix_run_cmd->add_option("--server", mix_args.server, "Store host:port")->required();
    mix_run_cmd->add_option("--server-key", mix_args.server_key, "Store public key (hex or @file)")->required();
    mix_run_cmd->add_option("--name", mix_args.name)->capture_default_str();
    mix_run_cmd->add_option("--directory", mix_args.directory, "Mix directory file to update");
    mix_run_cmd->add_option("--batch", mix_args.batch, "Flush threshold")->capture_default_str();
    mix_run_cmd->add_option("--timeout-ms", mix_args.timeout_ms, "Flush timeout")->capture_default_str();
    mix_run_cmd->add_option("--poll-ms", mix_args.poll_ms, "Inbox poll interval")->capture_default_str();

    auto* client = app.add_subcommand("client", "Demo client")->require_subcommand(1);
    std::string mixes_file;
    client->add_option("--mixes", mixes_file, "Mix directory file");

    std::string name, server_addr, server_key;
    bool fast_kdf = false;
    auto* init = client->add_subcommand("init", "Create an identity and its inbox");
    init->add_option("--name", name)->required();
    init->add_option("--server", server_addr, "Store host:port")->required();
    init->add_option("--server-key", server_key, "Store public key (hex or @file)")->required();
    init->add_flag("--fast-kdf", fast_kdf, "Cheap keyring KDF (tests only)");

    auto* contact = client->add_subcommand("contact", "Contacts")->require_subcommand(1);
    std::string card, proof;
    auto* contact_add = contact->add_subcommand("add", "Add a contact from its card");
    contact_add->add_option("--card", card, "Card file, - for stdin, or inline JSON")->required();
    auto* contact_fp = contact->add_subcommand("fingerprint", "Print what the contact must compare");
    contact_fp->add_option("--name", name)->required();
    auto* contact_verify = contact->add_subcommand("verify", "Verify a contact against its fingerprint");
    contact_verify->add_option("--name", name)->required();
    contact_verify->add_option("--proof", proof, "Output of the contact's fingerprint command")->required();

    auto* profile = client->add_subcommand("profile", "Profile")->require_subcommand(1);
    std::vector<std::string> public_entries, fields, feeds;
    auto* publish = profile->add_subcommand("publish", "Publish a profile");
    publish->add_option("--public", public_entries, "LABEL=VALUE shown to everyone");
    publish->add_option("--field", fields, "LABEL=VALUE for granted contacts");
    publish->add_option("--feed", feeds, "Feed label");
    std::string grant_to;
    auto* grant = profile->add_subcommand("grant", "Grant a contact the field key");
    grant->add_option("--name", grant_to)->required();

    auto* chat = client->add_subcommand("chat", "Group chats")->require_subcommand(1);
    std::string title, text;
    std::vector<std::string> members;
    auto* chat_create = chat->add_subcommand("create", "Create a chat with verified contacts");
    chat_create->add_option("--title", title)->required();
    chat_create->add_option("--member", members)->required();
    auto* chat_send = chat->add_subcommand("send", "Send a chat message");
    chat_send->add_option("--title", title)->required();
    chat_send->add_option("--text", text)->required();
    auto* chat_read = chat->add_subcommand("read", "Accept invitations and print new messages");
    chat_read->add_option("--title", title)->required();

    auto* address = client->add_subcommand("address", "Raw addresses")->require_subcommand(1);
    std::string label;
    bool open_read = false, open_write = false;
    auto* address_create = address->add_subcommand("create", "Create an address");
    address_create->add_option("--label", label)->required();
    address_create->add_flag("--open-read", open_read);
    address_create->add_flag("--open-write", open_write);

    auto* harness = app.add_subcommand("harness", "Leakage harness")->require_subcommand(1);
    std::string scenario_file, store_kind = "concealed", out_file, trace_file, table_file;
    std::uint64_t harness_seed = 42;
    std::optional<std::size_t> path_length;
    std::size_t users = 20, rounds = 6;
    auto* h_scenario = harness->add_subcommand("scenario", "Write a generated scenario");
    h_scenario->add_option("--seed", harness_seed)->capture_default_str();
    h_scenario->add_option("--users", users)->capture_default_str();
    h_scenario->add_option("--rounds", rounds)->capture_default_str();
    h_scenario->add_option("--out", out_file);
    auto* h_run = harness->add_subcommand("run", "Run a scenario against a store and score every attack");
    h_run->add_option("--scenario", scenario_file, "Scenario file (default: generated from --seed)");
    h_run->add_option("--seed", harness_seed)->capture_default_str();
    h_run->add_option("--store", store_kind)->check(CLI::IsMember({"concealed", "baseline"}))->capture_default_str();
    h_run->add_option("--path-length", path_length, "Mix path length (0 = no mixes)");
    h_run->add_option("--out", out_file, "Report file (default stdout)");
    h_run->add_option("--trace", trace_file, "Also write the server trace and ground truth");
    std::vector<std::string> report_files;
    auto* h_compare = harness->add_subcommand("compare", "Tabulate baseline against concealed");
    h_compare->add_option("reports", report_files, "Report files")->required();
    h_compare->add_option("--out", out_file, "Comparison JSON file");
    h_compare->add_option("--table", table_file, "Text table file (always printed)");

    // Global options may also follow a subcommand.
    std::function<void(CLI::App*)> fall = [&](CLI::App* a) {
        for (auto* sub : a->get_subcommands({})) {
            sub->fallthrough();
            fall(sub);
        }
    };
    fall(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        if (code != 0)
            std::cerr << app.help();
        return code == 0 ? 0 : 1;
    }

    try {
        if (server_run_cmd->parsed())
            return server_run(g, listen);
        if (mix_run_cmd->parsed())
            return mix_run(g, mix_args);
        if (init->parsed())
            return client_init(g, name, server_addr, server_key, fast_kdf);

        if (client->parsed()) {
            Session session{g, mixes_file, "client"};
            auto& c = session.client();
            auto& osn = session.osn();
            int code = 0;
            if (contact_add->parsed()) {
                auto parsed = ContactCard::from_blob(trim(read_argument(card)));
                c.add_contact(parsed);
                std::cout << "added " << parsed.name << "\n";
            } else if (contact_fp->parsed()) {
                Json out{{"ids", c.fingerprint_key_ids(name)}, {"words", c.fingerprint_with(name)}};
                std::cout << canonical(out) << "\n";
            } else if (contact_verify->parsed()) {
                auto p = Json::parse(read_argument(proof));
                bool ok = c.verify_contact(name, p.at("ids").get<std::vector<KeyId>>(), p.at("words"));
                std::cout << (ok ? "verified " : "MISMATCH ") << name << "\n";
                code = ok ? 0 : 1;
            } else if (publish->parsed()) {
                std::vector<ProfileEntry> entries;
                for (const auto& e : public_entries) {
                    auto [l, v] = split_assignment(e);
                    entries.push_back({l, ProfileEntry::Kind::Public, v, ""});
                }
                for (const auto& e : fields) {
                    auto [l, v] = split_assignment(e);
                    entries.push_back({l, ProfileEntry::Kind::Field, v, "friends"});
                }
                for (const auto& f : feeds)
                    entries.push_back({f, ProfileEntry::Kind::Feed, "", "friends"});
                std::cout << osn.publish_profile(entries).root.to_string() << "\n";
            } else if (grant->parsed()) {
                auto ids = osn.profile_key_ids();
                if (!ids.count("friends"))
                    throw UsageError{"the profile has no granted fields"};
                if (!osn.grant_profile_access(grant_to, {ids.at("friends")}))
                    std::cerr << "warning: " << grant_to << " is not verified\n";
            } else if (chat_create->parsed()) {
                osn.create_chat(title, members);
            } else if (chat_send->parsed()) {
                osn.send_chat(title, text);
            } else if (chat_read->parsed()) {
                osn.sync();
                for (const auto& m : osn.read_chat(title).messages)
                    std::cout << m.from << ": " << m.text << "\n";
            } else if (address_create->parsed()) {
                auto& held = c.create_address(label, {open_read, open_write});
                std::cout << held.secrets.address.to_string() << "\n";
            }
            session.commit();
            return code;
        }

        if (h_scenario->parsed()) {
            harness::ScenarioOptions o;
            o.users = users;
            o.rounds = rounds;
            auto text = harness::ScenarioScript::generate(harness_seed, o).to_json().dump(2) + "\n";
            out_file.empty() ? void(std::cout << text) : write_file(out_file, text);
            return 0;
        }
        if (h_run->parsed()) {
            auto script = scenario_file.empty()
                                  ? harness::ScenarioScript::generate(harness_seed)
                                  : harness::ScenarioScript::from_json(Json::parse(read_file(scenario_file)));
            harness::RunOptions options;
            options.path_length = path_length;
            auto kind = harness::parse_store_kind(store_kind);
            auto run = harness::run_scenario(script, kind, options);
            auto variant = path_length && *path_length == 0 ? "direct" : "mixed";
            auto report = harness::evaluate(script, run, variant).to_json().dump(2) + "\n";
            if (!trace_file.empty())
                write_file(trace_file, Json{{"trace", run.trace.to_json()}, {"truth", run.truth.to_json()}}.dump() + "\n");
            out_file.empty() ? void(std::cout << report) : write_file(out_file, report);
            return 0;
        }
        if (h_compare->parsed()) {
            std::vector<harness::AttackReport> reports;
            for (const auto& f : report_files)
                reports.push_back(harness::AttackReport::from_json(Json::parse(read_file(f))));
            auto cmp = harness::compare(reports);
            auto table = harness::compare_table(cmp);
            if (!out_file.empty())
                write_file(out_file, cmp.dump(2) + "\n");
            if (!table_file.empty())
                write_file(table_file, table);
            std::cout << table;
            return 0;
        }
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 2;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 2;
    } catch (const KeyringError& e) {
        std::cerr << "keyring: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
