#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <mutex>
#include <string>
#include <thread>

#include "concealed/connection.hpp"

namespace concealed {

class TransportError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    /// "host:port"
    static Endpoint parse(std::string_view text);
    std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Newline-delimited frames over TCP, one thread per client connection.
class TcpServer {
  public:
    TcpServer(AddressStore& store, const Endpoint& listen);
    ~TcpServer();

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    /// Actual bound port (useful when listening on port 0).
    std::uint16_t port() const { return port_; }

    /// Accepts until stop() is called.
    void run();
    void stop();

  private:
    void serve(int fd);

    AddressStore& store_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::mutex clients_mutex_;
    std::list<int> client_fds_;
    std::list<std::thread> workers_;
};

class TcpConnection final : public Connection {
  public:
    explicit TcpConnection(const Endpoint& server);
    ~TcpConnection() override;

    TcpConnection(const TcpConnection&) = delete;
    TcpConnection& operator=(const TcpConnection&) = delete;

    ServerFrame request(const ClientFrame& frame) override;

  private:
    int fd_ = -1;
    std::string buffer_;
};

/// Reads one '\n'-terminated line from fd using buffer for leftovers. Returns false on EOF.
bool read_line(int fd, std::string& buffer, std::string& line);
void write_all(int fd, std::string_view data);

}  // namespace concealed
