#include "concealed/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace concealed {

namespace {

std::string errno_text(const char* what) {
    return std::string{what} + ": " + std::strerror(errno);
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size())
        throw std::invalid_argument{"endpoint must be host:port"};
    auto port = std::stoul(std::string{text.substr(colon + 1)});
    if (port > 65535)
        throw std::invalid_argument{"port out of range"};
    return {std::string{text.substr(0, colon)}, static_cast<std::uint16_t>(port)};
}

bool read_line(int fd, std::string& buffer, std::string& line) {
    for (;;) {
        auto nl = buffer.find('\n');
        if (nl != std::string::npos) {
            line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            return true;
        }
        if (buffer.size() > max_line_bytes)
            throw TransportError{"frame line too long"};
        char chunk[8192];
        auto n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n == 0)
            return false;
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw TransportError{errno_text("recv")};
        }
        buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

void write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw TransportError{errno_text("send")};
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

TcpServer::TcpServer(AddressStore& store, const Endpoint& listen) : store_{store} {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    auto port = std::to_string(listen.port);
    if (int rc = ::getaddrinfo(listen.host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw TransportError{std::string{"getaddrinfo: "} + gai_strerror(rc)};
    for (auto* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0)
            continue;
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
            listen_fd_ = fd;
            break;
        }
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (listen_fd_ < 0)
        throw TransportError{"cannot listen on " + listen.to_string()};

    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    if (addr.ss_family == AF_INET)
        port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    else
        port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
}

TcpServer::~TcpServer() {
    stop();
    for (auto& t : workers_)
        if (t.joinable())
            t.join();
    if (listen_fd_ >= 0)
        ::close(listen_fd_);
}

void TcpServer::run() {
    while (!stopping_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, 200);
        if (rc <= 0)
            continue;
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0)
            continue;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lock{clients_mutex_};
        client_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve(fd); });
    }
}

void TcpServer::stop() {
    stopping_ = true;
    std::lock_guard lock{clients_mutex_};
    for (int fd : client_fds_)
        ::shutdown(fd, SHUT_RDWR);
}

void TcpServer::serve(int fd) {
    std::string buffer, line;
    try {
        while (!stopping_ && read_line(fd, buffer, line)) {
            ServerFrame response;
            try {
                response = store_.handle(decode_client(line));
            } catch (const ParseError& e) {
                response = Error{ErrorCode::BadFrame, e.what()};
            }
            write_all(fd, encode(response) + "\n");
        }
    } catch (const std::exception&) {
        // Connection-level failure; drop the client.
    }
    std::lock_guard lock{clients_mutex_};
    client_fds_.remove(fd);
    ::close(fd);
}

TcpConnection::TcpConnection(const Endpoint& server) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    auto port = std::to_string(server.port);
    if (int rc = ::getaddrinfo(server.host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw TransportError{std::string{"getaddrinfo: "} + gai_strerror(rc)};
    for (auto* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0)
            continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            fd_ = fd;
            break;
        }
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0)
        throw TransportError{"cannot connect to " + server.to_string()};
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpConnection::~TcpConnection() {
    if (fd_ >= 0)
        ::close(fd_);
}

ServerFrame TcpConnection::request(const ClientFrame& frame) {
    write_all(fd_, encode(frame) + "\n");
    std::string line;
    if (!read_line(fd_, buffer_, line))
        throw TransportError{"server closed the connection"};
    return decode_server(line);
}

}  // namespace concealed
