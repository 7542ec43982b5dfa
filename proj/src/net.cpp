// SPDX-License-Identifier: Apache-2.0

#include "pqbench/net.hpp"

#include <fmt/format.h>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

namespace pqbench {

namespace {

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return static_cast<int>(std::max<std::int64_t>(left, 0));
}

/// Waits for `events` on fd. False on timeout.
bool wait_fd(int fd, short events, Clock::time_point deadline) {
    while (true) {
        pollfd p{fd, events, 0};
        const int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc > 0) return true;
        if (rc == 0) return false;
        if (errno != EINTR) throw Error(ErrorCode::IoError, std::string("poll: ") + std::strerror(errno));
    }
}

struct AddrInfo {
    addrinfo* head = nullptr;
    ~AddrInfo() {
        if (head != nullptr) ::freeaddrinfo(head);
    }
};

void resolve(AddrInfo& out, const std::string& host, std::uint16_t port, bool passive, ErrorCode code) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    const auto service = std::to_string(port);
    const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &out.head);
    if (rc != 0) throw Error(code, fmt::format("cannot resolve {}:{}: {}", host, port, ::gai_strerror(rc)));
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        reset();
        fd_ = other.release();
    }
    return *this;
}

Socket::~Socket() { reset(); }

int Socket::release() noexcept {
    const int fd = fd_;
    fd_ = -1;
    return fd;
}

void Socket::reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
    AddrInfo ai;
    resolve(ai, host, port, true, ErrorCode::IoError);
    std::string last_error = "no address";
    for (auto* a = ai.head; a != nullptr; a = a->ai_next) {
        Socket s(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol));
        if (!s.valid()) continue;
        int one = 1;
        ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(s.fd(), a->ai_addr, a->ai_addrlen) != 0 || ::listen(s.fd(), 128) != 0) {
            last_error = std::strerror(errno);
            continue;
        }
        sockaddr_storage bound{};
        socklen_t len = sizeof bound;
        ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                                  : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
        socket_ = std::move(s);
        return;
    }
    throw Error(ErrorCode::IoError, fmt::format("cannot listen on {}:{}: {}", host, port, last_error));
}

std::optional<Socket> TcpListener::accept(std::chrono::milliseconds timeout) {
    if (!wait_fd(socket_.fd(), POLLIN, Clock::now() + timeout)) return std::nullopt;
    Socket s(::accept4(socket_.fd(), nullptr, nullptr, SOCK_CLOEXEC));
    if (!s.valid()) return std::nullopt;
    set_nodelay(s.fd());
    return s;
}

Socket tcp_connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
    AddrInfo ai;
    resolve(ai, host, port, false, ErrorCode::ConnectRefused);
    const auto deadline = Clock::now() + timeout;
    std::string last_error = "no address";
    for (auto* a = ai.head; a != nullptr; a = a->ai_next) {
        Socket s(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, a->ai_protocol));
        if (!s.valid()) continue;
        int rc = ::connect(s.fd(), a->ai_addr, a->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            if (!wait_fd(s.fd(), POLLOUT, deadline)) {
                last_error = "timed out";
                continue;
            }
            int err = 0;
            socklen_t len = sizeof err;
            ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
            rc = err == 0 ? 0 : -1;
            errno = err;
        }
        if (rc != 0) {
            last_error = std::strerror(errno);
            continue;
        }
        const int flags = ::fcntl(s.fd(), F_GETFL);
        ::fcntl(s.fd(), F_SETFL, flags & ~O_NONBLOCK);
        set_nodelay(s.fd());
        return s;
    }
    throw Error(ErrorCode::ConnectRefused, fmt::format("{}:{}: {}", host, port, last_error));
}

void set_abortive_close(const Socket& socket) noexcept {
    const linger l{1, 0};
    ::setsockopt(socket.fd(), SOL_SOCKET, SO_LINGER, &l, sizeof l);
}

Socket connect_with_retries(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout,
                            int max_retries) {
    for (int attempt = 0;; ++attempt) {
        try {
            return tcp_connect(host, port, timeout);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ConnectRefused || attempt >= max_retries) {
                if (e.code() == ErrorCode::ConnectRefused) {
                    throw Error(ErrorCode::ConnectRefused,
                                fmt::format("{} (after {} attempts)", e.detail(), attempt + 1));
                }
                throw;
            }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(200) * (attempt + 1));
    }
}

// ---------------------------------------------------------------------------

SocketStream::SocketStream(Socket socket, std::chrono::milliseconds timeout)
    : socket_(std::move(socket)), timeout_(timeout) {}

void SocketStream::write_all(ByteView data) {
    if (!socket_.valid()) throw Error(ErrorCode::StreamClosed, "write on closed stream");
    const auto deadline = Clock::now() + timeout_;
    std::size_t sent = 0;
    while (sent < data.size()) {
        const auto n = ::send(socket_.fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL | MSG_DONTWAIT);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
        } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            if (!wait_fd(socket_.fd(), POLLOUT, deadline)) throw Error(ErrorCode::ControlTimeout, "write timed out");
        } else if (n < 0 && errno == EINTR) {
            continue;
        } else {
            throw Error(ErrorCode::StreamClosed, std::string("send: ") + std::strerror(errno));
        }
    }
}

void SocketStream::read_exact(std::span<std::uint8_t> out) {
    if (!socket_.valid()) throw Error(ErrorCode::StreamClosed, "read on closed stream");
    const auto deadline = Clock::now() + timeout_;
    std::size_t got = 0;
    while (got < out.size()) {
        if (!wait_fd(socket_.fd(), POLLIN, deadline)) throw Error(ErrorCode::ControlTimeout, "read timed out");
        const auto n = ::recv(socket_.fd(), out.data() + got, out.size() - got, 0);
        if (n > 0) {
            got += static_cast<std::size_t>(n);
        } else if (n == 0) {
            throw Error(ErrorCode::StreamClosed, "peer closed the stream");
        } else if (errno != EINTR && errno != EAGAIN) {
            throw Error(ErrorCode::StreamClosed, std::string("recv: ") + std::strerror(errno));
        }
    }
}

// ---------------------------------------------------------------------------

void TcpControlChannel::send(const ControlMessage& msg) {
    if (!socket_.valid()) throw Error(ErrorCode::StreamClosed, "send on closed channel");
    const auto line = encode_control(msg) + "\n";
    std::size_t sent = 0;
    while (sent < line.size()) {
        const auto n = ::send(socket_.fd(), line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw Error(ErrorCode::StreamClosed, std::string("send: ") + std::strerror(errno));
        sent += static_cast<std::size_t>(n);
    }
}

std::optional<ControlMessage> TcpControlChannel::receive(std::chrono::milliseconds timeout) {
    if (!socket_.valid()) throw Error(ErrorCode::StreamClosed, "receive on closed channel");
    const auto deadline = Clock::now() + timeout;
    while (true) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            const auto line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return decode_control(line);
        }
        if (buffer_.size() > kMaxControlLineBytes) {
            throw Error(ErrorCode::MalformedControl, "control line exceeds the limit");
        }
        if (!wait_fd(socket_.fd(), POLLIN, deadline)) return std::nullopt;
        char chunk[1024];
        const auto n = ::recv(socket_.fd(), chunk, sizeof chunk, 0);
        if (n == 0) throw Error(ErrorCode::StreamClosed, "peer closed the control channel");
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw Error(ErrorCode::StreamClosed, std::string("recv: ") + std::strerror(errno));
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

}  // namespace pqbench
