// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "pqbench/control.hpp"
#include "pqbench/handshake.hpp"

namespace pqbench {

/// Owning file descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.release()) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket();

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    int release() noexcept;
    void reset() noexcept;

private:
    int fd_ = -1;
};

class TcpListener {
public:
    /// Port 0 picks a free port. Throws IO_ERROR.
    TcpListener(const std::string& host, std::uint16_t port);

    std::uint16_t port() const noexcept { return port_; }
    /// nullopt when nothing arrives within `timeout`.
    std::optional<Socket> accept(std::chrono::milliseconds timeout);

private:
    Socket socket_;
    std::uint16_t port_ = 0;
};

/// Single attempt. Throws CONNECT_REFUSED.
Socket tcp_connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// Makes close() reset the connection instead of lingering in TIME_WAIT.
void set_abortive_close(const Socket& socket) noexcept;

/// max_retries + 1 attempts with a linear backoff. Throws CONNECT_REFUSED.
Socket connect_with_retries(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout,
                            int max_retries);

/// ByteStream over a connected socket; every read waits at most `timeout`.
class SocketStream final : public ByteStream {
public:
    SocketStream(Socket socket, std::chrono::milliseconds timeout);
    void write_all(ByteView data) override;
    void read_exact(std::span<std::uint8_t> out) override;
    void close() override { socket_.reset(); }

private:
    Socket socket_;
    std::chrono::milliseconds timeout_;
};

/// Newline-delimited control channel over a connected socket.
class TcpControlChannel final : public ControlChannel {
public:
    explicit TcpControlChannel(Socket socket) : socket_(std::move(socket)) {}
    void send(const ControlMessage& msg) override;
    std::optional<ControlMessage> receive(std::chrono::milliseconds timeout) override;
    void close() override { socket_.reset(); }

private:
    Socket socket_;
    std::string buffer_;
};

}  // namespace pqbench
