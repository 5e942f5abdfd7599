/*
 * Copyright 2026 The semmap Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "semmap/query_server.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "semmap/query.h"

namespace semmap {

SnapshotBoard::SnapshotBoard()
    : current_(std::make_shared<const ObjectMapSnapshot>()) {}

void SnapshotBoard::Publish(std::shared_ptr<const ObjectMapSnapshot> snapshot) {
  std::lock_guard<std::mutex> lock(mutex_);
  current_ = std::move(snapshot);
}

std::shared_ptr<const ObjectMapSnapshot> SnapshotBoard::Current() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return current_;
}

std::pair<std::string, uint16_t> ParseAddress(const std::string& address) {
  const size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw ServerError("address '" + address + "' must be host:port");
  }
  const std::string host = address.substr(0, colon);
  int port = 0;
  try {
    size_t used = 0;
    port = std::stoi(address.substr(colon + 1), &used);
    if (used != address.size() - colon - 1) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw ServerError("address '" + address + "' has an invalid port");
  }
  if (port < 0 || port > 65535) {
    throw ServerError("address '" + address + "' has an invalid port");
  }
  return {host.empty() ? "0.0.0.0" : host, static_cast<uint16_t>(port)};
}

QueryServer::QueryServer(std::shared_ptr<const SnapshotBoard> board)
    : board_(std::move(board)) {}

QueryServer::~QueryServer() { Stop(); }

void QueryServer::Start(const std::string& host, uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* resolved = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &resolved) != 0 ||
      resolved == nullptr) {
    throw ServerError("cannot resolve host '" + host + "'");
  }
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(resolved->ai_addr);
  freeaddrinfo(resolved);
  addr.sin_port = htons(port);

  listen_fd_ = socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ServerError("socket: " + std::string(strerror(errno)));
  const int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      listen(listen_fd_, 128) != 0) {
    const std::string reason = strerror(errno);
    close(listen_fd_);
    listen_fd_ = -1;
    throw ServerError("cannot bind " + host + ":" + std::to_string(port) +
                      ": " + reason);
  }
  socklen_t len = sizeof(addr);
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  stopping_ = false;
  accept_thread_ = std::thread([this] { AcceptLoop(); });
}

void QueryServer::Stop() {
  if (listen_fd_ < 0) return;
  stopping_ = true;
  shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  close(listen_fd_);
  listen_fd_ = -1;

  std::list<Connection> connections;
  {
    std::lock_guard<std::mutex> lock(connections_mutex_);
    for (Connection& c : connections_) shutdown(c.fd, SHUT_RDWR);
    connections.splice(connections.end(), connections_);
  }
  for (Connection& c : connections) {
    if (c.thread.joinable()) c.thread.join();
    close(c.fd);
  }
}

void QueryServer::ReapFinished() {
  std::list<Connection> finished;
  {
    std::lock_guard<std::mutex> lock(connections_mutex_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      const auto next = std::next(it);
      if (it->done) finished.splice(finished.end(), connections_, it);
      it = next;
    }
  }
  for (Connection& c : finished) {
    c.thread.join();
    close(c.fd);
  }
}

void QueryServer::AcceptLoop() {
  while (!stopping_) {
    const int fd = accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) return;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    ReapFinished();
    std::lock_guard<std::mutex> lock(connections_mutex_);
    if (stopping_) {
      close(fd);
      return;
    }
    Connection& c = connections_.emplace_back();
    c.fd = fd;
    c.thread = std::thread([this, &c] { Serve(c); });
  }
}

namespace {

bool SendAll(int fd, const std::string& data) {
  size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n =
        send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<size_t>(n);
  }
  return true;
}

}  // namespace

void QueryServer::Serve(Connection& connection) {
  std::string buffer;
  char chunk[1024];
  bool open = true;
  while (open) {
    const ssize_t n = recv(connection.fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<size_t>(n));
    size_t start = 0;
    for (size_t nl; (nl = buffer.find('\n', start)) != std::string::npos;
         start = nl + 1) {
      const std::string_view line(buffer.data() + start, nl - start);
      const auto snapshot = board_->Current();
      if (!SendAll(connection.fd, HandleQueryLine(line, *snapshot) + "\n")) {
        open = false;
        break;
      }
    }
    buffer.erase(0, start);
    if (open && buffer.size() > kMaxLineBytes) {
      SendAll(connection.fd, R"({"error":"line too long"})" "\n");
      open = false;
    }
  }
  shutdown(connection.fd, SHUT_RDWR);
  connection.done = true;
}

}  // namespace semmap
