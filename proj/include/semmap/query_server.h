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

#ifndef SEMMAP_QUERY_SERVER_H_
#define SEMMAP_QUERY_SERVER_H_

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "semmap/semantic_layer.h"

namespace semmap {

// Latest published snapshot. Publishing swaps a pointer under a lock, so a
// reader always sees one complete snapshot.
class SnapshotBoard {
 public:
  SnapshotBoard();

  void Publish(std::shared_ptr<const ObjectMapSnapshot> snapshot);
  std::shared_ptr<const ObjectMapSnapshot> Current() const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const ObjectMapSnapshot> current_;
};

class ServerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "host:port"; port 0 picks an ephemeral port. Throws ServerError.
std::pair<std::string, uint16_t> ParseAddress(const std::string& address);

// Line-oriented TCP endpoint: one request per line, one JSON line back.
// Each connection is served on its own thread against the snapshot current
// when the request line arrives.
class QueryServer {
 public:
  explicit QueryServer(std::shared_ptr<const SnapshotBoard> board);
  ~QueryServer();

  QueryServer(const QueryServer&) = delete;
  QueryServer& operator=(const QueryServer&) = delete;

  // Binds and starts accepting. Throws ServerError if the address cannot
  // be bound.
  void Start(const std::string& host, uint16_t port);
  // Closes the listener and all connections, then joins their threads.
  void Stop();

  uint16_t port() const { return port_; }

  static constexpr size_t kMaxLineBytes = 4096;

 private:
  struct Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void AcceptLoop();
  void Serve(Connection& connection);
  void ReapFinished();

  std::shared_ptr<const SnapshotBoard> board_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex connections_mutex_;
  std::list<Connection> connections_;
};

}  // namespace semmap

#endif  // SEMMAP_QUERY_SERVER_H_
