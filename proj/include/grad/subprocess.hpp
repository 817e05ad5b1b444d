#pragma once

#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <poll.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include "grad/errors.hpp"

extern char** environ;

namespace grad {

// A child process started through `/bin/sh -c`, with its stdin and stdout
// both attached to one end of a Unix socket pair. Writes use MSG_NOSIGNAL so
// a dead child surfaces as an error instead of SIGPIPE.
class Subprocess {
 public:
  explicit Subprocess(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      throw BridgeError(std::string("socketpair failed: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    // Own process group, so terminate() also reaches anything the shell forked.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
    posix_spawnattr_destroy(&attr);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
      ::close(fds[0]);
      throw BridgeError("cannot start bridge command '" + command + "': " + std::strerror(rc));
    }
    fd_ = fds[0];
  }

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;
  Subprocess(Subprocess&& other) noexcept
      : fd_(std::exchange(other.fd_, -1)), pid_(std::exchange(other.pid_, -1)),
        buffer_(std::move(other.buffer_)), status_(other.status_) {}
  Subprocess& operator=(Subprocess&& other) noexcept {
    if (this != &other) {
      terminate();
      fd_ = std::exchange(other.fd_, -1);
      pid_ = std::exchange(other.pid_, -1);
      buffer_ = std::move(other.buffer_);
      status_ = other.status_;
    }
    return *this;
  }
  ~Subprocess() { terminate(); }

  void write_all(std::string_view data) {
    while (!data.empty()) {
      ssize_t n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(std::string("bridge process is not accepting input: ") + std::strerror(errno));
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  // Next '\n'-terminated line without the terminator. Throws BridgeError on
  // EOF and BridgeTimeoutError if nothing complete arrives within `timeout`.
  std::string read_line(std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        throw BridgeTimeoutError("bridge process did not respond within " +
                                 std::to_string(timeout.count()) + " ms");
      }
      pollfd p{fd_, POLLIN, 0};
      int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[65536];
      ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(std::string("reading from bridge process failed: ") + std::strerror(errno));
      }
      if (n == 0) throw BridgeError("bridge process closed its output" + exit_description());
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  // Closes the channel and reaps the child, killing it if it lingers.
  void terminate(std::chrono::milliseconds grace = std::chrono::milliseconds(2000)) {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
    if (pid_ <= 0) return;
    auto deadline = std::chrono::steady_clock::now() + grace;
    while (std::chrono::steady_clock::now() < deadline) {
      if (reap(WNOHANG)) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ::kill(-pid_, SIGKILL);
    reap(0);
  }

  bool running() const { return fd_ >= 0; }

 private:
  bool reap(int flags) {
    int status = 0;
    pid_t r = ::waitpid(pid_, &status, flags);
    if (r == pid_ || (r < 0 && errno == ECHILD)) {
      pid_ = -1;
      status_ = status;
      return true;
    }
    return false;
  }

  std::string exit_description() {
    // Give the child a moment to finish exiting so the status is informative.
    for (int i = 0; i < 20 && pid_ > 0 && !reap(WNOHANG); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (!status_) return "";
    if (WIFEXITED(*status_)) return " (exit status " + std::to_string(WEXITSTATUS(*status_)) + ")";
    if (WIFSIGNALED(*status_)) return " (killed by signal " + std::to_string(WTERMSIG(*status_)) + ")";
    return "";
  }

  int fd_ = -1;
  pid_t pid_ = -1;
  std::string buffer_;
  std::optional<int> status_;
};

}  // namespace grad
