#pragma once

// Blocking subprocess execution with piped standard streams and a wall-clock
// timeout. POSIX only.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "divsat/error.hpp"

extern char** environ;

namespace divsat {

struct ProcessResult {
  int exit_code = -1;  // -1 when terminated by a signal
  std::string out;
  std::string err;
};

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline void make_pipe(Fd& read_end, Fd& write_end) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0)
    throw Error(Errc::spawn_error, std::string("pipe: ") + std::strerror(errno));
  read_end = Fd(fds[0]);
  write_end = Fd(fds[1]);
}

}  // namespace detail

/// Runs argv[0] (looked up on PATH) with `input` on its standard input and
/// collects both output streams. Throws Errc::timeout after killing the
/// child if it outlives `timeout`.
inline ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input,
                                 std::chrono::milliseconds timeout) {
  if (argv.empty()) throw Error(Errc::spawn_error, "empty command");
  detail::Fd in_r, in_w, out_r, out_w, err_r, err_w;
  detail::make_pipe(in_r, in_w);
  detail::make_pipe(out_r, out_w);
  detail::make_pipe(err_r, err_w);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_r.get(), STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_w.get(), STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err_w.get(), STDERR_FILENO);

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0)
    throw Error(Errc::spawn_error, "cannot start '" + argv[0] + "': " + std::strerror(rc));
  in_r.reset();
  out_w.reset();
  err_w.reset();

  // Writes to a child that exited early must not kill us.
  struct sigaction ignore {};
  struct sigaction previous {};
  ignore.sa_handler = SIG_IGN;
  ::sigaction(SIGPIPE, &ignore, &previous);

  ProcessResult result;
  std::size_t written = 0;
  if (input.empty())
    in_w.reset();
  else
    ::fcntl(in_w.get(), F_SETFL, ::fcntl(in_w.get(), F_GETFL) | O_NONBLOCK);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  bool timed_out = false;
  char buffer[65536];
  while (out_r.get() >= 0 || err_r.get() >= 0) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      timed_out = true;
      break;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd fds[3];
    nfds_t count = 0;
    int which[3];
    auto watch = [&](const detail::Fd& fd, short events, int tag) {
      if (fd.get() >= 0) {
        fds[count] = {fd.get(), events, 0};
        which[count++] = tag;
      }
    };
    watch(in_w, POLLOUT, 0);
    watch(out_r, POLLIN, 1);
    watch(err_r, POLLIN, 2);
    const int ready = ::poll(fds, count, static_cast<int>(std::min<long long>(remaining, 1000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (nfds_t i = 0; i < count; ++i) {
      if (fds[i].revents == 0) continue;
      if (which[i] == 0) {
        const ssize_t n = ::write(in_w.get(), input.data() + written, input.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        const bool retry = n < 0 && (errno == EAGAIN || errno == EINTR);
        if ((n < 0 && !retry) || written == input.size()) in_w.reset();
      } else {
        auto& fd = which[i] == 1 ? out_r : err_r;
        auto& sink = which[i] == 1 ? result.out : result.err;
        const ssize_t n = ::read(fd.get(), buffer, sizeof buffer);
        if (n > 0)
          sink.append(buffer, static_cast<std::size_t>(n));
        else if (n == 0 || errno != EINTR)
          fd.reset();
      }
    }
  }
  in_w.reset();
  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  ::sigaction(SIGPIPE, &previous, nullptr);
  if (timed_out)
    throw Error(Errc::timeout, "'" + argv[0] + "' exceeded " +
                                   std::to_string(timeout.count()) + " ms");
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

/// argv that runs `command` through /bin/sh with `args` appended as
/// positional parameters.
inline std::vector<std::string> shell_command(const std::string& command,
                                              const std::vector<std::string>& args = {}) {
  std::vector<std::string> argv{"/bin/sh", "-c", command + " \"$@\"", "sh"};
  argv.insert(argv.end(), args.begin(), args.end());
  return argv;
}

}  // namespace divsat
