#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dershap/errors.hpp"
#include "dershap/gradients.hpp"

namespace dershap::gradients {

namespace {

void write_all(int fd, const char* data, std::size_t len, std::atomic<bool>& failed) {
    std::size_t off = 0;
    while (off < len) {
        ssize_t k = ::write(fd, data + off, len - off);
        if (k < 0) {
            if (errno == EINTR) continue;
            // Child closed its stdin (or died); the reader side reports
            // the real failure from the exit status.
            failed.store(true, std::memory_order_relaxed);
            return;
        }
        off += static_cast<std::size_t>(k);
    }
}

struct ParsedLine {
    bool ok;
    double value;
};

ParsedLine parse_reply(const std::string& line) {
    const char* s = line.c_str();
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(s, &end);
    if (end == s) return {false, 0.0};
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    if (*end != '\0') return {false, 0.0};
    return {true, v};
}

}  // namespace

std::vector<double> external_model_call(const std::string& command, const double* points,
                                        std::size_t n, std::size_t dimension) {
    // Writes from this process must fail with EPIPE, not kill it, when the
    // child exits early; the exit status carries the real diagnostic.
    static std::once_flag sigpipe_once;
    std::call_once(sigpipe_once, [] { std::signal(SIGPIPE, SIG_IGN); });

    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) {
        throw EvalError(std::string("pipe failed: ") + std::strerror(errno));
    }
    if (::pipe(from_child) != 0) {
        int e = errno;
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw EvalError(std::string("pipe failed: ") + std::strerror(e));
    }

    pid_t pid = ::fork();
    if (pid < 0) {
        int e = errno;
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        throw EvalError(std::string("fork failed: ") + std::strerror(e));
    }
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);

    // The writer streams request lines from its own thread while the main
    // thread drains replies, so neither side can deadlock on a full pipe.
    std::atomic<bool> write_failed{false};
    std::thread writer([&] {
        std::string buf;
        buf.reserve(1 << 16);
        char num[40];
        for (std::size_t r = 0; r < n; ++r) {
            if (write_failed.load(std::memory_order_relaxed)) break;
            const double* row = points + r * dimension;
            for (std::size_t j = 0; j < dimension; ++j) {
                std::snprintf(num, sizeof num, "%.17g", row[j]);
                buf += num;
                buf += (j + 1 < dimension) ? ' ' : '\n';
            }
            if (buf.size() >= (1 << 16)) {
                write_all(to_child[1], buf.data(), buf.size(), write_failed);
                buf.clear();
            }
        }
        if (!buf.empty() && !write_failed.load(std::memory_order_relaxed)) {
            write_all(to_child[1], buf.data(), buf.size(), write_failed);
        }
        ::close(to_child[1]);
    });

    std::vector<double> out;
    out.reserve(n);
    std::string pending;
    std::string error;
    std::int64_t error_row = -1;
    char rbuf[1 << 16];

    auto take_line = [&](const std::string& line) -> bool {
        if (out.size() >= n) {
            error = "external model produced more output lines than input points";
            return false;
        }
        ParsedLine p = parse_reply(line);
        auto row = static_cast<std::int64_t>(out.size());
        if (!p.ok) {
            error = "external model reply for row " + std::to_string(row) +
                    " is not a decimal float: '" + line + "'";
            error_row = row;
            return false;
        }
        if (!std::isfinite(p.value)) {
            error = "external model returned non-finite value for row " + std::to_string(row);
            error_row = row;
            return false;
        }
        out.push_back(p.value);
        return true;
    };

    for (;;) {
        ssize_t k = ::read(from_child[0], rbuf, sizeof rbuf);
        if (k < 0) {
            if (errno == EINTR) continue;
            if (error.empty()) {
                error = std::string("failed reading from external model: ") +
                        std::strerror(errno);
            }
            break;
        }
        if (k == 0) break;
        pending.append(rbuf, static_cast<std::size_t>(k));
        std::size_t start = 0;
        for (;;) {
            std::size_t nl = pending.find('\n', start);
            if (nl == std::string::npos) break;
            std::string line = pending.substr(start, nl - start);
            start = nl + 1;
            if (!error.empty() || !take_line(line)) {
                start = pending.size();
                break;
            }
        }
        pending.erase(0, start);
        if (!error.empty()) break;
    }
    // A final line without trailing newline still counts.
    if (error.empty() && !pending.empty()) {
        take_line(pending);
    }

    ::close(from_child[0]);
    write_failed.store(true, std::memory_order_relaxed);  // stop the writer if it is behind
    writer.join();

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFSIGNALED(status)) {
        throw EvalError("external model killed by signal " + std::to_string(WTERMSIG(status)));
    }
    int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (exit_code == 127 && out.empty()) {
        throw EvalError("external model command could not be started: " + command);
    }
    if (!error.empty()) {
        throw EvalError(error, error_row);
    }
    if (exit_code != 0) {
        throw EvalError("external model exited with status " + std::to_string(exit_code));
    }
    if (out.size() != n) {
        throw EvalError("external model produced " + std::to_string(out.size()) + " of " +
                        std::to_string(n) + " expected values");
    }
    return out;
}

}  // namespace dershap::gradients
