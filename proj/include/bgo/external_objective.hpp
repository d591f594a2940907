// Black-box objective backed by a user-supplied executable (POSIX only).
//
// Per evaluation the command runs under /bin/sh -c, receives the design
// point on stdin as one whitespace-separated line and must print a single
// real number on stdout and exit with status 0. The environment variable
// BGO_EVAL_SEED carries a 64-bit draw from the objective's random stream so
// that external stubs can reproduce a noise sequence.
#pragma once

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "optimizer.hpp"

namespace bgo {

struct ExternalCommand {
    std::string command;
    double timeout_seconds = 60.0;
};

namespace detail {

inline void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

inline std::string format_point(const DesignPoint& x) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Index i = 0; i < x.size(); ++i) os << (i ? " " : "") << x[i];
    os << '\n';
    return os.str();
}

/// Strict parse of one finite real surrounded by optional whitespace.
inline double parse_real(const std::string& text) {
    const char* begin = text.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw ObjectiveError("external objective: output is not a number: '" + text + "'");
    while (*end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
    if (*end != '\0') throw ObjectiveError("external objective: trailing output after the value: '" + text + "'");
    if (!std::isfinite(v)) throw ObjectiveError("external objective: non-finite value '" + text + "'");
    return v;
}

}  // namespace detail

/// Evaluate the command once at `x`. Throws ObjectiveError on timeout,
/// abnormal exit or unparsable output.
inline double evaluate_external(const ExternalCommand& cmd, const DesignPoint& x, std::uint64_t seed) {
    if (cmd.command.empty()) throw ObjectiveError("external objective: empty command");
    // A child that never reads stdin must not kill us through SIGPIPE.
    std::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2] = {-1, -1};
    int out_pipe[2] = {-1, -1};
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
        detail::close_fd(in_pipe[0]);
        detail::close_fd(in_pipe[1]);
        throw ObjectiveError(std::string("external objective: pipe failed: ") + std::strerror(errno));
    }
    const std::string seed_text = std::to_string(seed);

    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int* fd : {&in_pipe[0], &in_pipe[1], &out_pipe[0], &out_pipe[1]}) detail::close_fd(*fd);
        throw ObjectiveError(std::string("external objective: fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::setenv("BGO_EVAL_SEED", seed_text.c_str(), 1);
        ::execl("/bin/sh", "sh", "-c", cmd.command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    detail::close_fd(in_pipe[0]);
    detail::close_fd(out_pipe[1]);

    const std::string line = detail::format_point(x);
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t w = ::write(in_pipe[1], line.data() + written, line.size() - written);
        if (w < 0) {
            if (errno == EINTR) continue;
            break;  // child closed stdin; its output decides the outcome
        }
        written += static_cast<std::size_t>(w);
    }
    detail::close_fd(in_pipe[1]);

    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::duration<double>(cmd.timeout_seconds);
    std::string output;
    bool timed_out = false;
    char buf[4096];
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
        if (left <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{out_pipe[0], POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 1000)));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) continue;
        const ssize_t r = ::read(out_pipe[0], buf, sizeof buf);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) break;
        output.append(buf, static_cast<std::size_t>(r));
    }
    detail::close_fd(out_pipe[0]);

    int status = 0;
    if (timed_out) {
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        throw ObjectiveError("external objective: timed out after " + std::to_string(cmd.timeout_seconds) + " s");
    }
    // stdout closed; give the process the remaining time to exit
    for (;;) {
        const pid_t w = ::waitpid(pid, &status, WNOHANG);
        if (w == pid) break;
        if (w < 0 && errno != EINTR) break;
        if (clock::now() >= deadline) {
            ::kill(-pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            throw ObjectiveError("external objective: timed out waiting for exit");
        }
        ::usleep(1000);
    }
    if (WIFSIGNALED(status))
        throw ObjectiveError("external objective: killed by signal " + std::to_string(WTERMSIG(status)));
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw ObjectiveError("external objective: exit status " + std::to_string(WEXITSTATUS(status)));
    return detail::parse_real(output);
}

/// Wrap an executable as a StochasticObjective.
inline StochasticObjective external_objective(ExternalCommand cmd) {
    return [cmd = std::move(cmd)](const DesignPoint& x, Rng& rng) { return evaluate_external(cmd, x, rng()); };
}

}  // namespace bgo
