#include <lilde/protocol.hpp>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <fcntl.h>
#include <cstring>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

extern char** environ;

namespace lilde::protocol {

namespace {

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && line[pos] == ' ')
            ++pos;
        if (pos >= line.size())
            break;
        const std::size_t end = line.find(' ', pos);
        const std::size_t stop = end == std::string_view::npos ? line.size() : end;
        out.push_back(line.substr(pos, stop - pos));
        pos = stop;
    }
    return out;
}

std::string_view strip_eol(std::string_view line)
{
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
        line.remove_suffix(1);
    return line;
}

std::optional<std::uint64_t> parse_id(std::string_view text)
{
    std::uint64_t id = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        return std::nullopt;
    return id;
}

void ignore_sigpipe()
{
    // A dead evaluator must surface as a write error, not kill the optimizer.
    static const bool once = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)once;
}

} // namespace

std::string format_number(double value)
{
    // Shortest text that parses back to the same double (at most 17 significant digits).
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{})
        throw EncodingError("cannot format number");
    return std::string(buf, ptr);
}

std::optional<double> parse_number(std::string_view text)
{
    if (text.empty())
        return std::nullopt;
    const char* first = text.data();
    if (*first == '+')
        ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
        return std::nullopt;
    return value;
}

std::string encode_request(const EvalRequest& request)
{
    if (request.x.empty())
        throw EncodingError("EVAL request needs at least one component");
    std::string line = "EVAL " + std::to_string(request.id);
    for (std::size_t n = 0; n < request.x.size(); ++n) {
        if (!std::isfinite(request.x[n]))
            throw EncodingError("EVAL request component " + std::to_string(n) + " is not finite");
        line += ' ';
        line += format_number(request.x[n]);
    }
    line += '\n';
    return line;
}

EvalResponse parse_response(std::string_view raw)
{
    const std::string_view line = strip_eol(raw);
    const auto tokens = split(line);
    if (tokens.size() < 2)
        throw ProtocolError("malformed response", std::string(line));
    const auto id = parse_id(tokens[1]);
    if (!id)
        throw ProtocolError("malformed request id", std::string(line));

    EvalResponse response;
    response.id = *id;
    if (tokens[0] == "RESULT") {
        if (tokens.size() != 3)
            throw ProtocolError("RESULT takes exactly one value", std::string(line));
        const auto value = parse_number(tokens[2]);
        if (!value)
            throw ProtocolError("unparseable RESULT value", std::string(line));
        response.value = *value;
        return response;
    }
    if (tokens[0] == "FAULT") {
        // Message is everything after the id, spacing preserved.
        const std::size_t at = static_cast<std::size_t>(tokens[1].data() + tokens[1].size() - line.data());
        std::string_view message = line.substr(at);
        while (!message.empty() && message.front() == ' ')
            message.remove_prefix(1);
        response.fault = std::string(message);
        return response;
    }
    throw ProtocolError("unknown response verb", std::string(line));
}

EvalRequest parse_request(std::string_view raw)
{
    const std::string_view line = strip_eol(raw);
    const auto tokens = split(line);
    if (tokens.size() < 3 || tokens[0] != "EVAL")
        throw ProtocolError("malformed request", std::string(line));
    const auto id = parse_id(tokens[1]);
    if (!id)
        throw ProtocolError("malformed request id", std::string(line));
    EvalRequest request;
    request.id = *id;
    for (std::size_t t = 2; t < tokens.size(); ++t) {
        const auto value = parse_number(tokens[t]);
        if (!value)
            throw ProtocolError("unparseable EVAL component", std::string(line));
        request.x.push_back(*value);
    }
    return request;
}

std::string encode_result(std::uint64_t id, double value)
{
    return "RESULT " + std::to_string(id) + " " + format_number(value) + "\n";
}

std::string encode_fault(std::uint64_t id, std::string_view message)
{
    return "FAULT " + std::to_string(id) + " " + std::string(message) + "\n";
}

Session::Session(const std::string& command, std::size_t dimension, std::chrono::milliseconds timeout)
    : _command(command), _dimension(dimension), _timeout(timeout)
{
    if (dimension < 1)
        throw ConfigError("session: dimension must be >= 1");
    ignore_sigpipe();

    int in_pipe[2];  // parent writes -> child stdin
    int out_pipe[2]; // child stdout -> parent reads
    if (pipe2(in_pipe, O_CLOEXEC) != 0)
        throw ProcessError(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw ProcessError(std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::string sh = "/bin/sh";
    std::string dash_c = "-c";
    std::string cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    const int rc = posix_spawn(&_pid, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    _to_child = in_pipe[1];
    _from_child = out_pipe[0];
    if (rc != 0) {
        _pid = -1;
        close();
        throw ProcessError("cannot spawn evaluator '" + command + "': " + std::strerror(rc));
    }

    try {
        write_line("INIT " + std::to_string(dimension) + "\n");
        const std::string reply = read_line();
        if (strip_eol(reply) != "READY")
            throw ProtocolError("expected READY after INIT", reply);
    } catch (...) {
        _broken = true;
        close();
        throw;
    }
}

Session::~Session()
{
    close();
}

void Session::write_line(const std::string& line)
{
    std::size_t sent = 0;
    while (sent < line.size()) {
        const ssize_t n = ::write(_to_child, line.data() + sent, line.size() - sent);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            _broken = true;
            throw ProcessError("evaluator '" + _command + "' is not accepting input: " + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::string Session::read_line()
{
    const auto deadline = std::chrono::steady_clock::now() + _timeout;
    for (;;) {
        const std::size_t eol = _buffer.find('\n');
        if (eol != std::string::npos) {
            std::string line = _buffer.substr(0, eol);
            _buffer.erase(0, eol + 1);
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            _broken = true;
            throw TimeoutError("evaluator '" + _command + "' did not answer within "
                + std::to_string(_timeout.count()) + " ms");
        }
        pollfd pfd{_from_child, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0) {
            if (errno == EINTR)
                continue;
            _broken = true;
            throw ProcessError(std::string("poll: ") + std::strerror(errno));
        }
        if (ready == 0)
            continue;
        char chunk[4096];
        const ssize_t n = ::read(_from_child, chunk, sizeof(chunk));
        if (n < 0) {
            if (errno == EINTR)
                continue;
            _broken = true;
            throw ProcessError(std::string("read: ") + std::strerror(errno));
        }
        if (n == 0) {
            _broken = true;
            throw ProcessError("evaluator '" + _command + "' closed its output");
        }
        _buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

double Session::evaluate(std::span<const double> x, const EvalContext&)
{
    if (_broken || _pid < 0)
        throw ProcessError("evaluator session '" + _command + "' is no longer usable");
    if (x.size() != _dimension)
        throw EncodingError("session expects " + std::to_string(_dimension) + " components, got "
            + std::to_string(x.size()));

    EvalRequest request{_next_id++, std::vector<double>(x.begin(), x.end())};
    write_line(encode_request(request));
    const std::string line = read_line();
    EvalResponse response;
    try {
        response = parse_response(line);
    } catch (...) {
        _broken = true;
        throw;
    }
    if (response.id != request.id) {
        _broken = true;
        throw ProtocolError("response id " + std::to_string(response.id) + " does not match outstanding request "
                + std::to_string(request.id),
            line);
    }
    if (!response.ok())
        throw FaultError(response.id, response.fault);
    return *response.value;
}

void Session::close()
{
    if (_to_child >= 0) {
        if (!_broken) {
            const char bye[] = "SHUTDOWN\n";
            [[maybe_unused]] const ssize_t ignored = ::write(_to_child, bye, sizeof(bye) - 1);
        }
        ::close(_to_child);
        _to_child = -1;
    }
    if (_from_child >= 0) {
        ::close(_from_child);
        _from_child = -1;
    }
    if (_pid > 0) {
        int status = 0;
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
        while (::waitpid(_pid, &status, WNOHANG) == 0) {
            if (std::chrono::steady_clock::now() > deadline) {
                ::kill(_pid, SIGKILL);
                ::waitpid(_pid, &status, 0);
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        _pid = -1;
    }
}

SessionPool::SessionPool(const std::string& command, std::size_t dimension, std::size_t size,
    std::chrono::milliseconds timeout)
    : _dimension(dimension)
{
    if (size < 1)
        throw ConfigError("session pool: size must be >= 1");
    for (std::size_t s = 0; s < size; ++s)
        _sessions.push_back(std::make_unique<Session>(command, dimension, timeout));
    _busy.assign(size, false);
}

double SessionPool::evaluate(std::span<const double> x, const EvalContext& ctx)
{
    std::size_t slot = 0;
    {
        std::unique_lock lock(_mutex);
        _idle.wait(lock, [&] {
            for (std::size_t s = 0; s < _busy.size(); ++s) {
                if (!_busy[s]) {
                    slot = s;
                    return true;
                }
            }
            return false;
        });
        _busy[slot] = true;
    }
    struct Release {
        SessionPool& pool;
        std::size_t slot;
        ~Release()
        {
            {
                std::lock_guard lock(pool._mutex);
                pool._busy[slot] = false;
            }
            pool._idle.notify_one();
        }
    } release{*this, slot};
    return _sessions[slot]->evaluate(x, ctx);
}

} // namespace lilde::protocol
