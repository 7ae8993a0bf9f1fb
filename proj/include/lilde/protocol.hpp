#ifndef LILDE_PROTOCOL_HPP
#define LILDE_PROTOCOL_HPP

// Line protocol between the optimizer and an external evaluator process.
//
//   optimizer -> evaluator      evaluator -> optimizer
//   INIT <d>                    READY
//   EVAL <id> <x_0> ... <x_d-1> RESULT <id> <value> | FAULT <id> <message...>
//   SHUTDOWN
//
// Lines are UTF-8 and end in '\n'. Numbers are written in the shortest form
// (at most 17 significant digits) that reads back to the identical double.

#include <lilde/objective.hpp>
#include <lilde/types.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

namespace lilde::protocol {

struct EvalRequest {
    std::uint64_t id = 0;
    std::vector<double> x;
};

struct EvalResponse {
    std::uint64_t id = 0;
    std::optional<double> value;
    std::string fault; // set when value is empty

    bool ok() const { return value.has_value(); }
};

/// A request cannot be put on the wire (empty or non-finite vector).
class EncodingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The peer sent something outside the protocol. Fatal.
class ProtocolError : public EvaluationError {
public:
    ProtocolError(const std::string& what, std::string line)
        : EvaluationError(what + ": '" + line + "'", false), _line(std::move(line))
    {
    }

    const std::string& line() const { return _line; }

private:
    std::string _line;
};

/// The evaluator answered FAULT. Transient: the engine retries once.
class FaultError : public EvaluationError {
public:
    FaultError(std::uint64_t id, std::string message)
        : EvaluationError("evaluator fault on request " + std::to_string(id) + ": " + message, true),
          _message(std::move(message))
    {
    }

    const std::string& message() const { return _message; }

private:
    std::string _message;
};

/// No response within the per-request timeout. Fatal: the stream may be out of step.
class TimeoutError : public EvaluationError {
public:
    explicit TimeoutError(const std::string& what) : EvaluationError(what, false) {}
};

/// The evaluator process closed its output or exited. Fatal.
class ProcessError : public EvaluationError {
public:
    explicit ProcessError(const std::string& what) : EvaluationError(what, false) {}
};

/// Round-trip exact decimal text, '.' decimal point, locale independent.
std::string format_number(double value);

/// Full-precision parse; rejects trailing garbage, inf and nan.
std::optional<double> parse_number(std::string_view text);

/// `EVAL <id> <x...>\n`
std::string encode_request(const EvalRequest& request);

/// Parses `RESULT <id> <value>` or `FAULT <id> <message...>`. Throws ProtocolError otherwise.
EvalResponse parse_response(std::string_view line);

// Evaluator side, used by the reference evaluator and tests.
EvalRequest parse_request(std::string_view line);
std::string encode_result(std::uint64_t id, double value);
std::string encode_fault(std::uint64_t id, std::string_view message);

/// One evaluator process, one outstanding request at a time.
class Session : public Objective {
public:
    static constexpr std::chrono::milliseconds default_timeout{60'000};

    /// Spawns `command` through /bin/sh and performs the INIT/READY handshake.
    Session(const std::string& command, std::size_t dimension, std::chrono::milliseconds timeout = default_timeout);
    ~Session() override;

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    std::size_t dimension() const override { return _dimension; }
    double evaluate(std::span<const double> x, const EvalContext& ctx) override;
    bool concurrent() const override { return false; }
    std::string name() const override { return "external(" + _command + ")"; }

    /// Sends SHUTDOWN and reaps the child. Idempotent.
    void close();

    std::uint64_t requests_sent() const { return _next_id; }
    void set_timeout(std::chrono::milliseconds timeout) { _timeout = timeout; }

private:
    void write_line(const std::string& line);
    std::string read_line();

    std::string _command;
    std::size_t _dimension;
    std::chrono::milliseconds _timeout;
    pid_t _pid = -1;
    int _to_child = -1;
    int _from_child = -1;
    std::string _buffer;
    std::uint64_t _next_id = 0;
    bool _broken = false;
};

/// Several sessions of the same evaluator. Calls check out an idle session,
/// so up to `size` evaluations run at once.
class SessionPool : public Objective {
public:
    SessionPool(const std::string& command, std::size_t dimension, std::size_t size,
        std::chrono::milliseconds timeout = Session::default_timeout);

    std::size_t dimension() const override { return _dimension; }
    double evaluate(std::span<const double> x, const EvalContext& ctx) override;
    bool concurrent() const override { return true; }
    std::string name() const override { return "session-pool"; }

    std::size_t size() const { return _sessions.size(); }

private:
    std::size_t _dimension;
    std::vector<std::unique_ptr<Session>> _sessions;
    std::vector<bool> _busy;
    std::mutex _mutex;
    std::condition_variable _idle;
};

} // namespace lilde::protocol

#endif
