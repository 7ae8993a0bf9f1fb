// Reference external evaluator: answers EVAL requests with ackley_max.
// Extra flags make it misbehave on purpose for testing.

#include <lilde/objectives.hpp>
#include <lilde/protocol.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

namespace proto = lilde::protocol;

int main(int argc, char** argv)
{
    CLI::App app{"Reference evaluator for the lilde line protocol"};
    std::size_t fault_every = 0;
    bool fault_always = false;
    std::size_t malformed_at = 0;
    std::size_t wrong_id_at = 0;
    std::size_t exit_at = 0;
    int sleep_ms = 0;
    app.add_option("--fault-every", fault_every, "Reply FAULT to every K-th request");
    app.add_flag("--fault-always", fault_always, "Reply FAULT to every request");
    app.add_option("--malformed-at", malformed_at, "Reply with a non-protocol line to the K-th request");
    app.add_option("--wrong-id-at", wrong_id_at, "Reply with a mismatched id to the K-th request");
    app.add_option("--exit-at", exit_at, "Exit without replying at the K-th request");
    app.add_option("--sleep-ms", sleep_ms, "Delay every reply");
    CLI11_PARSE(app, argc, argv);

    std::ios::sync_with_stdio(false);
    std::size_t dimension = 0;
    std::size_t count = 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.rfind("INIT ", 0) == 0) {
            dimension = std::stoul(line.substr(5));
            std::cout << "READY\n" << std::flush;
            continue;
        }
        if (line == "SHUTDOWN")
            return 0;

        proto::EvalRequest request;
        try {
            request = proto::parse_request(line);
        } catch (const std::exception& e) {
            std::cerr << "echo evaluator: " << e.what() << "\n";
            return 1;
        }
        ++count;
        if (sleep_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
        if (count == exit_at)
            return 3;
        if (count == malformed_at) {
            std::cout << "NONSENSE\n" << std::flush;
            continue;
        }
        if (count == wrong_id_at) {
            std::cout << proto::encode_result(request.id + 1, 0.0) << std::flush;
            continue;
        }
        if (fault_always || (fault_every > 0 && count % fault_every == 0)) {
            std::cout << proto::encode_fault(request.id, "simulated hardware fault") << std::flush;
            continue;
        }
        if (request.x.size() != dimension) {
            std::cout << proto::encode_fault(request.id, "expected " + std::to_string(dimension) + " components")
                      << std::flush;
            continue;
        }
        try {
            std::cout << proto::encode_result(request.id, lilde::ackley_max(request.x)) << std::flush;
        } catch (const std::exception& e) {
            std::cout << proto::encode_fault(request.id, e.what()) << std::flush;
        }
    }
    return 0;
}
