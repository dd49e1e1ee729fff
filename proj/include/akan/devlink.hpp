#pragma once
// Mock single-device measurement rig over a line protocol, and time-multiplexed
// network evaluation against it.
//
// Request:  "MEAS v0 v1 v2 v3 v4 v5 v6 [settle_s]\n"
// Reply:    "OK <current_nA>\n" | "ERR parse\n" | "ERR range <detail>\n"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "akan/errors.hpp"
#include "akan/network.hpp"

namespace akan {

inline constexpr double kDefaultSettleSeconds = 10e-6;

struct Endpoint {
    std::string host = "127.0.0.1";
    unsigned short port = 0;

    /// "host:port" or ":port".
    static Endpoint parse(std::string_view text);
    std::string to_string() const;
};

struct ServerConfig {
    std::shared_ptr<const DeviceModel> device;
    double settle_seconds = kDefaultSettleSeconds;
    Endpoint endpoint;  // port 0 picks a free port
};

struct ParsedRequest {
    ElectrodeVector voltages{};
    double settle_seconds = 0.0;
};

/// Parses one request line (without the newline). Returns nullopt when malformed.
std::optional<ParsedRequest> parse_request(std::string_view line, double default_settle);
std::string format_request(std::span<const double, kElectrodes> v);

/// Evaluates one request line without the settle delay; returns the reply line with its newline.
std::string handle_request_line(const DeviceModel& device, std::string_view line);

/// Threaded TCP server. Each connection is served in order on its own thread; all
/// measurements share one device lock (one physical device).
class MeasurementServer {
public:
    explicit MeasurementServer(ServerConfig config);
    ~MeasurementServer();
    MeasurementServer(const MeasurementServer&) = delete;
    MeasurementServer& operator=(const MeasurementServer&) = delete;

    /// Binds and starts accepting on a background thread. Throws DevlinkError if the endpoint cannot be bound.
    void start();
    /// start() then block until stop() is called from another thread.
    void run();
    void stop();

    unsigned short port() const noexcept;
    std::uint64_t requests_served() const noexcept;

    /// Fault injection: after `n` more replies the server closes the connection that sends the next request.
    void drop_after(std::uint64_t n);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Synchronous client; one request in flight.
class DeviceClient {
public:
    DeviceClient(const Endpoint& endpoint);
    ~DeviceClient();
    DeviceClient(const DeviceClient&) = delete;
    DeviceClient& operator=(const DeviceClient&) = delete;

    /// Current in nA. Throws RangeError on "ERR range", DevlinkError on any other failure.
    double measure(std::span<const double, kElectrodes> v, std::optional<double> settle_seconds = std::nullopt);
    /// Sends a raw line and returns the reply without its newline.
    std::string exchange(std::string_view line);
    std::uint64_t requests_sent() const noexcept { return sent_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::uint64_t sent_ = 0;
};

/// Raised when the connection fails mid-inference.
class TimemuxError : public DevlinkError {
public:
    TimemuxError(const std::string& what, std::size_t sample, std::size_t completed, std::size_t per_sample)
        : DevlinkError(what), sample_(sample), completed_(completed), per_sample_(per_sample) {}
    std::size_t sample() const noexcept { return sample_; }
    /// Measurements completed for the failing sample.
    std::size_t completed() const noexcept { return completed_; }
    std::size_t per_sample() const noexcept { return per_sample_; }

private:
    std::size_t sample_;
    std::size_t completed_;
    std::size_t per_sample_;
};

/// One measurement per RNPU in (layer, src, dst, rnpu) order; summation, scaling and
/// readout happen client-side.
std::vector<double> timemux_infer(const AkanModel& model, std::span<const double> features, DeviceClient& client,
                                  std::size_t sample_index = 0);
std::vector<double> timemux_infer_batch(const AkanModel& model, std::span<const double> features, DeviceClient& client,
                                        const std::function<void(std::size_t done, std::size_t total)>& progress = {});

}  // namespace akan
