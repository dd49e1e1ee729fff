#include "akan/devlink.hpp"

#include <sys/socket.h>

#include <atomic>
#include <boost/asio.hpp>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <list>
#include <mutex>
#include <thread>

#include "akan/textio.hpp"

namespace akan {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

Endpoint Endpoint::parse(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw ArgumentError("endpoint must look like host:port, got '" + std::string(text) + "'");
    Endpoint e;
    if (colon > 0) e.host = std::string(text.substr(0, colon));
    const std::string port(text.substr(colon + 1));
    char* end = nullptr;
    const long p = std::strtol(port.c_str(), &end, 10);
    if (port.empty() || *end != '\0' || p < 0 || p > 65535) throw ArgumentError("bad port in endpoint '" + std::string(text) + "'");
    e.port = static_cast<unsigned short>(p);
    return e;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

std::optional<ParsedRequest> parse_request(std::string_view line, double default_settle) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
    auto tokens = textio::split_ws(line);
    if (tokens.size() != 1 + kElectrodes && tokens.size() != 2 + kElectrodes) return std::nullopt;
    if (tokens[0] != "MEAS") return std::nullopt;
    ParsedRequest req;
    req.settle_seconds = default_settle;
    for (std::size_t e = 0; e < kElectrodes; ++e) {
        auto v = textio::parse_double(tokens[1 + e]);
        if (!v || !std::isfinite(*v)) return std::nullopt;
        req.voltages[e] = *v;
    }
    if (tokens.size() == 2 + kElectrodes) {
        auto s = textio::parse_double(tokens.back());
        if (!s || !std::isfinite(*s) || *s < 0.0) return std::nullopt;
        req.settle_seconds = *s;
    }
    return req;
}

std::string format_request(std::span<const double, kElectrodes> v) {
    return "MEAS " + textio::join_doubles(std::span<const double>(v.data(), v.size())) + "\n";
}

namespace {

std::string evaluate(const DeviceModel& device, const ElectrodeVector& v) {
    try {
        return "OK " + textio::format_double(device.forward(v)) + "\n";
    } catch (const RangeError& e) {
        return std::string("ERR range ") + e.what() + "\n";
    } catch (const Error& e) {
        return std::string("ERR device ") + e.what() + "\n";
    }
}

}  // namespace

std::string handle_request_line(const DeviceModel& device, std::string_view line) {
    auto req = parse_request(line, 0.0);
    if (!req) return "ERR parse\n";
    return evaluate(device, req->voltages);
}

// ---------------------------------------------------------------------------
// Server

struct MeasurementServer::Impl {
    ServerConfig config;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::thread accept_thread;
    std::mutex device_mutex;

    std::mutex conn_mutex;
    std::list<std::pair<std::shared_ptr<tcp::socket>, std::thread>> connections;

    std::atomic<bool> stopping{false};
    std::atomic<std::uint64_t> served{0};
    std::atomic<std::int64_t> drop_budget{-1};
    std::mutex stop_mutex;
    std::condition_variable stopped_cv;
    bool stopped = false;
    unsigned short bound_port = 0;

    void serve(std::shared_ptr<tcp::socket> sock) {
        asio::streambuf buf;
        boost::system::error_code ec;
        while (!stopping) {
            asio::read_until(*sock, buf, '\n', ec);
            if (ec) break;
            std::istream is(&buf);
            std::string line;
            std::getline(is, line);
            if (drop_budget.load() == 0) {
                sock->close(ec);
                break;
            }
            std::string reply;
            auto req = parse_request(line, config.settle_seconds);
            if (!req) {
                reply = "ERR parse\n";
            } else {
                std::lock_guard lock(device_mutex);
                if (req->settle_seconds > 0.0) {
                    std::this_thread::sleep_for(std::chrono::duration<double>(req->settle_seconds));
                }
                reply = evaluate(*config.device, req->voltages);
            }
            // count before replying so a client never observes its reply ahead of the counter
            ++served;
            if (drop_budget.load() > 0) --drop_budget;
            asio::write(*sock, asio::buffer(reply), ec);
            if (ec) break;
        }
    }

    void accept_loop() {
        while (!stopping) {
            auto sock = std::make_shared<tcp::socket>(io);
            boost::system::error_code ec;
            acceptor.accept(*sock, ec);
            if (stopping) break;
            if (ec) continue;
            sock->set_option(tcp::no_delay(true), ec);
            std::lock_guard lock(conn_mutex);
            connections.emplace_back(sock, std::thread([this, sock] { serve(sock); }));
        }
    }
};

MeasurementServer::MeasurementServer(ServerConfig config) : impl_(std::make_unique<Impl>()) {
    if (!config.device) throw ArgumentError("measurement server needs a device model");
    if (!(config.settle_seconds >= 0.0) || !std::isfinite(config.settle_seconds)) {
        throw ArgumentError("settle delay must be finite and >= 0");
    }
    impl_->config = std::move(config);
}

MeasurementServer::~MeasurementServer() { stop(); }

void MeasurementServer::start() {
    auto& im = *impl_;
    boost::system::error_code ec;
    const auto addr = asio::ip::make_address(im.config.endpoint.host, ec);
    if (ec) throw DevlinkError("bad listen address '" + im.config.endpoint.host + "'");
    tcp::endpoint ep(addr, im.config.endpoint.port);
    im.acceptor.open(ep.protocol(), ec);
    if (!ec) im.acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
    if (!ec) im.acceptor.bind(ep, ec);
    if (!ec) im.acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw DevlinkError("cannot listen on " + im.config.endpoint.to_string() + ": " + ec.message());
    im.bound_port = im.acceptor.local_endpoint().port();
    im.accept_thread = std::thread([&im] { im.accept_loop(); });
}

void MeasurementServer::run() {
    start();
    std::unique_lock lock(impl_->stop_mutex);
    impl_->stopped_cv.wait(lock, [&] { return impl_->stopped; });
}

void MeasurementServer::stop() {
    auto& im = *impl_;
    if (im.stopping.exchange(true)) return;
    if (im.accept_thread.joinable()) {
        // wake the blocking accept
        boost::system::error_code ec;
        tcp::socket poke(im.io);
        poke.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), im.bound_port), ec);
        if (ec) ::shutdown(im.acceptor.native_handle(), SHUT_RDWR);
        im.accept_thread.join();
    }
    {
        std::lock_guard lock(im.conn_mutex);
        for (auto& [sock, thread] : im.connections) ::shutdown(sock->native_handle(), SHUT_RDWR);
    }
    for (auto& [sock, thread] : im.connections) {
        if (thread.joinable()) thread.join();
    }
    boost::system::error_code ec;
    im.acceptor.close(ec);
    {
        std::lock_guard lock(im.stop_mutex);
        im.stopped = true;
    }
    im.stopped_cv.notify_all();
}

unsigned short MeasurementServer::port() const noexcept { return impl_->bound_port; }
std::uint64_t MeasurementServer::requests_served() const noexcept { return impl_->served.load(); }
void MeasurementServer::drop_after(std::uint64_t n) { impl_->drop_budget = static_cast<std::int64_t>(n); }

// ---------------------------------------------------------------------------
// Client

struct DeviceClient::Impl {
    asio::io_context io;
    tcp::socket socket{io};
    asio::streambuf buf;
};

DeviceClient::DeviceClient(const Endpoint& endpoint) : impl_(std::make_unique<Impl>()) {
    boost::system::error_code ec;
    tcp::resolver resolver(impl_->io);
    auto results = resolver.resolve(endpoint.host, std::to_string(endpoint.port), ec);
    if (!ec) asio::connect(impl_->socket, results, ec);
    if (ec) throw DevlinkError("cannot connect to " + endpoint.to_string() + ": " + ec.message());
    impl_->socket.set_option(tcp::no_delay(true), ec);
}

DeviceClient::~DeviceClient() = default;

std::string DeviceClient::exchange(std::string_view line) {
    std::string out(line);
    if (out.empty() || out.back() != '\n') out += '\n';
    boost::system::error_code ec;
    asio::write(impl_->socket, asio::buffer(out), ec);
    if (ec) throw DevlinkError("send failed: " + ec.message());
    ++sent_;
    asio::read_until(impl_->socket, impl_->buf, '\n', ec);
    if (ec) throw DevlinkError("connection lost waiting for reply: " + ec.message());
    std::istream is(&impl_->buf);
    std::string reply;
    std::getline(is, reply);
    return reply;
}

double DeviceClient::measure(std::span<const double, kElectrodes> v, std::optional<double> settle_seconds) {
    std::string line = format_request(v);
    if (settle_seconds) {
        line.pop_back();
        line += " " + textio::format_double(*settle_seconds) + "\n";
    }
    const std::string reply = exchange(line);
    if (reply.starts_with("OK ")) {
        auto value = textio::parse_double(std::string_view(reply).substr(3));
        if (!value || !std::isfinite(*value)) throw DevlinkError("malformed reply '" + reply + "'");
        return *value;
    }
    if (reply.starts_with("ERR range")) throw RangeError("server: " + reply.substr(4));
    throw DevlinkError("server replied '" + reply + "'");
}

// ---------------------------------------------------------------------------
// Time-multiplexed inference

std::vector<double> timemux_infer(const AkanModel& model, std::span<const double> features, DeviceClient& client,
                                  std::size_t sample_index) {
    ClampStats stats;
    auto encoded = encode_features(model, features, &stats);
    const DeviceModel& device = *model.device;
    const std::size_t per_sample = model.active_rnpu_count();
    std::size_t done = 0;
    auto measure = [&](const RnpuSite& site, const ElectrodeVector& e) {
        try {
            const double current = client.measure(e);
            ++done;
            return device.normalize(current);
        } catch (const RangeError&) {
            throw;
        } catch (const DevlinkError& err) {
            throw TimemuxError("time-multiplexed inference aborted at sample " + std::to_string(sample_index) +
                                   ", layer " + std::to_string(site.layer) + " edge " + std::to_string(site.src) +
                                   "->" + std::to_string(site.dst) + " rnpu " + std::to_string(site.rnpu) + " after " +
                                   std::to_string(done) + " of " + std::to_string(per_sample) +
                                   " measurements: " + err.what(),
                               sample_index, done, per_sample);
        }
    };
    return network_forward(model, model.params, std::move(encoded), measure, stats);
}

std::vector<double> timemux_infer_batch(const AkanModel& model, std::span<const double> features, DeviceClient& client,
                                        const std::function<void(std::size_t, std::size_t)>& progress) {
    const std::size_t nf = model.topology.inputs();
    if (features.size() % nf != 0) throw StructuralError("feature matrix size is not a multiple of the input width");
    const std::size_t n = features.size() / nf;
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto y = timemux_infer(model, features.subspan(i * nf, nf), client, i);
        out.insert(out.end(), y.begin(), y.end());
        if (progress) progress(i + 1, n);
    }
    return out;
}

}  // namespace akan
