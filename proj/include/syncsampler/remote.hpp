#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "syncsampler/denoiser.hpp"

namespace httplib {
class Server;
}

namespace syncsampler {

inline constexpr std::size_t kMaxBodyBytes = 64u << 20;

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RemoteError : public std::runtime_error {
public:
    RemoteError(int status, const std::string& body);
    int status() const { return status_; }

private:
    int status_;
};

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

// Little-endian float32, base64-encoded.
std::string encode_float32(std::span<const double> values);
std::vector<double> decode_float32(const std::string& text);

nlohmann::json encode_query(const DenoiserQuery& q);
DenoiserQuery decode_query(const nlohmann::json& j);

struct RemoteEndpoint {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string path = "/denoise";
    double timeout_seconds = 60.0;
};

// Accepts "http://host:port/path".
RemoteEndpoint parse_endpoint(const std::string& url);

Tensor remote_denoise(const RemoteEndpoint& endpoint, const DenoiserQuery& q);

// Denoiser whose ε comes from an HTTP backend; x0 follows by Tweedie.
class RemoteDenoiser : public Denoiser {
public:
    RemoteDenoiser(RemoteEndpoint endpoint, Schedule sched,
                   std::optional<std::string> condition = std::nullopt);

    const Schedule& schedule() const override { return sched_; }
    Prediction predict(const Tensor& x_t, int t) const override;

private:
    RemoteEndpoint endpoint_;
    Schedule sched_;
    std::optional<std::string> condition_;
};

// Serves a local denoiser over the wire format. Used for loopback tests and
// as a reference backend.
class DenoiserService {
public:
    explicit DenoiserService(const Denoiser& denoiser);
    ~DenoiserService();
    DenoiserService(const DenoiserService&) = delete;
    DenoiserService& operator=(const DenoiserService&) = delete;

    // Binds to an ephemeral port on host and starts serving; returns the port.
    int start(const std::string& host = "127.0.0.1");
    void stop();

private:
    const Denoiser& denoiser_;
    std::unique_ptr<httplib::Server> server_;
    std::thread worker_;
};

}  // namespace syncsampler
