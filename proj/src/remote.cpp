#include "syncsampler/remote.hpp"

#include <bit>
#include <cstring>
#include <regex>

#include <httplib.h>
#include <openssl/evp.h>

#include "syncsampler/diffusion.hpp"

namespace syncsampler {

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

RemoteError::RemoteError(int status, const std::string& body)
    : std::runtime_error("remote denoiser returned HTTP " + std::to_string(status) +
                         (body.empty() ? "" : ": " + body.substr(0, 200))),
      status_(status) {}

std::string base64_encode(std::span<const unsigned char> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw ProtocolError("base64: length not a multiple of 4");
    std::vector<unsigned char> out(3 * (text.size() / 4));
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw ProtocolError("base64: invalid input");
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string encode_float32(std::span<const double> values) {
    std::vector<unsigned char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        std::memcpy(bytes.data() + 4 * i, &f, 4);
    }
    return base64_encode(bytes);
}

std::vector<double> decode_float32(const std::string& text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() % 4 != 0) throw ProtocolError("float32 payload length not a multiple of 4");
    std::vector<double> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + 4 * i, 4);
        out[i] = f;
    }
    return out;
}

nlohmann::json encode_query(const DenoiserQuery& q) {
    nlohmann::json j;
    j["t"] = q.t;
    j["condition"] = q.condition ? nlohmann::json(*q.condition) : nlohmann::json(nullptr);
    j["shape"] = q.x_t.shape();
    j["data"] = encode_float32(q.x_t.values());
    return j;
}

DenoiserQuery decode_query(const nlohmann::json& j) {
    try {
        DenoiserQuery q;
        q.t = j.at("t").get<int>();
        if (j.contains("condition") && !j["condition"].is_null())
            q.condition = j["condition"].get<std::string>();
        const auto shape = j.at("shape").get<Shape>();
        auto data = decode_float32(j.at("data").get<std::string>());
        if (data.size() != shape_size(shape))
            throw ProtocolError("payload has " + std::to_string(data.size()) + " values, shape " +
                                shape_string(shape) + " needs " + std::to_string(shape_size(shape)));
        q.x_t = Tensor(shape, std::move(data));
        return q;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed request: ") + e.what());
    }
}

RemoteEndpoint parse_endpoint(const std::string& url) {
    static const std::regex re(R"(^http://([^:/]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw std::invalid_argument("bad endpoint URL: " + url);
    RemoteEndpoint ep;
    ep.host = m[1];
    ep.port = m[2].matched ? std::stoi(m[2]) : 80;
    if (m[3].matched) ep.path = m[3];
    return ep;
}

Tensor remote_denoise(const RemoteEndpoint& endpoint, const DenoiserQuery& q) {
    const std::string body = encode_query(q).dump();
    if (body.size() > kMaxBodyBytes) throw ProtocolError("request body exceeds 64 MiB");

    httplib::Client client(endpoint.host, endpoint.port);
    const auto secs = static_cast<time_t>(endpoint.timeout_seconds);
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    auto res = client.Post(endpoint.path, body, "application/json");
    if (!res) throw TransportError("POST " + endpoint.path + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) throw RemoteError(res->status, res->body);
    if (res->body.size() > kMaxBodyBytes) throw ProtocolError("response body exceeds 64 MiB");

    std::vector<double> eps;
    try {
        eps = decode_float32(nlohmann::json::parse(res->body).at("eps").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed response: ") + e.what());
    }
    if (eps.size() != q.x_t.size())
        throw ProtocolError("response has " + std::to_string(eps.size()) + " values, expected " +
                            std::to_string(q.x_t.size()));
    return Tensor(q.x_t.shape(), std::move(eps));
}

RemoteDenoiser::RemoteDenoiser(RemoteEndpoint endpoint, Schedule sched,
                               std::optional<std::string> condition)
    : endpoint_(std::move(endpoint)), sched_(std::move(sched)), condition_(std::move(condition)) {}

Prediction RemoteDenoiser::predict(const Tensor& x_t, int t) const {
    Tensor eps = remote_denoise(endpoint_, {x_t, t, condition_});
    Tensor x0 = tweedie_x0(x_t, t, eps, sched_);
    return {std::move(eps), std::move(x0)};
}

DenoiserService::DenoiserService(const Denoiser& denoiser)
    : denoiser_(denoiser), server_(std::make_unique<httplib::Server>()) {
    server_->set_payload_max_length(kMaxBodyBytes);
    server_->Post("/denoise", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const DenoiserQuery q = decode_query(nlohmann::json::parse(req.body));
            const Tensor eps = denoiser_.eps(q.x_t, q.t);
            res.set_content(nlohmann::json{{"eps", encode_float32(eps.values())}}.dump(),
                            "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(e.what(), "text/plain");
        }
    });
}

DenoiserService::~DenoiserService() { stop(); }

int DenoiserService::start(const std::string& host) {
    const int port = server_->bind_to_any_port(host);
    if (port < 0) throw TransportError("cannot bind denoiser service on " + host);
    worker_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void DenoiserService::stop() {
    if (worker_.joinable()) {
        server_->stop();
        worker_.join();
    }
}

}  // namespace syncsampler
