#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "promptweight/errors.hpp"
#include "promptweight/scoring.hpp"

namespace promptweight {

using json = nlohmann::json;

HttpBackend::HttpBackend(std::string base_url, RetryPolicy retry, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), retry_(retry), timeout_(timeout) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

namespace {

template <typename Send>
std::string with_retries(const std::string& what, const RetryPolicy& retry, Send send) {
    auto backoff = retry.initial_backoff;
    std::string last_error = "no attempt made";
    for (int attempt = 1; attempt <= std::max(retry.attempts, 1); ++attempt) {
        httplib::Result res = send();
        if (res) {
            if (res->status != 200)
                throw BackendError(what + ": HTTP " + std::to_string(res->status) + " " +
                                   res->body.substr(0, 200));
            return res->body;
        }
        last_error = httplib::to_string(res.error());
        if (attempt < retry.attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw BackendError(what + ": transport failure after " + std::to_string(retry.attempts) +
                       " attempts (" + last_error + ")");
}

json parse_body(const std::string& what, const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw BackendError(what + ": malformed response body (" + e.what() + ")");
    }
}

std::string image_payload(const VariantRef& v) {
    if (!v.pixels) throw BackendError("remote backend needs image pixels");
    const auto png = encode_png(*v.pixels);
    return httplib::detail::base64_encode(std::string(png.begin(), png.end()));
}

std::vector<std::string> prompt_texts(std::span<const Prompt> prompts) {
    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(p.text);
    return out;
}

}  // namespace

std::string HttpBackend::post(const std::string& path, const std::string& body) const {
    return with_retries("POST " + base_url_ + path, retry_, [&] {
        httplib::Client cli(base_url_);
        cli.set_connection_timeout(timeout_);
        cli.set_read_timeout(timeout_);
        return cli.Post(path, body, "application/json");
    });
}

std::string HttpBackend::get(const std::string& path) const {
    return with_retries("GET " + base_url_ + path, retry_, [&] {
        httplib::Client cli(base_url_);
        cli.set_connection_timeout(timeout_);
        cli.set_read_timeout(timeout_);
        return cli.Get(path);
    });
}

std::vector<std::string> HttpBackend::answer_vqa(const VariantRef& v,
                                                 std::span<const Prompt> prompts) const {
    const json req = {{"image_b64", image_payload(v)}, {"questions", prompt_texts(prompts)}};
    const json res = parse_body("/v1/vqa", post("/v1/vqa", req.dump()));
    if (!res.contains("answers") || !res["answers"].is_array())
        throw BackendError("/v1/vqa: response lacks an answers array");
    std::vector<std::string> out;
    for (const auto& a : res["answers"]) {
        if (!a.is_string()) throw BackendError("/v1/vqa: non-string answer");
        out.push_back(a.get<std::string>());
    }
    if (out.size() != prompts.size())
        throw BackendError("/v1/vqa: " + std::to_string(out.size()) + " answers for " +
                           std::to_string(prompts.size()) + " questions");
    return out;
}

std::vector<double> HttpBackend::score_itr(const VariantRef& v,
                                           std::span<const Prompt> prompts) const {
    const json req = {{"image_b64", image_payload(v)}, {"texts", prompt_texts(prompts)}};
    const json res = parse_body("/v1/itr", post("/v1/itr", req.dump()));
    if (!res.contains("similarities") || !res["similarities"].is_array())
        throw BackendError("/v1/itr: response lacks a similarities array");
    std::vector<double> out;
    for (const auto& s : res["similarities"]) {
        if (!s.is_number()) throw BackendError("/v1/itr: non-numeric similarity");
        const double x = s.get<double>();
        if (!(x >= -1.0 && x <= 1.0)) throw BackendError("/v1/itr: similarity outside [-1, 1]");
        out.push_back(x);
    }
    if (out.size() != prompts.size())
        throw BackendError("/v1/itr: " + std::to_string(out.size()) + " similarities for " +
                           std::to_string(prompts.size()) + " texts");
    return out;
}

std::vector<std::string> HttpBackend::health() const {
    const json res = parse_body("/v1/health", get("/v1/health"));
    if (res.value("status", "") != "ok") throw BackendError("/v1/health: status is not ok");
    std::vector<std::string> models;
    if (res.contains("models") && res["models"].is_array())
        for (const auto& m : res["models"])
            if (m.is_string()) models.push_back(m.get<std::string>());
    return models;
}

}  // namespace promptweight
