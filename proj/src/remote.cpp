#include "attn/remote.hpp"

#include "attn/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace attn::remote {

using nlohmann::json;

namespace {

json request_json(const Request& r) {
    return json{{"session_id", r.session_id},
                {"utterance_index", r.utterance_index},
                {"pretext", r.context.pretext},
                {"target", r.context.target}};
}

LabeledUtterance decode_object(const json& j, const Request& r) {
    if (!j.is_object()) throw protocol_error("response is not an object");
    auto rec = j.find("recipient");
    if (rec == j.end() || !rec->is_number_integer()) throw protocol_error("response lacks integer 'recipient'");
    const auto code = rec->get<long long>();
    auto recipient = (code >= 0 && code <= 3) ? recipient_from_code(static_cast<int>(code)) : std::nullopt;
    if (!recipient) throw protocol_error("recipient label out of range: " + std::to_string(code));

    auto nat = j.find("nature");
    if (nat == j.end() || !nat->is_string()) throw protocol_error("response lacks string 'nature'");
    LabeledUtterance l;
    try {
        l.nature = parse_nature(nat->get<std::string>());
    } catch (const data_error& e) {
        throw protocol_error(e.what());
    }
    if (auto sid = j.find("session_id"); sid != j.end() && sid->is_string() && *sid != r.session_id)
        throw protocol_error("response for session " + sid->get<std::string>() + " does not match request");
    if (auto idx = j.find("utterance_index");
        idx != j.end() && idx->is_number_integer() && idx->get<long long>() != static_cast<long long>(r.utterance_index))
        throw protocol_error("response utterance_index does not match request");

    if (auto sc = j.find("scores"); sc != j.end() && !sc->is_null()) {
        if (!sc->is_object()) throw protocol_error("'scores' is not an object");
        try {
            if (auto rs = sc->find("recipient"); rs != sc->end()) {
                auto v = rs->get<std::vector<double>>();
                if (v.size() != 4) throw protocol_error("recipient scores must have 4 entries");
                validate_scores(v);
                l.recipient_scores = std::array<double, 4>{v[0], v[1], v[2], v[3]};
            }
            if (auto ns = sc->find("nature"); ns != sc->end()) {
                auto v = ns->get<std::vector<double>>();
                if (v.size() != 3) throw protocol_error("nature scores must have 3 entries");
                validate_scores(v);
            }
        } catch (const json::exception& e) {
            throw protocol_error(std::string("malformed scores: ") + e.what());
        } catch (const data_error& e) {
            throw protocol_error(e.what());
        }
    }
    l.session_id = r.session_id;
    l.utterance_index = r.utterance_index;
    l.recipient = *recipient;
    l.source = LabelSource::remote;
    l.annotator_id = "remote";
    return l;
}

json parse_body(std::string_view body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw protocol_error(std::string("malformed response body: ") + e.what());
    }
}

/// POST with retries; returns the 2xx body.
std::string post(const Options& o, const std::string& path, const std::string& body) {
    const int attempts = 1 + std::max(0, o.max_retries);
    auto delay = o.backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client cli(o.endpoint);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(o.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(o.timeout - secs);
        cli.set_connection_timeout(secs.count(), usecs.count());
        cli.set_read_timeout(secs.count(), usecs.count());
        cli.set_write_timeout(secs.count(), usecs.count());
        if (!cli.is_valid()) throw transport_error("invalid classifier endpoint '" + o.endpoint + "'", attempt);

        auto res = cli.Post(path, body, "application/json");
        if (res) {
            if (res->status >= 200 && res->status < 300) return res->body;
            if (res->status != 429 && res->status < 500)
                throw protocol_error("classifier returned HTTP " + std::to_string(res->status) + ": " + res->body);
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            last_error = httplib::to_string(res.error());
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(delay.count()) * o.backoff_factor));
        }
    }
    throw transport_error("classifier at " + o.endpoint + path + " unreachable after " +
                              std::to_string(attempts) + " attempts: " + last_error,
                          attempts);
}

} // namespace

std::string encode_request(const Request& r) {
    if (r.context.pretext.size() > kContextWindow)
        throw std::invalid_argument("request pretext exceeds " + std::to_string(kContextWindow) + " lines");
    return request_json(r).dump();
}

LabeledUtterance decode_response(std::string_view body, const Request& r) { return decode_object(parse_body(body), r); }

LabeledUtterance classify_remote(const Request& request, const Options& options) {
    return decode_response(post(options, "/classify", encode_request(request)), request);
}

std::vector<LabeledUtterance> classify_remote_all(std::span<const Request> requests, const Options& options) {
    std::vector<LabeledUtterance> out(requests.size());
    if (requests.empty()) return out;

    const std::size_t unit = options.batch_size == 0 ? 1 : options.batch_size;
    const std::size_t n_units = (requests.size() + unit - 1) / unit;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto worker = [&] {
        while (true) {
            {
                std::lock_guard lk(failure_mu);
                if (failure) return;
            }
            const std::size_t u = next.fetch_add(1);
            if (u >= n_units) return;
            const std::size_t lo = u * unit, hi = std::min(requests.size(), lo + unit);
            try {
                if (options.batch_size == 0) {
                    out[lo] = classify_remote(requests[lo], options);
                    continue;
                }
                json arr = json::array();
                for (std::size_t i = lo; i < hi; ++i) {
                    encode_request(requests[i]);
                    arr.push_back(request_json(requests[i]));
                }
                const json resp = parse_body(post(options, "/classify_batch", arr.dump()));
                if (!resp.is_array() || resp.size() != hi - lo)
                    throw protocol_error("batch response must be an array of " + std::to_string(hi - lo) + " objects");
                for (std::size_t i = lo; i < hi; ++i) out[i] = decode_object(resp[i - lo], requests[i]);
            } catch (...) {
                std::lock_guard lk(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const std::size_t n_threads = std::max<std::size_t>(1, std::min(options.max_in_flight, n_units));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::vector<Request> corpus_requests(const std::vector<SessionRecord>& sessions) {
    std::vector<Request> out;
    for (const auto& s : sessions) {
        if (!s.kept) continue;
        for (std::size_t i = 0; i < s.utterances.size(); ++i)
            out.push_back({s.session_id, s.utterances[i].index, make_context(s, i)});
    }
    return out;
}

} // namespace attn::remote
