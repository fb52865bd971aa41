#pragma once

#include "attn/classify.hpp"

#include <chrono>
#include <span>
#include <string>
#include <vector>

namespace attn::remote {

// Client side of the classifier wire protocol.
//
//   POST /classify        {"session_id","utterance_index","pretext":[..<=10],"target"}
//                      -> {"recipient":0..3,"nature":"content"|"relationship"|"management",
//                          "scores":{"recipient":[4 numbers],"nature":[3 numbers]}}
//   POST /classify_batch  [request, ...] -> [response, ...] in request order
//
// Bodies are JSON (application/json).

struct Options {
    std::string endpoint;                     ///< scheme://host:port
    int max_retries = 3;                      ///< attempts = 1 + max_retries
    std::chrono::milliseconds backoff{50};    ///< delay before the first retry
    double backoff_factor = 2.0;
    std::chrono::milliseconds timeout{5000};  ///< per request, connect and read
    std::size_t max_in_flight = 4;
    std::size_t batch_size = 0;               ///< 0: one /classify call per utterance
};

struct Request {
    std::string session_id;
    std::size_t utterance_index = 0;
    ClassifierContext context;
};

std::string encode_request(const Request& r);
/// Parses and validates one response object; throws protocol_error.
LabeledUtterance decode_response(std::string_view body, const Request& r);

/// One utterance. Throws transport_error after exhausting retries,
/// protocol_error on a malformed or out-of-range response.
LabeledUtterance classify_remote(const Request& request, const Options& options);

/// All requests with at most options.max_in_flight concurrent calls.
/// Output is aligned with `requests` regardless of completion order.
std::vector<LabeledUtterance> classify_remote_all(std::span<const Request> requests, const Options& options);

/// Requests for every utterance of every kept session.
std::vector<Request> corpus_requests(const std::vector<SessionRecord>& sessions);

} // namespace attn::remote
