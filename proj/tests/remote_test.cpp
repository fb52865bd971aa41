#include "support.hpp"

#include "attn/error.hpp"
#include "attn/remote.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <thread>

using namespace attn;
using nlohmann::json;

namespace {

// Stub classifier: answers with the name-in-context heuristic, or with a
// canned body when `forced` is set.
class Stub {
public:
    Stub() {
        server_.Post("/classify", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            if (failures_left > 0) {
                --failures_left;
                res.status = 503;
                return;
            }
            if (!forced.empty()) {
                res.set_content(forced, "application/json");
                return;
            }
            res.set_content(answer(json::parse(req.body)).dump(), "application/json");
        });
        server_.Post("/classify_batch", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            json out = json::array();
            for (const auto& r : json::parse(req.body)) out.push_back(answer(r));
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Stub() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> hits{0};
    std::atomic<int> failures_left{0};
    std::string forced;

private:
    static json answer(const json& r) {
        ClassifierContext ctx{r.at("pretext").get<std::vector<std::string>>(), r.at("target").get<std::string>()};
        json j{{"session_id", r.at("session_id")},
               {"utterance_index", r.at("utterance_index")},
               {"recipient", static_cast<int>(classify_name_in_context(ctx))},
               {"nature", std::string(to_string(classify_nature_lexicon(ctx.target, NatureLexicon::defaults())))}};
        j["scores"] = {{"recipient", {0.25, 0.25, 0.25, 0.25}}, {"nature", {0.5, 0.25, 0.25}}};
        return j;
    }

    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

remote::Options fast(const std::string& url) {
    remote::Options o;
    o.endpoint = url;
    o.backoff = std::chrono::milliseconds(1);
    o.timeout = std::chrono::milliseconds(2000);
    return o;
}

SessionRecord demo_session() {
    std::vector<testing::U> us;
    const char* texts[] = {"[Student A], read this", "Good", "[Student B], mute please", "You are awesome",
                           "[Student A] and [Student B]"};
    for (int i = 0; i < 25; ++i) us.push_back({double(i), i + 0.5, texts[i % 5]});
    return testing::session("s1", "a", "b", us);
}

} // namespace

TEST_CASE("request encoding") {
    remote::Request r{"s", 3, {{"one", "two"}, "three"}};
    const auto j = json::parse(remote::encode_request(r));
    CHECK(j.at("session_id") == "s");
    CHECK(j.at("utterance_index") == 3);
    CHECK(j.at("pretext").size() == 2);
    CHECK(j.at("target") == "three");
    r.context.pretext.assign(11, "x");
    CHECK_THROWS_AS(remote::encode_request(r), std::invalid_argument);
}

TEST_CASE("response decoding rejects contract violations") {
    const remote::Request r{"s", 0, {{}, "t"}};
    CHECK(remote::decode_response(R"({"recipient":2,"nature":"management"})", r).recipient == Recipient::student_b);
    CHECK_THROWS_AS(remote::decode_response(R"({"recipient":7,"nature":"content"})", r), protocol_error);
    CHECK_THROWS_AS(remote::decode_response(R"({"recipient":-1,"nature":"content"})", r), protocol_error);
    CHECK_THROWS_AS(remote::decode_response(R"({"recipient":"1","nature":"content"})", r), protocol_error);
    CHECK_THROWS_AS(remote::decode_response(R"({"recipient":1,"nature":"chat"})", r), protocol_error);
    CHECK_THROWS_AS(remote::decode_response(R"({"nature":"content"})", r), protocol_error);
    CHECK_THROWS_AS(remote::decode_response("not json", r), protocol_error);
    CHECK_THROWS_AS(remote::decode_response(R"({"recipient":1,"nature":"content","session_id":"other"})", r),
                    protocol_error);
    CHECK_THROWS_AS(
        remote::decode_response(R"({"recipient":1,"nature":"content","scores":{"recipient":[0.5,0.5,0.5,0]}})", r),
        protocol_error);
    CHECK_THROWS_AS(remote::decode_response(R"({"recipient":1,"nature":"content","scores":{"recipient":[1,0]}})", r),
                    protocol_error);
}

TEST_CASE("stub server round trip matches the local heuristic") {
    Stub stub;
    const auto s = demo_session();
    const auto requests = remote::corpus_requests({s});
    REQUIRE(requests.size() == 25);
    const auto local = classify_corpus({s}, HeuristicKind::name_context, NatureLexicon::defaults());

    SUBCASE("single calls, concurrent") {
        const auto got = remote::classify_remote_all(requests, fast(stub.url()));
        REQUIRE(got.size() == local.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].utterance_index == local[i].utterance_index);
            CHECK(got[i].recipient == local[i].recipient);
            CHECK(got[i].nature == local[i].nature);
            CHECK(got[i].source == LabelSource::remote);
            CHECK(got[i].recipient_scores.has_value());
        }
        CHECK(stub.hits == 25);
    }
    SUBCASE("batched") {
        auto o = fast(stub.url());
        o.batch_size = 10;
        const auto got = remote::classify_remote_all(requests, o);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].recipient == local[i].recipient);
        CHECK(stub.hits == 3);
    }
}

TEST_CASE("out-of-range label from the server is a protocol error") {
    Stub stub;
    stub.forced = R"({"recipient":7,"nature":"content"})";
    const remote::Request r{"s", 0, {{}, "hi"}};
    CHECK_THROWS_AS(remote::classify_remote(r, fast(stub.url())), protocol_error);
    const std::vector<remote::Request> many(6, r);
    CHECK_THROWS_AS(remote::classify_remote_all(many, fast(stub.url())), protocol_error);
}

TEST_CASE("transient server errors are retried") {
    Stub stub;
    stub.failures_left = 2;
    const remote::Request r{"s", 0, {{}, "[Student B]"}};
    CHECK(remote::classify_remote(r, fast(stub.url())).recipient == Recipient::student_b);
    CHECK(stub.hits == 3);

    stub.failures_left = 10;
    stub.hits = 0;
    auto o = fast(stub.url());
    o.max_retries = 2;
    try {
        remote::classify_remote(r, o);
        FAIL("expected transport_error");
    } catch (const transport_error& e) {
        CHECK(e.attempts() == 3);
    }
    CHECK(stub.hits == 3);
}

TEST_CASE("unreachable endpoint gives a transport error after all retries") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    } // closed again: nothing listens on this port now
    auto o = fast("http://127.0.0.1:" + std::to_string(port));
    o.max_retries = 3;
    const remote::Request r{"s", 0, {{}, "hi"}};
    try {
        remote::classify_remote(r, o);
        FAIL("expected transport_error");
    } catch (const transport_error& e) {
        CHECK(e.attempts() == 4);
    }
}
