#include "support.hpp"

#include "attn/error.hpp"
#include "attn/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace attn;
using testing::U;

namespace {

std::string line(const std::string& body) {
    return R"({"session_id":"s1","student_a":"x","student_b":"y","planned_duration_s":1200,"entry_a_s":0,"entry_b_s":0,)" +
           body + "}";
}

} // namespace

TEST_CASE("empty transcript file gives no sessions") {
    CHECK(parse_transcripts("").empty());
    CHECK(parse_transcripts("\n\n").empty());
}

TEST_CASE("one well-formed session parses with its utterances") {
    const auto v = parse_transcripts(line(
        R"("utterances":[{"start_s":0,"end_s":1,"text":"a"},{"start_s":2,"end_s":3,"text":"b"},{"start_s":4,"end_s":5,"text":"c"}])"));
    REQUIRE(v.size() == 1);
    CHECK(v[0].utterances.size() == 3);
    CHECK(v[0].pair_id == "x+y");
    CHECK(v[0].utterances[2].text == "c");
}

TEST_CASE("utterances are sorted by start and reindexed") {
    const auto v = parse_transcripts(
        line(R"("utterances":[{"start_s":5,"end_s":6,"text":"late"},{"start_s":0,"end_s":1,"text":"early"}])"));
    CHECK(v[0].utterances[0].text == "early");
    CHECK(v[0].utterances[0].index == 0);
    CHECK(v[0].utterances[1].index == 1);
}

TEST_CASE("parse errors carry the line number") {
    const std::string good = line(R"("utterances":[])");
    SUBCASE("end before start names the session and index") {
        const std::string bad = line(R"("utterances":[{"start_s":3,"end_s":2,"text":"a"}])");
        try {
            parse_transcripts(good + "\n" + bad, "t.jsonl");
            FAIL("expected a parse error");
        } catch (const parse_error& e) {
            CHECK(e.line() == 2);
            CHECK(std::string(e.what()).find("session s1 utterance 0") != std::string::npos);
        }
    }
    SUBCASE("overlap") {
        CHECK_THROWS_AS(parse_transcripts(line(
                            R"("utterances":[{"start_s":0,"end_s":3,"text":"a"},{"start_s":2,"end_s":4,"text":"b"}])")),
                        parse_error);
    }
    SUBCASE("missing timestamp") {
        CHECK_THROWS_AS(parse_transcripts(line(R"("utterances":[{"start_s":0,"text":"a"}])")), parse_error);
    }
    SUBCASE("not json") { CHECK_THROWS_AS(parse_transcripts("{oops"), parse_error); }
    SUBCASE("negative start") {
        CHECK_THROWS_AS(parse_transcripts(line(R"("utterances":[{"start_s":-1,"end_s":0,"text":"a"}])")),
                        parse_error);
    }
}

TEST_CASE("transcript round trip parse -> serialize -> parse") {
    auto s = testing::session("s9", "b", "a", {{0.5, 1.25, "héllo, \"quoted\""}, {2, 2, "zero length"}}, 900, 0.1, 0.2);
    s.pair_id = "custom";
    const auto back = parse_transcript_line(serialize_transcript(s), 1);
    CHECK(back == s);
    CHECK(serialize_transcript(back) == serialize_transcript(s));
}

TEST_CASE("roster parsing and linking") {
    const std::string csv = "student_id,gender,race,el_status,grade,baseline_raw\n"
                            "x,female,black,el,K,100\n"
                            "y,male,non_black,non_el,K,120\n";
    const Roster r = parse_roster(csv);
    CHECK(r.size() == 2);
    CHECK(r.at("x").gender == Gender::female);
    CHECK(*r.at("y").baseline_raw == 120.0);

    auto both = testing::session("s1", "x", "y", {{0, 700}});
    auto missing = testing::session("s2", "x", "z", {{0, 700}});
    const auto linked = link_roster({both, missing}, r);
    CHECK(linked[0].kept);
    CHECK(linked[0].student_a->student_id == "x");
    CHECK_FALSE(linked[1].kept);
    CHECK(linked[1].exclusion_reason == "unmatched_metadata");

    CHECK_THROWS_AS(parse_roster(csv + "x,male,black,el,K,90\n"), parse_error);
    CHECK_THROWS_AS(parse_roster("student_id,gender,race,el_status,grade,baseline_raw\nq,other,black,el,K,1\n"),
                    data_error);
}

TEST_CASE("trim to copresence") {
    const auto s = testing::session("s", "a", "b", {{45, 50}, {75, 80}}, 1200, 30, 60);
    const auto t = trim_to_copresence(s);
    REQUIRE(t.utterances.size() == 1);
    CHECK(t.utterances[0].start_s == 75);
    CHECK(t.utterances[0].index == 1); // labels keep addressing the original index
    CHECK(trim_to_copresence(t) == t);

    const auto z = testing::session("s", "a", "b", {{0, 1}, {2, 3}});
    CHECK(trim_to_copresence(z) == z);
}

TEST_CASE("exclusions use strictly less than half the planned length") {
    auto with_span = [](double span) { return testing::session("s", "a", "b", {{0, 10}, {span - 10, span}}, 1200); };
    CHECK_FALSE(apply_exclusions(with_span(540)).kept);
    CHECK(apply_exclusions(with_span(540)).exclusion_reason == "too_short");
    CHECK(apply_exclusions(with_span(600)).kept);
    CHECK(apply_exclusions(with_span(1100)).kept);
    const auto before = with_span(540);
    CHECK(apply_exclusions(before).utterances == before.utterances);
    CHECK_THROWS_AS(apply_exclusions(testing::session("s", "a", "b", {{0, 1}}, 0)), data_error);
}

TEST_CASE("split sizes and determinism") {
    const auto s = split_sizes(10, {0.7, 0.1, 0.2});
    CHECK(s.train == 7);
    CHECK(s.validation == 1);
    CHECK(s.test == 2);
    std::vector<int> items(10);
    for (int i = 0; i < 10; ++i) items[static_cast<std::size_t>(i)] = i;
    const auto all = split_dataset(items, {1.0, 0.0, 0.0}, 3);
    CHECK(all.train.size() == 10);
    CHECK(all.test.empty());
    const auto p1 = split_dataset(items, {0.7, 0.1, 0.2}, 42);
    const auto p2 = split_dataset(items, {0.7, 0.1, 0.2}, 42);
    CHECK(p1.train == p2.train);
    CHECK(p1.test == p2.test);
    std::multiset<int> seen(p1.train.begin(), p1.train.end());
    seen.insert(p1.validation.begin(), p1.validation.end());
    seen.insert(p1.test.begin(), p1.test.end());
    CHECK(seen == std::multiset<int>(items.begin(), items.end()));
    CHECK_THROWS_AS(split_sizes(10, {0.5, 0.1, 0.2}), data_error);
}

TEST_CASE("describe_corpus") {
    const auto a = testing::session("a", "x", "y", {{0, 50, "one two"}, {60, 100, "three"}});
    const auto b = testing::session("b", "x", "y", {{0, 300, "four five six"}});
    const auto d = describe_corpus({a, b});
    CHECK(d.duration_s.mean == doctest::Approx(200));
    CHECK(*d.duration_s.sd == doctest::Approx(141.4213562373095));
    CHECK(d.words.total == 6);
    CHECK_FALSE(describe_corpus({a}).duration_s.sd.has_value());
    CHECK_THROWS_AS(describe_corpus({}), data_error);
}

TEST_CASE("synthetic corpus at transcript scale matches its settings") {
    auto c = synth::GeneratorConfig::paper();
    c.n_pairs = 300;
    const auto corpus = synth::generate(c);
    const auto d = describe_corpus(corpus.sessions);
    CHECK(std::abs(d.duration_s.mean - c.mean_span_s) < 0.05 * c.mean_span_s);
    CHECK(std::abs(d.utterances.mean - c.mean_utterances) < 0.05 * c.mean_utterances);
    CHECK(std::abs(d.duration_s.mean - c.mean_span_s) < 2 * *d.duration_s.sd);
}

TEST_CASE("preprocessing properties on random sessions") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<U> us;
        double t = 0;
        for (int k = 0; k < 20; ++k) {
            t += 5 * u(rng);
            const double d = 10 * u(rng);
            us.push_back({t, t + d});
            t += d;
        }
        const auto s = testing::session("s", "a", "b", us, 400, 60 * u(rng), 60 * u(rng));
        const auto trimmed = trim_to_copresence(s);
        CHECK(trimmed.utterances.size() <= s.utterances.size());
        CHECK(trim_to_copresence(trimmed) == trimmed);
        const auto ex = apply_exclusions(trimmed);
        CHECK(ex.utterances == trimmed.utterances);
        if (ex.kept) {
            double total = 0;
            for (const auto& x : ex.utterances) total += x.duration();
            CHECK(total <= ex.observed_duration() + 1e-9);
        }
    }
}

TEST_CASE("corpus digest ignores order and tracks content") {
    const auto a = testing::session("a", "x", "y", {{0, 1}});
    const auto b = testing::session("b", "x", "y", {{0, 2}});
    CHECK(corpus_digest({a, b}) == corpus_digest({b, a}));
    CHECK(corpus_digest({a, b}) != corpus_digest({a}));
    CHECK(corpus_digest({a}).size() == 16);
}
