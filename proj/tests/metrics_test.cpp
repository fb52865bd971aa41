#include "support.hpp"

#include "attn/error.hpp"
#include "attn/metrics.hpp"

#include <doctest.h>

using namespace attn;
using testing::label;

TEST_CASE("shares on a hand-built session") {
    // A: 10 s content, B: 5 s management, both: 3 s, one_of: 2 s
    const auto s = testing::session("s", "x", "y", {{0, 10}, {10, 15}, {20, 23}, {30, 32}});
    const std::vector<LabeledUtterance> ls{label("s", 0, Recipient::student_a), label("s", 1, Recipient::student_b, Nature::management),
                                           label("s", 2, Recipient::both), label("s", 3, Recipient::one_of)};
    const auto sh = compute_shares(s, ls);
    CHECK(sh.a == doctest::Approx(0.5));
    CHECK(sh.b == doctest::Approx(0.25));
    CHECK(sh.both == doctest::Approx(0.15));
    CHECK(sh.one_of == doctest::Approx(0.1));
    CHECK(sh.student(Slot::b, Nature::management) == doctest::Approx(0.25));
    CHECK(sh.student(Slot::b, Nature::content) == 0.0);

    const auto span = compute_shares(s, ls, Denominator::session_span);
    CHECK(span.denominator_s == doctest::Approx(32));
    CHECK(span.a == doctest::Approx(10.0 / 32));
}

TEST_CASE("label problems are data errors") {
    const auto s = testing::session("s", "x", "y", {{0, 1}, {1, 2}});
    const std::vector<LabeledUtterance> missing{label("s", 0, Recipient::both)};
    CHECK_THROWS_AS(compute_shares(s, missing), data_error);
    const std::vector<LabeledUtterance> dup{label("s", 0, Recipient::both), label("s", 0, Recipient::both),
                                            label("s", 1, Recipient::both)};
    CHECK_THROWS_AS(compute_shares(s, dup), data_error);
    const std::vector<LabeledUtterance> na{label("s", 0, Recipient::both), label("s", 1, Recipient::na)};
    CHECK_THROWS_AS(compute_shares(s, na), data_error);
    const auto zero = testing::session("z", "x", "y", {{1, 1}});
    const std::vector<LabeledUtterance> zl{label("z", 0, Recipient::both)};
    CHECK_THROWS_AS(compute_shares(zero, zl), data_error);
}

TEST_CASE("labels for trimmed-away utterances are ignored") {
    auto s = testing::session("s", "x", "y", {{0, 1}, {40, 45}}, 1200, 30, 0);
    s = trim_to_copresence(s);
    const std::vector<LabeledUtterance> ls{label("s", 0, Recipient::student_a), label("s", 1, Recipient::student_b)};
    const auto sh = compute_shares(s, ls);
    CHECK(sh.b == doctest::Approx(1.0));
}

TEST_CASE("share invariants on random sessions") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<testing::U> us;
        std::vector<LabeledUtterance> ls;
        double t = 0;
        const int n = 1 + int(rng() % 30);
        for (int i = 0; i < n; ++i) {
            const double d = 0.1 + 10 * u(rng);
            us.push_back({t, t + d});
            t += d + u(rng);
            ls.push_back(label("s", std::size_t(i), kRecipients[rng() % 4], kNatures[rng() % 3]));
        }
        const auto s = testing::session("s", "x", "y", us);
        const auto sh = compute_shares(s, ls);
        CHECK(sh.a + sh.b + sh.both + sh.one_of == doctest::Approx(1.0).epsilon(1e-12));
        for (Recipient r : kRecipients) {
            double parts = 0;
            for (Nature k : kNatures) parts += sh.by_nature[index_of(r)][index_of(k)];
            CHECK(parts == doctest::Approx(sh.share(r)).epsilon(1e-12));
        }
        const auto span = compute_shares(s, ls, Denominator::session_span);
        CHECK(span.a + span.b + span.both + span.one_of <= 1.0 + 1e-12);

        // Rescaling every timestamp leaves talk-time shares unchanged.
        const double k = 0.5 + 3 * u(rng);
        auto scaled = s;
        for (auto& x : scaled.utterances) {
            x.start_s *= k;
            x.end_s *= k;
        }
        const auto sc = compute_shares(scaled, ls);
        CHECK(sc.a == doctest::Approx(sh.a).epsilon(1e-12));
        CHECK(sc.one_of == doctest::Approx(sh.one_of).epsilon(1e-12));
    }
}

TEST_CASE("relative achievement view") {
    const auto s = testing::session("s", "x", "y", {{0, 6}, {6, 10}});
    const std::vector<LabeledUtterance> ls{label("s", 0, Recipient::student_a), label("s", 1, Recipient::student_b)};
    const auto sh = compute_shares(s, ls);
    const auto lo = testing::student("x", Gender::female, Race::black, ElStatus::el, -1.0);
    const auto hi = testing::student("y", Gender::male, Race::black, ElStatus::el, 1.0);
    const auto r = shares_by_relative_achievement(sh, compose(lo, hi));
    CHECK(r.lower_minus_higher_pp == doctest::Approx(20.0));
    // swapping which student is lower flips the sign
    const auto flipped = shares_by_relative_achievement(sh, compose(hi, lo));
    CHECK(flipped.lower_minus_higher_pp == doctest::Approx(-20.0));
    CHECK_THROWS_AS(shares_by_relative_achievement(sh, compose(lo, lo)), data_error);
}

TEST_CASE("serialized shares have two rows per session") {
    const auto s = testing::session("s", "x", "y", {{0, 1}});
    const std::vector<LabeledUtterance> ls{label("s", 0, Recipient::student_a)};
    const auto text = serialize_shares({compute_shares(s, ls)}, {s});
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.find("s,x+y,A,x,1,1,0,0,0,0,1,1") != std::string::npos);
}
