#include "support.hpp"

#include "attn/error.hpp"
#include "attn/metrics.hpp"
#include "attn/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace attn;
using namespace attn::synth;

namespace {

GeneratorConfig small(std::size_t pairs = 40) {
    auto c = GeneratorConfig::paper();
    c.n_pairs = pairs;
    return c;
}

GeneratorConfig exact_zero_noise(std::size_t pairs) {
    auto c = small(pairs);
    c.noise = {0, 0, 0, 0, false};
    return c;
}

// Planted composition cell on one axis: 0 mixed, 1 both marked, 2 neither.
int comp(bool x, bool y) { return x != y ? 0 : x ? 1 : 2; }

// Expected individual share of `self` (fraction) written from the generating model.
double planted_share(const GeneratorConfig& c, const StudentRecord& self, const StudentRecord& other) {
    const AxisEffects* fx[] = {&c.gender, &c.race, &c.el};
    const bool ms[] = {self.gender == Gender::female, self.race == Race::black, self.el_status == ElStatus::el};
    const bool mo[] = {other.gender == Gender::female, other.race == Race::black, other.el_status == ElStatus::el};
    double lvl = 0, gap = c.lower_bonus;
    for (int k = 0; k < 3; ++k) {
        const int cc = comp(ms[k], mo[k]);
        gap += fx[k]->gap[std::size_t(cc)];
        lvl += cc == 0 ? (ms[k] ? fx[k]->level[0] : 0.0) : fx[k]->level[std::size_t(cc)];
    }
    const double base = (100 - c.base_both - c.base_one_of) / 2;
    const double sign = *self.baseline_raw < *other.baseline_raw ? 1.0 : -1.0;
    return (base + lvl + 0.5 * sign * gap) / 100;
}

double planted_one_of(const GeneratorConfig& c, const StudentRecord& a, const StudentRecord& b) {
    double o = c.base_one_of;
    const int cg = comp(a.gender == Gender::female, b.gender == Gender::female);
    const int cr = comp(a.race == Race::black, b.race == Race::black);
    const int ce = comp(a.el_status == ElStatus::el, b.el_status == ElStatus::el);
    if (cg) o += c.gender.ambiguity[std::size_t(cg - 1)];
    if (cr) o += c.race.ambiguity[std::size_t(cr - 1)];
    if (ce) o += c.el.ambiguity[std::size_t(ce - 1)];
    return o / 100;
}

} // namespace

TEST_CASE("generation is deterministic and independent of the job count") {
    const auto c = small();
    const auto x = generate(c, 1), y = generate(c, 1), z = generate(c, 3);
    CHECK(x.sessions == y.sessions);
    CHECK(x.labels == y.labels);
    CHECK(x.sessions == z.sessions);
    CHECK(x.labels == z.labels);
    CHECK(x.truth.run_id == corpus_digest(x.sessions));
    auto d = c;
    d.seed = 2;
    CHECK(generate(d).truth.run_id != x.truth.run_id);
}

TEST_CASE("generated corpus is well formed") {
    auto c = small(30);
    c.sessions_per_pair = 3;
    const auto corpus = generate(c);
    CHECK(corpus.sessions.size() == 90);
    CHECK(corpus.roster.size() == 60);
    CHECK(corpus.sessions.front().session_id == "s000001-1");
    std::size_t utts = 0;
    for (const auto& s : corpus.sessions) {
        utts += s.utterances.size();
        CHECK(corpus.roster.count(s.student_a_id) == 1);
        CHECK(apply_exclusions(trim_to_copresence(s)).kept);
        CHECK(serialize_transcript(parse_transcript_line(serialize_transcript(s), 1)) == serialize_transcript(s));
    }
    CHECK(corpus.labels.size() == utts);
}

TEST_CASE("zero-noise exact mode hits every planted share") {
    const auto c = exact_zero_noise(60);
    const auto corpus = generate(c);
    const auto grouped = group_labels(corpus.labels);
    for (const auto& s : corpus.sessions) {
        const auto& a = corpus.roster.at(s.student_a_id);
        const auto& b = corpus.roster.at(s.student_b_id);
        if (*a.baseline_raw == *b.baseline_raw) continue;
        const auto sh = compute_shares(s, grouped.at(s.session_id));
        CHECK(sh.a == doctest::Approx(planted_share(c, a, b)).epsilon(1e-9));
        CHECK(sh.b == doctest::Approx(planted_share(c, b, a)).epsilon(1e-9));
        CHECK(sh.one_of == doctest::Approx(planted_one_of(c, a, b)).epsilon(1e-9));
    }
}

TEST_CASE("null preset plants no group effects") {
    const auto t = expected_estimands(GeneratorConfig::null());
    CHECK(t.at("study1/overall") == 0.0);
    for (const auto& [k, v] : t)
        if (k.find("study2/") == 0 && k.find("intercept") == std::string::npos) CHECK(v == 0.0);
}

TEST_CASE("paper preset truth has the headline values") {
    const auto t = expected_estimands(GeneratorConfig::paper());
    // composition gap offsets average to zero at 0.5 marginals
    CHECK(t.at("study1/overall") * 100 == doctest::Approx(2.3));
    CHECK(t.at("study2/gender/overall/female_mixed") * 100 == doctest::Approx(-5.2));
    CHECK(t.at("study2/race/overall/other_other") * 100 == doctest::Approx(-5.9));
    CHECK(t.at("study2/el/overall/nonel_nonel") * 100 == doctest::Approx(-5.7));
    CHECK(t.count("robustness/bound/gender/female_mixed") == 1);
}

TEST_CASE("validation") {
    auto c = small();
    CHECK_NOTHROW(validate(c));
    c.base_both = 99;
    CHECK_THROWS_AS(validate(c), data_error);
    c = small();
    c.nature_mix = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(validate(c), data_error);
    c = small();
    c.noise.student_sd = 50;
    CHECK_THROWS_AS(validate(c), data_error);
}

TEST_CASE("config and truth documents round trip") {
    auto c = small(17);
    c.seed = 99;
    c.noise.iid_labels = false;
    const auto back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.n_pairs == 17);
    CHECK(config_from_json(R"({"preset":"null","n_pairs":5})").gender.level[0] == 0.0);
    CHECK(config_from_json(R"({"n_pairs":5})").gender.level[0] == doctest::Approx(-5.2));
    CHECK_THROWS_AS(config_from_json("{nope"), data_error);

    const auto corpus = generate(small(20));
    const auto t = truth_from_json(truth_to_json(corpus.truth, c));
    CHECK(t.run_id == corpus.truth.run_id);
    CHECK(t.estimands == corpus.truth.estimands);
}

TEST_CASE("truth check refuses foreign reports") {
    const auto corpus = generate(small(50));
    const auto in = studies::ingest(corpus.sessions, corpus.roster, corpus.labels);
    auto r = studies::run_study1(in);
    CHECK_NOTHROW(truth_check(corpus.truth, {r}, 0.005));
    const auto v = truth_check(corpus.truth, {r}, 0.005);
    for (const auto& x : v) {
        CHECK(x.key.rfind("study1/", 0) == 0);
        CHECK(x.found);
    }
    r.run_id = "elsewhere";
    CHECK_THROWS_AS(truth_check(corpus.truth, {r}, 0.005), data_error);
}

TEST_CASE("written corpus reloads") {
    testing::TempDir dir("synth");
    const auto c = small(10);
    const auto corpus = generate(c);
    write_corpus(dir.path(), corpus, c);
    CHECK(load_transcripts(dir / "transcripts.jsonl") == corpus.sessions);
    CHECK(load_labels(dir / "gold.csv").size() == corpus.labels.size());
    CHECK(load_roster(dir / "roster.csv").size() == corpus.roster.size());
    CHECK(truth_from_json(testing::slurp(dir / "truth.json")).run_id == corpus.truth.run_id);
}
