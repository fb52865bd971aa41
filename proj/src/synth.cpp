#include "attn/synth.hpp"

#include "attn/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

namespace attn::synth {

using json = nlohmann::ordered_json;
using studies::Axis;

namespace {

constexpr double kPP = 0.01;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

// Distribution algorithms in <random> are implementation-defined, so the
// transforms are spelled out here to keep corpora identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double open_uniform() {
        double u;
        do u = uniform();
        while (u <= 0.0);
        return u;
    }
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = open_uniform(), u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }
    /// N(0, sd) clamped to +-3 sd; symmetric, so still mean zero.
    double truncated(double sd) {
        const double z = std::clamp(normal(), -3.0, 3.0);
        return sd * z;
    }
    bool bernoulli(double p) { return uniform() < p; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
    std::size_t categorical(std::span<const double> w) {
        double total = 0.0;
        for (double x : w) total += x;
        double u = uniform() * total;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (u < w[i]) return i;
            u -= w[i];
        }
        for (std::size_t i = w.size(); i-- > 0;)
            if (w[i] > 0.0) return i;
        return 0;
    }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

const AxisEffects& effects(const GeneratorConfig& c, Axis a) {
    return a == Axis::gender ? c.gender : a == Axis::race ? c.race : c.el;
}

double marginal(const GeneratorConfig& c, Axis a) {
    return a == Axis::gender ? c.p_female : a == Axis::race ? c.p_black : c.p_el;
}

// Composition index: 0 mixed, 1 first homogeneous (female/black/EL), 2 second.
std::array<double, 3> composition_probs(double p) { return {2.0 * p * (1.0 - p), p * p, (1.0 - p) * (1.0 - p)}; }

bool marked(const StudentRecord& s, Axis a) {
    return a == Axis::gender ? s.gender == Gender::female : a == Axis::race ? s.race == Race::black
                                                                            : s.el_status == ElStatus::el;
}

std::size_t composition(const StudentRecord& x, const StudentRecord& y, Axis a) {
    const bool mx = marked(x, a), my = marked(y, a);
    if (mx != my) return 0;
    return mx ? 1 : 2;
}

/// Level of a student (pp) on one axis; the unmarked mixed student is the reference.
double level(const GeneratorConfig& c, Axis a, const StudentRecord& self, const StudentRecord& partner) {
    const auto& e = effects(c, a);
    const std::size_t comp = composition(self, partner, a);
    if (comp == 0) return marked(self, a) ? e.level[0] : 0.0;
    return e.level[comp];
}

/// E[level] of one student over the population, for the intercept.
double expected_level(const GeneratorConfig& c, Axis a) {
    const double p = marginal(c, a);
    const auto& e = effects(c, a);
    return p * (1.0 - p) * e.level[0] + p * p * e.level[1] + (1.0 - p) * (1.0 - p) * e.level[2];
}

double expected_gap_offset(const GeneratorConfig& c, Axis a) {
    const auto pr = composition_probs(marginal(c, a));
    const auto& e = effects(c, a);
    return pr[0] * e.gap[0] + pr[1] * e.gap[1] + pr[2] * e.gap[2];
}

const std::array<std::string, 4> kOutcomeNames{"overall", "content", "relationship", "management"};

const std::array<std::array<std::string, 5>, 3> kPhrases{{
    {"what sound does this letter make?", "read the next word for me.", "how do you spell that?",
     "find the vowel in this sentence.", "does it rhyme?"},
    {"you are awesome!", "how was your weekend?", "that was fun.", "I am so proud of you.",
     "what is your favorite animal?"},
    {"please mute yourself.", "can you see the screen?", "let's focus.", "put your headphones on.",
     "sit up for me."},
}};

std::string make_text(Rng& rng, Recipient r, Nature n, double name_rate) {
    const std::string phrase = kPhrases[index_of(n)][rng.below(5)];
    const bool named = rng.bernoulli(name_rate);
    switch (r) {
    case Recipient::student_a: return named ? std::string(kStudentA) + ", " + phrase : "Okay, " + phrase;
    case Recipient::student_b: return named ? std::string(kStudentB) + ", " + phrase : "Okay, " + phrase;
    case Recipient::both:
        return named ? std::string(kStudentA) + " and " + std::string(kStudentB) + ", " + phrase
                     : "Okay everyone, " + phrase;
    default: return "Hmm, " + phrase;
    }
}

struct PairPlan {
    std::size_t index = 0;
    StudentRecord a, b;
    double noise_a = 0.0, noise_b = 0.0, pair_noise = 0.0; // fractions
    std::uint64_t seed = 0;
};

struct SessionOut {
    SessionRecord session;
    std::vector<LabeledUtterance> labels;
};

/// Per-session target probabilities over [recipient][nature].
std::array<std::array<double, 3>, 4> session_targets(const GeneratorConfig& c, const PairPlan& p, double e_a,
                                                     double e_b, double w) {
    const double base_ind = (1.0 - (c.base_both + c.base_one_of) * kPP) / 2.0;
    double g = c.lower_bonus;
    double one_of = c.base_one_of;
    double lvl_a = 0.0, lvl_b = 0.0;
    for (Axis ax : studies::kAxes) {
        const auto comp = composition(p.a, p.b, ax);
        g += effects(c, ax).gap[comp];
        if (comp > 0) one_of += effects(c, ax).ambiguity[comp - 1];
        lvl_a += level(c, ax, p.a, p.b);
        lvl_b += level(c, ax, p.b, p.a);
    }
    const bool a_lower = *p.a.baseline_raw < *p.b.baseline_raw;
    const double sign_a = a_lower ? 1.0 : -1.0;
    const double s_a = base_ind + lvl_a * kPP + 0.5 * sign_a * g * kPP + p.noise_a + e_a + 0.5 * sign_a * p.pair_noise;
    const double s_b = base_ind + lvl_b * kPP - 0.5 * sign_a * g * kPP + p.noise_b + e_b - 0.5 * sign_a * p.pair_noise;
    const double o = one_of * kPP + w;
    const double both = 1.0 - s_a - s_b - o;

    std::array<std::array<double, 3>, 4> t{};
    for (std::size_t n = 0; n < 3; ++n) {
        const double L = c.lower_bonus * kPP, Ln = c.lower_bonus_by_nature[n] * kPP;
        t[index_of(Recipient::student_a)][n] = c.nature_mix[n] * (s_a - 0.5 * sign_a * L) + 0.5 * sign_a * Ln;
        t[index_of(Recipient::student_b)][n] = c.nature_mix[n] * (s_b + 0.5 * sign_a * L) - 0.5 * sign_a * Ln;
        t[index_of(Recipient::both)][n] = c.shared_nature_mix[n] * both;
        t[index_of(Recipient::one_of)][n] = c.shared_nature_mix[n] * o;
    }
    for (const auto& row : t)
        for (double x : row)
            if (x < -1e-12) throw data_error("synth: negative target share; config infeasible");
    return t;
}

SessionOut make_session(const GeneratorConfig& c, const PairPlan& p, std::size_t k) {
    Rng rng(derive(p.seed, k, 1));
    Rng text_rng(derive(p.seed, k, 2));
    const double sd_ses = c.noise.session_sd * kPP;
    const double e_a = rng.truncated(sd_ses), e_b = rng.truncated(sd_ses);
    const double w = rng.truncated(c.noise.one_of_sd * kPP);
    auto targets = session_targets(c, p, e_a, e_b, w);

    SessionOut out;
    SessionRecord& s = out.session;
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu-%zu", p.index, k + 1);
    s.session_id = id;
    s.student_a_id = p.a.student_id;
    s.student_b_id = p.b.student_id;
    s.pair_id = canonical_pair_id(s.student_a_id, s.student_b_id);
    s.planned_duration_s = c.planned_duration_s;
    s.entry_a_s = 0.0;
    s.entry_b_s = std::floor(rng.uniform() * c.max_entry_gap_s);

    const auto n_utt = static_cast<std::size_t>(
        std::max(12.0, std::round(c.mean_utterances + c.sd_utterances * rng.normal())));
    std::vector<double> dur(n_utt);
    for (auto& d : dur)
        d = std::clamp(c.median_utterance_s * std::exp(c.log_sd_utterance * rng.normal()), 1.0, 60.0);

    std::array<double, 12> cell{};
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t n = 0; n < 3; ++n) cell[r * 3 + n] = std::max(0.0, targets[r][n]);

    std::vector<std::size_t> assign(n_utt);
    if (c.noise.iid_labels) {
        for (auto& a : assign) a = rng.categorical(cell);
    } else {
        // Largest remainder with at least one utterance per positive cell, then
        // rescale durations so every cell's time share is exact.
        std::size_t positive = 0;
        for (double x : cell) positive += x > 0.0;
        if (n_utt < positive) throw data_error("synth: too few utterances for exact shares");
        std::array<std::size_t, 12> count{};
        std::size_t used = 0;
        std::vector<std::pair<double, std::size_t>> rem;
        const double spare = static_cast<double>(n_utt - positive);
        for (std::size_t i = 0; i < 12; ++i) {
            if (cell[i] <= 0.0) continue;
            const double q = cell[i] * spare;
            count[i] = 1 + static_cast<std::size_t>(std::floor(q));
            used += count[i];
            rem.emplace_back(q - std::floor(q), i);
        }
        std::stable_sort(rem.begin(), rem.end(), [](auto& x, auto& y) { return x.first > y.first; });
        for (std::size_t j = 0; used < n_utt; ++j, ++used) ++count[rem[j % rem.size()].second];
        std::size_t pos = 0;
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t m = 0; m < count[i]; ++m) assign[pos++] = i;
        rng.shuffle(assign);
        const double total = std::accumulate(dur.begin(), dur.end(), 0.0);
        std::array<double, 12> cell_time{};
        for (std::size_t u = 0; u < n_utt; ++u) cell_time[assign[u]] += dur[u];
        for (std::size_t u = 0; u < n_utt; ++u) dur[u] *= cell[assign[u]] * total / cell_time[assign[u]];
    }

    const double talk = std::accumulate(dur.begin(), dur.end(), 0.0);
    double span = c.mean_span_s + c.sd_span_s * rng.normal();
    span = std::max({span, c.min_span_fraction * c.planned_duration_s, talk});
    std::vector<double> gap(n_utt, 0.0);
    double gsum = 0.0;
    for (std::size_t u = 1; u < n_utt; ++u) gsum += gap[u] = -std::log(rng.open_uniform());
    const double slack = span - talk;

    double t = std::max(s.entry_a_s, s.entry_b_s);
    for (std::size_t u = 0; u < n_utt; ++u) {
        if (u > 0 && gsum > 0.0) t += slack * gap[u] / gsum;
        const auto r = static_cast<Recipient>(assign[u] / 3);
        const auto n = static_cast<Nature>(assign[u] % 3);
        Utterance utt;
        utt.index = u;
        utt.start_s = t;
        utt.end_s = t + dur[u];
        utt.text = c.emit_text ? make_text(text_rng, r, n, c.name_rate) : "";
        t = utt.end_s;
        s.utterances.push_back(std::move(utt));
        LabeledUtterance l;
        l.session_id = s.session_id;
        l.utterance_index = u;
        l.recipient = r;
        l.nature = n;
        l.source = LabelSource::gold;
        l.annotator_id = "synth";
        out.labels.push_back(std::move(l));
    }
    return out;
}

void check_simplex(const std::array<double, 3>& v, const char* what) {
    double sum = 0.0;
    for (double x : v) {
        if (x < 0.0) throw data_error(std::string("synth: ") + what + " has a negative entry");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw data_error(std::string("synth: ") + what + " must sum to 1");
}

} // namespace

GeneratorConfig GeneratorConfig::paper() {
    GeneratorConfig c;
    c.lower_bonus = 2.3;
    c.lower_bonus_by_nature = {1.25, 0.12, 0.93};
    // Gender: female-in-mixed -5.2; mixed gap 1.55 puts the two mixed cells at -1.35 / +9.05.
    c.gender.level = {-5.2, -2.0, -1.0};
    c.gender.gap = {1.55, -1.55, -1.55};
    c.gender.ambiguity = {-1.5, -4.2};
    // Race: Black-Black lower gap 8.6; no bonus for the lower Black student in a mixed pair.
    c.race.level = {1.0, 0.0, -5.9};
    c.race.gap = {-3.3, 6.3, 0.3};
    c.race.ambiguity = {3.4, -2.1};
    // EL: EL-EL lower gap -4.6; non-EL pairs -5.7.
    c.el.level = {0.0, 0.0, -5.7};
    c.el.gap = {2.3, -6.9, 2.3};
    c.el.ambiguity = {1.1, 0.1};
    return c;
}

GeneratorConfig GeneratorConfig::null() { return GeneratorConfig{}; }

void validate(const GeneratorConfig& c) {
    if (c.n_pairs < 1 || c.sessions_per_pair < 1) throw data_error("synth: need at least one pair and session");
    if (!(c.planned_duration_s > 0.0)) throw data_error("synth: planned_duration_s must be positive");
    for (double p : {c.p_female, c.p_black, c.p_el})
        if (p < 0.0 || p > 1.0) throw data_error("synth: marginals must lie in [0, 1]");
    check_simplex(c.nature_mix, "nature_mix");
    check_simplex(c.shared_nature_mix, "shared_nature_mix");
    const double ln = std::accumulate(c.lower_bonus_by_nature.begin(), c.lower_bonus_by_nature.end(), 0.0);
    if (std::abs(ln - c.lower_bonus) > 1e-9) throw data_error("synth: lower_bonus_by_nature must sum to lower_bonus");
    for (double g : c.grade_sd)
        if (!(g > 0.0)) throw data_error("synth: grade_sd must be positive");
    if (c.median_utterance_s <= 0.0 || c.mean_utterances < 12.0) throw data_error("synth: utterance scale too small");

    // Worst case over every demographic combination, both achievement orders,
    // and noise at its truncation bound.
    const double nb_ind = 3.0 * (c.noise.student_sd + c.noise.session_sd) * kPP + 1.5 * c.noise.pair_sd * kPP;
    const double nb_one = 3.0 * c.noise.one_of_sd * kPP;
    for (int mask = 0; mask < 64; ++mask) {
        PairPlan p;
        p.a.gender = mask & 1 ? Gender::female : Gender::male;
        p.b.gender = mask & 2 ? Gender::female : Gender::male;
        p.a.race = mask & 4 ? Race::black : Race::non_black;
        p.b.race = mask & 8 ? Race::black : Race::non_black;
        p.a.el_status = mask & 16 ? ElStatus::el : ElStatus::non_el;
        p.b.el_status = mask & 32 ? ElStatus::el : ElStatus::non_el;
        for (int order = 0; order < 2; ++order) {
            p.a.baseline_raw = order ? 1.0 : 0.0;
            p.b.baseline_raw = order ? 0.0 : 1.0;
            for (int sa : {-1, 1})
                for (int sb : {-1, 1})
                    for (int so : {-1, 1}) {
                        PairPlan q = p;
                        std::array<std::array<double, 3>, 4> t;
                        try {
                            t = session_targets(c, q, sa * nb_ind, sb * nb_ind, so * nb_one);
                        } catch (const data_error&) {
                            throw data_error("synth: infeasible config; a planted share can go negative");
                        }
                        double total = 0.0;
                        for (const auto& row : t)
                            for (double x : row) total += x;
                        if (std::abs(total - 1.0) > 1e-9) throw data_error("synth: shares do not sum to one");
                    }
        }
    }
}

SyntheticCorpus generate(const GeneratorConfig& c, unsigned jobs) {
    validate(c);
    SyntheticCorpus out;
    std::vector<PairPlan> plans(c.n_pairs);
    const double sd_stu = c.noise.student_sd * kPP;
    for (std::size_t i = 0; i < c.n_pairs; ++i) {
        Rng rng(derive(c.seed, i, 0));
        PairPlan& p = plans[i];
        p.index = i + 1;
        p.seed = derive(c.seed, i, 3);
        const auto grade = static_cast<Grade>(rng.categorical(c.grade_weights));
        const auto gi = static_cast<std::size_t>(grade);
        for (int k = 0; k < 2; ++k) {
            StudentRecord& s = k == 0 ? p.a : p.b;
            char id[32];
            std::snprintf(id, sizeof id, "st%06zu", 2 * i + static_cast<std::size_t>(k) + 1);
            s.student_id = id;
            s.gender = rng.bernoulli(c.p_female) ? Gender::female : Gender::male;
            s.race = rng.bernoulli(c.p_black) ? Race::black : Race::non_black;
            s.el_status = rng.bernoulli(c.p_el) ? ElStatus::el : ElStatus::non_el;
            s.grade = grade;
            s.baseline_raw = c.grade_mean[gi] + c.grade_sd[gi] * rng.normal();
        }
        p.noise_a = rng.truncated(sd_stu);
        p.noise_b = rng.truncated(sd_stu);
        p.pair_noise = rng.truncated(c.noise.pair_sd * kPP);
        out.roster.emplace(p.a.student_id, p.a);
        out.roster.emplace(p.b.student_id, p.b);
    }

    std::vector<SessionOut> sessions(c.n_pairs * c.sessions_per_pair);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j)
            sessions[j] = make_session(c, plans[j / c.sessions_per_pair], j % c.sessions_per_pair);
    };
    const std::size_t n = sessions.size();
    const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (threads == 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    work(n * t / threads, n * (t + 1) / threads);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (auto& s : sessions) {
        out.sessions.push_back(std::move(s.session));
        for (auto& l : s.labels) out.labels.push_back(std::move(l));
    }
    out.truth.run_id = corpus_digest(out.sessions);
    out.truth.estimands = expected_estimands(c);
    return out;
}

std::map<std::string, double> expected_estimands(const GeneratorConfig& c) {
    std::map<std::string, double> t;
    const double L = c.lower_bonus * kPP;
    std::array<double, 3> Ln{};
    for (std::size_t n = 0; n < 3; ++n) Ln[n] = c.lower_bonus_by_nature[n] * kPP;
    double Eg = L;
    for (Axis ax : studies::kAxes) Eg += expected_gap_offset(c, ax) * kPP;
    const double base_ind = (1.0 - (c.base_both + c.base_one_of) * kPP) / 2.0;

    // Lower-minus-higher gap of a unit with expected overall gap `gap`, per outcome.
    auto by_outcome = [&](double gap, std::size_t o) {
        return o == 0 ? gap : c.nature_mix[o - 1] * (gap - L) + Ln[o - 1];
    };

    for (std::size_t o = 0; o < 4; ++o) t["study1/" + kOutcomeNames[o]] = by_outcome(Eg, o);

    for (Axis ax : studies::kAxes) {
        const std::string axn(studies::to_string(ax));
        const double p = marginal(c, ax);
        const auto pr = composition_probs(p);
        const auto& e = effects(c, ax);
        const auto cats = studies::dummy_categories(ax);
        // Categories with zero population mass never reach a fit.
        const std::array<double, 4> mass{p * (1 - p), p * (1 - p), p * p, (1 - p) * (1 - p)}; // ref, d0, d1, d2
        double other_levels = 0.0;
        for (Axis o : studies::kAxes)
            if (o != ax) other_levels += expected_level(c, o) * kPP;
        const bool estimable = std::all_of(mass.begin(), mass.end(), [](double m) { return m > 0.0; });
        if (estimable) {
            for (std::size_t o = 0; o < 4; ++o) {
                const std::string prefix = "study2/" + axn + "/" + kOutcomeNames[o] + "/";
                const double pi = o == 0 ? 1.0 : c.nature_mix[o - 1];
                const double r = by_outcome(Eg, o);
                for (std::size_t d = 0; d < 3; ++d) t[prefix + cats[d]] = pi * e.level[d] * kPP;
                t[prefix + "lower_achiever"] = r;
                t[prefix + "own_achievement"] = 0.0;
                t[prefix + "partner_achievement"] = 0.0;
                t[prefix + "intercept"] = pi * (base_ind + other_levels) - 0.5 * r;
            }
        }

        double other_gaps = 0.0;
        for (Axis o : studies::kAxes)
            if (o != ax) other_gaps += expected_gap_offset(c, o) * kPP;
        const auto cells = studies::pair_cells(ax);
        // mixed_marked_lower, mixed_unmarked_lower, homogeneous 1, homogeneous 2
        const std::array<double, 4> cell_gap{
            (e.level[0] + c.lower_bonus + e.gap[0]) * kPP + other_gaps,
            (-e.level[0] + c.lower_bonus + e.gap[0]) * kPP + other_gaps,
            (c.lower_bonus + e.gap[1]) * kPP + other_gaps,
            (c.lower_bonus + e.gap[2]) * kPP + other_gaps,
        };
        const std::array<double, 4> cell_mass{pr[0], pr[0], pr[1], pr[2]};
        for (std::size_t k = 0; k < 4; ++k) {
            if (cell_mass[k] <= 0.0) continue;
            for (std::size_t o = 0; o < 4; ++o)
                t["study3/" + axn + "/" + cells[k] + "/" + kOutcomeNames[o]] = by_outcome(cell_gap[k], o);
        }
    }

    // Session-level ambiguity regression and the reattribution bound.
    bool all_mixed_present = true;
    for (Axis ax : studies::kAxes) {
        const auto pr = composition_probs(marginal(c, ax));
        all_mixed_present = all_mixed_present && pr[0] > 0.0;
    }
    if (all_mixed_present) {
        t["robustness/one_of/intercept"] = c.base_one_of * kPP;
        for (Axis ax : studies::kAxes) {
            const auto pr = composition_probs(marginal(c, ax));
            const auto& e = effects(c, ax);
            const auto dummies = studies::session_dummies(ax);
            double differential = 0.0;
            for (std::size_t h = 0; h < 2; ++h) {
                if (pr[h + 1] <= 0.0) continue;
                t["robustness/one_of/" + dummies[h]] = e.ambiguity[h] * kPP;
                differential = std::max(differential, -e.ambiguity[h] * kPP);
            }
            const double p = marginal(c, ax);
            if (p > 0.0 && p < 1.0) {
                const double beta = std::round(e.level[0] * kPP * 1e8) / 1e8;
                const double d = std::round(differential * 1e8) / 1e8;
                const double res = std::copysign(std::max(0.0, std::abs(beta) - d), beta);
                t["robustness/bound/" + std::string(studies::to_string(ax)) + "/" + studies::dummy_categories(ax)[0]] =
                    std::round(res * 1e8) / 1e8;
            }
        }
    }
    return t;
}

std::vector<Verdict> truth_check(const TruthRecord& truth, const std::vector<studies::StudyReport>& reports,
                                 double tolerance, const std::map<std::string, double>& overrides) {
    std::map<std::string, studies::Estimate> found;
    for (const auto& r : reports) {
        if (r.run_id != truth.run_id)
            throw data_error("truth_check: report run id " + r.run_id + " does not match truth run id " + truth.run_id);
        for (auto& e : studies::estimates(r)) found.emplace(e.key, e);
    }
    std::vector<Verdict> out;
    for (const auto& [key, value] : truth.estimands) {
        auto it = found.find(key);
        // Only studies that were run are checked.
        const std::string study = key.substr(0, key.find('/'));
        const bool ran = std::any_of(reports.begin(), reports.end(), [&](const auto& r) { return r.study == study; });
        if (!ran) continue;
        Verdict v;
        v.key = key;
        v.truth = value;
        v.tolerance = tolerance;
        std::size_t best = 0;
        for (const auto& [prefix, tol] : overrides)
            if (key.starts_with(prefix) && prefix.size() >= best) {
                best = prefix.size();
                v.tolerance = tol;
            }
        if (it != found.end()) {
            v.found = true;
            v.estimate = it->second.value;
            v.deviation = v.estimate - v.truth;
            v.pass = std::abs(v.deviation) <= v.tolerance;
            v.has_ci = it->second.has_ci;
            v.covered = v.has_ci && it->second.ci_low <= value && value <= it->second.ci_high;
        }
        out.push_back(v);
    }
    return out;
}

// --- JSON -------------------------------------------------------------------

namespace {

json axis_json(const AxisEffects& e) {
    return json{{"level", e.level}, {"gap", e.gap}, {"ambiguity", e.ambiguity}};
}

template <typename T>
void take(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

void axis_from(const json& j, AxisEffects& e) {
    take(j, "level", e.level);
    take(j, "gap", e.gap);
    take(j, "ambiguity", e.ambiguity);
}

json config_json(const GeneratorConfig& c) {
    return json{
        {"n_pairs", c.n_pairs},
        {"sessions_per_pair", c.sessions_per_pair},
        {"planned_duration_s", c.planned_duration_s},
        {"mean_span_s", c.mean_span_s},
        {"sd_span_s", c.sd_span_s},
        {"min_span_fraction", c.min_span_fraction},
        {"mean_utterances", c.mean_utterances},
        {"sd_utterances", c.sd_utterances},
        {"median_utterance_s", c.median_utterance_s},
        {"log_sd_utterance", c.log_sd_utterance},
        {"max_entry_gap_s", c.max_entry_gap_s},
        {"p_female", c.p_female},
        {"p_black", c.p_black},
        {"p_el", c.p_el},
        {"grade_weights", c.grade_weights},
        {"grade_mean", c.grade_mean},
        {"grade_sd", c.grade_sd},
        {"base_both", c.base_both},
        {"base_one_of", c.base_one_of},
        {"lower_bonus", c.lower_bonus},
        {"lower_bonus_by_nature", c.lower_bonus_by_nature},
        {"gender", axis_json(c.gender)},
        {"race", axis_json(c.race)},
        {"el", axis_json(c.el)},
        {"nature_mix", c.nature_mix},
        {"shared_nature_mix", c.shared_nature_mix},
        {"noise",
         {{"student_sd", c.noise.student_sd},
          {"session_sd", c.noise.session_sd},
          {"pair_sd", c.noise.pair_sd},
          {"one_of_sd", c.noise.one_of_sd},
          {"iid_labels", c.noise.iid_labels}}},
        {"name_rate", c.name_rate},
        {"emit_text", c.emit_text},
        {"seed", c.seed},
    };
}

} // namespace

std::string config_to_json(const GeneratorConfig& c) { return config_json(c).dump(2) + "\n"; }

GeneratorConfig config_from_json(std::string_view text, GeneratorConfig c) {
    json j;
    try {
        j = json::parse(text);
        if (j.contains("preset")) {
            const auto p = j.at("preset").get<std::string>();
            if (p == "paper")
                c = GeneratorConfig::paper();
            else if (p == "null")
                c = GeneratorConfig::null();
            else
                throw data_error("synth: unknown preset '" + p + "'");
        }
        take(j, "n_pairs", c.n_pairs);
        take(j, "sessions_per_pair", c.sessions_per_pair);
        take(j, "planned_duration_s", c.planned_duration_s);
        take(j, "mean_span_s", c.mean_span_s);
        take(j, "sd_span_s", c.sd_span_s);
        take(j, "min_span_fraction", c.min_span_fraction);
        take(j, "mean_utterances", c.mean_utterances);
        take(j, "sd_utterances", c.sd_utterances);
        take(j, "median_utterance_s", c.median_utterance_s);
        take(j, "log_sd_utterance", c.log_sd_utterance);
        take(j, "max_entry_gap_s", c.max_entry_gap_s);
        take(j, "p_female", c.p_female);
        take(j, "p_black", c.p_black);
        take(j, "p_el", c.p_el);
        take(j, "grade_weights", c.grade_weights);
        take(j, "grade_mean", c.grade_mean);
        take(j, "grade_sd", c.grade_sd);
        take(j, "base_both", c.base_both);
        take(j, "base_one_of", c.base_one_of);
        take(j, "lower_bonus", c.lower_bonus);
        take(j, "lower_bonus_by_nature", c.lower_bonus_by_nature);
        if (j.contains("gender")) axis_from(j.at("gender"), c.gender);
        if (j.contains("race")) axis_from(j.at("race"), c.race);
        if (j.contains("el")) axis_from(j.at("el"), c.el);
        take(j, "nature_mix", c.nature_mix);
        take(j, "shared_nature_mix", c.shared_nature_mix);
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            take(n, "student_sd", c.noise.student_sd);
            take(n, "session_sd", c.noise.session_sd);
            take(n, "pair_sd", c.noise.pair_sd);
            take(n, "one_of_sd", c.noise.one_of_sd);
            take(n, "iid_labels", c.noise.iid_labels);
        }
        take(j, "name_rate", c.name_rate);
        take(j, "emit_text", c.emit_text);
        take(j, "seed", c.seed);
    } catch (const json::exception& e) {
        throw data_error(std::string("synth config: ") + e.what());
    }
    return c;
}

std::string truth_to_json(const TruthRecord& t, const GeneratorConfig& c) {
    json est = json::object();
    for (const auto& [k, v] : t.estimands) est[k] = v;
    json doc{{"schema", "attn-truth/1"}, {"run_id", t.run_id}, {"config", config_json(c)}, {"estimands", est}};
    return doc.dump(2) + "\n";
}

TruthRecord truth_from_json(std::string_view text) {
    TruthRecord t;
    try {
        const json j = json::parse(text);
        if (j.value("schema", "") != "attn-truth/1") throw data_error("truth record: unsupported schema");
        t.run_id = j.at("run_id").get<std::string>();
        for (const auto& [k, v] : j.at("estimands").items()) t.estimands[k] = v.get<double>();
    } catch (const json::exception& e) {
        throw data_error(std::string("truth record: ") + e.what());
    }
    return t;
}

void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus, const GeneratorConfig& c) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw data_error("cannot create " + dir.string() + ": " + ec.message());
    write_transcripts(dir / "transcripts.jsonl", corpus.sessions);
    write_roster(dir / "roster.csv", corpus.roster);
    write_labels(dir / "gold.csv", corpus.labels);
    std::ofstream out(dir / "truth.json", std::ios::binary);
    if (!out) throw data_error("cannot write " + (dir / "truth.json").string());
    out << truth_to_json(corpus.truth, c);
}

} // namespace attn::synth
