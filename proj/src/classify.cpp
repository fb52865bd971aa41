#include "attn/classify.hpp"

#include "attn/csv.hpp"
#include "attn/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace attn {

std::string_view to_string(LabelSource s) {
    switch (s) {
    case LabelSource::heuristic_text: return "heuristic_text";
    case LabelSource::heuristic_context: return "heuristic_context";
    case LabelSource::remote: return "remote";
    case LabelSource::gold: return "gold";
    }
    return "?";
}

LabelSource parse_label_source(std::string_view s) {
    if (s == "heuristic_text") return LabelSource::heuristic_text;
    if (s == "heuristic_context") return LabelSource::heuristic_context;
    if (s == "remote") return LabelSource::remote;
    return LabelSource::gold;
}

void validate_scores(std::span<const double> scores) {
    double sum = 0.0;
    for (double s : scores) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw data_error("scores must be finite and non-negative");
        sum += s;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw data_error("scores must sum to 1 (got " + std::to_string(sum) + ")");
}

ClassifierContext make_context(const SessionRecord& session, std::size_t position, std::size_t window) {
    if (position >= session.utterances.size())
        throw std::out_of_range("make_context: position past end of session " + session.session_id);
    ClassifierContext ctx;
    const std::size_t first = position > window ? position - window : 0;
    for (std::size_t i = first; i < position; ++i) ctx.pretext.push_back(session.utterances[i].text);
    ctx.target = session.utterances[position].text;
    return ctx;
}

// --- name heuristics -------------------------------------------------------

namespace {

struct NameHits {
    bool a = false;
    bool b = false;
};

NameHits scan(std::string_view text) {
    return {text.find(kStudentA) != std::string_view::npos,
            text.find(kStudentB) != std::string_view::npos};
}

Recipient from_hits(NameHits h) {
    if (h.a && h.b) return Recipient::both;
    if (h.a) return Recipient::student_a;
    if (h.b) return Recipient::student_b;
    return Recipient::one_of;
}

} // namespace

Recipient classify_name_in_text(std::string_view target) { return from_hits(scan(target)); }

Recipient classify_name_in_context(const ClassifierContext& ctx) {
    const NameHits target = scan(ctx.target);
    if (target.a || target.b) return from_hits(target);
    NameHits all;
    for (const auto& line : ctx.pretext) {
        const NameHits h = scan(line);
        all.a = all.a || h.a;
        all.b = all.b || h.b;
    }
    return from_hits(all);
}

// --- nature lexicon --------------------------------------------------------

NatureLexicon NatureLexicon::defaults() {
    NatureLexicon lx;
    lx.keywords[index_of(Nature::content)] = {"sound", "word", "letter", "read", "spell", "sentence", "vowel",
                                              "rhyme", "page"};
    lx.keywords[index_of(Nature::relationship)] = {"awesome", "weekend", "fun", "proud", "love", "birthday",
                                                   "favorite", "great job"};
    lx.keywords[index_of(Nature::management)] = {"mute", "screen", "focus", "earphones", "headphones",
                                                 "wait", "sit", "turn", "camera"};
    return lx;
}

Nature classify_nature_lexicon(std::string_view text, const NatureLexicon& lexicon) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::array<std::size_t, 3> hits{};
    for (std::size_t n = 0; n < 3; ++n) {
        for (const auto& kw : lexicon.keywords[n]) {
            for (auto pos = lower.find(kw); pos != std::string::npos; pos = lower.find(kw, pos + kw.size()))
                ++hits[n];
        }
    }
    std::size_t best = 0;
    for (std::size_t n = 1; n < 3; ++n)
        if (hits[n] > hits[best]) best = n;
    return static_cast<Nature>(best);
}

// --- prompts ---------------------------------------------------------------

namespace {

constexpr std::string_view kPromptHeader =
    "Your task is to read the following conversation snippet and classify whom the tutor is talking to. "
    "The conversation comes from a K-2 early literacy tutoring session between a tutor and two students. "
    "These students have been de-identified as [Student A] and [Student B].\n"
    "\n"
    "The possible labels are:\n"
    "0: The tutor is addressing both students. e.g., \"Let's do it together, [Student A], [Student B] and me.\"\n"
    "1: The tutor is addressing Student A. e.g., \"Okay, [Student A], it's your turn.\"\n"
    "2. The tutor is addressing Student B. e.g., \"Good job, [Student B].\"\n"
    "3. The tutor is addressing one of the students, but it is unclear which one. e.g., \"Let's wait for him.\"\n"
    "\n"
    "Only output the label number. Do not output anything else.\n"
    "\n";

struct Shot {
    std::string_view context;
    std::string_view text;
    int label;
};

constexpr std::array<Shot, 3> kShots{{
    {"Don't do it, don't do it, don't do it, don't do it, don't do it. She can circle it, but this is, "
     "it's for [Student B] to circle. It's for [Student B] to circle. It's hers, because Gamela had a turn. "
     "We got to learn to take turns.",
     "You got it, you have it, [Student B].", 2},
    {"Who is like this or how? [Student A] has hair. How does she have hair? [Student A] has hair. have, "
     "however, horses have We missed it too. We can't- it has to start with the letter H. I'm gonna put "
     "headphones. This is funny. Oh [Student B], why do I keep doing that? There you go.",
     "So that's- that's- that's the sentence.", 0},
    {"This just helps us kind of map out the sounds that we hear. Oh, your word is bonnet. I'm going to move "
     "them for you. No, your word is kitten, [Student B]. Are you missing any? Good job, [Student B]. OK. "
     "[Student A], I'm going to tell you your word one more time. Bonnet. So let's see where we can fix it.",
     "Because you put bonnet.", 1},
}};

} // namespace

std::string join_pretext(const std::vector<std::string>& pretext) {
    std::string out;
    for (std::size_t i = 0; i < pretext.size(); ++i) {
        if (i) out += ' ';
        out += pretext[i];
    }
    return out;
}

std::string build_prompt(const ClassifierContext& ctx, int k) {
    if (k != 0 && k != 1 && k != 3)
        throw std::invalid_argument("build_prompt: unsupported shot count " + std::to_string(k));
    std::string out(kPromptHeader);
    for (int i = 0; i < k; ++i) {
        const Shot& s = kShots[static_cast<std::size_t>(i)];
        out += "Context: ";
        out += s.context;
        out += "\nText: ";
        out += s.text;
        out += "\nLabel (number): ";
        out += std::to_string(s.label);
        out += "\n\n";
    }
    out += "Context: ";
    out += join_pretext(ctx.pretext);
    out += "\nText: ";
    out += ctx.target;
    out += "\nLabel (number):";
    return out;
}

std::string build_input(const ClassifierContext& ctx) {
    return "[PRETEXT_TOKEN] " + join_pretext(ctx.pretext) + " [TARGET] " + ctx.target;
}

// --- class weights ---------------------------------------------------------

ClassWeights class_balance_weights(std::span<const std::size_t> counts, double beta) {
    if (counts.empty()) throw std::invalid_argument("class_balance_weights: no classes");
    if (!(beta >= 0.0) || !(beta < 1.0))
        throw std::invalid_argument("class_balance_weights: beta must lie in [0, 1)");
    ClassWeights w;
    for (std::size_t n : counts) {
        if (n == 0) throw std::invalid_argument("class_balance_weights: zero class count");
        const double effective = 1.0 - std::pow(beta, static_cast<double>(n));
        w.raw.push_back((1.0 - beta) / effective);
    }
    const double sum = std::accumulate(w.raw.begin(), w.raw.end(), 0.0);
    const double scale = static_cast<double>(counts.size()) / sum;
    for (double r : w.raw) w.normalized.push_back(r * scale);
    return w;
}

// --- evaluation ------------------------------------------------------------

Evaluation evaluate_classifier(std::span<const std::string> pred, std::span<const std::string> gold) {
    if (pred.size() != gold.size())
        throw std::invalid_argument("evaluate_classifier: length mismatch (" + std::to_string(pred.size()) +
                                    " vs " + std::to_string(gold.size()) + ")");
    if (pred.empty()) throw std::invalid_argument("evaluate_classifier: empty inputs");

    std::set<std::string> cls(pred.begin(), pred.end());
    cls.insert(gold.begin(), gold.end());
    Evaluation ev;
    ev.classes.assign(cls.begin(), cls.end());
    const std::size_t k = ev.classes.size();
    auto idx = [&](const std::string& c) {
        return static_cast<std::size_t>(std::lower_bound(ev.classes.begin(), ev.classes.end(), c) -
                                        ev.classes.begin());
    };
    ev.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++ev.confusion[idx(gold[i])][idx(pred[i])];
        if (pred[i] == gold[i]) ++correct;
    }
    ev.n = pred.size();
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(ev.n);

    double f1_sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = ev.confusion[c][c], fp = 0, fn = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += ev.confusion[o][c];
            fn += ev.confusion[c][o];
        }
        const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        ev.f1.push_back(f1);
        f1_sum += f1;
    }
    ev.macro_f1 = f1_sum / static_cast<double>(k);
    return ev;
}

Evaluation evaluate_classifier(std::span<const Recipient> pred, std::span<const Recipient> gold) {
    std::vector<std::string> p, g;
    for (Recipient r : pred) p.emplace_back(to_string(r));
    for (Recipient r : gold) {
        if (r == Recipient::na) throw std::invalid_argument("evaluate_classifier: gold contains NA");
        g.emplace_back(to_string(r));
    }
    return evaluate_classifier(std::span<const std::string>(p), std::span<const std::string>(g));
}

Evaluation evaluate_classifier(std::span<const Nature> pred, std::span<const Nature> gold) {
    std::vector<std::string> p, g;
    for (Nature n : pred) p.emplace_back(to_string(n));
    for (Nature n : gold) g.emplace_back(to_string(n));
    return evaluate_classifier(std::span<const std::string>(p), std::span<const std::string>(g));
}

// --- cost ------------------------------------------------------------------

double estimate_cost(std::span<const TokenCount> calls, const TokenPrices& prices, double n_transcripts,
                     double sampled_transcripts) {
    if (prices.input_per_million < 0 || prices.output_per_million < 0 || n_transcripts < 0)
        throw std::invalid_argument("estimate_cost: negative price or transcript count");
    if (!(sampled_transcripts > 0)) throw std::invalid_argument("estimate_cost: sampled_transcripts must be > 0");
    double per_sample = 0.0;
    for (const auto& c : calls) {
        if (c.input < 0 || c.output < 0) throw std::invalid_argument("estimate_cost: negative token count");
        per_sample += c.input * prices.input_per_million / 1e6 + c.output * prices.output_per_million / 1e6;
    }
    return per_sample * n_transcripts / sampled_transcripts;
}

// --- label files -----------------------------------------------------------

std::vector<LabeledUtterance> parse_labels(std::string_view text, const std::string& source) {
    const auto t = csv::parse(text, source);
    const auto c_sess = t.column("session_id"), c_idx = t.column("utterance_index"),
               c_rec = t.column("recipient"), c_nat = t.column("nature"), c_ann = t.column("annotator_id");
    std::vector<LabeledUtterance> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        LabeledUtterance l;
        try {
            l.session_id = row[c_sess];
            std::size_t used = 0;
            const unsigned long long idx = std::stoull(row[c_idx], &used);
            if (used != row[c_idx].size()) throw data_error("bad utterance_index '" + row[c_idx] + "'");
            l.utterance_index = static_cast<std::size_t>(idx);
            l.recipient = parse_recipient(row[c_rec]);
            l.nature = parse_nature(row[c_nat]);
            l.annotator_id = row[c_ann];
            l.source = parse_label_source(l.annotator_id);
        } catch (const std::exception& e) {
            throw parse_error(source, t.line_numbers[r], e.what());
        }
        out.push_back(std::move(l));
    }
    return out;
}

std::vector<LabeledUtterance> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_labels(ss.str(), path.string());
}

std::string serialize_labels(const std::vector<LabeledUtterance>& labels) {
    std::string out = "session_id,utterance_index,recipient,nature,annotator_id\n";
    for (const auto& l : labels) {
        out += csv::join_row({l.session_id, std::to_string(l.utterance_index), std::string(to_string(l.recipient)),
                              std::string(to_string(l.nature)), l.annotator_id});
        out += '\n';
    }
    return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabeledUtterance>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << serialize_labels(labels);
    if (!out) throw data_error("write failed: " + path.string());
}

std::map<std::string, std::vector<LabeledUtterance>> group_labels(const std::vector<LabeledUtterance>& labels) {
    std::map<std::string, std::vector<LabeledUtterance>> out;
    for (const auto& l : labels) out[l.session_id].push_back(l);
    for (auto& [_, v] : out)
        std::stable_sort(v.begin(), v.end(), [](const LabeledUtterance& a, const LabeledUtterance& b) {
            return a.utterance_index < b.utterance_index;
        });
    return out;
}

std::vector<LabeledUtterance> classify_corpus(const std::vector<SessionRecord>& sessions, HeuristicKind kind,
                                              const NatureLexicon& lexicon) {
    std::vector<LabeledUtterance> out;
    const LabelSource src =
        kind == HeuristicKind::name_text ? LabelSource::heuristic_text : LabelSource::heuristic_context;
    for (const auto& s : sessions) {
        if (!s.kept) continue;
        for (std::size_t i = 0; i < s.utterances.size(); ++i) {
            LabeledUtterance l;
            l.session_id = s.session_id;
            l.utterance_index = s.utterances[i].index;
            if (kind == HeuristicKind::name_text)
                l.recipient = classify_name_in_text(s.utterances[i].text);
            else
                l.recipient = classify_name_in_context(make_context(s, i));
            l.nature = classify_nature_lexicon(s.utterances[i].text, lexicon);
            l.source = src;
            l.annotator_id = std::string(to_string(src));
            out.push_back(std::move(l));
        }
    }
    return out;
}

} // namespace attn
