#pragma once

#include "attn/corpus.hpp"
#include "attn/types.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attn {

enum class LabelSource : std::uint8_t { heuristic_text, heuristic_context, remote, gold };

std::string_view to_string(LabelSource s);
LabelSource parse_label_source(std::string_view s);

struct LabeledUtterance {
    std::string session_id;
    std::size_t utterance_index = 0;
    Recipient recipient = Recipient::one_of;
    Nature nature = Nature::content;
    LabelSource source = LabelSource::gold;
    std::string annotator_id; ///< free text in label files; the source name for machine labels
    std::optional<std::array<double, 4>> recipient_scores;

    bool operator==(const LabeledUtterance&) const = default;
};

/// Throws data_error unless scores are non-negative and sum to 1 within 1e-6.
void validate_scores(std::span<const double> scores);

inline constexpr std::size_t kContextWindow = 10;

struct ClassifierContext {
    std::vector<std::string> pretext; ///< oldest first, at most kContextWindow lines
    std::string target;
};

/// Context for utterance at `position` in session.utterances: up to `window`
/// preceding lines (fewer at session start).
ClassifierContext make_context(const SessionRecord& session, std::size_t position,
                               std::size_t window = kContextWindow);

// --- name heuristics -------------------------------------------------------

Recipient classify_name_in_text(std::string_view target);

/// Target-text matches win; the pretext only decides when the target names nobody.
Recipient classify_name_in_context(const ClassifierContext& ctx);

// --- nature lexicon (synthetic corpora only) -------------------------------

struct NatureLexicon {
    std::array<std::vector<std::string>, 3> keywords; ///< indexed by Nature
    static NatureLexicon defaults();
};

/// Keyword-count vote; ties and no hits resolve to content.
Nature classify_nature_lexicon(std::string_view text, const NatureLexicon& lexicon);

// --- model inputs ----------------------------------------------------------

/// Zero-, one- or three-shot recipient prompt. Throws std::invalid_argument for other k.
std::string build_prompt(const ClassifierContext& ctx, int k);

/// "[PRETEXT_TOKEN] {pretext} [TARGET] {target}".
std::string build_input(const ClassifierContext& ctx);

std::string join_pretext(const std::vector<std::string>& pretext);

// --- class-balanced weights ------------------------------------------------

struct ClassWeights {
    std::vector<double> raw;        ///< (1 - beta) / (1 - beta^n)
    std::vector<double> normalized; ///< rescaled to sum to the number of classes
};

ClassWeights class_balance_weights(std::span<const std::size_t> counts, double beta);

// --- evaluation ------------------------------------------------------------

struct Evaluation {
    std::vector<std::string> classes;            ///< sorted; union of pred and gold
    std::vector<std::vector<std::size_t>> confusion; ///< [gold][pred]
    std::vector<double> f1;                      ///< per class, aligned with classes
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::size_t n = 0;
};

Evaluation evaluate_classifier(std::span<const std::string> pred, std::span<const std::string> gold);
/// Recipient overload: gold must not contain NA.
Evaluation evaluate_classifier(std::span<const Recipient> pred, std::span<const Recipient> gold);
Evaluation evaluate_classifier(std::span<const Nature> pred, std::span<const Nature> gold);

// --- annotation cost -------------------------------------------------------

struct TokenCount {
    double input = 0.0;
    double output = 0.0;
};

struct TokenPrices {
    double input_per_million = 0.0;
    double output_per_million = 0.0;
};

/// Cost of the sampled calls, scaled from `sampled_transcripts` to `n_transcripts`.
double estimate_cost(std::span<const TokenCount> calls, const TokenPrices& prices,
                     double n_transcripts, double sampled_transcripts = 1.0);

// --- label files -----------------------------------------------------------

std::vector<LabeledUtterance> parse_labels(std::string_view text, const std::string& source = "<memory>");
std::vector<LabeledUtterance> load_labels(const std::filesystem::path& path);
std::string serialize_labels(const std::vector<LabeledUtterance>& labels);
void write_labels(const std::filesystem::path& path, const std::vector<LabeledUtterance>& labels);

/// Labels grouped per session, sorted by utterance index.
std::map<std::string, std::vector<LabeledUtterance>>
group_labels(const std::vector<LabeledUtterance>& labels);

// --- local classifiers over a corpus ---------------------------------------

enum class HeuristicKind { name_text, name_context };

/// One label per utterance of every kept session; nature from `lexicon`.
std::vector<LabeledUtterance> classify_corpus(const std::vector<SessionRecord>& sessions,
                                              HeuristicKind kind, const NatureLexicon& lexicon);

} // namespace attn
