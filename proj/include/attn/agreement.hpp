#pragma once

#include "attn/classify.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace attn {

inline constexpr std::string_view kNA = "NA";

struct Annotation {
    std::string item_id;
    std::string annotator_id;
    std::string label;
};

/// Multi-annotator label table. NA is an ordinary category here.
class AnnotationSet {
public:
    AnnotationSet() = default;
    /// Throws data_error on duplicate (item, annotator) or a label outside `categories`
    /// (when categories is non-empty; otherwise categories are inferred).
    explicit AnnotationSet(std::vector<Annotation> items, std::set<std::string> categories = {});

    const std::vector<Annotation>& items() const { return items_; }
    const std::set<std::string>& categories() const { return categories_; }

    /// Recipient annotations from label files, item id "<session_id>#<utterance_index>".
    static AnnotationSet from_labels(const std::vector<LabeledUtterance>& labels);

private:
    std::vector<Annotation> items_;
    std::set<std::string> categories_;
};

struct CategoryAgreement {
    std::string category;
    double proportion = 0.0; ///< share of all assignments in this category
    double kappa = 0.0;      ///< per-category Fleiss kappa
};

struct FleissResult {
    double kappa = 0.0;
    double observed = 0.0; ///< mean per-item agreement
    double expected = 0.0; ///< chance agreement from pooled proportions
    std::size_t items = 0;
    std::size_t raters_per_item = 0;
    std::vector<CategoryAgreement> per_category;
    /// Unweighted mean of per-category kappas over categories that occur.
    double mean_category_kappa = 0.0;
};

/// Pooled Fleiss kappa. Throws stats_error when items have unequal rater
/// counts, fewer than two raters, or chance agreement is 1.
FleissResult fleiss_kappa(const AnnotationSet& set);

struct CohenResult {
    double kappa = 0.0;
    double observed = 0.0;
    double expected = 0.0;
};

/// Throws stats_error on length mismatch, empty input, or chance agreement 1.
CohenResult cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

/// item_id -> label
using LabelMap = std::map<std::string, std::string>;

/// Agreed non-NA items pass through; all others take the resolution.
/// Throws data_error listing uncovered items or resolutions to NA.
LabelMap adjudicate(const LabelMap& primary, const LabelMap& secondary, const LabelMap& resolutions);

} // namespace attn
