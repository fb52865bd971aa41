#include "attn/agreement.hpp"

#include "attn/error.hpp"

#include <cmath>

namespace attn {

AnnotationSet::AnnotationSet(std::vector<Annotation> items, std::set<std::string> categories)
    : items_(std::move(items)), categories_(std::move(categories)) {
    const bool infer = categories_.empty();
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& a : items_) {
        if (!seen.emplace(a.item_id, a.annotator_id).second)
            throw data_error("duplicate annotation for item " + a.item_id + " by " + a.annotator_id);
        if (infer)
            categories_.insert(a.label);
        else if (!categories_.count(a.label))
            throw data_error("label '" + a.label + "' on item " + a.item_id + " is not a known category");
    }
}

AnnotationSet AnnotationSet::from_labels(const std::vector<LabeledUtterance>& labels) {
    std::vector<Annotation> items;
    items.reserve(labels.size());
    for (const auto& l : labels)
        items.push_back({l.session_id + "#" + std::to_string(l.utterance_index), l.annotator_id,
                         std::string(to_string(l.recipient))});
    return AnnotationSet(std::move(items), {"0", "1", "2", "3", std::string(kNA)});
}

FleissResult fleiss_kappa(const AnnotationSet& set) {
    std::vector<std::string> cats(set.categories().begin(), set.categories().end());
    std::map<std::string, std::size_t> cat_index;
    for (std::size_t i = 0; i < cats.size(); ++i) cat_index[cats[i]] = i;

    std::map<std::string, std::vector<std::size_t>> counts; // item -> per-category count
    for (const auto& a : set.items()) {
        auto& row = counts[a.item_id];
        row.resize(cats.size(), 0);
        ++row[cat_index.at(a.label)];
    }
    if (counts.empty()) throw stats_error("fleiss_kappa: no items");

    std::size_t n = 0;
    for (const auto& [item, row] : counts) {
        std::size_t r = 0;
        for (auto c : row) r += c;
        if (n == 0) n = r;
        if (r != n) throw stats_error("fleiss_kappa: item " + item + " has " + std::to_string(r) +
                                      " ratings, expected " + std::to_string(n));
    }
    if (n < 2) throw stats_error("fleiss_kappa: at least two raters per item required");

    const double N = static_cast<double>(counts.size());
    const double dn = static_cast<double>(n);
    std::vector<double> p(cats.size(), 0.0);
    double p_bar = 0.0;
    for (const auto& [_, row] : counts) {
        double agree = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double c = static_cast<double>(row[j]);
            p[j] += c;
            agree += c * (c - 1.0);
        }
        p_bar += agree / (dn * (dn - 1.0));
    }
    p_bar /= N;
    double p_e = 0.0;
    for (auto& pj : p) {
        pj /= N * dn;
        p_e += pj * pj;
    }
    if (std::abs(1.0 - p_e) < 1e-15)
        throw stats_error("fleiss_kappa: degenerate category distribution (chance agreement is 1)");

    FleissResult res;
    res.kappa = (p_bar - p_e) / (1.0 - p_e);
    res.observed = p_bar;
    res.expected = p_e;
    res.items = counts.size();
    res.raters_per_item = n;

    double kappa_sum = 0.0;
    std::size_t kappa_count = 0;
    for (std::size_t j = 0; j < cats.size(); ++j) {
        CategoryAgreement ca;
        ca.category = cats[j];
        ca.proportion = p[j];
        const double q = 1.0 - p[j];
        if (p[j] > 0.0 && q > 0.0) {
            double disagreement = 0.0;
            for (const auto& [_, row] : counts) {
                const double c = static_cast<double>(row[j]);
                disagreement += c * (dn - c);
            }
            ca.kappa = 1.0 - disagreement / (N * dn * (dn - 1.0) * p[j] * q);
            kappa_sum += ca.kappa;
            ++kappa_count;
        }
        res.per_category.push_back(ca);
    }
    res.mean_category_kappa = kappa_count ? kappa_sum / static_cast<double>(kappa_count) : 0.0;
    return res;
}

CohenResult cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() != b.size()) throw stats_error("cohen_kappa: length mismatch");
    if (a.empty()) throw stats_error("cohen_kappa: empty input");
    std::map<std::string, std::pair<double, double>> marg;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        marg[a[i]].first += 1.0;
        marg[b[i]].second += 1.0;
        if (a[i] == b[i]) agree += 1.0;
    }
    const double n = static_cast<double>(a.size());
    CohenResult r;
    r.observed = agree / n;
    for (const auto& [_, m] : marg) r.expected += (m.first / n) * (m.second / n);
    if (std::abs(1.0 - r.expected) < 1e-15)
        throw stats_error("cohen_kappa: degenerate marginals (chance agreement is 1)");
    r.kappa = (r.observed - r.expected) / (1.0 - r.expected);
    return r;
}

LabelMap adjudicate(const LabelMap& primary, const LabelMap& secondary, const LabelMap& resolutions) {
    LabelMap out;
    std::vector<std::string> missing;
    for (const auto& [item, label] : primary) {
        auto it = secondary.find(item);
        const bool agreed = it != secondary.end() && it->second == label && label != kNA;
        if (agreed) {
            out[item] = label;
            continue;
        }
        auto res = resolutions.find(item);
        if (res == resolutions.end()) {
            missing.push_back(item);
            continue;
        }
        if (res->second == kNA) throw data_error("adjudicate: resolution for " + item + " is NA");
        out[item] = res->second;
    }
    for (const auto& [item, _] : secondary)
        if (!primary.count(item)) missing.push_back(item + " (secondary only)");
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw data_error("adjudicate: unresolved items: " + list);
    }
    return out;
}

} // namespace attn
