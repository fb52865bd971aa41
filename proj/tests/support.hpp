#pragma once

#include "attn/classify.hpp"
#include "attn/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace testing {

using namespace attn;

struct U {
    double start, end;
    std::string text = "hi";
};

inline SessionRecord session(std::string id, std::string a, std::string b, std::vector<U> us,
                             double planned = 1200.0, double entry_a = 0.0, double entry_b = 0.0) {
    SessionRecord s;
    s.session_id = std::move(id);
    s.student_a_id = std::move(a);
    s.student_b_id = std::move(b);
    s.pair_id = canonical_pair_id(s.student_a_id, s.student_b_id);
    s.planned_duration_s = planned;
    s.entry_a_s = entry_a;
    s.entry_b_s = entry_b;
    for (std::size_t i = 0; i < us.size(); ++i) s.utterances.push_back({i, us[i].start, us[i].end, us[i].text});
    return s;
}

inline StudentRecord student(std::string id, Gender g, Race r, ElStatus e, double z, Grade grade = Grade::K) {
    StudentRecord s;
    s.student_id = std::move(id);
    s.gender = g;
    s.race = r;
    s.el_status = e;
    s.grade = grade;
    s.baseline_raw = z;
    s.baseline_z = z;
    return s;
}

inline LabeledUtterance label(const std::string& sid, std::size_t idx, Recipient r, Nature n = Nature::content) {
    LabeledUtterance l;
    l.session_id = sid;
    l.utterance_index = idx;
    l.recipient = r;
    l.nature = n;
    return l;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("attn-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

} // namespace testing
