#include "attn/cli.hpp"

#include "attn/classify.hpp"
#include "attn/corpus.hpp"
#include "attn/error.hpp"
#include "attn/remote.hpp"
#include "attn/stats.hpp"
#include "attn/studies.hpp"
#include "attn/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace attn::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Flag values after merging: flag, then environment, then config file.
struct RunConfig {
    std::string transcripts, roster, gold, labels, pred, report;
    std::string classifier = "name_context";
    std::string denominator = "talk_time";
    std::string aggregation = "pair_mean";
    std::vector<std::string> studies{"study1", "study2", "study3", "robustness"};
    std::string out = ".";
    std::string run_id;
    std::string truth;
    std::string synth_config;
    std::string preset = "paper";
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::string log_level = "warn";
    std::size_t min_cell_pairs = 10;
    std::size_t pairs = 0;
    std::size_t sessions_per_pair = 0;
    double tolerance = 0.005;
    std::map<std::string, double> tolerances;
    std::string dimension = "both";
    double cost_input_tokens = 0.0, cost_output_tokens = 0.0, price_input = 0.0, price_output = 0.0;
    double cost_transcripts = 100.0;
    json synth; ///< inline generator overrides from the config file
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << text;
}

/// count() throws for options a parser does not own, so look them up first.
bool flag_given(const CLI::App& app, const std::string& flag) {
    const auto* opt = app.get_option_no_throw(flag);
    return opt && opt->count() > 0;
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw CLI::ValidationError(flag, "required");
}

fs::path out_dir(const RunConfig& rc) {
    std::error_code ec;
    fs::create_directories(rc.out, ec);
    if (ec) throw data_error("cannot create output directory " + rc.out + ": " + ec.message());
    return rc.out;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<SessionRecord> load_corpus(const RunConfig& rc) {
    require(rc.transcripts, "--transcripts");
    require(rc.roster, "--roster");
    auto roster = stats::standardize_within_grade(load_roster(rc.roster));
    return preprocess(load_transcripts(rc.transcripts), roster);
}

// --- subcommands --------------------------------------------------------------

int cmd_ingest(const RunConfig& rc, std::ostream& out) {
    const auto sessions = load_corpus(rc);
    const auto tally = tally_exclusions(sessions);
    std::vector<SessionRecord> kept;
    for (const auto& s : sessions)
        if (s.kept) kept.push_back(s);

    std::ostringstream os;
    os << "sessions: " << tally.total << " loaded, " << tally.kept << " kept\n";
    for (const auto& [reason, n] : tally.by_reason) os << "excluded (" << reason << "): " << n << '\n';
    if (!kept.empty()) {
        const auto summary = describe_corpus(kept);
        char line[160];
        std::snprintf(line, sizeof line, "%-12s %8s %14s %12s %12s\n", "measure", "n", "total", "mean", "sd");
        os << line;
        for (const auto* m : {&summary.duration_s, &summary.words, &summary.utterances}) {
            std::snprintf(line, sizeof line, "%-12s %8zu %14.1f %12.2f %12s\n", m->measure.c_str(), m->n, m->total,
                          m->mean, m->sd ? fmt(*m->sd, 2).c_str() : "NA");
            os << line;
        }
    }
    out << os.str();
    write_file(out_dir(rc) / "ingest_summary.txt", os.str());
    return 0;
}

int cmd_classify(const RunConfig& rc, std::ostream& out) {
    const auto sessions = load_corpus(rc);
    std::vector<LabeledUtterance> labels;
    const std::string& c = rc.classifier;
    if (c == "name_text" || c == "name_context") {
        labels = classify_corpus(sessions, c == "name_text" ? HeuristicKind::name_text : HeuristicKind::name_context,
                                 NatureLexicon::defaults());
    } else if (c == "gold") {
        require(rc.gold, "--gold");
        std::map<std::string, std::set<std::size_t>> present;
        for (const auto& s : sessions)
            if (s.kept)
                for (const auto& u : s.utterances) present[s.session_id].insert(u.index);
        for (auto& l : load_labels(rc.gold)) {
            auto it = present.find(l.session_id);
            if (it != present.end() && it->second.contains(l.utterance_index)) labels.push_back(std::move(l));
        }
    } else if (c.starts_with("remote")) {
        remote::Options opt;
        if (c.size() > 7 && c[6] == ':') opt.endpoint = c.substr(7);
        if (opt.endpoint.empty()) throw data_error("remote classifier: no endpoint (use remote:URL or set " +
                                                   std::string(kEndpointEnv) + ")");
        opt.max_in_flight = std::max<std::size_t>(1, rc.jobs);
        spdlog::get("attn")->info("classifying with remote endpoint {}", opt.endpoint);
        const auto requests = remote::corpus_requests(sessions);
        labels = remote::classify_remote_all(requests, opt);
    } else {
        throw CLI::ValidationError("--classifier", "unknown classifier '" + c + "'");
    }
    const fs::path path = out_dir(rc) / "labels.csv";
    write_labels(path, labels);
    out << "wrote " << labels.size() << " labels to " << path.string() << '\n';
    return 0;
}

json evaluation_json(const Evaluation& e) {
    return json{{"n", e.n},
                {"accuracy", e.accuracy},
                {"macro_f1", e.macro_f1},
                {"classes", e.classes},
                {"f1", e.f1},
                {"confusion", e.confusion}};
}

int cmd_evaluate(const RunConfig& rc, std::ostream& out) {
    require(rc.pred, "--pred");
    require(rc.gold, "--gold");
    const auto pred = load_labels(rc.pred);
    const auto gold = load_labels(rc.gold);
    if (pred.empty()) throw data_error("evaluate: prediction file is empty");
    std::map<std::pair<std::string, std::size_t>, const LabeledUtterance*> by_id;
    for (const auto& g : gold) by_id[{g.session_id, g.utterance_index}] = &g;
    std::vector<Recipient> pr, gr;
    std::vector<Nature> pn, gn;
    std::set<std::string> sessions;
    for (const auto& p : pred) {
        auto it = by_id.find({p.session_id, p.utterance_index});
        if (it == by_id.end())
            throw data_error("evaluate: prediction " + p.session_id + "#" + std::to_string(p.utterance_index) +
                             " has no gold label");
        pr.push_back(p.recipient);
        gr.push_back(it->second->recipient);
        pn.push_back(p.nature);
        gn.push_back(it->second->nature);
        sessions.insert(p.session_id);
    }
    json doc = json::object();
    std::ostringstream os;
    if (rc.dimension == "both" || rc.dimension == "recipient") {
        const auto e = evaluate_classifier(std::span<const Recipient>(pr), std::span<const Recipient>(gr));
        doc["recipient"] = evaluation_json(e);
        os << "recipient: macro-F1 " << fmt(e.macro_f1) << ", accuracy " << fmt(e.accuracy) << ", n " << e.n << '\n';
    }
    if (rc.dimension == "both" || rc.dimension == "nature") {
        const auto e = evaluate_classifier(std::span<const Nature>(pn), std::span<const Nature>(gn));
        doc["nature"] = evaluation_json(e);
        os << "nature: macro-F1 " << fmt(e.macro_f1) << ", accuracy " << fmt(e.accuracy) << ", n " << e.n << '\n';
    }
    if (rc.price_input > 0.0 || rc.price_output > 0.0) {
        std::vector<TokenCount> calls(pred.size(), TokenCount{rc.cost_input_tokens, rc.cost_output_tokens});
        const double cost = estimate_cost(calls, {rc.price_input, rc.price_output}, rc.cost_transcripts,
                                          static_cast<double>(sessions.size()));
        doc["cost"] = json{{"transcripts", rc.cost_transcripts}, {"estimate", cost}};
        os << "estimated cost for " << rc.cost_transcripts << " transcripts: " << fmt(cost, 2) << '\n';
    }
    write_file(out_dir(rc) / "metrics.json", doc.dump(2) + "\n");
    out << os.str();
    return 0;
}

int cmd_run_studies(const RunConfig& rc, std::ostream& out) {
    require(rc.labels, "--labels");
    const auto sessions = load_corpus(rc);
    const auto labels = load_labels(rc.labels);
    studies::Config cfg;
    cfg.aggregation = studies::parse_aggregation(rc.aggregation);
    cfg.denominator = parse_denominator(rc.denominator);
    cfg.min_cell_pairs = rc.min_cell_pairs;
    const auto input = studies::prepare(sessions, labels, cfg.denominator);

    std::vector<studies::StudyReport> reports;
    for (const auto& s : rc.studies) {
        spdlog::get("attn")->info("running {}", s);
        if (s == "study1")
            reports.push_back(studies::run_study1(input, cfg));
        else if (s == "study2")
            reports.push_back(studies::run_study2(input, cfg));
        else if (s == "study3")
            reports.push_back(studies::run_study3(input, cfg));
        else if (s == "robustness")
            reports.push_back(studies::run_robustness(input, cfg));
        else
            throw CLI::ValidationError("--studies", "unknown study '" + s + "'");
    }
    const std::string run_id = rc.run_id.empty() ? input.fingerprint.corpus_digest : rc.run_id;
    for (auto& r : reports) r.run_id = run_id;
    const auto dir = out_dir(rc);
    const auto written = studies::emit_report(reports, dir, run_id);
    for (const auto& r : reports) out << studies::render_report(r) << '\n';
    out << "wrote " << written.size() << " file(s) to " << dir.string() << '\n';

    if (rc.truth.empty()) return 0;
    const auto truth = synth::truth_from_json(read_file(rc.truth));
    const auto verdicts = synth::truth_check(truth, reports, rc.tolerance, rc.tolerances);
    std::string table = "key,truth,estimate,deviation,tolerance,pass,covered\n";
    std::size_t failed = 0;
    for (const auto& v : verdicts) {
        if (!v.pass) ++failed;
        char line[256];
        std::snprintf(line, sizeof line, "%s,%.10g,%s,%s,%.10g,%d,%s\n", v.key.c_str(), v.truth,
                      v.found ? fmt(v.estimate, 10).c_str() : "", v.found ? fmt(v.deviation, 10).c_str() : "",
                      v.tolerance, v.pass ? 1 : 0, v.has_ci ? (v.covered ? "1" : "0") : "");
        table += line;
    }
    write_file(dir / (run_id + ".truth_check.csv"), table);
    out << "truth check: " << verdicts.size() - failed << "/" << verdicts.size() << " within tolerance\n";
    for (const auto& v : verdicts)
        if (!v.pass)
            out << "  FAIL " << v.key << (v.found ? " deviation " + fmt(100.0 * v.deviation, 3) + " pp" : " missing")
                << '\n';
    return failed == 0 ? 0 : 3;
}

int cmd_synth(const RunConfig& rc, std::ostream& out) {
    synth::GeneratorConfig g;
    if (rc.preset == "paper")
        g = synth::GeneratorConfig::paper();
    else if (rc.preset == "null")
        g = synth::GeneratorConfig::null();
    else
        throw CLI::ValidationError("--preset", "unknown preset '" + rc.preset + "'");
    if (!rc.synth.is_null()) g = synth::config_from_json(rc.synth.dump(), g);
    if (!rc.synth_config.empty()) g = synth::config_from_json(read_file(rc.synth_config), g);
    g.seed = rc.seed;
    if (rc.pairs) g.n_pairs = rc.pairs;
    if (rc.sessions_per_pair) g.sessions_per_pair = rc.sessions_per_pair;
    const auto corpus = synth::generate(g, rc.jobs);
    const auto dir = out_dir(rc);
    synth::write_corpus(dir, corpus, g);
    out << "wrote " << corpus.sessions.size() << " sessions, " << corpus.labels.size() << " labels (run "
        << corpus.truth.run_id << ") to " << dir.string() << '\n';
    return 0;
}

int cmd_report(const RunConfig& rc, std::ostream& out) {
    require(rc.report, "--report");
    for (const auto& r : studies::read_report(rc.report)) out << studies::render_report(r) << '\n';
    return 0;
}

// --- config file ----------------------------------------------------------------

void apply_config_file(RunConfig& rc, const std::string& path, const CLI::App& app, const CLI::App& sub) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw data_error("config " + path + ": " + e.what());
    }
    auto given = [&](const std::string& flag) { return flag_given(app, flag) || flag_given(sub, flag); };
    auto take = [&](const char* key, auto& into, const std::string& flag) {
        if (j.contains(key) && !given(flag)) into = j.at(key).get<std::decay_t<decltype(into)>>();
    };
    try {
        take("transcripts", rc.transcripts, "--transcripts");
        take("roster", rc.roster, "--roster");
        take("gold", rc.gold, "--gold");
        take("labels", rc.labels, "--labels");
        take("pred", rc.pred, "--pred");
        take("report", rc.report, "--report");
        take("classifier", rc.classifier, "--classifier");
        take("denominator", rc.denominator, "--denominator");
        take("aggregation", rc.aggregation, "--aggregation");
        take("studies", rc.studies, "--studies");
        take("out", rc.out, "--out");
        take("run_id", rc.run_id, "--run-id");
        take("truth", rc.truth, "--truth");
        take("preset", rc.preset, "--preset");
        take("seed", rc.seed, "--seed");
        take("jobs", rc.jobs, "--jobs");
        take("log_level", rc.log_level, "--log-level");
        take("min_cell_pairs", rc.min_cell_pairs, "--min-cell-pairs");
        take("pairs", rc.pairs, "--pairs");
        take("sessions_per_pair", rc.sessions_per_pair, "--sessions-per-pair");
        take("tolerance", rc.tolerance, "--tolerance");
        take("dimension", rc.dimension, "--dimension");
        if (j.contains("tolerances")) rc.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
        if (j.contains("synth")) rc.synth = j.at("synth");
    } catch (const json::exception& e) {
        throw data_error("config " + path + ": " + e.what());
    }
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, const std::string& level) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    sink->set_pattern("[%l] %v");
    auto logger = std::make_shared<spdlog::logger>("attn", sink);
    logger->set_level(spdlog::level::from_str(level));
    spdlog::drop("attn");
    spdlog::register_logger(logger);
    return logger;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    std::string config_path;
    CLI::App app{"attn-engine: tutor attention analytics"};
    app.require_subcommand(1);
    app.add_option("--config", config_path, "JSON run configuration; flags take precedence")->check(CLI::ExistingFile);
    app.add_option("--seed", rc.seed, "random seed");
    app.add_option("--out", rc.out, "output directory");
    app.add_option("--jobs", rc.jobs, "worker threads / concurrent remote calls");
    app.add_option("--log-level", rc.log_level, "trace|debug|info|warn|error|off");

    auto corpus_opts = [&](CLI::App* s) {
        s->add_option("--transcripts", rc.transcripts, "line-delimited transcript file");
        s->add_option("--roster", rc.roster, "student roster CSV");
    };
    auto* ingest = app.add_subcommand("ingest", "summarize a corpus and its exclusions");
    corpus_opts(ingest);
    auto* classify = app.add_subcommand("classify", "label every kept utterance");
    corpus_opts(classify);
    classify->add_option("--classifier", rc.classifier, "name_text | name_context | gold | remote[:URL]");
    classify->add_option("--gold", rc.gold, "gold label file (for --classifier gold)");
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold labels");
    evaluate->add_option("--pred", rc.pred, "predicted labels");
    evaluate->add_option("--gold", rc.gold, "gold labels");
    evaluate->add_option("--dimension", rc.dimension, "recipient | nature | both");
    evaluate->add_option("--input-tokens", rc.cost_input_tokens, "mean input tokens per call");
    evaluate->add_option("--output-tokens", rc.cost_output_tokens, "mean output tokens per call");
    evaluate->add_option("--price-input", rc.price_input, "price per million input tokens");
    evaluate->add_option("--price-output", rc.price_output, "price per million output tokens");
    evaluate->add_option("--cost-transcripts", rc.cost_transcripts, "number of transcripts to cost");
    auto* studies_cmd = app.add_subcommand("run-studies", "run the studies and emit reports");
    corpus_opts(studies_cmd);
    studies_cmd->add_option("--labels", rc.labels, "label file");
    studies_cmd->add_option("--studies", rc.studies, "study1 study2 study3 robustness")->delimiter(',');
    studies_cmd->add_option("--denominator", rc.denominator, "talk_time | session_span");
    studies_cmd->add_option("--aggregation", rc.aggregation, "pair_mean | pooled_sessions");
    studies_cmd->add_option("--min-cell-pairs", rc.min_cell_pairs, "low-n flag threshold");
    studies_cmd->add_option("--run-id", rc.run_id, "report file prefix (default: corpus digest)");
    studies_cmd->add_option("--truth", rc.truth, "truth record to check the estimates against");
    studies_cmd->add_option("--tolerance", rc.tolerance, "truth-check tolerance (fraction, 0.005 = 0.5 pp)");
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus with planted effects");
    synth_cmd->add_option("--preset", rc.preset, "paper | null");
    synth_cmd->add_option("--synth-config", rc.synth_config, "generator overrides (JSON)");
    synth_cmd->add_option("--pairs", rc.pairs, "number of pairs");
    synth_cmd->add_option("--sessions-per-pair", rc.sessions_per_pair, "sessions per pair");
    auto* report = app.add_subcommand("report", "render an emitted report as text");
    report->add_option("--report", rc.report, "report JSON file");

    std::vector<std::string> argv_store{"attn-engine"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!config_path.empty()) apply_config_file(rc, config_path, app, *sub);
        // Flag > environment > config file for the remote endpoint.
        if (const char* env = std::getenv(kEndpointEnv); env && *env && !flag_given(*sub, "--classifier") &&
                                                         rc.classifier.starts_with("remote"))
            rc.classifier = std::string("remote:") + env;
        auto log = make_logger(err, rc.log_level);
        log->debug("subcommand {}", sub->get_name());
        const std::string name = sub->get_name();
        if (name == "ingest") return cmd_ingest(rc, out);
        if (name == "classify") return cmd_classify(rc, out);
        if (name == "evaluate") return cmd_evaluate(rc, out);
        if (name == "run-studies") return cmd_run_studies(rc, out);
        if (name == "synth") return cmd_synth(rc, out);
        if (name == "report") return cmd_report(rc, out);
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace attn::cli
