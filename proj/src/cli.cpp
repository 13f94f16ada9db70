#include "phonoscope/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "phonoscope/analyses.hpp"
#include "phonoscope/corpus.hpp"
#include "phonoscope/error.hpp"
#include "phonoscope/feature_config.hpp"
#include "phonoscope/hash.hpp"
#include "phonoscope/profiles.hpp"
#include "phonoscope/report.hpp"
#include "phonoscope/synth.hpp"

#ifndef PHONOSCOPE_VERSION
#define PHONOSCOPE_VERSION "0.0.0"
#endif

namespace phonoscope::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kVersion = PHONOSCOPE_VERSION;

[[noreturn]] void config_error(const std::string& message) { fail(ErrorKind::ConfigInvalid, message); }

const std::map<std::string, std::string>& aliases() {
    static const std::map<std::string, std::string> m{
        {"aetiology_discrimination", "aetiology"}, {"crosslingual_consistency", "crosslingual"},
        {"fixed_token_dprime", "fixed_token"},     {"token_matched_comparison", "token_matched"},
        {"lodo_stability", "lodo"},                {"centroid_classifier", "classifier"},
        {"residualized_rankings", "residualized"}, {"baseline_comparison", "baseline"}};
    return m;
}

const std::map<std::string, std::set<std::string>>& allowed_params() {
    static const std::map<std::string, std::set<std::string>> m{
        {"severity_gradient", {"measure", "stratify_by_token_quartile", "n_boot", "seed", "filter"}},
        {"aetiology", {"groups", "features", "min_deviation_n", "seed", "filter"}},
        {"crosslingual", {"min_n", "min_hc", "n_boot", "n_perm", "min_n_sweep", "min_hc_sweep", "groups", "seed"}},
        {"backbone_agreement", {"reference_backbone", "min_shared", "seed"}},
        {"fixed_token", {"budgets", "n_repeats", "groups", "seed"}},
        {"token_matched", {"tolerance", "measure", "seed"}},
        {"lodo", {"measure", "groups", "seed"}},
        {"classifier", {"features", "groups", "seed"}},
        {"residualized", {"features", "groups", "seed"}},
        {"baseline", {"k_folds", "lambda", "min_rows", "seed"}},
    };
    return m;
}

std::string canonical_id(const std::string& id) {
    if (auto it = aliases().find(id); it != aliases().end()) return it->second;
    if (allowed_params().contains(id)) return id;
    config_error("unknown analysis '" + id + "'");
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) config_error(where + " must be a JSON object");
    for (const auto& [k, _] : j.items())
        if (!allowed.contains(k)) config_error("unknown key '" + k + "' in " + where);
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        config_error("bad value for '" + key + "' in " + where);
    }
}

std::uint64_t get_u64(const json& j, const std::string& key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        config_error("'" + key + "' in " + where + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

std::vector<Aetiology> parse_groups(const json& j, const std::string& where) {
    std::vector<Aetiology> out;
    for (const auto& s : get_as<std::vector<std::string>>(j, "groups", where)) {
        const auto a = parse_aetiology(s);
        if (!a) config_error("unknown aetiology '" + s + "' in " + where);
        out.push_back(*a);
    }
    return out;
}

Measure parse_measure_key(const json& j, const std::string& where) {
    const auto s = get_as<std::string>(j, "measure", where);
    const auto m = parse_measure(s);
    if (!m) config_error("unknown measure '" + s + "' in " + where);
    return *m;
}

FeatureSubset parse_subset_key(const json& j, const std::string& where) {
    const auto s = get_as<std::string>(j, "features", where);
    const auto f = parse_feature_subset(s);
    if (!f) config_error("unknown feature subset '" + s + "' in " + where);
    return *f;
}

analyses::RowFilter parse_filter(const json& j, const std::string& where) {
    analyses::RowFilter f;
    if (!j.contains("filter")) return f;
    const auto& o = j.at("filter");
    const std::string w = where + ".filter";
    check_keys(o, {"severity_source", "severity", "exclude_datasets"}, w);
    if (o.contains("severity_source")) {
        const auto s = get_as<std::string>(o, "severity_source", w);
        f.severity_source = parse_severity_source(s);
        if (!f.severity_source) config_error("unknown severity_source '" + s + "' in " + w);
    }
    if (o.contains("severity")) {
        const auto s = get_as<std::string>(o, "severity", w);
        f.severity = parse_severity(s);
        if (!f.severity) config_error("unknown severity '" + s + "' in " + w);
    }
    if (o.contains("exclude_datasets")) f.exclude_datasets = get_as<std::vector<std::string>>(o, "exclude_datasets", w);
    return f;
}

std::uint64_t seed_of(const json& p, std::uint64_t fallback, const std::string& where) {
    return p.contains("seed") ? get_u64(p, "seed", where) : fallback;
}

// Parameter objects are converted to options both at parse time (validation) and at run time.
struct AnalysisOptions {
    analyses::SeverityGradientOptions severity;
    analyses::AetiologyOptions aetiology;
    analyses::CrosslingualOptions crosslingual;
    analyses::BackboneOptions backbone;
    analyses::FixedTokenOptions fixed;
    analyses::TokenMatchOptions matched;
    analyses::LodoOptions lodo;
    analyses::ClassifierOptions classifier;
    analyses::ResidualizedOptions residualized;
    analyses::BaselineOptions baseline;
};

AnalysisOptions build_options(const std::string& id, const json& p, std::uint64_t run_seed) {
    const std::string where = "analyses." + id;
    check_keys(p, allowed_params().at(id), where);
    AnalysisOptions o;
    const std::uint64_t seed = seed_of(p, run_seed, where);
    auto size = [&](const char* key, std::size_t& dst) {
        if (p.contains(key)) dst = static_cast<std::size_t>(get_u64(p, key, where));
    };
    auto sizes = [&](const char* key, std::vector<std::size_t>& dst) {
        if (p.contains(key)) dst = get_as<std::vector<std::size_t>>(p, key, where);
    };
    if (id == "severity_gradient") {
        auto& s = o.severity;
        s.seed = seed;
        if (p.contains("measure")) s.measure = parse_measure_key(p, where);
        if (p.contains("stratify_by_token_quartile"))
            s.stratify_by_token_quartile = get_as<bool>(p, "stratify_by_token_quartile", where);
        size("n_boot", s.n_boot);
        s.filter = parse_filter(p, where);
    } else if (id == "aetiology") {
        auto& s = o.aetiology;
        s.seed = seed;
        if (p.contains("groups")) s.groups = parse_groups(p, where);
        if (p.contains("features")) s.features = parse_subset_key(p, where);
        size("min_deviation_n", s.min_deviation_n);
        s.filter = parse_filter(p, where);
    } else if (id == "crosslingual") {
        auto& s = o.crosslingual;
        s.seed = seed;
        size("min_n", s.min_n);
        size("min_hc", s.min_hc);
        size("n_boot", s.n_boot);
        size("n_perm", s.n_perm);
        sizes("min_n_sweep", s.min_n_sweep);
        sizes("min_hc_sweep", s.min_hc_sweep);
        if (p.contains("groups")) s.groups = parse_groups(p, where);
    } else if (id == "backbone_agreement") {
        auto& s = o.backbone;
        s.seed = seed;
        if (p.contains("reference_backbone")) s.reference_backbone = get_as<std::string>(p, "reference_backbone", where);
        size("min_shared", s.min_shared);
    } else if (id == "fixed_token") {
        auto& s = o.fixed;
        s.seed = seed;
        sizes("budgets", s.budgets);
        size("n_repeats", s.n_repeats);
        if (p.contains("groups")) s.groups = parse_groups(p, where);
    } else if (id == "token_matched") {
        auto& s = o.matched;
        s.seed = seed;
        if (p.contains("tolerance")) s.tolerance = get_as<double>(p, "tolerance", where);
        if (p.contains("measure")) s.measure = parse_measure_key(p, where);
    } else if (id == "lodo") {
        auto& s = o.lodo;
        s.seed = seed;
        if (p.contains("measure")) s.measure = parse_measure_key(p, where);
        if (p.contains("groups")) s.groups = parse_groups(p, where);
    } else if (id == "classifier") {
        auto& s = o.classifier;
        s.seed = seed;
        if (p.contains("features")) s.features = parse_subset_key(p, where);
        if (p.contains("groups")) s.groups = parse_groups(p, where);
    } else if (id == "residualized") {
        auto& s = o.residualized;
        s.seed = seed;
        if (p.contains("features")) s.features = parse_subset_key(p, where);
        if (p.contains("groups")) s.groups = parse_groups(p, where);
    } else if (id == "baseline") {
        auto& s = o.baseline;
        s.seed = seed;
        if (p.contains("k_folds")) s.k_folds = get_as<int>(p, "k_folds", where);
        if (p.contains("lambda")) s.lambda = get_as<double>(p, "lambda", where);
        size("min_rows", s.min_rows);
    }
    return o;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorKind::MissingFile, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot write " + p.string());
    out << text;
    if (!out) fail(ErrorKind::IoError, "write failed for " + p.string());
}

json finding_json(const Finding& f) {
    return {{"level", std::string(to_string(f.level))},
            {"code", f.code},
            {"speaker_id", f.speaker_id},
            {"message", f.message}};
}

std::string format_finding(const Finding& f) {
    std::string s = std::string(to_string(f.level)) + " " + f.code;
    if (!f.speaker_id.empty()) s += " [" + f.speaker_id + "]";
    return s + ": " + f.message;
}

// Command line after CLI11 parsing.
struct Invocation {
    std::string command;
    std::string analysis;
    std::string config_path;
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> corpus;
    std::vector<std::string> backbones;
    std::optional<std::string> feature_configs;
    bool severity_override = false;
    std::optional<std::size_t> min_n, min_hc, n_boot, n_perm, n_repeats;
    std::optional<double> tolerance;
    std::vector<std::size_t> budgets;
    std::optional<std::string> measure;
};

class Runner {
public:
    Runner(RunConfig config, Invocation inv, std::ostream& out)
        : config_(std::move(config)), inv_(std::move(inv)), out_(out) {
        std::string key = inv_.command;
        if (!inv_.analysis.empty()) key += " " + inv_.analysis;
        config_hash_ = sha256_hex(key + "\n" + config_.canonical());
        run_dir_ = config_.output_dir / ("run-" + config_hash_.substr(0, 12));
    }

    int run() {
        fs::create_directories(run_dir_);
        write_meta();
        int status = kExitOk;
        if (inv_.command == "validate") status = validate();
        else if (inv_.command == "profiles") status = profiles();
        else if (inv_.command == "analyze") status = analyze();
        else if (inv_.command == "synth") status = synth();
        else if (inv_.command == "selftest") status = selftest();
        out_ << "output: " << run_dir_.string() << "\n";
        return status;
    }

private:
    void write_meta() {
        json meta{{"command", inv_.command},
                  {"config_sha256", config_hash_},
                  {"seed", config_.seed},
                  {"tool_version", std::string(kVersion)}};
        if (!inv_.analysis.empty()) meta["analysis"] = inv_.analysis;
        write_text(run_dir_ / "run_meta.json", meta.dump(2) + "\n");
    }

    void require_corpus() const {
        if (config_.corpus_root.empty()) config_error("corpus_root is required for " + inv_.command);
    }

    std::vector<std::string> backbones() const {
        if (!config_.backbone_ids.empty()) return config_.backbone_ids;
        const Manifest m = parse_manifest(read_text(config_.corpus_root / "manifest.json"));
        std::vector<std::string> out{m.backbone_id};
        for (const auto& [b, _] : m.backbone_dims)
            if (b != m.backbone_id) out.push_back(b);
        return out;
    }

    FeatureConfigMap configs() const {
        if (!config_.feature_config_dir.empty()) return load_feature_configs(config_.feature_config_dir);
        const fs::path fallback = config_.corpus_root / "feature_configs";
        if (fs::is_directory(fallback)) return load_feature_configs(fallback);
        return {};
    }

    int validate() {
        require_corpus();
        const auto fc = configs();
        bool errors = false;
        json all = json::object();
        for (const auto& b : backbones()) {
            const Corpus corpus = read_corpus(config_.corpus_root, b);
            const auto rep = validate_corpus(corpus, fc);
            json items = json::array();
            for (const auto& f : rep.findings) {
                out_ << b << ": " << format_finding(f) << "\n";
                items.push_back(finding_json(f));
            }
            out_ << b << ": " << rep.count(FindingLevel::error) << " errors, " << rep.count(FindingLevel::warning)
                 << " warnings\n";
            all[b] = items;
            errors = errors || rep.has_errors();
        }
        write_text(run_dir_ / "validation.json", all.dump(2) + "\n");
        return errors ? kExitCorpus : kExitOk;
    }

    struct Loaded {
        std::optional<Corpus> corpus;
        ProfileTable table;
        DirectionMap directions;
        std::vector<Finding> findings;
    };

    Loaded load(const std::string& backbone, bool need_corpus) const {
        Loaded l;
        if (auto it = config_.profiles.find(backbone); it != config_.profiles.end() && !need_corpus) {
            l.table = parse_profiles_csv(read_text(it->second));
        } else {
            require_corpus();
            l.corpus.emplace(read_corpus(config_.corpus_root, backbone));
            l.table = build_profile_table(*l.corpus, configs(), &l.findings, &l.directions);
        }
        if (config_.severity_override) l.table = analyses::apply_severity_override(l.table);
        return l;
    }

    int profiles() {
        for (const auto& b : backbones()) {
            const Loaded l = load(b, true);
            write_text(run_dir_ / b / "profiles.csv", dump_profiles_csv(l.table));
            json items = json::array();
            for (const auto& f : l.findings) items.push_back(finding_json(f));
            write_text(run_dir_ / b / "findings.json", items.dump(2) + "\n");
            out_ << b << ": " << l.table.size() << " speakers, " << l.findings.size() << " findings\n";
        }
        return kExitOk;
    }

    int analyze() {
        const std::string& id = inv_.analysis;
        json params = json::object();
        if (auto it = config_.analyses.find(id); it != config_.analyses.end()) params = json::parse(it->second);
        const AnalysisOptions o = build_options(id, params, config_.seed);
        AnalysisReport rep;
        if (id == "backbone_agreement") {
            std::map<std::string, ProfileTable> tables;
            for (const auto& b : backbones()) tables[b] = load(b, false).table;
            rep = analyses::backbone_agreement(tables, o.backbone);
        } else {
            const auto bs = backbones();
            const Loaded l = load(bs.front(), id == "fixed_token");
            if (id == "severity_gradient") rep = analyses::severity_gradient(l.table, o.severity);
            else if (id == "aetiology") rep = analyses::aetiology_discrimination(l.table, o.aetiology);
            else if (id == "crosslingual") rep = analyses::crosslingual_consistency(l.table, o.crosslingual);
            else if (id == "fixed_token") rep = analyses::fixed_token_dprime(*l.corpus, configs(), l.directions, o.fixed);
            else if (id == "token_matched") rep = analyses::token_matched_comparison(l.table, o.matched);
            else if (id == "lodo") rep = analyses::lodo_stability(l.table, o.lodo);
            else if (id == "classifier") rep = analyses::centroid_classifier_lodo(l.table, o.classifier);
            else if (id == "residualized") rep = analyses::residualized_rankings(l.table, o.residualized);
            else if (id == "baseline") rep = analyses::baseline_comparison(l.table, o.baseline);
            rep.parameters["backbone"] = bs.front();
        }
        for (const auto& p : write_report(rep, run_dir_, kVersion)) out_ << "wrote " << p.string() << "\n";
        print_summary(rep);
        return kExitOk;
    }

    void print_summary(const AnalysisReport& rep) {
        if (const auto* t = rep.find_table("severity_means")) {
            for (std::size_t r = 0; r < t->row_labels.size(); ++r)
                out_ << "  " << t->row_labels[r] << " mean=" << format_number(t->number(t->row_labels[r], "mean")) << "\n";
        }
        if (const auto* t = rep.find_table("monotonicity"); t && !t->row_labels.empty())
            out_ << "  strictly_decreasing="
                 << (t->number(t->row_labels.front(), "strictly_decreasing") == 1.0 ? "true" : "false") << "\n";
        for (const auto& f : rep.findings) out_ << "  finding: " << f << "\n";
    }

    synth::SynthSpec spec() const {
        synth::SynthSpec s = config_.synth ? synth::parse_synth_spec(*config_.synth) : synth::default_spec();
        s.seed = config_.seed;
        synth::validate_spec(s);
        return s;
    }

    int synth() {
        const auto sc = synth::generate_corpus(spec());
        const fs::path root = run_dir_ / "corpus";
        synth::write_synth_corpus(sc, root, root / "feature_configs");
        out_ << "synthetic corpus: " << root.string() << " (" << sc.manifest.speakers.size() << " speakers)\n";
        return kExitOk;
    }

    int selftest() {
        const auto sc = synth::generate_corpus(spec());
        const fs::path root = run_dir_ / "corpus";
        synth::write_synth_corpus(sc, root, root / "feature_configs");
        const auto ledger = synth::parse_ledger(read_text(root / "ground_truth.json"));
        const auto fc = load_feature_configs(root / "feature_configs");
        bool passed = true;
        json results = json::object();
        for (const auto& b : spec().backbone_ids) {
            const Corpus corpus = read_corpus(root, b);
            std::vector<Finding> findings;
            const ProfileTable table = build_profile_table(corpus, fc, &findings);
            const auto check = synth::ledger_check(corpus, ledger, table, findings);
            results[b] = {{"cells", check.cells},       {"within", check.within},
                          {"missing", check.missing},   {"degenerate", check.degenerate},
                          {"fraction", check.fraction}, {"passed", check.passed},
                          {"findings", check.findings}};
            out_ << b << ": " << check.within << "/" << check.cells << " within tolerance ("
                 << format_number(check.fraction) << ") " << (check.passed ? "PASS" : "FAIL") << "\n";
            passed = passed && check.passed;
        }
        write_text(run_dir_ / "selftest.json", results.dump(2) + "\n");
        return passed ? kExitOk : kExitAnalysis;
    }

    RunConfig config_;
    Invocation inv_;
    std::ostream& out_;
    std::string config_hash_;
    fs::path run_dir_;
};

// Folds flag overrides into the parsed config.
void apply_overrides(RunConfig& c, const Invocation& inv) {
    if (inv.seed) c.seed = *inv.seed;
    if (inv.output) c.output_dir = *inv.output;
    if (inv.corpus) c.corpus_root = *inv.corpus;
    if (!inv.backbones.empty()) c.backbone_ids = inv.backbones;
    if (inv.feature_configs) c.feature_config_dir = *inv.feature_configs;
    if (inv.severity_override) c.severity_override = true;

    json p = json::object();
    bool touched = false;
    auto set = [&](const char* key, const json& v) {
        touched = true;
        p[key] = v;
    };
    if (inv.command == "analyze")
        if (auto it = c.analyses.find(inv.analysis); it != c.analyses.end()) p = json::parse(it->second);
    if (inv.min_n) set("min_n", *inv.min_n);
    if (inv.min_hc) set("min_hc", *inv.min_hc);
    if (inv.n_boot) set("n_boot", *inv.n_boot);
    if (inv.n_perm) set("n_perm", *inv.n_perm);
    if (inv.n_repeats) set("n_repeats", *inv.n_repeats);
    if (inv.tolerance) set("tolerance", *inv.tolerance);
    if (!inv.budgets.empty()) set("budgets", inv.budgets);
    if (inv.measure) set("measure", *inv.measure);
    if (!touched) return;
    if (inv.command != "analyze") config_error("analysis overrides need the analyze command");
    build_options(inv.analysis, p, c.seed);
    c.analyses[inv.analysis] = p.dump();
}

} // namespace

std::string RunConfig::canonical() const {
    json j{{"seed", seed},
           {"corpus_root", corpus_root.string()},
           {"backbone_ids", backbone_ids},
           {"feature_config_dir", feature_config_dir.string()},
           {"output_dir", output_dir.string()},
           {"severity_override", severity_override}};
    json prof = json::object();
    for (const auto& [b, p] : profiles) prof[b] = p.string();
    j["profiles"] = prof;
    json an = json::object();
    for (const auto& [id, text] : analyses) an[id] = json::parse(text);
    j["analyses"] = an;
    j["synth"] = synth ? json::parse(*synth) : json(nullptr);
    return j.dump();
}

const std::vector<std::string>& analysis_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto& [id, _] : allowed_params()) v.push_back(id);
        return v;
    }();
    return ids;
}

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        config_error(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j,
               {"seed", "corpus_root", "backbone_ids", "feature_config_dir", "output_dir", "severity_override",
                "profiles", "analyses", "synth"},
               "config");
    if (!j.contains("seed")) config_error("seed is mandatory");
    RunConfig c;
    c.seed = get_u64(j, "seed", "config");
    if (j.contains("corpus_root")) c.corpus_root = resolve(base_dir, get_as<std::string>(j, "corpus_root", "config"));
    if (j.contains("backbone_ids")) c.backbone_ids = get_as<std::vector<std::string>>(j, "backbone_ids", "config");
    if (j.contains("feature_config_dir"))
        c.feature_config_dir = resolve(base_dir, get_as<std::string>(j, "feature_config_dir", "config"));
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, get_as<std::string>(j, "output_dir", "config"));
    else c.output_dir = base_dir / c.output_dir;
    if (j.contains("severity_override")) c.severity_override = get_as<bool>(j, "severity_override", "config");
    if (j.contains("profiles")) {
        if (!j["profiles"].is_object()) config_error("profiles must map backbone ids to paths");
        for (const auto& [b, p] : j["profiles"].items()) {
            if (!p.is_string()) config_error("profiles." + b + " must be a path");
            c.profiles[b] = resolve(base_dir, p.get<std::string>());
        }
    }
    if (j.contains("analyses")) {
        if (!j["analyses"].is_object()) config_error("analyses must be an object keyed by analysis id");
        for (const auto& [id, p] : j["analyses"].items()) {
            const std::string cid = canonical_id(id);
            build_options(cid, p, c.seed);
            c.analyses[cid] = p.dump();
        }
    }
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        if (!s.is_object()) config_error("synth must be an object");
        if (s.contains("seed")) config_error("synth.seed is not allowed; the run seed drives the generator");
        try {
            synth::validate_spec(synth::parse_synth_spec(s.dump()));
        } catch (const Error& e) {
            config_error(std::string("synth: ") + e.what());
        }
        c.synth = s.dump();
    }
    return c;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Phonological-subspace d-prime profiling"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1, 1);
    Invocation inv;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", inv.config_path, "Run configuration (JSON)")->required();
        sub->add_option("--output", inv.output, "Output directory (overrides output_dir)");
        sub->add_option("--seed", inv.seed, "Seed (overrides seed)");
        sub->add_option("--corpus", inv.corpus, "Corpus root (overrides corpus_root)");
        sub->add_option("--backbone", inv.backbones, "Backbone id; repeatable (overrides backbone_ids)");
        sub->add_option("--feature-configs", inv.feature_configs, "Feature config directory");
        sub->add_flag("--severity-override", inv.severity_override, "Map intelligibility to severity");
    };
    auto* validate = app.add_subcommand("validate", "Check corpus invariants and token counts");
    auto* profiles = app.add_subcommand("profiles", "Write profiles.csv per backbone");
    auto* analyze = app.add_subcommand("analyze", "Run one analysis and write its report");
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
    auto* selftest = app.add_subcommand("selftest", "Generate, profile and check against the ground truth");
    for (auto* s : {validate, profiles, analyze, synth_cmd, selftest}) common(s);
    analyze->add_option("id", inv.analysis, "Analysis id")->required();
    analyze->add_option("--min-n", inv.min_n);
    analyze->add_option("--min-hc", inv.min_hc);
    analyze->add_option("--n-boot", inv.n_boot);
    analyze->add_option("--n-perm", inv.n_perm);
    analyze->add_option("--n-repeats", inv.n_repeats);
    analyze->add_option("--tolerance", inv.tolerance);
    analyze->add_option("--budgets", inv.budgets)->delimiter(',');
    analyze->add_option("--measure", inv.measure);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }
    inv.command = app.get_subcommands().front()->get_name();

    try {
        if (!inv.analysis.empty()) inv.analysis = canonical_id(inv.analysis);
        const fs::path config_path(inv.config_path);
        std::string text;
        try {
            text = read_text(config_path);
        } catch (const Error& e) {
            config_error(e.what());
        }
        RunConfig config = parse_run_config(text, fs::absolute(config_path).parent_path());
        apply_overrides(config, inv);
        Runner runner(std::move(config), inv, out);
        return runner.run();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (category(e.kind())) {
        case ErrorCategory::config: return kExitConfig;
        case ErrorCategory::corpus: return kExitCorpus;
        case ErrorCategory::analysis: return kExitAnalysis;
        }
        return kExitAnalysis;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitCorpus;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitAnalysis;
    }
}

} // namespace phonoscope::cli
