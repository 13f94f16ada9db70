// Acceptance suite. One line per criterion: "PASS <name>: <detail>" or "FAIL ...".
//
//   acceptance            run every criterion
//   acceptance <name>...  run the named criteria
//   acceptance --list     print criterion names

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "phonoscope/analyses.hpp"
#include "phonoscope/cli.hpp"
#include "phonoscope/error.hpp"
#include "phonoscope/phem.hpp"
#include "phonoscope/profiles.hpp"
#include "phonoscope/report.hpp"
#include "phonoscope/rng.hpp"
#include "phonoscope/stats.hpp"
#include "phonoscope/synth.hpp"
#include "phonoscope/textgrid.hpp"
#include "stats_oracles.hpp"
#include "test_util.hpp"

using namespace phonoscope;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Checker {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) {
            ++failures_;
            if (failed_.size() < 6) failed_.push_back(what);
        }
    }
    void note(const std::string& s) { notes_.push_back(s); }

    Outcome outcome() const {
        std::ostringstream out;
        for (std::size_t i = 0; i < notes_.size(); ++i) out << (i ? "; " : "") << notes_[i];
        if (failures_) {
            out << (notes_.empty() ? "" : "; ") << failures_ << " check(s) failed:";
            for (const auto& f : failed_) out << " [" << f << "]";
        }
        return {failures_ == 0, out.str()};
    }

private:
    std::size_t failures_ = 0;
    std::vector<std::string> failed_;
    std::vector<std::string> notes_;
};

std::string fmt(double x, int precision = 4) {
    std::ostringstream o;
    o.precision(precision);
    o << x;
    return o.str();
}

// --- epsilon squared against the published H, N pairs ----------------------------------------

Outcome published_epsilon() {
    struct Row {
        const char* feature;
        double h;
        double eps;
        std::size_t n;
    };
    const Row rows[] = {{"Height", 1380.4, .498, 2768},
                        {"Rounding", 1171.6, .443, 2639},
                        {"Stridency", 1150.4, .400, 2867},
                        {"Backness", 1079.6, .390, 2760},
                        {"Nasality", 1076.2, .385, 2791},
                        {"Voicing", 1150.1, .385, 2953},
                        {"Vowel triangle area", 395.6, .340, 1157},
                        {"Lowness", 961.8, .346, 2775},
                        {"Manner", 1031.1, .352, 2974},
                        {"Sonorance", 591.7, .200, 2943},
                        {"Cross-position cosine", 164.2, .055, 2974},
                        {"Boundary sharpness", 161.0, .054, 2974},
                        {"Speech rate", 149.7, .053, 2739},
                        {"Vowel duration CV", 278.6, .105, 2607},
                        {"Pause rate", 64.6, .022, 2739}};
    Checker c;
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const auto& r : rows) {
        const double e = stats::epsilon_squared(r.h, 6, r.n);
        const double diff = std::fabs(e - r.eps);
        worst = std::max(worst, diff);
        c.expect(diff <= 0.005, std::string(r.feature) + " " + fmt(e) + " vs " + fmt(r.eps));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 1.0, "runtime " + fmt(secs) + " s");
    c.note("15 rows, max |diff| " + fmt(worst, 3));
    return c.outcome();
}

// --- d' estimator consistency -----------------------------------------------------------------

Outcome dprime_consistency() {
    Checker c;
    const auto start = std::chrono::steady_clock::now();
    constexpr std::size_t kReplicates = 50;
    double worst_z = 0.0;
    for (double d : {0.5, 1.0, 2.0, 3.0})
        for (std::size_t n : {20, 100, 1000}) {
            std::vector<double> est;
            for (std::size_t rep = 0; rep < kReplicates; ++rep) {
                Rng rng = make_rng(kSeed, {1, static_cast<std::uint64_t>(d * 10), n, rep});
                std::normal_distribution<double> pos_dist(d, 1.0), neg_dist(0.0, 1.0);
                std::vector<double> pos(n), neg(n);
                for (auto& x : pos) x = pos_dist(rng);
                for (auto& x : neg) x = neg_dist(rng);
                est.push_back(dprime(pos, neg));
            }
            const double se = stats::stddev(est) / std::sqrt(static_cast<double>(kReplicates));
            const double z = std::fabs(stats::mean(est) - d) / se;
            worst_z = std::max(worst_z, z);
            c.expect(z <= 3.0, "d=" + fmt(d) + " n=" + std::to_string(n) + " mean " + fmt(stats::mean(est)) +
                                   " (" + fmt(z, 3) + " SE)");
        }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 30.0, "runtime " + fmt(secs) + " s");
    c.note("12 settings x 50 replicates, worst deviation " + fmt(worst_z, 3) + " SE, " + fmt(secs, 2) + " s");
    return c.outcome();
}

// --- end-to-end through the CLI -----------------------------------------------------------------

int invoke(std::vector<std::string> args, std::string& out, std::string& err) {
    args.insert(args.begin(), "phonoscope");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
    out = o.str();
    err = e.str();
    return code;
}

std::string line_after(const std::string& text, const std::string& prefix) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    return {};
}

Outcome end_to_end_monotonicity() {
    Checker c;
    const auto start = std::chrono::steady_clock::now();
    fixture::TempDir dir("acceptance");
    nlohmann::json cells = nlohmann::json::array();
    auto cell = [&](const char* dataset, const char* aet, const char* sev, int n) {
        cells.push_back({{"dataset", dataset}, {"language", "en"}, {"aetiology", aet}, {"severity", sev},
                         {"n_speakers", n}});
    };
    for (const char* ds : {"d1", "d2"}) {
        cell(ds, "HC", "control", 25);
        for (const char* sev : {"mild", "moderate", "severe"}) {
            cell(ds, "PD", sev, 13);
            cell(ds, "ALS", sev, 12);
        }
    }
    nlohmann::json synth_cfg = {
        {"seed", kSeed},
        {"output_dir", "synth-out"},
        {"synth",
         {{"cells", cells},
          {"severity_multipliers", {{"control", 1.0}, {"mild", 0.8}, {"moderate", 0.6}, {"severe", 0.4}}}}}};
    fixture::spit(dir / "synth.json", synth_cfg.dump(2));
    std::string out, err;
    int code = invoke({"synth", "--config", (dir / "synth.json").string()}, out, err);
    c.expect(code == cli::kExitOk, "synth exit " + std::to_string(code) + " " + err);
    if (code != cli::kExitOk) return c.outcome();
    std::string root = line_after(out, "synthetic corpus: ");
    root = root.substr(0, root.find(" ("));

    nlohmann::json run_cfg = {{"seed", kSeed}, {"corpus_root", root}, {"output_dir", "out"}};
    fixture::spit(dir / "run.json", run_cfg.dump(2));
    code = invoke({"analyze", "severity_gradient", "--config", (dir / "run.json").string()}, out, err);
    c.expect(code == cli::kExitOk, "analyze exit " + std::to_string(code) + " " + err);
    if (code != cli::kExitOk) return c.outcome();
    const fs::path run = line_after(out, "output: ");
    const auto rep = report_from_json(fixture::slurp(run / "severity_gradient.json"));

    const auto& means = rep.table("severity_means");
    std::vector<double> seq;
    std::string shown;
    for (const auto& l : means.row_labels) {
        seq.push_back(means.number(l, "mean"));
        const double n = means.number(l, "n");
        c.expect(n == 50.0, l + " has " + fmt(n) + " speakers");
        shown += (shown.empty() ? "" : " > ") + fmt(seq.back(), 3);
    }
    c.expect(seq.size() == 4, "4 severity levels");
    c.expect(analyses::strictly_decreasing(seq), "means " + shown);
    const auto& corr = rep.table("correlation");
    const auto& label = corr.row_labels.front();
    const double rho = corr.number(label, "rho");
    const double lo = corr.number(label, "ci_lower"), hi = corr.number(label, "ci_upper");
    c.expect(rho <= -0.5, "rho " + fmt(rho));
    c.expect(hi < 0.0 || lo > 0.0, "CI [" + fmt(lo) + ", " + fmt(hi) + "] contains 0");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 120.0, "runtime " + fmt(secs) + " s");
    c.note("means " + shown + ", rho " + fmt(rho, 3) + " CI [" + fmt(lo, 3) + ", " + fmt(hi, 3) + "], " +
           fmt(secs, 3) + " s");
    return c.outcome();
}

// --- fixed-token stability ------------------------------------------------------------------------

Outcome fixed_token_stability() {
    Checker c;
    synth::SynthSpec spec;
    spec.seed = kSeed;
    for (const char* ds : {"d1", "d2"}) {
        spec.cells.push_back({ds, "en", Aetiology::HC, Severity::control, SeveritySource::clinical, 15});
        for (Severity s : {Severity::mild, Severity::moderate, Severity::severe})
            spec.cells.push_back({ds, "en", Aetiology::PD, s, SeveritySource::clinical, 15});
    }
    spec.token_log_mean = std::log(300.0);
    spec.token_log_sd = 0.1;
    spec.speaker_jitter_sd = 0.15;
    const auto sc = synth::generate_corpus(spec);
    const auto corpus = sc.corpus(spec.backbone_ids.front());
    DirectionMap dirs;
    build_profile_table(corpus, sc.configs, nullptr, &dirs);
    analyses::FixedTokenOptions o;
    o.budgets = {20, 50, 100, 200};
    o.seed = kSeed;
    const auto rep = analyses::fixed_token_dprime(corpus, sc.configs, dirs, o);
    const auto& common = rep.table("common_set");
    std::vector<double> rhos;
    std::string shown;
    for (const auto& l : common.row_labels) {
        rhos.push_back(common.number(l, "rho"));
        shown += (shown.empty() ? "" : ", ") + l + " " + fmt(rhos.back(), 4);
    }
    const double n = common.number(common.row_labels.front(), "n_speakers");
    c.expect(rhos.size() == 4, "4 budgets");
    c.expect(n >= 100.0, "common set has " + fmt(n) + " speakers");
    c.expect(std::none_of(rhos.begin(), rhos.end(), [](double r) { return std::isnan(r); }), "rho defined");
    const auto [mn, mx] = std::minmax_element(rhos.begin(), rhos.end());
    const double range = *mx - *mn;
    c.expect(range < 0.05, "rho range " + fmt(range));
    c.note("common set n=" + fmt(n) + ": " + shown + ", range " + fmt(range, 3));
    return c.outcome();
}

// --- statistical kernels against the oracles ---------------------------------------------------

Outcome kernel_oracles() {
    Checker c;
    constexpr std::size_t kInstances = 1000;
    constexpr double kTol = 1e-10;
    Rng rng = make_rng(kSeed, {7});
    auto draw = [&](std::size_t n, int levels) {
        std::vector<double> v(n);
        // Integer values give ties; half the instances use continuous values instead.
        const bool integer = uniform_index(rng, 2) == 0;
        std::normal_distribution<double> z(0.0, 1.0);
        for (auto& x : v) x = integer ? static_cast<double>(uniform_index(rng, static_cast<std::size_t>(levels))) : z(rng);
        return v;
    };
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    double worst_rho = 0.0, worst_h = 0.0, worst_u = 0.0, worst_p = 0.0;
    std::size_t n_rho = 0, n_h = 0, n_mw = 0;
    while (n_rho < kInstances) {
        const std::size_t n = 3 + uniform_index(rng, 6);
        const auto x = draw(n, 4), y = draw(n, 4);
        if (constant(x) || constant(y)) continue;
        ++n_rho;
        const double d = std::fabs(stats::spearman(x, y).statistic - oracle::spearman_rho(x, y));
        worst_rho = std::max(worst_rho, d);
        c.expect(d <= kTol, "spearman diff " + fmt(d));
    }
    while (n_h < kInstances) {
        const std::size_t k = 2 + uniform_index(rng, 4);
        std::vector<std::vector<double>> groups;
        std::vector<double> all;
        for (std::size_t g = 0; g < k; ++g) {
            groups.push_back(draw(1 + uniform_index(rng, 8), 5));
            all.insert(all.end(), groups.back().begin(), groups.back().end());
        }
        if (constant(all) || all.size() <= k) continue;
        ++n_h;
        const double d = std::fabs(stats::kruskal_wallis(groups).statistic - oracle::kruskal_h(groups));
        worst_h = std::max(worst_h, d);
        c.expect(d <= kTol, "kruskal diff " + fmt(d));
    }
    while (n_mw < kInstances) {
        const auto a = draw(1 + uniform_index(rng, 8), 6), b = draw(1 + uniform_index(rng, 8), 6);
        ++n_mw;
        const auto r = stats::mann_whitney(a, b);
        const double du = std::fabs(r.statistic - oracle::mann_whitney_u(a, b));
        const double exact = oracle::mann_whitney_exact_p(a, b);
        double dp = std::fabs(stats::mann_whitney_exact_p(a, b) - exact);
        // Small samples take the exact branch of the full test as well.
        if (r.extra("exact") == 1.0) dp = std::max(dp, std::fabs(r.p_value - exact));
        worst_u = std::max(worst_u, du);
        worst_p = std::max(worst_p, dp);
        c.expect(du <= kTol, "U diff " + fmt(du));
        c.expect(dp <= kTol, "exact p diff " + fmt(dp));
    }
    c.note(std::to_string(kInstances) + " instances each; max diffs rho " + fmt(worst_rho, 2) + ", H " +
           fmt(worst_h, 2) + ", U " + fmt(worst_u, 2) + ", p " + fmt(worst_p, 2));
    return c.outcome();
}

// --- Holm properties ------------------------------------------------------------------------------

Outcome holm_properties() {
    Checker c;
    const std::vector<double> hand{0.01, 0.02, 0.04};
    const auto adj = stats::holm_adjust(hand);
    const std::vector<double> want{0.03, 0.04, 0.04};
    for (std::size_t i = 0; i < 3; ++i)
        c.expect(std::fabs(adj[i] - want[i]) < 1e-12, "hand example [" + std::to_string(i) + "] " + fmt(adj[i]));

    Rng rng = make_rng(kSeed, {8});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t idempotent_failures = 0, trials = 0;
    for (std::size_t t = 0; t < 1000; ++t, ++trials) {
        std::vector<double> p(1 + uniform_index(rng, 12));
        // Small p values so that the adjustment is not clipped to 1 everywhere.
        for (auto& x : p) x = std::pow(u(rng), 3.0);
        const auto h = stats::holm_adjust(p);
        std::vector<std::size_t> order(p.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
        for (std::size_t i = 0; i < p.size(); ++i) {
            c.expect(h[i] >= p[i] - 1e-15, "adjusted below raw");
            c.expect(h[i] <= 1.0, "adjusted above 1");
            if (i) c.expect(h[order[i]] >= h[order[i - 1]], "adjusted not monotone in raw order");
        }
        const auto hh = stats::holm_adjust(h);
        bool same = true;
        for (std::size_t i = 0; i < p.size(); ++i) same = same && std::fabs(hh[i] - h[i]) < 1e-12;
        if (!same) ++idempotent_failures;
    }
    c.expect(idempotent_failures == 0, "holm(holm(p)) != holm(p) in " + std::to_string(idempotent_failures) + "/" +
                                           std::to_string(trials) + " sequences, e.g. holm({.03,.04,.04}) = {" +
                                           [] {
                                               const std::vector<double> again{0.03, 0.04, 0.04};
                                               const auto r = stats::holm_adjust(again);
                                               return fmt(r[0]) + "," + fmt(r[1]) + "," + fmt(r[2]);
                                           }() + "}");
    c.note("hand example {0.01,0.02,0.04} -> {" + fmt(adj[0]) + "," + fmt(adj[1]) + "," + fmt(adj[2]) +
           "}; monotone, >= raw, <= 1 over 1000 sequences");
    return c.outcome();
}

// --- classifier sanity ----------------------------------------------------------------------------

synth::ProfileSynthSpec classifier_spec(std::uint64_t seed) {
    synth::ProfileSynthSpec spec;
    spec.seed = seed;
    spec.noise_sd = 0.3;
    for (auto& [_, m] : spec.severity_multipliers) m = 1.0;
    // Class a differs from HC by +1.5 on consonant axis a-1; any two centroids are
    // at least 2 * 1.5 = 3.0 apart, i.e. 10 noise sd.
    for (std::size_t a = 0; a < kMainAetiologies.size(); ++a) {
        std::array<double, kConsonantCount> m;
        m.fill(1.0);
        if (a > 0) m[a - 1] += 1.5;
        spec.class_means[kMainAetiologies[a]] = m;
    }
    for (const char* ds : {"d1", "d2", "d3"})
        for (Aetiology a : kMainAetiologies)
            spec.cells.push_back({ds, "en", a, a == Aetiology::HC ? Severity::control : Severity::moderate,
                                  SeveritySource::clinical, 20});
    return spec;
}

Outcome classifier_sanity() {
    Checker c;
    const auto spec = classifier_spec(kSeed);
    double min_gap = INFINITY;
    for (const auto& [a, ma] : spec.class_means)
        for (const auto& [b, mb] : spec.class_means) {
            if (a >= b) continue;
            double d2 = 0.0;
            for (std::size_t f = 0; f < kConsonantCount; ++f) d2 += std::pow(spec.base_dprime * (ma[f] - mb[f]), 2);
            min_gap = std::min(min_gap, std::sqrt(d2) / spec.noise_sd);
        }
    c.expect(min_gap > 6.0, "centroid gap " + fmt(min_gap) + " sd");
    const auto table = synth::generate_profile_table(spec);
    const auto res = analyses::centroid_classifier_lodo_result(table, {});
    c.expect(res.classes.size() == 6, "6 classes");
    c.expect(res.macro_f1 > 0.95, "planted macro F1 " + fmt(res.macro_f1));

    constexpr std::size_t kReplicates = 50;
    std::vector<double> ba;
    for (std::size_t rep = 0; rep < kReplicates; ++rep) {
        auto shuffled = table;
        std::vector<Aetiology> labels;
        for (const auto& r : shuffled.rows()) labels.push_back(r.meta.aetiology);
        Rng rng = make_rng(kSeed, {9, rep});
        shuffle(std::span<Aetiology>(labels), rng);
        for (std::size_t i = 0; i < labels.size(); ++i) shuffled.rows()[i].meta.aetiology = labels[i];
        ba.push_back(analyses::centroid_classifier_lodo_result(shuffled, {}).balanced_accuracy);
    }
    const double mean_ba = stats::mean(ba);
    c.expect(std::fabs(mean_ba - 1.0 / 6.0) <= 0.05, "shuffled balanced accuracy " + fmt(mean_ba));
    c.note("centroid gap " + fmt(min_gap, 3) + " sd, macro F1 " + fmt(res.macro_f1, 4) +
           "; shuffled balanced accuracy " + fmt(mean_ba, 4) + " over 50 replicates (chance 0.1667)");
    return c.outcome();
}

// --- permutation null -------------------------------------------------------------------------------

// P(D_n > d) for the one-sample Kolmogorov-Smirnov statistic, with Stephens' correction.
double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_uniform_statistic(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        d = std::max({d, static_cast<double>(i + 1) / n - x[i], x[i] - static_cast<double>(i) / n});
    return d;
}

Outcome permutation_null() {
    Checker c;
    constexpr std::size_t kReplicates = 200;
    std::vector<double> p(kReplicates, NAN);
    for (std::size_t rep = 0; rep < kReplicates; ++rep) {
        synth::ProfileSynthSpec spec;
        spec.seed = stream_seed(kSeed, {10, rep});
        for (auto& [_, m] : spec.severity_multipliers) m = 1.0;
        for (Aetiology a : {Aetiology::HC, Aetiology::PD}) spec.class_means[a] = {1.0, 1.0, 1.0, 1.0, 1.0};
        for (const char* lang : {"en", "es", "nl"})
            for (Aetiology a : {Aetiology::HC, Aetiology::PD})
                spec.cells.push_back({std::string("d-") + lang, lang, a,
                                      a == Aetiology::HC ? Severity::control : Severity::moderate,
                                      SeveritySource::clinical, 12});
        analyses::CrosslingualOptions o;
        o.groups = {Aetiology::PD};
        o.n_perm = 199;
        o.n_boot = 20;
        o.seed = stream_seed(kSeed, {11, rep});
        const auto rep_out = analyses::crosslingual_consistency(synth::generate_profile_table(spec), o);
        p[rep] = rep_out.table("consistency").number("PD", "perm_p");
    }
    c.expect(std::none_of(p.begin(), p.end(), [](double x) { return std::isnan(x); }), "perm_p defined");
    const double d = ks_uniform_statistic(p);
    const double ks_p = ks_pvalue(d, kReplicates);
    c.expect(ks_p > 0.01, "KS p " + fmt(ks_p));
    c.note("200 null replicates, 199 permutations each: KS D " + fmt(d, 3) + ", p " + fmt(ks_p, 3) +
           ", mean perm_p " + fmt(stats::mean(p), 3));
    return c.outcome();
}

// --- interchange round trip ------------------------------------------------------------------------

Outcome interchange_roundtrip() {
    Checker c;
    fixture::TempDir dir("acceptance");
    Rng rng = make_rng(kSeed, {12});
    std::normal_distribution<float> z(0.0f, 3.0f);
    std::size_t matrices = 0;
    for (std::size_t t = 0; t < 200; ++t, ++matrices) {
        const auto rows = static_cast<std::uint32_t>(uniform_index(rng, 50));
        const auto dim = static_cast<std::uint32_t>(1 + uniform_index(rng, 64));
        std::vector<float> data(static_cast<std::size_t>(rows) * dim);
        for (auto& x : data) x = z(rng);
        if (!data.empty() && t % 3 == 0) {
            data.front() = -0.0f;
            data.back() = std::numeric_limits<float>::denorm_min();
        }
        const EmbeddingMatrix m(rows, dim, data);
        const auto path = dir / ("m" + std::to_string(t) + ".phem");
        write_phem(path, m);
        const auto first = fixture::slurp(path);
        const auto back = read_phem(path);
        write_phem(path, back);
        const auto second = fixture::slurp(path);
        c.expect(first == second, "bytes differ for matrix " + std::to_string(t));
        c.expect(back == m, "values differ for matrix " + std::to_string(t));
        c.expect(encode_phem(decode_phem(first)) == first, "in-memory round trip " + std::to_string(t));
    }

    const std::string seed_grid =
        "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\nxmin = 0\nxmax = 1.5\ntiers? <exists>\nsize = 2\n"
        "item []:\n    item [1]:\n        class = \"IntervalTier\"\n        name = \"phones\"\n        xmin = 0\n"
        "        xmax = 1.5\n        intervals: size = 3\n        intervals [1]:\n            xmin = 0\n"
        "            xmax = 0.5\n            text = \"a\"\n        intervals [2]:\n            xmin = 0.5\n"
        "            xmax = 1\n            text = \"\"\"q\"\"\"\n        intervals [3]:\n            xmin = 1\n"
        "            xmax = 1.5\n            text = \"\xc3\xa9\"\n    item [2]:\n        class = \"TextTier\"\n"
        "        name = \"points\"\n        xmin = 0\n        xmax = 1.5\n        points: size = 1\n"
        "        points [1]:\n            number = 0.7\n            mark = \"x\"\n";
    std::size_t parsed = 0, rejected = 0, crashed = 0;
    c.expect(parse_textgrid(seed_grid).tiers.size() == 1, "seed grid parses");
    const std::string alphabet = "0123456789.-=\"[]:<> \n\tabcxyzE+e\xc3\xff";
    constexpr std::size_t kFuzz = 20000;
    for (std::size_t t = 0; t < kFuzz; ++t) {
        std::string s = seed_grid;
        const std::size_t edits = 1 + uniform_index(rng, 8);
        for (std::size_t e = 0; e < edits && !s.empty(); ++e) {
            const std::size_t pos = uniform_index(rng, s.size());
            switch (uniform_index(rng, 5)) {
                case 0: s[pos] = alphabet[uniform_index(rng, alphabet.size())]; break;
                case 1: s.erase(pos, 1 + uniform_index(rng, 20)); break;
                case 2: s.insert(pos, 1, alphabet[uniform_index(rng, alphabet.size())]); break;
                case 3: s.resize(pos); break;
                default: s[pos] = static_cast<char>(uniform_index(rng, 256)); break;
            }
        }
        try {
            const auto tiers = parse_textgrid(s);
            ++parsed;
            // Whatever parses must survive a write/read cycle.
            const auto text = write_textgrid(tiers);
            c.expect(parse_textgrid(text) == tiers, "reparse differs for fuzz case " + std::to_string(t));
        } catch (const Error&) {
            ++rejected;
        } catch (const std::exception& e) {
            ++crashed;
            c.expect(false, std::string("non-library exception: ") + e.what());
        }
    }
    c.note(std::to_string(matrices) + " PHEM matrices byte-identical; " + std::to_string(kFuzz) +
           " fuzzed TextGrids: " + std::to_string(parsed) + " parsed, " + std::to_string(rejected) +
           " rejected with a typed error, " + std::to_string(crashed) + " other");
    return c.outcome();
}

// --- residualisation ------------------------------------------------------------------------------------

Outcome residualization() {
    Checker c;
    Rng rng = make_rng(kSeed, {13});
    std::normal_distribution<double> z(0.0, 1.0);
    double worst_corr = 0.0, worst_sum = 0.0;
    for (std::size_t t = 0; t < 200; ++t) {
        const std::size_t n = 5 + uniform_index(rng, 200);
        std::vector<double> x(n), y(n);
        const double slope = 3.0 * z(rng);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = 4.0 + z(rng);
            y[i] = 10.0 + slope * x[i] + z(rng);
        }
        const auto r = stats::residualize(y, x);
        const double corr = std::fabs(stats::pearson(r, x));
        double sum = 0.0;
        for (double v : r) sum += v;
        worst_corr = std::max(worst_corr, corr);
        worst_sum = std::max(worst_sum, std::fabs(sum));
        c.expect(corr < 1e-9, "corr " + fmt(corr));
        c.expect(std::fabs(sum) < 1e-9, "sum " + fmt(sum));
    }

    auto spec = synth::default_spec();
    spec.seed = kSeed;
    spec.couple_tokens_to_severity = true;
    for (auto& cell : spec.cells) cell.n_speakers *= 3;
    spec.templates[Aetiology::PD] = {0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95};
    spec.templates[Aetiology::Stroke] = {0.85, 0.85, 0.85, 0.85, 0.85, 0.85, 0.85, 0.85, 0.85};
    spec.templates[Aetiology::ALS] = {0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75};
    spec.templates[Aetiology::CP] = {0.65, 0.65, 0.65, 0.65, 0.65, 0.65, 0.65, 0.65, 0.65};
    spec.templates[Aetiology::DS] = {0.55, 0.55, 0.55, 0.55, 0.55, 0.55, 0.55, 0.55, 0.55};
    const auto sc = synth::generate_corpus(spec);
    const auto table = build_profile_table(sc.corpus(spec.backbone_ids.front()), sc.configs);

    // The planted token confound: log(n_phones) tracks severity.
    std::vector<double> ord, logn;
    for (const auto& r : table.rows())
        if (const auto o = severity_ordinal(r.meta.severity); o && r.profile.n_phones > 0) {
            ord.push_back(*o);
            logn.push_back(std::log(static_cast<double>(r.profile.n_phones)));
        }
    const double confound = stats::spearman(ord, logn).statistic;
    c.expect(confound < -0.5, "token confound rho " + fmt(confound));

    const auto rep = analyses::residualized_rankings(table, {});
    const auto& pres = rep.table("rank_preservation");
    const std::string composite(kCompositeName);
    const auto& raw = std::get<std::string>(pres.get(composite, "aetiology_order_raw"));
    const auto& adj = std::get<std::string>(pres.get(composite, "aetiology_order_residual"));
    c.expect(raw == "HC>PD>Stroke>ALS>CP>DS", "raw order " + raw);
    c.expect(pres.number(composite, "aetiology_preserved") == 1.0, "residual order " + adj);
    c.note("200 regressions: max |corr| " + fmt(worst_corr, 2) + ", max |sum| " + fmt(worst_sum, 2) +
           "; confound rho " + fmt(confound, 3) + ", composite order " + raw + " -> " + adj);
    return c.outcome();
}

struct Criterion {
    const char* name;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"published_epsilon", published_epsilon},
    {"dprime_consistency", dprime_consistency},
    {"end_to_end_monotonicity", end_to_end_monotonicity},
    {"fixed_token_stability", fixed_token_stability},
    {"kernel_oracles", kernel_oracles},
    {"holm_properties", holm_properties},
    {"classifier_sanity", classifier_sanity},
    {"permutation_null", permutation_null},
    {"interchange_roundtrip", interchange_roundtrip},
    {"residualization", residualization},
};

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> wanted(argv + 1, argv + argc);
    if (wanted.size() == 1 && wanted[0] == "--list") {
        for (const auto& cr : kCriteria) std::cout << cr.name << "\n";
        return 0;
    }
    for (const auto& w : wanted)
        if (std::none_of(std::begin(kCriteria), std::end(kCriteria), [&](const Criterion& cr) { return w == cr.name; })) {
            std::cerr << "unknown criterion: " << w << "\n";
            return 2;
        }
    int failed = 0;
    for (const auto& cr : kCriteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), cr.name) == wanted.end()) continue;
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << cr.name << ": " << o.detail << std::endl;
        if (!o.pass) ++failed;
    }
    return failed ? 1 : 0;
}
