#include "phonoscope/analyses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "phonoscope/error.hpp"
#include "phonoscope/parallel.hpp"
#include "phonoscope/rng.hpp"
#include "phonoscope/stats.hpp"

namespace phonoscope::analyses {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMinLevelSpeakers = 3;
constexpr std::size_t kMinGroupSpeakers = 2;

std::string name(Aetiology a) { return std::string(to_string(a)); }
std::string name(Severity s) { return std::string(to_string(s)); }
std::string str(double x) { return format_number(x); }

using Consonants = std::array<double, kConsonantCount>;

std::optional<Consonants> consonant_profile(const ProfileRow& r) {
    Consonants c{};
    for (std::size_t f = 0; f < kConsonantCount; ++f) {
        if (!r.profile.values[f]) return std::nullopt;
        c[f] = *r.profile.values[f];
    }
    return c;
}

double ordinal(Severity s) { return static_cast<double>(*severity_ordinal(s)); }

bool in_groups(Aetiology a, const std::vector<Aetiology>& groups) {
    return std::find(groups.begin(), groups.end(), a) != groups.end();
}

std::vector<Aetiology> main_only(const std::vector<Aetiology>& groups) {
    std::vector<Aetiology> out;
    for (Aetiology a : groups)
        if (is_main_aetiology(a) && !in_groups(a, out)) out.push_back(a);
    return out;
}

std::string join_groups(const std::vector<Aetiology>& groups) {
    std::string s;
    for (Aetiology a : groups) s += (s.empty() ? "" : ",") + name(a);
    return s;
}

void add_targets(AnalysisReport& rep, std::initializer_list<std::pair<const char*, double>> targets) {
    auto& t = rep.add_table("full_corpus_target", {"reference_value", "scope"});
    for (const auto& [label, value] : targets) {
        const auto r = t.add_row(label);
        t.set(r, "reference_value", value);
        t.set(r, "scope", std::string("full corpus only; not a desk-scale gate"));
    }
}

// Spearman that reports failures as findings instead of throwing.
std::optional<stats::TestResult> try_spearman(std::span<const double> x, std::span<const double> y,
                                              const std::string& what, std::vector<std::string>& findings) {
    try {
        return stats::spearman(x, y);
    } catch (const Error& e) {
        findings.push_back(what + ": " + e.what());
        return std::nullopt;
    }
}

// Kruskal-Wallis over groups with at least kMinGroupSpeakers values.
std::optional<stats::TestResult> try_kruskal(const std::vector<std::vector<double>>& groups,
                                             const std::vector<Aetiology>& labels, const std::string& what,
                                             std::vector<std::string>& findings) {
    std::vector<std::vector<double>> kept;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() >= kMinGroupSpeakers)
            kept.push_back(groups[g]);
        else
            findings.push_back(what + ": group " + name(labels[g]) + " has " + std::to_string(groups[g].size()) +
                               " speakers (< " + std::to_string(kMinGroupSpeakers) + "), excluded");
    }
    if (kept.size() < 2) {
        findings.push_back(what + ": fewer than 2 groups with enough speakers");
        return std::nullopt;
    }
    try {
        return stats::kruskal_wallis(kept);
    } catch (const Error& e) {
        findings.push_back(what + ": " + e.what());
        return std::nullopt;
    }
}

double safe_cohens_d(std::span<const double> a, std::span<const double> b) {
    try {
        return stats::cohens_d(a, b);
    } catch (const Error&) {
        return kNaN;
    }
}

std::vector<double> measure_column(const std::vector<const ProfileRow*>& rows, const Measure& m) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto* r : rows) v.push_back(r->profile.value(m).value_or(kNaN));
    return v;
}

// Token-count quartile (0..3) of each value by type-7 cutpoints.
std::vector<int> quartile_strata(const std::vector<double>& n_phones) {
    const double q1 = stats::quantile(n_phones, 0.25);
    const double q2 = stats::quantile(n_phones, 0.50);
    const double q3 = stats::quantile(n_phones, 0.75);
    std::vector<int> out;
    out.reserve(n_phones.size());
    for (double v : n_phones) out.push_back((v > q1) + (v > q2) + (v > q3));
    return out;
}

std::optional<double> mean_cosine(const std::vector<Consonants>& profiles) {
    if (profiles.size() < 2) return std::nullopt;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i)
        for (std::size_t j = i + 1; j < profiles.size(); ++j) {
            try {
                sum += stats::cosine(profiles[i], profiles[j]);
            } catch (const Error&) {
                return std::nullopt;
            }
            ++n;
        }
    return sum / static_cast<double>(n);
}

} // namespace

// --- severity harmonisation ------------------------------------------------------

Severity stipancic_map(double pct) {
    if (!(pct >= 0.0 && pct <= 100.0))
        fail(ErrorKind::OutOfRange, "intelligibility " + str(pct) + " outside [0,100]");
    if (pct > 94.0) return Severity::control;
    if (pct >= 85.0) return Severity::mild;
    if (pct >= 70.0) return Severity::moderate;
    return Severity::severe;
}

ProfileTable apply_severity_override(const ProfileTable& table) {
    ProfileTable out = table;
    for (auto& r : out.rows()) {
        if (!r.meta.intelligibility_pct) continue;
        r.meta.severity = stipancic_map(*r.meta.intelligibility_pct);
        r.meta.severity_source = SeveritySource::threshold;
    }
    return out;
}

bool RowFilter::accepts(const ProfileRow& row) const {
    if (severity_source && row.meta.severity_source != *severity_source) return false;
    if (severity && row.meta.severity != *severity) return false;
    return std::find(exclude_datasets.begin(), exclude_datasets.end(), row.meta.dataset) == exclude_datasets.end();
}

void RowFilter::describe(std::map<std::string, std::string>& parameters) const {
    if (severity_source) parameters["filter.severity_source"] = std::string(to_string(*severity_source));
    if (severity) parameters["filter.severity"] = name(*severity);
    if (!exclude_datasets.empty()) {
        std::string s;
        for (const auto& d : exclude_datasets) s += (s.empty() ? "" : ",") + d;
        parameters["filter.exclude_datasets"] = s;
    }
}

bool strictly_decreasing(const std::vector<double>& means) {
    if (means.size() < 2) return false;
    for (std::size_t i = 1; i < means.size(); ++i)
        if (!(means[i] < means[i - 1])) return false;
    return true;
}

// --- severity gradient -------------------------------------------------------------

AnalysisReport severity_gradient(const ProfileTable& table, const SeverityGradientOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "severity_gradient";
    rep.seed = o.seed;
    rep.parameters["measure"] = std::string(o.measure.name());
    rep.parameters["n_boot"] = std::to_string(o.n_boot);
    rep.parameters["stratify_by_token_quartile"] = o.stratify_by_token_quartile ? "true" : "false";
    o.filter.describe(rep.parameters);

    std::map<Severity, std::size_t> level_count;
    for (const auto& r : table.rows())
        if (o.filter.accepts(r) && severity_ordinal(r.meta.severity) && r.profile.value(o.measure))
            ++level_count[r.meta.severity];
    std::vector<Severity> levels;
    for (Severity s : kKnownSeverities)
        if (level_count[s] >= kMinLevelSpeakers) levels.push_back(s);
        else if (level_count[s] > 0)
            rep.findings.push_back("severity level " + name(s) + " has " + std::to_string(level_count[s]) +
                                   " speakers (< 3), excluded");
    if (levels.size() < 2)
        fail(ErrorKind::InsufficientSeverityLevels,
             "severity gradient needs >= 2 severity levels with >= 3 speakers each");

    std::vector<double> x, y, n_phones;
    std::map<Severity, std::vector<double>> by_level;
    for (const auto& r : table.rows()) {
        if (!o.filter.accepts(r) || std::find(levels.begin(), levels.end(), r.meta.severity) == levels.end())
            continue;
        const auto v = r.profile.value(o.measure);
        if (!v) continue;
        x.push_back(ordinal(r.meta.severity));
        y.push_back(*v);
        n_phones.push_back(static_cast<double>(r.profile.n_phones));
        by_level[r.meta.severity].push_back(*v);
    }

    auto& means = rep.add_table("severity_means", {"n", "mean", "sd", "ci_lower", "ci_upper"});
    std::vector<double> mean_seq;
    for (Severity s : levels) {
        const auto& v = by_level[s];
        const auto r = means.add_row(name(s));
        means.set(r, "n", static_cast<double>(v.size()));
        means.set(r, "mean", stats::mean(v));
        means.set(r, "sd", stats::stddev(v));
        mean_seq.push_back(stats::mean(v));
        stats::BootstrapOptions bo;
        bo.n_resamples = o.n_boot;
        bo.seed = stream_seed(o.seed, {10, static_cast<std::uint64_t>(s)});
        const auto ci = stats::bootstrap_ci(v, [](std::span<const double> s2) { return stats::mean(s2); }, bo);
        means.set(r, "ci_lower", ci.lower);
        means.set(r, "ci_upper", ci.upper);
    }

    auto& mono = rep.add_table("monotonicity", {"levels", "strictly_decreasing"});
    {
        std::string seq;
        for (Severity s : levels) seq += (seq.empty() ? "" : ">") + name(s);
        const auto r = mono.add_row(std::string(o.measure.name()));
        mono.set(r, "levels", seq);
        mono.set(r, "strictly_decreasing", strictly_decreasing(mean_seq) ? 1.0 : 0.0);
    }

    auto& corr = rep.add_table("correlation", {"rho", "p", "n", "approximate", "ci_lower", "ci_upper", "ci_redraws"});
    const auto row = corr.add_row("spearman");
    if (const auto sp = try_spearman(x, y, "severity correlation", rep.findings)) {
        corr.set(row, "rho", sp->statistic);
        corr.set(row, "p", sp->p_value);
        corr.set(row, "n", static_cast<double>(sp->n));
        corr.set(row, "approximate", sp->extra("approximate"));
        const std::vector<int> strata = quartile_strata(n_phones);
        stats::BootstrapOptions bo;
        bo.n_resamples = o.n_boot;
        bo.seed = stream_seed(o.seed, {11});
        if (o.stratify_by_token_quartile) bo.strata = strata;
        try {
            const auto ci = stats::bootstrap_ci(
                x.size(),
                [&](std::span<const std::size_t> idx) -> std::optional<double> {
                    std::vector<double> xs, ys;
                    for (std::size_t i : idx) {
                        xs.push_back(x[i]);
                        ys.push_back(y[i]);
                    }
                    try {
                        return stats::spearman(xs, ys).statistic;
                    } catch (const Error&) {
                        return std::nullopt;
                    }
                },
                bo);
            corr.set(row, "ci_lower", ci.lower);
            corr.set(row, "ci_upper", ci.upper);
            corr.set(row, "ci_redraws", static_cast<double>(ci.redraws));
        } catch (const Error& e) {
            rep.findings.push_back(std::string("severity correlation CI: ") + e.what());
        }

        if (o.stratify_by_token_quartile) {
            auto& q = rep.add_table("token_quartile_rho", {"n", "rho", "p", "n_phones_min", "n_phones_max"});
            for (int k = 0; k < 4; ++k) {
                std::vector<double> xs, ys, np;
                for (std::size_t i = 0; i < x.size(); ++i)
                    if (strata[i] == k) {
                        xs.push_back(x[i]);
                        ys.push_back(y[i]);
                        np.push_back(n_phones[i]);
                    }
                const auto r = q.add_row("Q" + std::to_string(k + 1));
                q.set(r, "n", static_cast<double>(xs.size()));
                if (!np.empty()) {
                    q.set(r, "n_phones_min", *std::min_element(np.begin(), np.end()));
                    q.set(r, "n_phones_max", *std::max_element(np.begin(), np.end()));
                }
                if (const auto s = try_spearman(xs, ys, "token quartile Q" + std::to_string(k + 1), rep.findings)) {
                    q.set(r, "rho", s->statistic);
                    q.set(r, "p", s->p_value);
                }
            }
        }
    }

    add_targets(rep, {{"composite_rho", -0.543},
                      {"composite_rho_ci_lower", -0.574},
                      {"composite_rho_ci_upper", -0.514},
                      {"clinical_only_rho", -0.452},
                      {"clinical_only_mean_control", 2.75},
                      {"clinical_only_mean_mild", 2.08},
                      {"clinical_only_mean_moderate", 1.75},
                      {"clinical_only_mean_severe", 1.15}});
    return rep;
}

// --- aetiology discrimination ---------------------------------------------------------

AnalysisReport aetiology_discrimination(const ProfileTable& table, const AetiologyOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "aetiology_discrimination";
    rep.seed = o.seed;
    const auto groups = main_only(o.groups);
    rep.parameters["groups"] = join_groups(groups);
    rep.parameters["features"] = o.features == FeatureSubset::full15  ? "FULL15"
                                 : o.features == FeatureSubset::main13 ? "MAIN13"
                                                                       : "CONSONANT5";
    rep.parameters["min_deviation_n"] = std::to_string(o.min_deviation_n);
    rep.parameters["deviation_sign"] = "cohens_d(HC, group): positive means below HC";
    o.filter.describe(rep.parameters);
    if (groups.size() < 2) fail(ErrorKind::TooFewGroups, "aetiology discrimination needs >= 2 groups");

    std::vector<const ProfileRow*> rows;
    for (const auto& r : table.rows())
        if (o.filter.accepts(r) && in_groups(r.meta.aetiology, groups)) rows.push_back(&r);

    std::vector<Measure> measures;
    for (Feature f : features_in(o.features)) measures.push_back(Measure::of(f));
    measures.push_back(Measure::composite_dprime());

    auto values_by_group = [&](const Measure& m) {
        std::vector<std::vector<double>> out(groups.size());
        for (const auto* r : rows)
            if (const auto v = r->profile.value(m)) {
                const auto g = std::find(groups.begin(), groups.end(), r->meta.aetiology) - groups.begin();
                out[static_cast<std::size_t>(g)].push_back(*v);
            }
        return out;
    };

    auto& kw = rep.add_table("kruskal_wallis", {"H", "p", "epsilon_squared", "epsilon_squared_raw", "N", "k"});
    for (const auto& m : measures) {
        const auto vg = values_by_group(m);
        const auto r = kw.add_row(std::string(m.name()));
        const auto res = try_kruskal(vg, groups, std::string(m.name()), rep.findings);
        if (!res) {
            if (m.composite)
                fail(ErrorKind::GroupTooSmall, "fewer than 2 aetiology groups with >= 2 speakers on the composite");
            continue;
        }
        kw.set(r, "H", res->statistic);
        kw.set(r, "p", res->p_value);
        kw.set(r, "epsilon_squared", res->extra("epsilon_squared"));
        kw.set(r, "epsilon_squared_raw", res->extra("epsilon_squared_raw"));
        kw.set(r, "N", static_cast<double>(res->n));
        kw.set(r, "k", res->extra("k"));
    }

    const auto comp = values_by_group(Measure::composite_dprime());
    std::vector<std::string> names;
    for (Aetiology a : groups) names.push_back(name(a));
    auto& cd = rep.add_table("cohens_d", names);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto r = cd.add_row(names[i]);
        for (std::size_t j = 0; j < groups.size(); ++j)
            if (comp[i].size() >= kMinGroupSpeakers && comp[j].size() >= kMinGroupSpeakers)
                cd.set(r, names[j], i == j ? 0.0 : safe_cohens_d(comp[i], comp[j]));
    }

    auto& mw = rep.add_table("pairwise", {"n_a", "n_b", "U", "p", "p_holm", "rank_biserial", "cohens_d"});
    std::vector<double> raw_p;
    std::vector<std::size_t> mw_rows;
    for (std::size_t i = 0; i < groups.size(); ++i)
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            if (comp[i].size() < kMinGroupSpeakers || comp[j].size() < kMinGroupSpeakers) continue;
            const auto res = stats::mann_whitney(comp[i], comp[j]);
            const auto r = mw.add_row(names[i] + " vs " + names[j]);
            mw.set(r, "n_a", static_cast<double>(comp[i].size()));
            mw.set(r, "n_b", static_cast<double>(comp[j].size()));
            mw.set(r, "U", res.statistic);
            mw.set(r, "p", res.p_value);
            mw.set(r, "rank_biserial", res.extra("rank_biserial"));
            mw.set(r, "cohens_d", safe_cohens_d(comp[i], comp[j]));
            raw_p.push_back(res.p_value);
            mw_rows.push_back(r);
        }
    const auto adj = stats::holm_adjust(raw_p);
    for (std::size_t k = 0; k < mw_rows.size(); ++k) mw.set(mw_rows[k], "p_holm", adj[k]);

    std::vector<std::string> dev_cols;
    for (const auto& m : measures) dev_cols.emplace_back(m.name());
    auto& dev = rep.add_table("deviation_from_hc", dev_cols);
    const auto hc = std::find(groups.begin(), groups.end(), Aetiology::HC);
    if (hc == groups.end()) {
        rep.findings.push_back("HC not among groups; deviation grid left empty");
    } else {
        const auto hc_index = static_cast<std::size_t>(hc - groups.begin());
        for (const auto& m : measures) {
            const auto vg = values_by_group(m);
            for (std::size_t g = 0; g < groups.size(); ++g) {
                if (g == hc_index) continue;
                const std::string label = names[g];
                const auto r = dev.has_row(label) ? static_cast<std::size_t>(
                                                        std::find(dev.row_labels.begin(), dev.row_labels.end(), label) -
                                                        dev.row_labels.begin())
                                                  : dev.add_row(label);
                if (vg[g].size() >= o.min_deviation_n && vg[hc_index].size() >= o.min_deviation_n)
                    dev.set(r, std::string(m.name()), safe_cohens_d(vg[hc_index], vg[g]));
            }
        }
    }

    add_targets(rep, {{"height_epsilon_squared", 0.498},
                      {"rounding_epsilon_squared", 0.443},
                      {"stridency_epsilon_squared", 0.400},
                      {"clinical_only_epsilon_squared", 0.185},
                      {"pd_vs_articulatory_group_d", 0.83}});
    return rep;
}

// --- cross-lingual consistency ----------------------------------------------------------

namespace {

struct CrossRow {
    std::size_t language;
    Aetiology aetiology;
    Consonants profile;
};

struct LanguageSelection {
    std::vector<std::size_t> languages;  // indices into the language list
};

// Languages with >= min_n speakers of a and >= min_hc HC rows.
std::vector<std::size_t> qualifying_languages(const std::vector<std::map<Aetiology, std::size_t>>& counts,
                                              const std::vector<std::size_t>& hc_counts, Aetiology a,
                                              std::size_t min_n, std::size_t min_hc) {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < counts.size(); ++l) {
        auto it = counts[l].find(a);
        const std::size_t n = it == counts[l].end() ? 0 : it->second;
        if (n >= std::max<std::size_t>(min_n, 1) && hc_counts[l] >= min_hc) out.push_back(l);
    }
    return out;
}

std::vector<Consonants> language_means(const std::vector<CrossRow>& rows, const std::vector<Aetiology>& labels,
                                       Aetiology a, const std::vector<std::size_t>& languages,
                                       std::size_t n_languages) {
    std::vector<Consonants> sum(n_languages, Consonants{});
    std::vector<std::size_t> n(n_languages, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (labels[i] != a) continue;
        for (std::size_t f = 0; f < kConsonantCount; ++f) sum[rows[i].language][f] += rows[i].profile[f];
        ++n[rows[i].language];
    }
    std::vector<Consonants> out;
    for (std::size_t l : languages) {
        Consonants m = sum[l];
        for (double& v : m) v /= static_cast<double>(n[l]);
        out.push_back(m);
    }
    return out;
}

} // namespace

AnalysisReport crosslingual_consistency(const ProfileTable& table, const CrosslingualOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "crosslingual_consistency";
    rep.seed = o.seed;
    const auto groups = main_only(o.groups);
    rep.parameters["groups"] = join_groups(groups);
    rep.parameters["min_n"] = std::to_string(o.min_n);
    rep.parameters["min_hc"] = std::to_string(o.min_hc);
    rep.parameters["n_boot"] = std::to_string(o.n_boot);
    rep.parameters["n_perm"] = std::to_string(o.n_perm);

    std::vector<std::string> languages;
    {
        std::set<std::string> set;
        for (const auto& r : table.rows()) set.insert(r.meta.language);
        languages.assign(set.begin(), set.end());
    }
    auto lang_index = [&](const std::string& l) {
        return static_cast<std::size_t>(std::lower_bound(languages.begin(), languages.end(), l) - languages.begin());
    };
    std::vector<std::size_t> hc_counts(languages.size(), 0);
    for (const auto& r : table.rows())
        if (r.meta.aetiology == Aetiology::HC) ++hc_counts[lang_index(r.meta.language)];

    // The permutation pool is every main-aetiology row; groups only selects what is reported.
    std::vector<CrossRow> rows;
    for (const auto& r : table.rows()) {
        if (!is_main_aetiology(r.meta.aetiology)) continue;
        if (const auto c = consonant_profile(r)) rows.push_back({lang_index(r.meta.language), r.meta.aetiology, *c});
    }
    std::vector<Aetiology> labels;
    for (const auto& r : rows) labels.push_back(r.aetiology);
    std::vector<std::map<Aetiology, std::size_t>> counts(languages.size());
    for (const auto& r : rows) ++counts[r.language][r.aetiology];

    auto observed = [&](Aetiology a, std::size_t min_n, std::size_t min_hc) {
        const auto langs = qualifying_languages(counts, hc_counts, a, min_n, min_hc);
        return std::make_pair(langs, language_means(rows, labels, a, langs, languages.size()));
    };

    // Shared permutation null: labels shuffled within each language.
    std::vector<std::vector<std::size_t>> rows_of_language(languages.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows_of_language[rows[i].language].push_back(i);
    std::vector<std::vector<double>> null(groups.size(), std::vector<double>(o.n_perm, kNaN));
    std::vector<std::vector<std::size_t>> selected(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        selected[g] = qualifying_languages(counts, hc_counts, groups[g], o.min_n, o.min_hc);
    parallel_for(o.n_perm, [&](std::size_t p) {
        Rng rng = make_rng(o.seed, {20, p});
        std::vector<Aetiology> shuffled = labels;
        for (const auto& idx : rows_of_language) {
            std::vector<Aetiology> sub;
            for (std::size_t i : idx) sub.push_back(shuffled[i]);
            shuffle(std::span<Aetiology>(sub), rng);
            for (std::size_t k = 0; k < idx.size(); ++k) shuffled[idx[k]] = sub[k];
        }
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (selected[g].size() < 2) continue;
            const auto m = mean_cosine(language_means(rows, shuffled, groups[g], selected[g], languages.size()));
            null[g][p] = m.value_or(kNaN);
        }
    });

    auto& summary = rep.add_table("consistency", {"n_languages", "n_speakers", "mean_cos", "min_cos", "max_cos",
                                                  "ci_lower", "ci_upper", "perm_p"});
    auto& pairs = rep.add_table("pairwise_cosine", {"cosine", "n_a", "n_b"});
    bool any = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const Aetiology a = groups[g];
        const auto [langs, means] = observed(a, o.min_n, o.min_hc);
        if (langs.size() < 2) {
            rep.findings.push_back(name(a) + ": fewer than 2 qualifying languages");
            continue;
        }
        any = true;
        std::vector<double> cosines;
        for (std::size_t i = 0; i < langs.size(); ++i)
            for (std::size_t j = i + 1; j < langs.size(); ++j) {
                double c = kNaN;
                try {
                    c = stats::cosine(means[i], means[j]);
                } catch (const Error& e) {
                    rep.findings.push_back(name(a) + ": " + e.what());
                }
                const auto r = pairs.add_row(name(a) + ":" + languages[langs[i]] + "-" + languages[langs[j]]);
                pairs.set(r, "cosine", c);
                pairs.set(r, "n_a", static_cast<double>(counts[langs[i]][a]));
                pairs.set(r, "n_b", static_cast<double>(counts[langs[j]][a]));
                if (!std::isnan(c)) cosines.push_back(c);
            }
        const auto r = summary.add_row(name(a));
        std::size_t n_speakers = 0;
        for (std::size_t l : langs) n_speakers += counts[l][a];
        summary.set(r, "n_languages", static_cast<double>(langs.size()));
        summary.set(r, "n_speakers", static_cast<double>(n_speakers));
        if (cosines.empty()) continue;
        const double obs = stats::mean(cosines);
        summary.set(r, "mean_cos", obs);
        summary.set(r, "min_cos", *std::min_element(cosines.begin(), cosines.end()));
        summary.set(r, "max_cos", *std::max_element(cosines.begin(), cosines.end()));

        std::vector<std::size_t> members;
        std::vector<int> strata;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].aetiology == a && std::find(langs.begin(), langs.end(), rows[i].language) != langs.end()) {
                members.push_back(i);
                strata.push_back(static_cast<int>(rows[i].language));
            }
        stats::BootstrapOptions bo;
        bo.n_resamples = o.n_boot;
        bo.seed = stream_seed(o.seed, {21, static_cast<std::uint64_t>(a)});
        bo.strata = strata;
        try {
            const auto ci = stats::bootstrap_ci(
                members.size(),
                [&](std::span<const std::size_t> idx) -> std::optional<double> {
                    std::vector<Consonants> sum(languages.size(), Consonants{});
                    std::vector<std::size_t> n(languages.size(), 0);
                    for (std::size_t k : idx) {
                        const auto& cr = rows[members[k]];
                        for (std::size_t f = 0; f < kConsonantCount; ++f) sum[cr.language][f] += cr.profile[f];
                        ++n[cr.language];
                    }
                    std::vector<Consonants> ms;
                    for (std::size_t l : langs) {
                        for (double& v : sum[l]) v /= static_cast<double>(n[l]);
                        ms.push_back(sum[l]);
                    }
                    return mean_cosine(ms);
                },
                bo);
            summary.set(r, "ci_lower", ci.lower);
            summary.set(r, "ci_upper", ci.upper);
        } catch (const Error& e) {
            rep.findings.push_back(name(a) + " bootstrap: " + e.what());
        }
        if (o.n_perm > 0) {
            std::size_t ge = 0;
            for (double v : null[g])
                if (!std::isnan(v) && v >= obs) ++ge;
            summary.set(r, "perm_p", (1.0 + static_cast<double>(ge)) / (1.0 + static_cast<double>(o.n_perm)));
        }
    }
    if (!any)
        fail(ErrorKind::NoQualifyingLanguagePair, "no aetiology has >= 2 languages with >= " + std::to_string(o.min_n) +
                                                      " speakers and >= " + std::to_string(o.min_hc) + " HC speakers");

    auto sweep = [&](const char* table_name, const std::vector<std::size_t>& values, bool is_min_n) {
        auto& t = rep.add_table(table_name, {"threshold", "n_languages", "mean_cos", "min_cos"});
        for (Aetiology a : groups)
            for (std::size_t v : values) {
                const auto [langs, means] = is_min_n ? observed(a, v, o.min_hc) : observed(a, o.min_n, v);
                const auto r = t.add_row(name(a) + "@" + std::to_string(v));
                t.set(r, "threshold", static_cast<double>(v));
                t.set(r, "n_languages", static_cast<double>(langs.size()));
                std::vector<double> cosines;
                for (std::size_t i = 0; i < means.size(); ++i)
                    for (std::size_t j = i + 1; j < means.size(); ++j) try {
                            cosines.push_back(stats::cosine(means[i], means[j]));
                        } catch (const Error&) {
                        }
                if (!cosines.empty()) {
                    t.set(r, "mean_cos", stats::mean(cosines));
                    t.set(r, "min_cos", *std::min_element(cosines.begin(), cosines.end()));
                }
            }
    };
    sweep("min_n_sweep", o.min_n_sweep, true);
    sweep("min_hc_sweep", o.min_hc_sweep, false);

    add_targets(rep, {{"CP_mean_cos", 0.987}, {"CP_min_cos", 0.974}, {"CP_max_cos", 0.999}, {"PD_cos_min_n_10", 0.976}});
    return rep;
}

// --- backbone agreement -----------------------------------------------------------------

AnalysisReport backbone_agreement(const std::map<std::string, ProfileTable>& tables, const BackboneOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "backbone_agreement";
    rep.seed = o.seed;
    if (tables.size() < 2) fail(ErrorKind::NoSharedSpeakers, "backbone agreement needs >= 2 backbones");
    const std::string reference = o.reference_backbone.empty() ? tables.begin()->first : o.reference_backbone;
    if (!tables.contains(reference)) fail(ErrorKind::InvalidArgument, "unknown reference backbone '" + reference + "'");
    rep.parameters["reference_backbone"] = reference;
    rep.parameters["min_shared"] = std::to_string(o.min_shared);

    std::map<std::string, std::map<std::string, double>> composite;
    for (const auto& [b, t] : tables)
        for (const auto& r : t.rows())
            if (const auto c = r.profile.composite()) composite[b][r.meta.speaker_id] = *c;

    auto& rank = rep.add_table("rank_agreement", {"rho", "p", "n_shared"});
    bool any = false;
    for (auto i = tables.begin(); i != tables.end(); ++i)
        for (auto j = std::next(i); j != tables.end(); ++j) {
            std::vector<double> x, y;
            for (const auto& [spk, v] : composite[i->first]) {
                auto it = composite[j->first].find(spk);
                if (it == composite[j->first].end()) continue;
                x.push_back(v);
                y.push_back(it->second);
            }
            const auto r = rank.add_row(i->first + " vs " + j->first);
            rank.set(r, "n_shared", static_cast<double>(x.size()));
            if (x.size() < o.min_shared) {
                rep.findings.push_back(i->first + " vs " + j->first + ": " + std::to_string(x.size()) +
                                       " shared speakers (< " + std::to_string(o.min_shared) + ")");
                continue;
            }
            if (const auto sp = try_spearman(x, y, i->first + " vs " + j->first, rep.findings)) {
                rank.set(r, "rho", sp->statistic);
                rank.set(r, "p", sp->p_value);
                any = true;
            }
        }
    if (!any) fail(ErrorKind::NoSharedSpeakers, "no backbone pair shares >= " + std::to_string(o.min_shared) + " speakers");

    auto group_means = [](const ProfileTable& t) {
        std::map<Aetiology, std::pair<Consonants, std::size_t>> acc;
        for (const auto& r : t.rows()) {
            if (!is_main_aetiology(r.meta.aetiology)) continue;
            const auto c = consonant_profile(r);
            if (!c) continue;
            auto& [sum, n] = acc[r.meta.aetiology];
            for (std::size_t f = 0; f < kConsonantCount; ++f) sum[f] += (*c)[f];
            ++n;
        }
        std::map<Aetiology, Consonants> out;
        for (auto& [a, sn] : acc) {
            Consonants m = sn.first;
            for (double& v : m) v /= static_cast<double>(sn.second);
            out[a] = m;
        }
        return out;
    };
    const auto ref_means = group_means(tables.at(reference));
    std::vector<std::string> others;
    for (const auto& [b, _] : tables)
        if (b != reference) others.push_back(b);
    auto& cos = rep.add_table("profile_cosine", others);
    std::map<std::string, std::map<Aetiology, Consonants>> other_means;
    for (const auto& b : others) other_means[b] = group_means(tables.at(b));
    for (Aetiology a : kMainAetiologies) {
        if (!ref_means.contains(a)) continue;
        const auto r = cos.add_row(name(a));
        for (const auto& b : others) {
            auto it = other_means[b].find(a);
            if (it == other_means[b].end()) continue;
            try {
                cos.set(r, b, stats::cosine(ref_means.at(a), it->second));
            } catch (const Error& e) {
                rep.findings.push_back(b + " " + name(a) + ": " + e.what());
            }
        }
    }

    std::vector<std::string> mono_cols;
    for (Severity s : kKnownSeverities) mono_cols.push_back("mean_" + name(s));
    mono_cols.push_back("strictly_decreasing");
    mono_cols.push_back("rho");
    auto& mono = rep.add_table("severity_monotonicity", mono_cols);
    for (const auto& [b, t] : tables) {
        const auto r = mono.add_row(b);
        std::map<Severity, std::vector<double>> by;
        std::vector<double> x, y;
        for (const auto& row : t.rows()) {
            const auto c = row.profile.composite();
            if (!c || !severity_ordinal(row.meta.severity)) continue;
            by[row.meta.severity].push_back(*c);
            x.push_back(ordinal(row.meta.severity));
            y.push_back(*c);
        }
        std::vector<double> seq;
        for (Severity s : kKnownSeverities)
            if (by[s].size() >= kMinLevelSpeakers) {
                mono.set(r, "mean_" + name(s), stats::mean(by[s]));
                seq.push_back(stats::mean(by[s]));
            }
        mono.set(r, "strictly_decreasing", strictly_decreasing(seq) ? 1.0 : 0.0);
        if (const auto sp = try_spearman(x, y, b + " severity correlation", rep.findings))
            mono.set(r, "rho", sp->statistic);
    }

    add_targets(rep, {{"hubert_base_vs_wavlm_base_rho", 0.969}, {"min_pairwise_rho", 0.77}, {"min_profile_cosine", 0.96}});
    return rep;
}

// --- fixed-token d' -----------------------------------------------------------------------

AnalysisReport fixed_token_dprime(const Corpus& corpus, const FeatureConfigMap& configs,
                                  const DirectionMap& directions, const FixedTokenOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "fixed_token";
    rep.seed = o.seed;
    const auto groups = main_only(o.groups);
    if (o.budgets.empty()) fail(ErrorKind::InvalidArgument, "at least one token budget is required");
    for (std::size_t b : o.budgets)
        if (b < kMinTokensPerClass) fail(ErrorKind::InvalidArgument, "token budgets must be >= 5");
    if (o.n_repeats < 1) fail(ErrorKind::InvalidArgument, "n_repeats must be >= 1");
    {
        std::string s;
        for (std::size_t b : o.budgets) s += (s.empty() ? "" : ",") + std::to_string(b);
        rep.parameters["budgets"] = s;
    }
    rep.parameters["n_repeats"] = std::to_string(o.n_repeats);
    rep.parameters["groups"] = join_groups(groups);

    const std::size_t n_spk = corpus.speaker_count();
    const std::size_t n_budget = o.budgets.size();
    // fixed[b][s]: composite fixed-token d'; full[s]: composite from all tokens.
    std::vector<std::vector<std::optional<double>>> fixed(n_budget, std::vector<std::optional<double>>(n_spk));
    std::vector<std::optional<double>> full(n_spk);

    parallel_for(n_spk, [&](std::size_t s) {
        const auto& meta = corpus.speaker(s);
        auto cfg = configs.find(meta.language);
        auto dir = directions.find(meta.language);
        if (cfg == configs.end() || dir == directions.end()) return;
        std::array<std::vector<double>, kConsonantCount> pos, neg;
        for (std::size_t f = 0; f < kConsonantCount; ++f)
            if (!cfg->second.classes[f] || !dir->second.directions[f]) return;
        for (std::size_t u : corpus.utterances_of(s))
            for (const auto& p : corpus.utterances()[u].phones) {
                if (p.row < 0) continue;
                for (std::size_t f = 0; f < kConsonantCount; ++f) {
                    const auto& pc = *cfg->second.classes[f];
                    const bool is_pos = pc.pos.contains(p.label);
                    if (!is_pos && !pc.neg.contains(p.label)) continue;
                    (is_pos ? pos[f] : neg[f]).push_back(project(corpus.embedding(p.row), *dir->second.directions[f]));
                }
            }
        try {
            double sum = 0.0;
            for (std::size_t f = 0; f < kConsonantCount; ++f) {
                if (pos[f].size() < kMinTokensPerClass || neg[f].size() < kMinTokensPerClass) throw std::out_of_range("");
                sum += dprime(pos[f], neg[f]);
            }
            full[s] = sum / static_cast<double>(kConsonantCount);
        } catch (const std::exception&) {
        }

        std::size_t available = SIZE_MAX;
        for (std::size_t f = 0; f < kConsonantCount; ++f) available = std::min({available, pos[f].size(), neg[f].size()});
        std::vector<double> pa, na;
        for (std::size_t bi = 0; bi < n_budget; ++bi) {
            const std::size_t budget = o.budgets[bi];
            if (available < budget) continue;
            double total = 0.0;
            bool ok = true;
            for (std::size_t f = 0; f < kConsonantCount && ok; ++f) {
                double acc = 0.0;
                for (std::size_t rep_i = 0; rep_i < o.n_repeats; ++rep_i) {
                    Rng rng = make_rng(o.seed, {30, s, f, rep_i, budget});
                    auto draw = [&](const std::vector<double>& src, std::vector<double>& dst) {
                        std::vector<double> tmp = src;
                        for (std::size_t k = 0; k < budget; ++k)
                            std::swap(tmp[k], tmp[k + uniform_index(rng, tmp.size() - k)]);
                        dst.assign(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(budget));
                    };
                    draw(pos[f], pa);
                    draw(neg[f], na);
                    try {
                        acc += dprime(pa, na);
                    } catch (const Error&) {
                        ok = false;
                        break;
                    }
                }
                total += acc / static_cast<double>(o.n_repeats);
            }
            if (ok) fixed[bi][s] = total / static_cast<double>(kConsonantCount);
        }
    });

    auto summarise = [&](ReportTable& t, const std::string& label, std::size_t bi, const std::vector<bool>& include) {
        std::vector<double> x, y, fx, fl;
        std::vector<std::vector<double>> by_group(groups.size());
        std::size_t n = 0;
        for (std::size_t s = 0; s < n_spk; ++s) {
            if (!include[s] || !fixed[bi][s]) continue;
            ++n;
            const auto& meta = corpus.speaker(s);
            fx.push_back(*fixed[bi][s]);
            if (full[s]) fl.push_back(*full[s]);
            if (severity_ordinal(meta.severity)) {
                x.push_back(ordinal(meta.severity));
                y.push_back(*fixed[bi][s]);
            }
            const auto g = std::find(groups.begin(), groups.end(), meta.aetiology);
            if (g != groups.end()) by_group[static_cast<std::size_t>(g - groups.begin())].push_back(*fixed[bi][s]);
        }
        const auto r = t.add_row(label);
        t.set(r, "n_speakers", static_cast<double>(n));
        if (n == 0) return;
        t.set(r, "mean_fixed_composite", stats::mean(fx));
        if (!fl.empty()) t.set(r, "mean_full_composite", stats::mean(fl));
        if (const auto sp = try_spearman(x, y, t.name + " " + label, rep.findings)) {
            t.set(r, "rho", sp->statistic);
            t.set(r, "p", sp->p_value);
        }
        if (const auto kw = try_kruskal(by_group, groups, t.name + " " + label, rep.findings)) {
            t.set(r, "H", kw->statistic);
            t.set(r, "epsilon_squared", kw->extra("epsilon_squared"));
        }
    };

    const std::vector<std::string> cols{"n_speakers", "rho", "p", "H", "epsilon_squared", "mean_fixed_composite",
                                        "mean_full_composite"};
    auto& per_budget = rep.add_table("per_budget", cols);
    std::vector<bool> everyone(n_spk, true), common(n_spk, true);
    std::size_t total_qualifying = 0;
    for (std::size_t bi = 0; bi < n_budget; ++bi)
        for (std::size_t s = 0; s < n_spk; ++s) {
            if (fixed[bi][s]) ++total_qualifying;
            else common[s] = false;
        }
    if (total_qualifying == 0)
        fail(ErrorKind::NoQualifyingSpeakers, "no speaker has enough tokens for any budget");
    for (std::size_t bi = 0; bi < n_budget; ++bi)
        summarise(per_budget, "N=" + std::to_string(o.budgets[bi]), bi, everyone);
    auto& common_set = rep.add_table("common_set", cols);
    for (std::size_t bi = 0; bi < n_budget; ++bi)
        summarise(common_set, "N=" + std::to_string(o.budgets[bi]), bi, common);

    add_targets(rep, {{"N=20_n", 845},
                      {"N=20_rho", -0.586},
                      {"N=200_rho", -0.733},
                      {"common_set_N=20_rho", -0.747},
                      {"common_set_N=50_rho", -0.745},
                      {"common_set_N=100_rho", -0.740},
                      {"common_set_N=200_rho", -0.733}});
    return rep;
}

// --- token-matched comparison ---------------------------------------------------------------

AnalysisReport token_matched_comparison(const ProfileTable& table, const TokenMatchOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "token_matched";
    rep.seed = o.seed;
    rep.parameters["tolerance"] = str(o.tolerance);
    rep.parameters["measure"] = std::string(o.measure.name());
    rep.parameters["admission"] = "|log(n_a / n_b)| <= log(1 + tolerance)";
    if (!(o.tolerance >= 0.0)) fail(ErrorKind::InvalidArgument, "tolerance must be >= 0");
    const double limit = std::log1p(o.tolerance) + 1e-12;

    struct Item {
        const std::string* id;
        double n_phones;
        double value;
    };
    std::map<Severity, std::vector<Item>> by_level;
    for (const auto& r : table.rows()) {
        const auto v = r.profile.value(o.measure);
        if (!v || !severity_ordinal(r.meta.severity) || r.profile.n_phones == 0) continue;
        by_level[r.meta.severity].push_back({&r.meta.speaker_id, static_cast<double>(r.profile.n_phones), *v});
    }

    auto& t = rep.add_table("matched", {"n_pairs", "cohens_d", "U", "p", "rank_biserial", "mean_a", "mean_b",
                                        "mean_n_phones_a", "mean_n_phones_b"});
    for (std::size_t k = 0; k + 1 < kKnownSeverities.size(); ++k) {
        const Severity sa = kKnownSeverities[k], sb = kKnownSeverities[k + 1];
        const auto& A = by_level[sa];
        const auto& B = by_level[sb];
        struct Candidate {
            double dist;
            std::size_t i, j;
        };
        std::vector<Candidate> cand;
        for (std::size_t i = 0; i < A.size(); ++i)
            for (std::size_t j = 0; j < B.size(); ++j) {
                const double d = std::abs(std::log(A[i].n_phones / B[j].n_phones));
                if (d <= limit) cand.push_back({d, i, j});
            }
        std::sort(cand.begin(), cand.end(), [&](const Candidate& x, const Candidate& y) {
            if (x.dist != y.dist) return x.dist < y.dist;
            if (*A[x.i].id != *A[y.i].id) return *A[x.i].id < *A[y.i].id;
            return *B[x.j].id < *B[y.j].id;
        });
        std::vector<bool> used_a(A.size(), false), used_b(B.size(), false);
        std::vector<double> va, vb, na, nb;
        for (const auto& c : cand) {
            if (used_a[c.i] || used_b[c.j]) continue;
            used_a[c.i] = used_b[c.j] = true;
            va.push_back(A[c.i].value);
            vb.push_back(B[c.j].value);
            na.push_back(A[c.i].n_phones);
            nb.push_back(B[c.j].n_phones);
        }
        const std::string label = name(sa) + " vs " + name(sb);
        const auto r = t.add_row(label);
        t.set(r, "n_pairs", static_cast<double>(va.size()));
        if (va.empty()) {
            rep.findings.push_back(label + ": n=0 matched pairs");
            continue;
        }
        t.set(r, "mean_a", stats::mean(va));
        t.set(r, "mean_b", stats::mean(vb));
        t.set(r, "mean_n_phones_a", stats::mean(na));
        t.set(r, "mean_n_phones_b", stats::mean(nb));
        t.set(r, "cohens_d", safe_cohens_d(va, vb));
        const auto mw = stats::mann_whitney(va, vb);
        t.set(r, "U", mw.statistic);
        t.set(r, "p", mw.p_value);
        t.set(r, "rank_biserial", mw.extra("rank_biserial"));
    }
    add_targets(rep, {{"control_vs_mild_n", 185},
                      {"control_vs_mild_d", 0.60},
                      {"mild_vs_moderate_n", 99},
                      {"mild_vs_moderate_d", 0.54},
                      {"moderate_vs_severe_n", 37},
                      {"moderate_vs_severe_d", 0.95}});
    return rep;
}

// --- leave-one-dataset-out stability ------------------------------------------------------------

AnalysisReport lodo_stability(const ProfileTable& table, const LodoOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "lodo_stability";
    rep.seed = o.seed;
    const auto groups = main_only(o.groups);
    rep.parameters["measure"] = std::string(o.measure.name());
    rep.parameters["groups"] = join_groups(groups);

    std::set<std::string> datasets;
    for (const auto& r : table.rows()) datasets.insert(r.meta.dataset);
    if (datasets.size() < 2) fail(ErrorKind::SingleDataset, "leave-one-dataset-out needs >= 2 datasets");

    auto& folds = rep.add_table("folds", {"n_remaining", "rho", "p", "epsilon_squared", "status"});
    std::vector<double> rhos, eps;
    for (const auto& held : datasets) {
        std::vector<double> x, y;
        std::vector<std::vector<double>> by_group(groups.size());
        std::size_t n = 0;
        for (const auto& r : table.rows()) {
            if (r.meta.dataset == held) continue;
            ++n;
            if (const auto v = r.profile.value(o.measure); v && severity_ordinal(r.meta.severity)) {
                x.push_back(ordinal(r.meta.severity));
                y.push_back(*v);
            }
            const auto c = r.profile.composite();
            const auto g = std::find(groups.begin(), groups.end(), r.meta.aetiology);
            if (c && g != groups.end()) by_group[static_cast<std::size_t>(g - groups.begin())].push_back(*c);
        }
        const auto row = folds.add_row(held);
        folds.set(row, "n_remaining", static_cast<double>(n));
        std::vector<std::string> notes;
        const auto sp = try_spearman(x, y, "without " + held, notes);
        const auto kw = try_kruskal(by_group, groups, "without " + held, notes);
        if (!sp || !kw) {
            folds.set(row, "status", std::string("insufficient"));
            rep.findings.push_back("fold without " + held + " skipped: insufficient data");
            continue;
        }
        folds.set(row, "status", std::string("ok"));
        folds.set(row, "rho", sp->statistic);
        folds.set(row, "p", sp->p_value);
        folds.set(row, "epsilon_squared", kw->extra("epsilon_squared"));
        rhos.push_back(sp->statistic);
        eps.push_back(kw->extra("epsilon_squared"));
    }
    auto& summary = rep.add_table("summary", {"min", "mean", "max", "n_folds"});
    for (const auto& [label, v] : {std::pair{"rho", &rhos}, std::pair{"epsilon_squared", &eps}}) {
        const auto r = summary.add_row(label);
        summary.set(r, "n_folds", static_cast<double>(v->size()));
        if (v->empty()) continue;
        summary.set(r, "min", *std::min_element(v->begin(), v->end()));
        summary.set(r, "mean", stats::mean(*v));
        summary.set(r, "max", *std::max_element(v->begin(), v->end()));
    }
    add_targets(rep, {{"rho_min", -0.575}, {"rho_max", -0.410}, {"rho_mean", -0.541},
                      {"epsilon_squared_min", 0.154}, {"epsilon_squared_max", 0.324}});
    return rep;
}

// --- nearest-centroid classifier ------------------------------------------------------------------

ClassifierResult centroid_classifier_lodo_result(const ProfileTable& table, const ClassifierOptions& o,
                                                 std::vector<std::string>* findings) {
    const auto groups = main_only(o.groups);
    const auto features = features_in(o.features);
    const std::size_t p = features.size();
    const std::size_t k = groups.size();
    if (k < 2) fail(ErrorKind::TooFewGroups, "classifier needs >= 2 classes");

    struct Item {
        std::vector<double> x;
        std::size_t label;
        const std::string* dataset;
    };
    std::vector<Item> items;
    for (const auto& r : table.rows()) {
        const auto g = std::find(groups.begin(), groups.end(), r.meta.aetiology);
        if (g == groups.end()) continue;
        std::vector<double> x;
        for (Feature f : features) {
            const auto& v = r.profile[f];
            if (!v) break;
            x.push_back(*v);
        }
        if (x.size() != p) continue;
        items.push_back({std::move(x), static_cast<std::size_t>(g - groups.begin()), &r.meta.dataset});
    }
    std::set<std::string> datasets;
    for (const auto& it : items) datasets.insert(*it.dataset);
    if (datasets.size() < 2) fail(ErrorKind::SingleDataset, "classifier needs >= 2 datasets with complete rows");

    // Class order for tie-breaking: lexicographic by name.
    std::vector<std::size_t> by_name(k);
    std::iota(by_name.begin(), by_name.end(), 0);
    std::sort(by_name.begin(), by_name.end(), [&](std::size_t a, std::size_t b) { return name(groups[a]) < name(groups[b]); });

    ClassifierResult res;
    res.classes = groups;
    res.confusion.assign(k, std::vector<std::size_t>(k, 0));
    bool any_training = false;
    for (const auto& held : datasets) {
        std::vector<const Item*> train, test;
        for (const auto& it : items) (*it.dataset == held ? test : train).push_back(&it);
        if (train.empty()) continue;
        any_training = true;
        std::vector<double> mu(p, 0.0), sd(p, 0.0);
        for (const auto* it : train)
            for (std::size_t c = 0; c < p; ++c) mu[c] += it->x[c];
        for (double& m : mu) m /= static_cast<double>(train.size());
        for (const auto* it : train)
            for (std::size_t c = 0; c < p; ++c) sd[c] += (it->x[c] - mu[c]) * (it->x[c] - mu[c]);
        for (double& s : sd) {
            s = train.size() > 1 ? std::sqrt(s / static_cast<double>(train.size() - 1)) : 0.0;
            if (!(s > 0.0)) s = 1.0;
        }
        std::vector<std::vector<double>> centroid(k, std::vector<double>(p, 0.0));
        std::vector<std::size_t> count(k, 0);
        for (const auto* it : train) {
            for (std::size_t c = 0; c < p; ++c) centroid[it->label][c] += (it->x[c] - mu[c]) / sd[c];
            ++count[it->label];
        }
        for (std::size_t g = 0; g < k; ++g) {
            if (count[g] == 0) {
                if (findings) findings->push_back("class " + name(groups[g]) + " absent from training in fold " + held);
                continue;
            }
            for (double& v : centroid[g]) v /= static_cast<double>(count[g]);
        }
        for (const auto* it : test) {
            std::size_t best = k;
            double best_d = INFINITY;
            for (std::size_t g : by_name) {
                if (count[g] == 0) continue;
                double d = 0.0;
                for (std::size_t c = 0; c < p; ++c) {
                    const double z = (it->x[c] - mu[c]) / sd[c] - centroid[g][c];
                    d += z * z;
                }
                if (d < best_d) {
                    best_d = d;
                    best = g;
                }
            }
            ++res.confusion[it->label][best];
            ++res.n;
        }
    }
    if (!any_training) fail(ErrorKind::ClassAbsentFromAllTraining, "no fold has training rows");

    std::size_t correct = 0, classes_with_truth = 0;
    double recall_sum = 0.0, f1_sum = 0.0;
    res.f1.assign(k, 0.0);
    res.f1_undefined.assign(k, false);
    for (std::size_t g = 0; g < k; ++g) {
        std::size_t truth = 0, predicted = 0;
        for (std::size_t h = 0; h < k; ++h) {
            truth += res.confusion[g][h];
            predicted += res.confusion[h][g];
        }
        const std::size_t tp = res.confusion[g][g];
        correct += tp;
        if (truth > 0) {
            recall_sum += static_cast<double>(tp) / static_cast<double>(truth);
            ++classes_with_truth;
        }
        const std::size_t denom = truth + predicted;
        if (denom == 0) {
            res.f1_undefined[g] = true;
            if (findings) findings->push_back("class " + name(groups[g]) + " has no truths and no predictions; F1 set to 0");
        } else {
            res.f1[g] = 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
        }
        f1_sum += res.f1[g];
    }
    res.accuracy = res.n ? static_cast<double>(correct) / static_cast<double>(res.n) : 0.0;
    res.balanced_accuracy = classes_with_truth ? recall_sum / static_cast<double>(classes_with_truth) : 0.0;
    res.macro_f1 = f1_sum / static_cast<double>(k);
    return res;
}

AnalysisReport centroid_classifier_lodo(const ProfileTable& table, const ClassifierOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "centroid_classifier";
    rep.seed = o.seed;
    rep.parameters["groups"] = join_groups(main_only(o.groups));
    rep.parameters["features"] = o.features == FeatureSubset::consonant5 ? "CONSONANT5"
                                 : o.features == FeatureSubset::main13   ? "MAIN13"
                                                                         : "FULL15";
    const auto res = centroid_classifier_lodo_result(table, o, &rep.findings);

    auto& m = rep.add_table("metrics", {"value"});
    for (const auto& [label, v] : {std::pair{"accuracy", res.accuracy}, std::pair{"balanced_accuracy", res.balanced_accuracy},
                                   std::pair{"macro_f1", res.macro_f1}, std::pair{"n", static_cast<double>(res.n)}})
        m.set(m.add_row(label), "value", v);

    std::vector<std::string> names;
    for (Aetiology a : res.classes) names.push_back(name(a));
    auto& per = rep.add_table("per_class", {"support", "predicted", "precision", "recall", "f1", "f1_undefined"});
    auto& conf = rep.add_table("confusion", names);
    for (std::size_t g = 0; g < res.classes.size(); ++g) {
        std::size_t truth = 0, predicted = 0;
        for (std::size_t h = 0; h < res.classes.size(); ++h) {
            truth += res.confusion[g][h];
            predicted += res.confusion[h][g];
        }
        const auto r = per.add_row(names[g]);
        per.set(r, "support", static_cast<double>(truth));
        per.set(r, "predicted", static_cast<double>(predicted));
        if (predicted) per.set(r, "precision", static_cast<double>(res.confusion[g][g]) / static_cast<double>(predicted));
        if (truth) per.set(r, "recall", static_cast<double>(res.confusion[g][g]) / static_cast<double>(truth));
        per.set(r, "f1", res.f1[g]);
        per.set(r, "f1_undefined", res.f1_undefined[g] ? 1.0 : 0.0);
        const auto cr = conf.add_row(names[g]);
        for (std::size_t h = 0; h < res.classes.size(); ++h)
            conf.set(cr, names[h], static_cast<double>(res.confusion[g][h]));
    }
    add_targets(rep, {{"accuracy", 0.403}, {"balanced_accuracy", 0.286}, {"macro_f1", 0.226}, {"HC_f1", 0.639}});
    return rep;
}

// --- residualised rankings ----------------------------------------------------------------------------

AnalysisReport residualized_rankings(const ProfileTable& table, const ResidualizedOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "residualized_rankings";
    rep.seed = o.seed;
    const auto groups = main_only(o.groups);
    rep.parameters["groups"] = join_groups(groups);
    rep.parameters["regressor"] = "log(n_phones)";

    std::vector<Measure> measures;
    for (Feature f : features_in(o.features)) measures.push_back(Measure::of(f));
    measures.push_back(Measure::composite_dprime());

    std::vector<const ProfileRow*> rows;
    for (const auto& r : table.rows())
        if (r.profile.n_phones > 0) rows.push_back(&r);
    std::vector<double> log_n;
    for (const auto* r : rows) log_n.push_back(std::log(static_cast<double>(r->profile.n_phones)));

    auto ordering = [](const std::vector<std::pair<std::string, double>>& means) {
        auto sorted = means;
        std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        std::string s;
        for (const auto& [label, _] : sorted) s += (s.empty() ? "" : ">") + label;
        return s;
    };

    auto& pres = rep.add_table("rank_preservation", {"severity_order_raw", "severity_order_residual", "severity_preserved",
                                                     "aetiology_order_raw", "aetiology_order_residual", "aetiology_preserved"});
    auto& means_t = rep.add_table("group_means", {"raw_mean", "adjusted_mean", "n"});
    auto& gap = rep.add_table("hc_gap", {"raw_gap", "adjusted_gap"});

    for (const auto& m : measures) {
        const auto y = measure_column(rows, m);
        std::vector<double> adjusted;
        try {
            const auto resid = stats::residualize(y, log_n);
            const double centre = stats::mean(stats::present(y));
            adjusted.resize(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) adjusted[i] = resid[i] + centre;
        } catch (const Error& e) {
            rep.findings.push_back(std::string(m.name()) + ": " + e.what());
            continue;
        }
        std::vector<std::pair<std::string, double>> sev_raw, sev_adj, aet_raw, aet_adj;
        std::map<std::string, std::pair<double, double>> aet_means;
        auto collect = [&](auto key_of, auto include, auto& raw_out, auto& adj_out, bool record, const auto& labels) {
            for (const auto& label : labels) {
                std::vector<double> a, b;
                for (std::size_t i = 0; i < rows.size(); ++i)
                    if (include(*rows[i]) && key_of(*rows[i]) == label && !std::isnan(y[i])) {
                        a.push_back(y[i]);
                        b.push_back(adjusted[i]);
                    }
                if (a.size() < kMinGroupSpeakers) continue;
                raw_out.emplace_back(label, stats::mean(a));
                adj_out.emplace_back(label, stats::mean(b));
                if (record) {
                    const auto r = means_t.add_row(std::string(m.name()) + ":" + label);
                    means_t.set(r, "raw_mean", stats::mean(a));
                    means_t.set(r, "adjusted_mean", stats::mean(b));
                    means_t.set(r, "n", static_cast<double>(a.size()));
                    aet_means[label] = {stats::mean(a), stats::mean(b)};
                }
            }
        };
        std::vector<std::string> sev_labels, aet_labels;
        for (Severity s : kKnownSeverities) sev_labels.push_back(name(s));
        for (Aetiology a : groups) aet_labels.push_back(name(a));
        collect([](const ProfileRow& r) { return name(r.meta.severity); }, [](const ProfileRow&) { return true; },
                sev_raw, sev_adj, false, sev_labels);
        collect([](const ProfileRow& r) { return name(r.meta.aetiology); }, [](const ProfileRow&) { return true; },
                aet_raw, aet_adj, true, aet_labels);

        const auto r = pres.add_row(std::string(m.name()));
        const auto sr = ordering(sev_raw), sa = ordering(sev_adj), ar = ordering(aet_raw), aa = ordering(aet_adj);
        pres.set(r, "severity_order_raw", sr);
        pres.set(r, "severity_order_residual", sa);
        pres.set(r, "severity_preserved", sr == sa ? 1.0 : 0.0);
        pres.set(r, "aetiology_order_raw", ar);
        pres.set(r, "aetiology_order_residual", aa);
        pres.set(r, "aetiology_preserved", ar == aa ? 1.0 : 0.0);

        if (m.composite && aet_means.contains("HC"))
            for (const auto& [label, mm] : aet_means) {
                if (label == "HC") continue;
                const auto gr = gap.add_row("HC-" + label);
                gap.set(gr, "raw_gap", aet_means["HC"].first - mm.first);
                gap.set(gr, "adjusted_gap", aet_means["HC"].second - mm.second);
            }
    }
    add_targets(rep, {{"HC-DS_raw_gap", 1.63}, {"HC-DS_adjusted_gap", 1.59}});
    return rep;
}

// --- baseline comparison ---------------------------------------------------------------------------------

AnalysisReport baseline_comparison(const ProfileTable& table, const BaselineOptions& o) {
    AnalysisReport rep;
    rep.analysis_id = "baseline_comparison";
    rep.seed = o.seed;
    rep.parameters["k_folds"] = std::to_string(o.k_folds);
    rep.parameters["lambda"] = str(o.lambda);
    rep.parameters["min_rows"] = std::to_string(o.min_rows);
    rep.parameters["target"] = "severity ordinal (control=0 ... severe=3)";

    const auto main13 = features_in(FeatureSubset::main13);
    if (std::none_of(table.rows().begin(), table.rows().end(), [](const ProfileRow& r) { return r.meta.ctc_conf.has_value(); }))
        fail(ErrorKind::MissingBaselineColumn, "no row carries ctc_conf");

    std::vector<std::vector<double>> xs;
    std::vector<double> ctc, y;
    for (const auto& r : table.rows()) {
        if (!r.meta.ctc_conf || !severity_ordinal(r.meta.severity)) continue;
        std::vector<double> x;
        for (Feature f : main13) {
            if (!r.profile[f]) break;
            x.push_back(*r.profile[f]);
        }
        if (x.size() != main13.size()) continue;
        xs.push_back(std::move(x));
        ctc.push_back(*r.meta.ctc_conf);
        y.push_back(ordinal(r.meta.severity));
    }
    if (xs.size() < o.min_rows)
        fail(ErrorKind::InsufficientData, "baseline comparison needs >= " + std::to_string(o.min_rows) +
                                              " complete rows with ctc_conf, got " + std::to_string(xs.size()));

    auto design = [&](bool features, bool conf) {
        stats::Matrix m;
        m.rows = xs.size();
        m.cols = (features ? main13.size() : 0) + (conf ? 1 : 0);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (features) m.values.insert(m.values.end(), xs[i].begin(), xs[i].end());
            if (conf) m.values.push_back(ctc[i]);
        }
        return m;
    };
    auto& t = rep.add_table("ridge", {"rmse", "spearman_rho", "n", "n_predictors", "rmse_change_vs_main13_pct"});
    double base_rmse = kNaN;
    for (const auto& [label, f, c] : {std::tuple{"main13", true, false}, std::tuple{"main13+ctc_conf", true, true},
                                      std::tuple{"ctc_conf", false, true}}) {
        const auto m = design(f, c);
        const auto res = stats::ridge_cv(m, y, o.k_folds, o.lambda, o.seed);
        const auto r = t.add_row(label);
        t.set(r, "rmse", res.rmse);
        t.set(r, "spearman_rho", res.spearman_rho);
        t.set(r, "n", static_cast<double>(m.rows));
        t.set(r, "n_predictors", static_cast<double>(m.cols));
        if (std::string(label) == "main13") base_rmse = res.rmse;
        t.set(r, "rmse_change_vs_main13_pct", 100.0 * (res.rmse - base_rmse) / base_rmse);
    }

    auto& corr = rep.add_table("ctc_correlations", {"rho", "p", "n"});
    for (std::size_t c = 0; c < main13.size(); ++c) {
        std::vector<double> col;
        for (const auto& x : xs) col.push_back(x[c]);
        const auto r = corr.add_row(std::string(feature_name(main13[c])));
        if (const auto sp = try_spearman(ctc, col, "ctc_conf vs " + std::string(feature_name(main13[c])), rep.findings)) {
            corr.set(r, "rho", sp->statistic);
            corr.set(r, "p", sp->p_value);
            corr.set(r, "n", static_cast<double>(sp->n));
        }
    }
    add_targets(rep, {{"main13+ctc_conf_rmse", 0.560}, {"main13_rmse", 0.589}, {"spearman_rho", 0.642}});
    return rep;
}

} // namespace phonoscope::analyses
