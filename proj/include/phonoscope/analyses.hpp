#pragma once

// Experiments over a ProfileTable. Every analysis returns an AnalysisReport and is
// deterministic given its inputs and seed.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phonoscope/corpus.hpp"
#include "phonoscope/profiles.hpp"
#include "phonoscope/report.hpp"
#include "phonoscope/types.hpp"

namespace phonoscope::analyses {

// --- severity harmonisation --------------------------------------------------

// Intelligibility (%) -> severity: >94 control, 85-94 mild, 70-<85 moderate, <70 severe.
Severity stipancic_map(double intelligibility_pct);

// Rows that carry intelligibility_pct get the mapped severity and severity_source=threshold.
ProfileTable apply_severity_override(const ProfileTable& table);

// Optional row filters shared by several analyses (severity-source ablation,
// severity-matched comparisons, dataset exclusion).
struct RowFilter {
    std::optional<SeveritySource> severity_source;
    std::optional<Severity> severity;
    std::vector<std::string> exclude_datasets;

    bool accepts(const ProfileRow& row) const;
    void describe(std::map<std::string, std::string>& parameters) const;
};

// --- analyses ----------------------------------------------------------------

struct SeverityGradientOptions {
    Measure measure = Measure::composite_dprime();
    bool stratify_by_token_quartile = true;
    std::size_t n_boot = 1000;
    std::uint64_t seed = 0;
    RowFilter filter;
};

AnalysisReport severity_gradient(const ProfileTable& table, const SeverityGradientOptions& o);

struct AetiologyOptions {
    std::vector<Aetiology> groups{kMainAetiologies.begin(), kMainAetiologies.end()};
    FeatureSubset features = FeatureSubset::full15;
    std::uint64_t seed = 0;
    RowFilter filter;
    // Minimum speakers per aetiology for a deviation-from-HC cell.
    std::size_t min_deviation_n = 5;
};

AnalysisReport aetiology_discrimination(const ProfileTable& table, const AetiologyOptions& o);

struct CrosslingualOptions {
    std::size_t min_n = 1;
    std::size_t min_hc = 1;
    std::size_t n_boot = 1000;
    std::size_t n_perm = 1000;
    std::uint64_t seed = 0;
    std::vector<std::size_t> min_n_sweep{1, 3, 5, 10};
    std::vector<std::size_t> min_hc_sweep{1, 5, 10, 20};
    std::vector<Aetiology> groups{kMainAetiologies.begin(), kMainAetiologies.end()};
};

AnalysisReport crosslingual_consistency(const ProfileTable& table, const CrosslingualOptions& o);

struct BackboneOptions {
    std::string reference_backbone;  // empty: first backbone in map order
    std::size_t min_shared = 10;
    std::uint64_t seed = 0;
};

AnalysisReport backbone_agreement(const std::map<std::string, ProfileTable>& tables,
                                  const BackboneOptions& o);

struct FixedTokenOptions {
    std::vector<std::size_t> budgets{20, 50, 100, 200};
    std::size_t n_repeats = 50;
    std::uint64_t seed = 0;
    std::vector<Aetiology> groups{kMainAetiologies.begin(), kMainAetiologies.end()};
};

AnalysisReport fixed_token_dprime(const Corpus& corpus, const FeatureConfigMap& configs,
                                  const DirectionMap& directions, const FixedTokenOptions& o);

struct TokenMatchOptions {
    double tolerance = 0.20;
    Measure measure = Measure::composite_dprime();
    std::uint64_t seed = 0;
};

AnalysisReport token_matched_comparison(const ProfileTable& table, const TokenMatchOptions& o);

struct LodoOptions {
    Measure measure = Measure::composite_dprime();
    std::vector<Aetiology> groups{kMainAetiologies.begin(), kMainAetiologies.end()};
    std::uint64_t seed = 0;
};

AnalysisReport lodo_stability(const ProfileTable& table, const LodoOptions& o);

struct ClassifierOptions {
    FeatureSubset features = FeatureSubset::consonant5;
    std::vector<Aetiology> groups{kMainAetiologies.begin(), kMainAetiologies.end()};
    std::uint64_t seed = 0;
};

struct ClassifierResult {
    std::vector<Aetiology> classes;
    // confusion[t][p]: truth class t predicted as p.
    std::vector<std::vector<std::size_t>> confusion;
    double accuracy = 0.0;
    double balanced_accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> f1;
    std::vector<bool> f1_undefined;
    std::size_t n = 0;
};

ClassifierResult centroid_classifier_lodo_result(const ProfileTable& table,
                                                 const ClassifierOptions& o,
                                                 std::vector<std::string>* findings = nullptr);
AnalysisReport centroid_classifier_lodo(const ProfileTable& table, const ClassifierOptions& o);

struct ResidualizedOptions {
    FeatureSubset features = FeatureSubset::full15;
    std::vector<Aetiology> groups{kMainAetiologies.begin(), kMainAetiologies.end()};
    std::uint64_t seed = 0;
};

AnalysisReport residualized_rankings(const ProfileTable& table, const ResidualizedOptions& o);

struct BaselineOptions {
    int k_folds = 10;
    double lambda = 1.0;
    std::size_t min_rows = 50;
    std::uint64_t seed = 0;
};

AnalysisReport baseline_comparison(const ProfileTable& table, const BaselineOptions& o);

// --- helpers shared with tests -------------------------------------------------

// True when the sequence has at least two values and each is below its predecessor.
bool strictly_decreasing(const std::vector<double>& means);

} // namespace phonoscope::analyses
