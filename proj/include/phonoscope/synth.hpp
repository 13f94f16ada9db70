#pragma once

// Synthetic corpora with planted ground truth.
//
// Each segmental feature owns one embedding axis. A token of the positive class of
// feature f sits at +sep/2 on axis f, a negative-class token at -sep/2, where
// sep = separation[f] * collapse[aetiology][f] * severity_multiplier * jitter.
// Isotropic Gaussian noise (sigma) is added on every axis, so the true d' of a
// speaker's feature is sep / sigma exactly.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phonoscope/corpus.hpp"
#include "phonoscope/feature_config.hpp"
#include "phonoscope/profiles.hpp"
#include "phonoscope/types.hpp"

namespace phonoscope::synth {

struct SynthCell {
    std::string dataset;
    std::string language;
    Aetiology aetiology = Aetiology::HC;
    Severity severity = Severity::control;
    SeveritySource severity_source = SeveritySource::clinical;
    std::size_t n_speakers = 0;
};

struct SynthSpec {
    std::string corpus_name = "synthetic";
    std::vector<std::string> backbone_ids{"synth-base"};
    // Extra isotropic noise for backbones after the first (one entry per extra backbone).
    std::vector<double> backbone_extra_noise;
    std::uint32_t dim = 16;
    std::uint64_t seed = 1;
    std::vector<SynthCell> cells;

    // Per-aetiology per-feature collapse factor in [0,1]; absent aetiologies use 1.
    std::map<Aetiology, std::array<double, kSegmentalCount>> templates;
    std::map<Severity, double> severity_multipliers{{Severity::control, 1.0},
                                                    {Severity::mild, 0.8},
                                                    {Severity::moderate, 0.6},
                                                    {Severity::severe, 0.4},
                                                    {Severity::unknown, 1.0}};
    std::array<double, kSegmentalCount> separation{2.0, 2.0, 2.0, 2.0, 2.0,
                                                   2.0, 2.0, 2.0, 2.0};
    double noise_sigma = 1.0;
    // Multiplicative per-(speaker, feature) jitter on the separation: exp(N(0, sd)).
    double speaker_jitter_sd = 0.0;

    // Tokens per (feature, class) ~ round(exp(N(log_mean, log_sd))), at least min_tokens.
    double token_log_mean = 3.4;
    double token_log_sd = 0.3;
    std::size_t min_tokens = 2;
    // Scale token counts by the severity multiplier (token-count confound).
    bool couple_tokens_to_severity = false;

    std::size_t phones_per_utterance = 30;
    double phone_duration_s = 0.08;
    double pause_probability = 0.2;
    // Emit ctc_conf per speaker (decreasing with severity plus noise).
    bool emit_ctc_conf = true;
};

void validate_spec(const SynthSpec& spec);  // throws Error{SpecInvalid}

SynthSpec parse_synth_spec(std::string_view json_text);
std::string dump_synth_spec(const SynthSpec& spec);
std::string spec_hash(const SynthSpec& spec);

// A compact default: 2 languages, 2 datasets each, 6 aetiologies, 4 severity levels.
SynthSpec default_spec();

// Phone inventory and feature configs matching the planted axes.
FeatureConfig synth_feature_config(const std::string& language);

struct LedgerEntry {
    std::string speaker_id;
    std::string backbone_id;
    std::array<double, kSegmentalCount> true_dprime{};
};

struct GroundTruthLedger {
    std::uint64_t seed = 0;
    std::string spec_hash;
    std::vector<LedgerEntry> entries;
};

std::string dump_ledger(const GroundTruthLedger& ledger);
GroundTruthLedger parse_ledger(std::string_view json_text);

struct SynthCorpus {
    Manifest manifest;
    TokenTable tokens;
    std::map<std::string, EmbeddingStore> embeddings;  // per backbone
    GroundTruthLedger ledger;
    FeatureConfigMap configs;

    Corpus corpus(const std::string& backbone_id) const;
};

SynthCorpus generate_corpus(const SynthSpec& spec);

// Writes the interchange layout plus ground_truth.json; feature configs go to
// config_dir when given.
void write_synth_corpus(const SynthCorpus& sc, const std::filesystem::path& root,
                        const std::optional<std::filesystem::path>& config_dir = {});

struct LedgerPolicy {
    double n_se = 4.0;
    double required_fraction = 0.99;
};

struct LedgerCheck {
    std::size_t cells = 0;
    std::size_t within = 0;
    std::size_t missing = 0;
    std::size_t degenerate = 0;
    double fraction = 0.0;
    bool passed = false;
    std::vector<std::string> findings;
};

// Standard error of the d' estimator for n_pos, n_neg tokens at true separation d.
double dprime_standard_error(double d, std::size_t n_pos, std::size_t n_neg);

// Throws Error{LedgerMismatch} when corpus and ledger come from different seeds.
LedgerCheck ledger_check(const Corpus& corpus, const GroundTruthLedger& ledger,
                         const ProfileTable& profiles, const std::vector<Finding>& profile_findings,
                         const LedgerPolicy& policy = {});

// Profile-level generator for analysis tests: draws per-speaker CONSONANT5 values
// (and the rest of the profile) directly, without embeddings.
struct ProfileSynthSpec {
    std::vector<SynthCell> cells;
    std::map<Aetiology, std::array<double, kConsonantCount>> class_means;
    double noise_sd = 0.3;
    double base_dprime = 2.0;
    std::map<Severity, double> severity_multipliers{{Severity::control, 1.0},
                                                    {Severity::mild, 0.8},
                                                    {Severity::moderate, 0.6},
                                                    {Severity::severe, 0.4},
                                                    {Severity::unknown, 1.0}};
    std::uint64_t seed = 1;
    std::string backbone_id = "synth-base";
};

ProfileTable generate_profile_table(const ProfileSynthSpec& spec);

} // namespace phonoscope::synth
