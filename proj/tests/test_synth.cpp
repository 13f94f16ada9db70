#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <functional>

#include "phonoscope/corpus.hpp"
#include "phonoscope/profiles.hpp"
#include "phonoscope/stats.hpp"
#include "phonoscope/synth.hpp"
#include "test_util.hpp"

using namespace phonoscope;
using namespace phonoscope::synth;
using fixture::error_kind_of;

namespace {

SynthSpec small_spec(std::uint64_t seed = 3) {
    SynthSpec s = default_spec();
    s.seed = seed;
    s.cells = {{"d1", "en", Aetiology::HC, Severity::control, SeveritySource::clinical, 4},
               {"d1", "en", Aetiology::PD, Severity::mild, SeveritySource::clinical, 3},
               {"d1", "en", Aetiology::CP, Severity::severe, SeveritySource::clinical, 3}};
    return s;
}

} // namespace

TEST(SynthSpec, DefaultIsValid) {
    EXPECT_NO_THROW(validate_spec(default_spec()));
}

TEST(SynthSpec, DumpParseRoundTrip) {
    auto s = default_spec();
    s.backbone_ids = {"a", "b"};
    s.backbone_extra_noise = {0.5};
    s.speaker_jitter_sd = 0.1;
    s.couple_tokens_to_severity = true;
    const auto text = dump_synth_spec(s);
    const auto back = parse_synth_spec(text);
    EXPECT_EQ(dump_synth_spec(back), text);
    EXPECT_EQ(spec_hash(back), spec_hash(s));
    EXPECT_EQ(spec_hash(s).size(), 64u);
}

TEST(SynthSpec, HashDependsOnContent) {
    auto a = default_spec();
    auto b = default_spec();
    EXPECT_EQ(spec_hash(a), spec_hash(b));
    b.noise_sigma = 1.5;
    EXPECT_NE(spec_hash(a), spec_hash(b));
}

TEST(SynthSpec, ScalarSeparation) {
    const auto s = parse_synth_spec(R"({"separation": 3.0, "cells": [{"dataset": "d", "language": "en",
        "aetiology": "HC", "severity": "control", "n_speakers": 2}]})");
    for (double d : s.separation) EXPECT_DOUBLE_EQ(d, 3.0);
}

TEST(SynthSpec, ParseErrors) {
    for (const char* text : {"not json", "[]", R"({"bogus": 1})", R"({"separation": [1, 2]})",
                             R"({"templates": {"XX": [1,1,1,1,1,1,1,1,1]}})",
                             R"({"cells": [{"dataset": "d", "language": "en", "aetiology": "HC",
                                           "severity": "extreme", "n_speakers": 1}]})",
                             R"({"dim": "sixteen"})"})
        EXPECT_EQ(error_kind_of([&] { parse_synth_spec(text); }), ErrorKind::SpecInvalid) << text;
}

TEST(SynthSpec, ValidationErrors) {
    std::vector<std::function<void(SynthSpec&)>> breakers{
        [](SynthSpec& s) { s.dim = 8; },
        [](SynthSpec& s) { s.cells.clear(); },
        [](SynthSpec& s) { s.backbone_ids = {"a", "a"}; },
        [](SynthSpec& s) { s.backbone_ids.clear(); },
        [](SynthSpec& s) { s.backbone_extra_noise = {0.3}; },
        [](SynthSpec& s) { s.severity_multipliers[Severity::mild] = 1.2; },
        [](SynthSpec& s) { s.severity_multipliers.erase(Severity::mild); },
        [](SynthSpec& s) { s.templates[Aetiology::PD][0] = -0.1; },
        [](SynthSpec& s) { s.separation[3] = 0.0; },
        [](SynthSpec& s) { s.noise_sigma = 0.0; },
        [](SynthSpec& s) { s.pause_probability = 2.0; },
        [](SynthSpec& s) { s.min_tokens = 0; },
        [](SynthSpec& s) { s.cells[0].language.clear(); },
    };
    for (std::size_t i = 0; i < breakers.size(); ++i) {
        auto s = default_spec();
        breakers[i](s);
        EXPECT_EQ(error_kind_of([&] { validate_spec(s); }), ErrorKind::SpecInvalid) << "case " << i;
    }
}

TEST(SynthConfig, ClassesDisjointAndLoadable) {
    const auto fc = synth_feature_config("en");
    for (const auto& pc : fc.classes) {
        ASSERT_TRUE(pc);
        EXPECT_FALSE(pc->pos.empty());
        EXPECT_FALSE(pc->neg.empty());
        for (const auto& p : pc->pos) EXPECT_FALSE(pc->neg.contains(p));
    }
    EXPECT_EQ(load_feature_config(dump_feature_config(fc)), fc);
}

TEST(Generate, Deterministic) {
    const auto a = generate_corpus(small_spec());
    const auto b = generate_corpus(small_spec());
    EXPECT_EQ(a.manifest, b.manifest);
    EXPECT_EQ(dump_tokens_tsv(a.tokens), dump_tokens_tsv(b.tokens));
    EXPECT_EQ(a.embeddings, b.embeddings);
    EXPECT_EQ(dump_ledger(a.ledger), dump_ledger(b.ledger));
    const auto c = generate_corpus(small_spec(4));
    EXPECT_FALSE(a.embeddings == c.embeddings);
}

TEST(Generate, IndependentOfThreadCount) {
    const char* old = std::getenv("PHONOSCOPE_THREADS");
    const std::string saved = old ? old : "";
    ::setenv("PHONOSCOPE_THREADS", "1", 1);
    const auto one = generate_corpus(small_spec());
    ::setenv("PHONOSCOPE_THREADS", "7", 1);
    const auto seven = generate_corpus(small_spec());
    if (old) ::setenv("PHONOSCOPE_THREADS", saved.c_str(), 1);
    else ::unsetenv("PHONOSCOPE_THREADS");
    EXPECT_EQ(one.embeddings, seven.embeddings);
    EXPECT_EQ(dump_tokens_tsv(one.tokens), dump_tokens_tsv(seven.tokens));
}

TEST(Generate, LedgerHoldsPlantedSeparation) {
    const auto spec = small_spec();
    const auto sc = generate_corpus(spec);
    ASSERT_EQ(sc.ledger.entries.size(), 10u);
    EXPECT_EQ(sc.ledger.seed, spec.seed);
    EXPECT_EQ(sc.ledger.spec_hash, spec_hash(spec));
    for (std::size_t i = 0; i < sc.ledger.entries.size(); ++i) {
        const auto& e = sc.ledger.entries[i];
        const auto& meta = sc.manifest.speakers[i];
        EXPECT_EQ(e.speaker_id, meta.speaker_id);
        const auto& t = spec.templates.at(meta.aetiology);
        const double mult = spec.severity_multipliers.at(meta.severity);
        for (std::size_t f = 0; f < kSegmentalCount; ++f)
            EXPECT_NEAR(e.true_dprime[f], spec.separation[f] * t[f] * mult / spec.noise_sigma, 1e-12);
    }
}

TEST(Generate, ExtraBackboneNoiseLowersTruth) {
    auto spec = small_spec();
    spec.backbone_ids = {"clean", "noisy"};
    spec.backbone_extra_noise = {std::sqrt(3.0)};
    const auto sc = generate_corpus(spec);
    ASSERT_EQ(sc.embeddings.size(), 2u);
    ASSERT_EQ(sc.ledger.entries.size(), 20u);
    std::map<std::pair<std::string, std::string>, double> truth;
    for (const auto& e : sc.ledger.entries) truth[{e.speaker_id, e.backbone_id}] = e.true_dprime[0];
    for (const auto& s : sc.manifest.speakers)
        EXPECT_NEAR(truth.at({s.speaker_id, "noisy"}), truth.at({s.speaker_id, "clean"}) / 2.0, 1e-12);
    EXPECT_EQ(sc.embeddings.at("clean").rows, sc.embeddings.at("noisy").rows);
}

TEST(Generate, TokenCouplingShrinksSevereCounts) {
    auto spec = default_spec();
    spec.couple_tokens_to_severity = true;
    const auto sc = generate_corpus(spec);
    const auto corpus = sc.corpus(spec.backbone_ids.front());
    std::map<Severity, std::vector<double>> phones;
    for (std::size_t s = 0; s < corpus.speaker_count(); ++s)
        phones[corpus.speaker(s).severity].push_back(static_cast<double>(phone_count(corpus, s)));
    EXPECT_GT(stats::mean(phones[Severity::control]), stats::mean(phones[Severity::mild]));
    EXPECT_GT(stats::mean(phones[Severity::mild]), stats::mean(phones[Severity::severe]));
}

TEST(Generate, CorpusValidatesClean) {
    const auto sc = generate_corpus(default_spec());
    const auto corpus = sc.corpus(default_spec().backbone_ids.front());
    const auto report = validate_corpus(corpus, sc.configs);
    EXPECT_FALSE(report.has_errors());
    EXPECT_EQ(corpus.speaker_count(), sc.manifest.speakers.size());
}

TEST(Ledger, DumpParseRoundTrip) {
    const auto sc = generate_corpus(small_spec());
    const auto text = dump_ledger(sc.ledger);
    EXPECT_EQ(dump_ledger(parse_ledger(text)), text);
    EXPECT_EQ(error_kind_of([] { parse_ledger("{}"); }), ErrorKind::MalformedFile);
}

TEST(Ledger, CheckPassesOnWrittenCorpus) {
    fixture::TempDir dir("synth");
    const auto spec = default_spec();
    const auto sc = generate_corpus(spec);
    write_synth_corpus(sc, dir.path(), dir / "configs");
    const auto corpus = read_corpus(dir.path(), spec.backbone_ids.front());
    const auto configs = load_feature_configs(dir / "configs");
    const auto ledger = parse_ledger(fixture::slurp(dir / "ground_truth.json"));
    std::vector<Finding> findings;
    const auto table = build_profile_table(corpus, configs, &findings);
    const auto check = ledger_check(corpus, ledger, table, findings);
    EXPECT_TRUE(check.passed) << check.within << "/" << check.cells;
    EXPECT_GT(check.cells, 1000u);
    EXPECT_GE(check.fraction, 0.99);
}

TEST(Ledger, MismatchedSeedThrows) {
    const auto sc = generate_corpus(small_spec(3));
    const auto other = generate_corpus(small_spec(4));
    const auto corpus = sc.corpus(small_spec().backbone_ids.front());
    EXPECT_EQ(error_kind_of([&] { ledger_check(corpus, other.ledger, {}, {}); }), ErrorKind::LedgerMismatch);

    fixture::CorpusBuilder b(9);
    b.speaker("s");
    EXPECT_EQ(error_kind_of([&] { ledger_check(b.build(), sc.ledger, {}, {}); }), ErrorKind::LedgerMismatch);
}

TEST(StandardError, Formula) {
    EXPECT_NEAR(dprime_standard_error(0.0, 50, 50), std::sqrt(0.04), 1e-12);
    EXPECT_NEAR(dprime_standard_error(2.0, 10, 30), std::sqrt(0.1 + 1.0 / 30 + 4.0 / 80), 1e-12);
    EXPECT_EQ(error_kind_of([] { dprime_standard_error(1.0, 0, 5); }), ErrorKind::InvalidArgument);
}

TEST(ProfileSynth, MeansFollowClassAndSeverity) {
    ProfileSynthSpec spec;
    spec.cells = {{"d", "en", Aetiology::HC, Severity::control, SeveritySource::clinical, 200},
                  {"d", "en", Aetiology::PD, Severity::severe, SeveritySource::threshold, 200}};
    spec.class_means = {{Aetiology::HC, {1, 1, 1, 1, 1}}, {Aetiology::PD, {1, 0.5, 1, 1, 1}}};
    const auto t = generate_profile_table(spec);
    ASSERT_EQ(t.size(), 400u);
    std::vector<double> hc_voicing, pd_voicing;
    for (const auto& r : t.rows())
        (r.meta.aetiology == Aetiology::HC ? hc_voicing : pd_voicing).push_back(*r.profile[Feature::voicing]);
    EXPECT_NEAR(stats::mean(hc_voicing), 2.0, 0.1);
    EXPECT_NEAR(stats::mean(pd_voicing), 2.0 * 0.5 * 0.4, 0.1);
    EXPECT_TRUE(t.rows().back().meta.intelligibility_pct);
    EXPECT_FALSE(t.rows().front().meta.intelligibility_pct);
    EXPECT_EQ(dump_profiles_csv(t), dump_profiles_csv(generate_profile_table(spec)));
}

TEST(ProfileSynth, MissingClassMeansThrows) {
    ProfileSynthSpec spec;
    spec.cells = {{"d", "en", Aetiology::ALS, Severity::mild, SeveritySource::clinical, 2}};
    EXPECT_EQ(error_kind_of([&] { generate_profile_table(spec); }), ErrorKind::SpecInvalid);
}
