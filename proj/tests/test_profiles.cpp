#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "phonoscope/profiles.hpp"
#include "phonoscope/stats.hpp"
#include "phonoscope/synth.hpp"
#include "test_util.hpp"

using namespace phonoscope;
using fixture::CorpusBuilder;
using fixture::error_kind_of;

namespace {

std::vector<std::span<const float>> spans(const std::vector<std::vector<float>>& rows) {
    std::vector<std::span<const float>> out;
    for (const auto& r : rows) out.emplace_back(r);
    return out;
}

// Config with only nasality (m vs b) defined and a/i/u as vowels.
FeatureConfig nasal_config(const std::string& lang = "xx") {
    FeatureConfig fc;
    fc.language = lang;
    fc.classes[index_of(Feature::nasality)] = PhoneClasses{{"m"}, {"b"}};
    fc.vowel_set = {"a", "i", "u"};
    return fc;
}

// Sample variance with n-1, written out.
double sample_var(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

} // namespace

TEST(Dprime, HandExample) {
    const std::vector<double> pos{1, 2, 3}, neg{0, 1, 2};
    EXPECT_DOUBLE_EQ(dprime(pos, neg), 1.0);
    const std::vector<double> pos2{4, 6}, neg2{0, 0, 3, 1};
    // Pooled: sqrt((2 + 2) / 2) with var(neg2) = 2.
    EXPECT_NEAR(dprime(pos2, neg2), (5.0 - 1.0) / std::sqrt((2.0 + 2.0) / 2.0), 1e-12);
}

TEST(Dprime, Antisymmetric) {
    const std::vector<double> a{0.3, 1.2, 2.2, 0.9}, b{-1, 0.1, 0.4};
    EXPECT_DOUBLE_EQ(dprime(a, b), -dprime(b, a));
}

TEST(Dprime, Errors) {
    const std::vector<double> one{1}, two{1, 2}, flat{3, 3, 3};
    EXPECT_EQ(error_kind_of([&] { dprime(one, two); }), ErrorKind::InvalidArgument);
    EXPECT_EQ(error_kind_of([&] { dprime(flat, flat); }), ErrorKind::DegenerateVariance);
}

TEST(Dprime, ConsistentForGaussianClasses) {
    std::mt19937_64 rng(11);
    for (double d : {0.5, 1.0, 2.0}) {
        std::normal_distribution<double> p(d, 1.0), q(0.0, 1.0);
        std::vector<double> pos(4000), neg(4000);
        for (auto& v : pos) v = p(rng);
        for (auto& v : neg) v = q(rng);
        const double se = synth::dprime_standard_error(d, pos.size(), neg.size());
        EXPECT_NEAR(dprime(pos, neg), d, 4 * se) << "d=" << d;
    }
}

TEST(FeatureDirection, UnitDifferenceOfMeans) {
    const std::vector<std::vector<float>> pos{{3, 0, 1}, {5, 0, 1}}, neg{{1, 0, 1}, {1, 0, 1}};
    const auto w = feature_direction(spans(pos), spans(neg));
    ASSERT_EQ(w.size(), 3u);
    EXPECT_DOUBLE_EQ(w[0], 1.0);
    EXPECT_DOUBLE_EQ(w[1], 0.0);
    EXPECT_DOUBLE_EQ(w[2], 0.0);

    const std::vector<std::vector<float>> p2{{3, 4}}, n2{{0, 0}};
    const auto w2 = feature_direction(spans(p2), spans(n2));
    EXPECT_NEAR(w2[0], 0.6, 1e-12);
    EXPECT_NEAR(w2[1], 0.8, 1e-12);
    const std::vector<float> e{10, 5};
    EXPECT_NEAR(project(e, w2), 10.0, 1e-12);
}

TEST(FeatureDirection, Errors) {
    const std::vector<std::vector<float>> a{{1, 1}}, b{{1, 1}}, c{{1, 1, 1}};
    EXPECT_EQ(error_kind_of([&] { feature_direction(spans(a), spans(b)); }), ErrorKind::DegenerateDirection);
    EXPECT_EQ(error_kind_of([&] { feature_direction(spans(a), {}); }), ErrorKind::EmptyFeatureClass);
    EXPECT_EQ(error_kind_of([&] { feature_direction(spans(a), spans(c)); }), ErrorKind::DimMismatch);
    const std::vector<double> w{1, 0, 0};
    EXPECT_EQ(error_kind_of([&] { project(a[0], w); }), ErrorKind::DimMismatch);
}

TEST(Directions, EstimatedOnHealthyControlsOnly) {
    CorpusBuilder b(2);
    b.speaker("hc1");
    b.speaker("pd1", "xx", Aetiology::PD, Severity::mild);
    b.phone("hc1", "u1", "m", 0.0, 0.1, {2, 0});
    b.phone("hc1", "u1", "b", 0.1, 0.2, {0, 0});
    // The pathological speaker's tokens point along the other axis and must be ignored.
    b.phone("pd1", "u2", "m", 0.0, 0.1, {0, 9});
    b.phone("pd1", "u2", "b", 0.1, 0.2, {0, -9});
    const auto corpus = b.build();
    const auto ds = estimate_directions(corpus, "xx", nasal_config());
    ASSERT_TRUE(ds.of(Feature::nasality));
    EXPECT_DOUBLE_EQ((*ds.of(Feature::nasality))[0], 1.0);
    EXPECT_DOUBLE_EQ((*ds.of(Feature::nasality))[1], 0.0);
    EXPECT_EQ(ds.hc_speaker_count, 1u);
    EXPECT_EQ(ds.hc_pos_tokens[0], 1u);
    EXPECT_FALSE(ds.of(Feature::voicing));
}

TEST(Directions, Errors) {
    CorpusBuilder b(2);
    b.speaker("pd1", "xx", Aetiology::PD, Severity::mild);
    b.phone("pd1", "u1", "m", 0.0, 0.1, {1, 0});
    EXPECT_EQ(error_kind_of([&] { estimate_directions(b.build(), "xx", nasal_config()); }),
              ErrorKind::NoHealthyControls);

    CorpusBuilder c(2);
    c.speaker("hc1");
    c.phone("hc1", "u1", "m", 0.0, 0.1, {1, 0});
    const auto corpus = c.build();
    EXPECT_EQ(error_kind_of([&] { estimate_directions(corpus, "xx", nasal_config()); }),
              ErrorKind::EmptyFeatureClass);
    const auto lenient = estimate_directions(corpus, "xx", nasal_config(), {.require_all = false});
    EXPECT_FALSE(lenient.of(Feature::nasality));
}

TEST(Segmental, MatchesDirectComputation) {
    CorpusBuilder b(2);
    b.speaker("hc1");
    const std::vector<std::vector<float>> m{{2, 1}, {3, -1}, {2.5, 0.5}, {1.5, 2}, {4, 0}, {2, 0}};
    const std::vector<std::vector<float>> n{{0, 1}, {-1, 0}, {0.5, 2}, {1, -1}, {0, 0}};
    double t = 0;
    for (const auto& e : m) b.phone("hc1", "u1", "m", t, t + 0.1, e), t += 0.1;
    for (const auto& e : n) b.phone("hc1", "u1", "b", t, t + 0.1, e), t += 0.1;
    const auto corpus = b.build();
    const auto fc = nasal_config();
    const auto ds = estimate_directions(corpus, "xx", fc);
    const auto seg = segmental_profile(corpus, 0, ds, fc);
    ASSERT_TRUE(seg.dprime[0]);
    EXPECT_EQ(seg.counts[0].pos, 6u);
    EXPECT_EQ(seg.counts[0].neg, 5u);

    // Direction by hand: mean(m) - mean(n), normalized.
    double mx = 0, my = 0, nx = 0, ny = 0;
    for (const auto& e : m) mx += e[0] / 6.0, my += e[1] / 6.0;
    for (const auto& e : n) nx += e[0] / 5.0, ny += e[1] / 5.0;
    const double wx = mx - nx, wy = my - ny, len = std::hypot(wx, wy);
    std::vector<double> pp, np;
    for (const auto& e : m) pp.push_back((e[0] * wx + e[1] * wy) / len);
    for (const auto& e : n) np.push_back((e[0] * wx + e[1] * wy) / len);
    double pm = 0, nm = 0;
    for (double v : pp) pm += v / 6.0;
    for (double v : np) nm += v / 5.0;
    const double expected = (pm - nm) / std::sqrt((sample_var(pp) + sample_var(np)) / 2.0);
    EXPECT_NEAR(*seg.dprime[0], expected, 1e-6);
}

TEST(Segmental, BelowMinimumTokensIsMissing) {
    CorpusBuilder b(1);
    b.speaker("hc1");
    b.speaker("pd1", "xx", Aetiology::PD, Severity::mild);
    double t = 0;
    for (int i = 0; i < 5; ++i) {
        b.phone("hc1", "u1", "m", t, t + 0.1, {static_cast<float>(2 + i)});
        b.phone("hc1", "u1", "b", t + 0.1, t + 0.2, {static_cast<float>(-i)});
        t += 0.2;
    }
    t = 0;
    for (int i = 0; i < 4; ++i) {
        b.phone("pd1", "u2", "m", t, t + 0.1, {static_cast<float>(i)});
        b.phone("pd1", "u2", "b", t + 0.1, t + 0.2, {static_cast<float>(-i)});
        t += 0.2;
    }
    const auto corpus = b.build();
    const auto fc = nasal_config();
    const auto ds = estimate_directions(corpus, "xx", fc);
    EXPECT_TRUE(segmental_profile(corpus, 0, ds, fc).dprime[0]);
    const auto pd = segmental_profile(corpus, 1, ds, fc);
    EXPECT_FALSE(pd.dprime[0]);
    EXPECT_EQ(pd.counts[0].pos, 4u);
}

TEST(Segmental, DegenerateVarianceBecomesWarning) {
    CorpusBuilder b(1);
    b.speaker("hc1");
    double t = 0;
    for (int i = 0; i < 5; ++i) {
        b.phone("hc1", "u1", "m", t, t + 0.1, {1});
        b.phone("hc1", "u1", "b", t + 0.1, t + 0.2, {0});
        t += 0.2;
    }
    const auto corpus = b.build();
    const auto fc = nasal_config();
    const auto seg = segmental_profile(corpus, 0, estimate_directions(corpus, "xx", fc), fc);
    EXPECT_FALSE(seg.dprime[0]);
    ASSERT_EQ(seg.warnings.size(), 1u);
}

TEST(Structural, BoundarySharpnessAndCrossPositionCos) {
    CorpusBuilder b(2);
    b.speaker("s");
    b.phone("s", "u1", "a", 0.0, 0.1, {1, 0});
    b.phone("s", "u1", "i", 0.1, 0.2, {0, 1});
    b.phone("s", "u1", "", 0.2, 0.3);
    b.phone("s", "u1", "a", 0.3, 0.4, {1, 1});
    b.phone("s", "u2", "a", 0.0, 0.1, {2, 0});
    b.phone("s", "u2", "i", 0.1, 0.2, {0, 3});
    const auto st = structural_metrics(b.build(), 0, nasal_config());

    // Adjacent pairs within an utterance (silence skipped): (a,i), (i,a'), (a2,i2).
    const double c = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(*st.boundary_sharpness, ((1 - 0) + (1 - c) + (1 - 0)) / 3.0, 1e-12);
    // Label a: pairwise cosines among (1,0), (1,1), (2,0) are c, 1, c. Label i: (0,1), (0,3) -> 1.
    EXPECT_NEAR(*st.cross_position_cos, ((c + 1 + c) / 3.0 + 1.0) / 2.0, 1e-12);
    // Corners have fewer than 3 tokens.
    EXPECT_FALSE(st.vowel_triangle_area);
}

TEST(Structural, VowelTriangleArea) {
    CorpusBuilder b(3);
    b.speaker("s");
    double t = 0;
    auto add = [&](const std::string& l, std::vector<float> e) {
        b.phone("s", "u1", l, t, t + 0.1, std::move(e));
        t += 0.1;
    };
    for (float j : {-1.0f, 0.0f, 1.0f}) {
        add("a", {0, 0, j});
        add("i", {3, 0, j});
        add("u", {0, 4, j});
    }
    const auto st = structural_metrics(b.build(), 0, nasal_config());
    ASSERT_TRUE(st.vowel_triangle_area);
    EXPECT_NEAR(*st.vowel_triangle_area, 6.0, 1e-9);
}

TEST(Structural, EmptySpeakerHasNothing) {
    CorpusBuilder b(2);
    b.speaker("s");
    b.speaker("t");
    b.phone("t", "u1", "a", 0, 0.1, {1, 0});
    const auto st = structural_metrics(b.build(), 0, nasal_config());
    EXPECT_FALSE(st.boundary_sharpness);
    EXPECT_FALSE(st.cross_position_cos);
    EXPECT_FALSE(st.vowel_triangle_area);
}

TEST(Prosodic, HandExample) {
    CorpusBuilder b(1);
    b.speaker("s");
    b.phone("s", "u1", "b", 0.0, 0.1);
    b.phone("s", "u1", "a", 0.1, 0.3);
    b.phone("s", "u1", "", 0.3, 0.6);
    b.phone("s", "u1", "m", 0.6, 0.7);
    b.phone("s", "u1", "i", 0.7, 0.8);
    b.word("s", "u1", "ba", 0.0, 0.3);
    b.word("s", "u1", "", 0.3, 0.6);
    b.word("s", "u1", "mi", 0.6, 0.8);
    b.word("s", "u1", "x", 0.9, 1.0);   // 0.1 s gap: not a pause
    b.word("s", "u1", "y", 1.15, 1.2);  // exactly 0.15 s: not a pause
    const auto fc = nasal_config();
    const auto pr = prosodic_metrics(b.build(), 0, &fc);
    EXPECT_NEAR(*pr.speech_rate, 4.0 / 0.5, 1e-9);
    EXPECT_NEAR(*pr.pause_rate, 1.0 / 3.0, 1e-12);
    // Vowel durations 0.2 and 0.1: sd / mean = sqrt(0.005) / 0.15.
    EXPECT_NEAR(*pr.vowel_duration_cv, std::sqrt(0.005) / 0.15, 1e-9);
}

TEST(Prosodic, NoConfigMeansNoVowelCv) {
    CorpusBuilder b(1);
    b.speaker("s");
    b.phone("s", "u1", "a", 0.0, 0.1);
    b.phone("s", "u1", "a", 0.1, 0.3);
    const auto pr = prosodic_metrics(b.build(), 0, nullptr);
    EXPECT_TRUE(pr.speech_rate);
    EXPECT_FALSE(pr.pause_rate);
    EXPECT_FALSE(pr.vowel_duration_cv);
}

TEST(Profile, CompositeNeedsAllFiveConsonants) {
    SpeakerProfile p;
    for (std::size_t f = 0; f < kConsonantCount; ++f) p.values[f] = static_cast<double>(f + 1);
    EXPECT_DOUBLE_EQ(*p.composite(), 3.0);
    EXPECT_DOUBLE_EQ(*p.value(Measure::composite_dprime()), 3.0);
    EXPECT_DOUBLE_EQ(*p.value(Measure::of(Feature::sonorance)), 3.0);
    p[Feature::manner].reset();
    EXPECT_FALSE(p.composite());
    p[Feature::manner] = 5.0;
    p[Feature::height].reset();
    EXPECT_TRUE(p.composite());
}

TEST(Assemble, FlagsMissingBaselines) {
    CorpusBuilder b(1);
    b.speaker("hc1", "xx");
    b.speaker("pd1", "yy", Aetiology::PD, Severity::mild);
    b.speaker("pd2", "zz", Aetiology::PD, Severity::mild);
    b.speaker("silent", "xx");
    double t = 0;
    for (const char* s : {"hc1", "pd1", "pd2"})
        for (int i = 0; i < 6; ++i) {
            b.phone(s, std::string("u-") + s, "m", t, t + 0.1, {static_cast<float>(1 + i % 3)});
            b.phone(s, std::string("u-") + s, "b", t + 0.1, t + 0.2, {static_cast<float>(-(i % 2))});
            t += 0.2;
        }
    FeatureConfigMap configs{{"xx", nasal_config("xx")}, {"yy", nasal_config("yy")}};
    std::vector<Finding> findings;
    const auto table = build_profile_table(b.build(), configs, &findings);
    ASSERT_EQ(table.size(), 4u);
    auto has = [](const ProfileRow& r, const std::string& flag) {
        return std::find(r.flags.begin(), r.flags.end(), flag) != r.flags.end();
    };
    EXPECT_TRUE(table.rows()[0].profile[Feature::nasality]);
    EXPECT_TRUE(table.rows()[0].flags.empty());
    EXPECT_TRUE(has(table.rows()[1], "no_hc_baseline"));
    EXPECT_FALSE(table.rows()[1].profile[Feature::nasality]);
    EXPECT_TRUE(has(table.rows()[2], "no_feature_config"));
    EXPECT_TRUE(has(table.rows()[3], "token_free"));
    EXPECT_EQ(table.rows()[3].profile.n_phones, 0u);
    EXPECT_EQ(table.rows()[0].profile.n_phones, 12u);
    EXPECT_EQ(table.rows()[0].profile.backbone_id, "bb");
    EXPECT_FALSE(findings.empty());
}

TEST(ProfileTable, HcNormalizedAveragesToOneForControls) {
    std::vector<ProfileRow> rows;
    auto row = [&](const std::string& id, const std::string& lang, Aetiology a, double v) {
        ProfileRow r;
        r.meta.speaker_id = id;
        r.meta.language = lang;
        r.meta.aetiology = a;
        r.profile.speaker_id = id;
        r.profile[Feature::nasality] = v;
        r.profile[Feature::speech_rate] = 2 * v;
        rows.push_back(r);
    };
    row("h1", "en", Aetiology::HC, 2.0);
    row("h2", "en", Aetiology::HC, 4.0);
    row("p1", "en", Aetiology::PD, 1.5);
    row("h3", "es", Aetiology::HC, 1.0);
    row("p2", "es", Aetiology::CP, 0.5);
    row("p3", "fr", Aetiology::CP, 0.5);
    const auto norm = ProfileTable(rows).hc_normalized();
    EXPECT_DOUBLE_EQ(*norm.rows()[0].profile[Feature::nasality], 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*norm.rows()[1].profile[Feature::nasality], 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(*norm.rows()[2].profile[Feature::nasality], 0.5);
    EXPECT_DOUBLE_EQ(*norm.rows()[2].profile[Feature::speech_rate], 0.5);
    EXPECT_DOUBLE_EQ(*norm.rows()[4].profile[Feature::nasality], 0.5);
    // No HC baseline in that language.
    EXPECT_FALSE(norm.rows()[5].profile[Feature::nasality]);
    EXPECT_FALSE(norm.rows()[0].profile[Feature::voicing]);
}

TEST(ProfileTable, Filter) {
    std::vector<ProfileRow> rows(5);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].meta.speaker_id = std::to_string(i);
    const auto t = ProfileTable(rows).filter([](const ProfileRow& r) { return r.meta.speaker_id != "2"; });
    EXPECT_EQ(t.size(), 4u);
}

TEST(ProfilesCsv, RoundTrip) {
    std::vector<ProfileRow> rows(2);
    rows[0].meta = {"s,1", "d\"1", "en", Aetiology::PD, Severity::moderate, SeveritySource::clinical, {}, {}};
    rows[0].profile.speaker_id = "s,1";
    rows[0].profile.backbone_id = "bb";
    rows[0].profile.n_phones = 120;
    for (std::size_t f = 0; f < kFeatureCount; ++f) rows[0].profile.values[f] = 0.1 * static_cast<double>(f) - 0.7;
    rows[1].meta = {"s2", "d2", "es", Aetiology::HC, Severity::control, SeveritySource::none, {}, {}};
    rows[1].profile.speaker_id = "s2";
    rows[1].profile.backbone_id = "bb";
    rows[1].profile[Feature::height] = 1.0 / 3.0;

    const auto text = dump_profiles_csv(ProfileTable(rows));
    const auto back = parse_profiles_csv(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back.rows()[0].meta.speaker_id, "s,1");
    EXPECT_EQ(back.rows()[0].meta.dataset, "d\"1");
    EXPECT_EQ(back.rows()[0].meta.severity, Severity::moderate);
    EXPECT_EQ(back.rows()[0].profile.n_phones, 120u);
    EXPECT_FALSE(back.rows()[1].profile[Feature::nasality]);
    EXPECT_EQ(dump_profiles_csv(back), text);
    for (std::size_t f = 0; f < kFeatureCount; ++f)
        EXPECT_NEAR(*back.rows()[0].profile.values[f], *rows[0].profile.values[f], 1e-12);
}

TEST(ProfilesCsv, Malformed) {
    EXPECT_EQ(error_kind_of([] { parse_profiles_csv(""); }), ErrorKind::MalformedFile);
    EXPECT_EQ(error_kind_of([] { parse_profiles_csv("speaker_id,foo\n"); }), ErrorKind::MalformedFile);
    const auto good = dump_profiles_csv(ProfileTable(std::vector<ProfileRow>(1)));
    const auto header = good.substr(0, good.find('\n') + 1);
    EXPECT_EQ(error_kind_of([&] { parse_profiles_csv(header + "a,b\n"); }), ErrorKind::MalformedFile);
    std::string bad = good;
    bad.replace(bad.find(",HC,") != std::string::npos ? bad.find(",HC,") : bad.find(",Other,"), 1, ",x");
    EXPECT_EQ(error_kind_of([&] { parse_profiles_csv(bad); }), ErrorKind::MalformedFile);
}

TEST(SynthProfiles, HcNormalizedNearOneWithoutCollapse) {
    auto spec = synth::default_spec();
    spec.templates.clear();
    for (auto& [sev, m] : spec.severity_multipliers) m = 1.0;
    spec.seed = 5;
    const auto sc = synth::generate_corpus(spec);
    const auto corpus = sc.corpus(spec.backbone_ids.front());
    const auto table = build_profile_table(corpus, sc.configs).hc_normalized();
    std::vector<double> pathological;
    for (const auto& r : table.rows())
        if (r.meta.aetiology != Aetiology::HC && r.profile.composite())
            pathological.push_back(*r.profile.composite());
    ASSERT_GT(pathological.size(), 50u);
    EXPECT_NEAR(stats::mean(pathological), 1.0, 0.05);
}

TEST(SynthProfiles, DprimeTracksPlantedSeparation) {
    auto spec = synth::default_spec();
    spec.seed = 9;
    const auto sc = synth::generate_corpus(spec);
    const auto corpus = sc.corpus(spec.backbone_ids.front());
    const auto table = build_profile_table(corpus, sc.configs);
    std::vector<double> truth, est;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& e = sc.ledger.entries.at(i);
        ASSERT_EQ(e.speaker_id, table.rows()[i].meta.speaker_id);
        if (const auto v = table.rows()[i].profile[Feature::nasality]) {
            truth.push_back(e.true_dprime[0]);
            est.push_back(*v);
        }
    }
    ASSERT_GT(truth.size(), 50u);
    EXPECT_GT(stats::spearman(truth, est).statistic, 0.6);
}
