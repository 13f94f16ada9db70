#include "phonoscope/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "phonoscope/error.hpp"
#include "phonoscope/parallel.hpp"
#include "phonoscope/report.hpp"
#include "phonoscope/stats.hpp"

namespace phonoscope {

namespace {

constexpr double kPauseEps = 1e-9;

double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

std::vector<double> mean_of(const std::vector<std::span<const float>>& rows, std::size_t dim) {
    std::vector<double> m(dim, 0.0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < dim; ++i) m[i] += r[i];
    for (double& v : m) v /= static_cast<double>(rows.size());
    return m;
}

// Embedding spans of a speaker's non-empty phone tokens, grouped per label.
std::map<std::string, std::vector<std::span<const float>>> tokens_by_label(const Corpus& corpus,
                                                                          std::size_t speaker) {
    std::map<std::string, std::vector<std::span<const float>>> out;
    for (std::size_t u : corpus.utterances_of(speaker))
        for (const auto& p : corpus.utterances()[u].phones)
            if (p.row >= 0) out[p.label].push_back(corpus.embedding(p.row));
    return out;
}

} // namespace

std::vector<double> feature_direction(const std::vector<std::span<const float>>& pos,
                                      const std::vector<std::span<const float>>& neg) {
    if (pos.empty() || neg.empty())
        fail(ErrorKind::EmptyFeatureClass, "feature direction needs tokens in both classes");
    const std::size_t dim = pos.front().size();
    for (const auto* side : {&pos, &neg})
        for (const auto& r : *side)
            if (r.size() != dim) fail(ErrorKind::DimMismatch, "embeddings differ in dimension");
    const auto mp = mean_of(pos, dim);
    const auto mn = mean_of(neg, dim);
    std::vector<double> w(dim);
    double n2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        w[i] = mp[i] - mn[i];
        n2 += w[i] * w[i];
    }
    const double n = std::sqrt(n2);
    if (!(n > 1e-12)) fail(ErrorKind::DegenerateDirection, "class means coincide");
    for (double& v : w) v /= n;
    return w;
}

double project(std::span<const float> embedding, std::span<const double> direction) {
    if (embedding.size() != direction.size())
        fail(ErrorKind::DimMismatch, "embedding and direction differ in dimension");
    double s = 0.0;
    for (std::size_t i = 0; i < embedding.size(); ++i) s += embedding[i] * direction[i];
    return s;
}

double dprime(std::span<const double> pos, std::span<const double> neg) {
    if (pos.size() < 2 || neg.size() < 2)
        fail(ErrorKind::InvalidArgument, "d' needs at least 2 values per class");
    const double sd = std::sqrt((stats::variance(pos) + stats::variance(neg)) / 2.0);
    if (!(sd >= 1e-12)) fail(ErrorKind::DegenerateVariance, "pooled sd below 1e-12");
    return (stats::mean(pos) - stats::mean(neg)) / sd;
}

DirectionSet estimate_directions(const Corpus& corpus, const std::string& language,
                                 const FeatureConfig& fc, const DirectionOptions& options) {
    DirectionSet ds;
    ds.language = language;
    std::vector<std::size_t> hc;
    for (std::size_t s = 0; s < corpus.speaker_count(); ++s) {
        const auto& m = corpus.speaker(s);
        if (m.language == language && m.aetiology == Aetiology::HC) hc.push_back(s);
    }
    if (hc.empty())
        fail(ErrorKind::NoHealthyControls, "no healthy-control speakers for language '" + language + "'");
    ds.hc_speaker_count = hc.size();

    std::array<std::vector<std::span<const float>>, kSegmentalCount> pos, neg;
    for (std::size_t s : hc)
        for (std::size_t u : corpus.utterances_of(s))
            for (const auto& p : corpus.utterances()[u].phones) {
                if (p.row < 0) continue;
                for (std::size_t f = 0; f < kSegmentalCount; ++f) {
                    const auto& pc = fc.classes[f];
                    if (!pc) continue;
                    if (pc->pos.contains(p.label)) pos[f].push_back(corpus.embedding(p.row));
                    else if (pc->neg.contains(p.label)) neg[f].push_back(corpus.embedding(p.row));
                }
            }

    for (std::size_t f = 0; f < kSegmentalCount; ++f) {
        if (!fc.classes[f]) continue;
        ds.hc_pos_tokens[f] = pos[f].size();
        ds.hc_neg_tokens[f] = neg[f].size();
        if (pos[f].empty() || neg[f].empty()) {
            if (options.require_all)
                fail(ErrorKind::EmptyFeatureClass,
                     std::string(feature_name(feature_at(f))) + " has an empty class in HC data for '" +
                         language + "'");
            continue;
        }
        try {
            ds.directions[f] = feature_direction(pos[f], neg[f]);
        } catch (const Error& e) {
            if (options.require_all || e.kind() != ErrorKind::DegenerateDirection) throw;
        }
    }
    return ds;
}

SegmentalResult segmental_profile(const Corpus& corpus, std::size_t speaker,
                                  const DirectionSet& directions, const FeatureConfig& fc) {
    const auto& meta = corpus.speaker(speaker);
    if (directions.language != meta.language || fc.language != meta.language)
        fail(ErrorKind::InvalidArgument, "directions/config language does not match speaker " + meta.speaker_id);
    SegmentalResult out;
    std::array<std::vector<double>, kSegmentalCount> pos, neg;
    for (std::size_t u : corpus.utterances_of(speaker))
        for (const auto& p : corpus.utterances()[u].phones) {
            if (p.row < 0) continue;
            for (std::size_t f = 0; f < kSegmentalCount; ++f) {
                const auto& pc = fc.classes[f];
                if (!pc) continue;
                const bool is_pos = pc->pos.contains(p.label);
                if (!is_pos && !pc->neg.contains(p.label)) continue;
                const auto& w = directions.directions[f];
                const double proj = w ? project(corpus.embedding(p.row), *w) : 0.0;
                (is_pos ? pos[f] : neg[f]).push_back(proj);
            }
        }
    for (std::size_t f = 0; f < kSegmentalCount; ++f) {
        out.counts[f] = ClassCount{pos[f].size(), neg[f].size()};
        if (!fc.classes[f] || !directions.directions[f]) continue;
        if (pos[f].size() < kMinTokensPerClass || neg[f].size() < kMinTokensPerClass) continue;
        try {
            out.dprime[f] = dprime(pos[f], neg[f]);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::DegenerateVariance) throw;
            out.warnings.push_back(std::string(feature_name(feature_at(f))) +
                                   " missing for " + meta.speaker_id + ": degenerate variance");
        }
    }
    return out;
}

StructuralResult structural_metrics(const Corpus& corpus, std::size_t speaker, const FeatureConfig& fc) {
    StructuralResult out;

    double distance_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t u : corpus.utterances_of(speaker)) {
        std::span<const float> previous;
        double previous_norm = 0.0;
        for (const auto& p : corpus.utterances()[u].phones) {
            if (p.row < 0) continue;
            const auto e = corpus.embedding(p.row);
            const double n = norm(e);
            if (!previous.empty() && n > 0.0 && previous_norm > 0.0) {
                const double c = std::clamp(dot(previous, e) / (n * previous_norm), -1.0, 1.0);
                distance_sum += 1.0 - c;
                ++pairs;
            }
            previous = e;
            previous_norm = n;
        }
    }
    if (pairs > 0) out.boundary_sharpness = distance_sum / static_cast<double>(pairs);

    const auto by_label = tokens_by_label(corpus, speaker);
    double label_sum = 0.0;
    std::size_t labels = 0;
    for (const auto& [label, rows] : by_label) {
        if (rows.size() < 2) continue;
        const std::size_t dim = rows.front().size();
        std::vector<double> total(dim, 0.0);
        std::size_t n = 0;
        for (const auto& r : rows) {
            const double len = norm(r);
            if (!(len > 0.0)) continue;
            for (std::size_t i = 0; i < dim; ++i) total[i] += r[i] / len;
            ++n;
        }
        if (n < 2) continue;
        // Mean pairwise cosine of unit vectors: (|sum|^2 - n) / (n (n - 1)).
        double t2 = 0.0;
        for (double v : total) t2 += v * v;
        const double nd = static_cast<double>(n);
        label_sum += std::clamp((t2 - nd) / (nd * (nd - 1.0)), -1.0, 1.0);
        ++labels;
    }
    if (labels > 0) out.cross_position_cos = label_sum / static_cast<double>(labels);

    std::array<std::vector<double>, 3> corner_means;
    bool all_corners = true;
    for (std::size_t c = 0; c < 3; ++c) {
        auto it = by_label.find(fc.vowel_corners[c]);
        if (fc.vowel_corners[c].empty() || it == by_label.end() || it->second.size() < kMinCornerTokens) {
            all_corners = false;
            break;
        }
        corner_means[c] = mean_of(it->second, it->second.front().size());
    }
    if (all_corners) {
        double e11 = 0.0, e22 = 0.0, e12 = 0.0;
        for (std::size_t i = 0; i < corner_means[0].size(); ++i) {
            const double a = corner_means[1][i] - corner_means[0][i];
            const double b = corner_means[2][i] - corner_means[0][i];
            e11 += a * a;
            e22 += b * b;
            e12 += a * b;
        }
        out.vowel_triangle_area = 0.5 * std::sqrt(std::max(0.0, e11 * e22 - e12 * e12));
    }
    return out;
}

ProsodicResult prosodic_metrics(const Corpus& corpus, std::size_t speaker, const FeatureConfig* fc) {
    ProsodicResult out;
    std::size_t n_phones = 0;
    double phone_time = 0.0;
    std::size_t gaps = 0, pauses = 0;
    std::vector<double> vowel_durations;
    for (std::size_t u : corpus.utterances_of(speaker)) {
        const auto& utt = corpus.utterances()[u];
        for (const auto& p : utt.phones) {
            if (p.empty_label()) continue;
            ++n_phones;
            phone_time += p.duration();
            if (fc && fc->is_vowel(p.label)) vowel_durations.push_back(p.duration());
        }
        const WordToken* previous = nullptr;
        for (const auto& w : utt.words) {
            if (w.label.empty()) continue;
            if (previous) {
                ++gaps;
                if (w.start_s - previous->end_s > kPauseThresholdS + kPauseEps) ++pauses;
            }
            previous = &w;
        }
    }
    if (n_phones > 0 && phone_time > 0.0) out.speech_rate = static_cast<double>(n_phones) / phone_time;
    if (gaps > 0) out.pause_rate = static_cast<double>(pauses) / static_cast<double>(gaps);
    if (vowel_durations.size() >= 2) {
        const double m = stats::mean(vowel_durations);
        if (m > 0.0) out.vowel_duration_cv = stats::stddev(vowel_durations) / m;
    }
    return out;
}

std::optional<double> SpeakerProfile::composite() const {
    double sum = 0.0;
    for (std::size_t f = 0; f < kConsonantCount; ++f) {
        if (!values[f]) return std::nullopt;
        sum += *values[f];
    }
    return sum / static_cast<double>(kConsonantCount);
}

std::optional<double> SpeakerProfile::value(const Measure& m) const {
    return m.composite ? composite() : (*this)[m.feature];
}

ProfileTable ProfileTable::hc_normalized() const {
    std::map<std::string, std::array<std::vector<double>, kFeatureCount>> hc_values;
    for (const auto& r : rows_) {
        if (r.meta.aetiology != Aetiology::HC) continue;
        auto& slot = hc_values[r.meta.language];
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            if (r.profile.values[f]) slot[f].push_back(*r.profile.values[f]);
    }
    ProfileTable out = *this;
    for (auto& r : out.rows_) {
        auto it = hc_values.find(r.meta.language);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            auto& v = r.profile.values[f];
            if (!v) continue;
            const double m = it == hc_values.end() ? 0.0 : stats::mean(it->second[f]);
            if (std::isnan(m) || m == 0.0)
                v.reset();
            else
                *v /= m;
        }
    }
    return out;
}

ProfileTable assemble_profiles(const Corpus& corpus, const DirectionMap& directions,
                               const FeatureConfigMap& configs, std::vector<Finding>* findings) {
    const std::size_t n = corpus.speaker_count();
    std::vector<ProfileRow> rows(n);
    std::vector<std::vector<Finding>> local(n);
    FeatureConfig no_config;
    no_config.vowel_corners = {"", "", ""};

    parallel_for(n, [&](std::size_t s) {
        const SpeakerMeta& meta = corpus.speaker(s);
        ProfileRow& row = rows[s];
        row.meta = meta;
        row.profile.speaker_id = meta.speaker_id;
        row.profile.backbone_id = corpus.backbone_id();
        row.profile.n_phones = phone_count(corpus, s);
        auto note = [&](FindingLevel level, const std::string& code, const std::string& msg) {
            row.flags.push_back(code);
            local[s].push_back({level, code, meta.speaker_id, msg});
        };
        if (corpus.token_free(s)) note(FindingLevel::warning, "token_free", meta.speaker_id + " has no tokens");

        auto cfg_it = configs.find(meta.language);
        const FeatureConfig* fc = cfg_it == configs.end() ? nullptr : &cfg_it->second;
        auto dir_it = directions.find(meta.language);
        if (!fc) {
            note(FindingLevel::warning, "no_feature_config",
                 "no feature config for language '" + meta.language + "'; segmental features missing");
        } else if (dir_it == directions.end()) {
            note(FindingLevel::warning, "no_hc_baseline",
                 "no HC directions for language '" + meta.language + "'; segmental features missing");
        } else {
            const auto seg = segmental_profile(corpus, s, dir_it->second, *fc);
            for (std::size_t f = 0; f < kSegmentalCount; ++f) row.profile.values[f] = seg.dprime[f];
            for (const auto& w : seg.warnings) note(FindingLevel::warning, "degenerate_variance", w);
        }

        const auto st = structural_metrics(corpus, s, fc ? *fc : no_config);
        row.profile[Feature::boundary_sharpness] = st.boundary_sharpness;
        row.profile[Feature::cross_position_cos] = st.cross_position_cos;
        row.profile[Feature::vowel_triangle_area] = st.vowel_triangle_area;
        const auto pr = prosodic_metrics(corpus, s, fc);
        row.profile[Feature::speech_rate] = pr.speech_rate;
        row.profile[Feature::pause_rate] = pr.pause_rate;
        row.profile[Feature::vowel_duration_cv] = pr.vowel_duration_cv;
    });

    if (findings)
        for (auto& l : local)
            for (auto& f : l) findings->push_back(std::move(f));
    return ProfileTable(std::move(rows));
}

ProfileTable build_profile_table(const Corpus& corpus, const FeatureConfigMap& configs,
                                 std::vector<Finding>* findings, DirectionMap* directions_out) {
    std::set<std::string> languages;
    for (const auto& s : corpus.manifest().speakers) languages.insert(s.language);
    DirectionMap directions;
    for (const auto& lang : languages) {
        auto it = configs.find(lang);
        if (it == configs.end()) continue;
        try {
            directions.emplace(lang, estimate_directions(corpus, lang, it->second, {.require_all = false}));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoHealthyControls) throw;
            if (findings)
                findings->push_back({FindingLevel::warning, "no_hc_baseline", "",
                                     "language '" + lang + "' has no healthy-control speakers"});
        }
    }
    ProfileTable table = assemble_profiles(corpus, directions, configs, findings);
    if (directions_out) *directions_out = std::move(directions);
    return table;
}

// --- profiles.csv -------------------------------------------------------------

namespace {

std::vector<std::string> csv_header() {
    std::vector<std::string> h{"speaker_id", "backbone_id", "dataset", "language", "aetiology",
                               "severity", "severity_source", "n_phones"};
    for (std::size_t f = 0; f < kFeatureCount; ++f) h.emplace_back(feature_name(feature_at(f)));
    h.emplace_back(kCompositeName);
    return h;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) fail(ErrorKind::MalformedFile, "profiles.csv line " + std::to_string(line_no) + ": unterminated quote");
    out.push_back(std::move(field));
    return out;
}

std::optional<double> parse_cell(const std::string& s, std::size_t line_no) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::MalformedFile, "profiles.csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
}

} // namespace

std::string dump_profiles_csv(const ProfileTable& table) {
    std::string out;
    const auto header = csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (const auto& r : table.rows()) {
        out += csv_quote(r.meta.speaker_id) + "," + csv_quote(r.profile.backbone_id) + "," +
               csv_quote(r.meta.dataset) + "," + csv_quote(r.meta.language) + "," +
               std::string(to_string(r.meta.aetiology)) + "," + std::string(to_string(r.meta.severity)) +
               "," + std::string(to_string(r.meta.severity_source)) + "," +
               std::to_string(r.profile.n_phones);
        for (const auto& v : r.profile.values) out += "," + (v ? format_number(*v) : std::string());
        const auto c = r.profile.composite();
        out += "," + (c ? format_number(*c) : std::string()) + "\n";
    }
    return out;
}

ProfileTable parse_profiles_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    const auto header = csv_header();
    if (!std::getline(in, line)) fail(ErrorKind::MalformedFile, "profiles.csv is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (csv_split(line, 1) != header) fail(ErrorKind::MalformedFile, "profiles.csv header mismatch");
    std::vector<ProfileRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = csv_split(line, line_no);
        if (f.size() != header.size())
            fail(ErrorKind::MalformedFile, "profiles.csv line " + std::to_string(line_no) + ": wrong column count");
        ProfileRow r;
        r.meta.speaker_id = f[0];
        r.profile.speaker_id = f[0];
        r.profile.backbone_id = f[1];
        r.meta.dataset = f[2];
        r.meta.language = f[3];
        const auto a = parse_aetiology(f[4]);
        const auto sev = parse_severity(f[5]);
        const auto src = parse_severity_source(f[6]);
        if (!a || !sev || !src)
            fail(ErrorKind::MalformedFile, "profiles.csv line " + std::to_string(line_no) + ": bad metadata");
        r.meta.aetiology = *a;
        r.meta.severity = *sev;
        r.meta.severity_source = *src;
        const auto np = parse_cell(f[7], line_no);
        if (!np || *np < 0) fail(ErrorKind::MalformedFile, "profiles.csv line " + std::to_string(line_no) + ": bad n_phones");
        r.profile.n_phones = static_cast<std::size_t>(*np);
        for (std::size_t i = 0; i < kFeatureCount; ++i) r.profile.values[i] = parse_cell(f[8 + i], line_no);
        rows.push_back(std::move(r));
    }
    return ProfileTable(std::move(rows));
}

} // namespace phonoscope
