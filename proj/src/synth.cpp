#include "phonoscope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

#include "phonoscope/error.hpp"
#include "phonoscope/hash.hpp"
#include "phonoscope/parallel.hpp"
#include "phonoscope/rng.hpp"

namespace phonoscope::synth {

using nlohmann::json;

namespace {

// Two labels per class; every label belongs to exactly one class of one feature.
struct Inventory {
    std::array<std::array<std::string, 2>, kSegmentalCount> pos;
    std::array<std::array<std::string, 2>, kSegmentalCount> neg;
};

const Inventory& inventory() {
    static const Inventory inv{
        {{{"m", "n"}, {"b", "g"}, {"l", "r"}, {"s", "z"}, {"w", "j"},
          {"i", "ih"}, {"aa", "ao"}, {"u", "uh"}, {"o", "ow"}}},
        {{{"p", "t"}, {"k", "f"}, {"th", "sh"}, {"v", "h"}, {"ch", "dh"},
          {"a", "ae"}, {"e", "eh"}, {"iy", "ey"}, {"ah", "er"}}},
    };
    return inv;
}

constexpr double kSpareOffset = 1.0;
constexpr double kMinPhoneMs = 20.0;

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::IoError, "short write to " + path.string());
}

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorKind::SpecInvalid, msg); }

} // namespace

// --- spec -------------------------------------------------------------------

void validate_spec(const SynthSpec& spec) {
    if (spec.backbone_ids.empty()) invalid("at least one backbone id is required");
    std::set<std::string> ids;
    for (const auto& b : spec.backbone_ids)
        if (b.empty() || !ids.insert(b).second) invalid("backbone ids must be non-empty and unique");
    if (spec.backbone_extra_noise.size() + 1 > spec.backbone_ids.size() && !spec.backbone_extra_noise.empty())
        invalid("backbone_extra_noise has more entries than extra backbones");
    for (double v : spec.backbone_extra_noise)
        if (!(v >= 0.0) || !std::isfinite(v)) invalid("backbone_extra_noise must be >= 0");
    if (spec.dim < kSegmentalCount) invalid("dim must be at least " + std::to_string(kSegmentalCount));
    if (spec.cells.empty()) invalid("spec has no cells");
    for (const auto& c : spec.cells) {
        if (c.dataset.empty() || c.language.empty()) invalid("cell dataset and language must be non-empty");
        if (!spec.severity_multipliers.contains(c.severity))
            invalid("no severity multiplier for '" + std::string(to_string(c.severity)) + "'");
    }
    for (const auto& [a, t] : spec.templates)
        for (double v : t)
            if (!in_unit(v)) invalid("collapse factors must lie in [0,1]");
    for (const auto& [s, m] : spec.severity_multipliers)
        if (!in_unit(m)) invalid("severity multipliers must lie in [0,1]");
    for (double d : spec.separation)
        if (!(d > 0.0) || !std::isfinite(d)) invalid("class separation must be > 0");
    if (!(spec.noise_sigma > 0.0) || !std::isfinite(spec.noise_sigma)) invalid("noise sigma must be > 0");
    if (!(spec.speaker_jitter_sd >= 0.0)) invalid("speaker_jitter_sd must be >= 0");
    if (!std::isfinite(spec.token_log_mean) || !(spec.token_log_sd >= 0.0) || spec.token_log_mean > 12.0)
        invalid("token count distribution is invalid");
    if (spec.min_tokens < 1) invalid("min_tokens must be >= 1");
    if (spec.phones_per_utterance < 1) invalid("phones_per_utterance must be >= 1");
    if (!(spec.phone_duration_s > 0.0)) invalid("phone_duration_s must be > 0");
    if (!in_unit(spec.pause_probability)) invalid("pause_probability must lie in [0,1]");
}

namespace {

json cell_to_json(const SynthCell& c) {
    return {{"dataset", c.dataset},
            {"language", c.language},
            {"aetiology", to_string(c.aetiology)},
            {"severity", to_string(c.severity)},
            {"severity_source", to_string(c.severity_source)},
            {"n_speakers", c.n_speakers}};
}

template <typename T, typename Parse>
T parse_enum(const json& j, Parse parse, const char* what) {
    const auto v = parse(j.get<std::string>());
    if (!v) invalid(std::string("unknown ") + what + " '" + j.get<std::string>() + "'");
    return *v;
}

} // namespace

std::string dump_synth_spec(const SynthSpec& spec) {
    json j;
    j["corpus_name"] = spec.corpus_name;
    j["backbone_ids"] = spec.backbone_ids;
    j["backbone_extra_noise"] = spec.backbone_extra_noise;
    j["dim"] = spec.dim;
    j["seed"] = spec.seed;
    j["cells"] = json::array();
    for (const auto& c : spec.cells) j["cells"].push_back(cell_to_json(c));
    j["templates"] = json::object();
    for (const auto& [a, t] : spec.templates) j["templates"][std::string(to_string(a))] = t;
    j["severity_multipliers"] = json::object();
    for (const auto& [s, m] : spec.severity_multipliers) j["severity_multipliers"][std::string(to_string(s))] = m;
    j["separation"] = spec.separation;
    j["noise_sigma"] = spec.noise_sigma;
    j["speaker_jitter_sd"] = spec.speaker_jitter_sd;
    j["token_log_mean"] = spec.token_log_mean;
    j["token_log_sd"] = spec.token_log_sd;
    j["min_tokens"] = spec.min_tokens;
    j["couple_tokens_to_severity"] = spec.couple_tokens_to_severity;
    j["phones_per_utterance"] = spec.phones_per_utterance;
    j["phone_duration_s"] = spec.phone_duration_s;
    j["pause_probability"] = spec.pause_probability;
    j["emit_ctc_conf"] = spec.emit_ctc_conf;
    return j.dump(2) + "\n";
}

SynthSpec parse_synth_spec(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        invalid(std::string("synth spec: ") + e.what());
    }
    if (!j.is_object()) invalid("synth spec must be a JSON object");
    static const std::set<std::string> known{
        "corpus_name", "backbone_ids", "backbone_extra_noise", "dim", "seed", "cells", "templates",
        "severity_multipliers", "separation", "noise_sigma", "speaker_jitter_sd", "token_log_mean",
        "token_log_sd", "min_tokens", "couple_tokens_to_severity", "phones_per_utterance",
        "phone_duration_s", "pause_probability", "emit_ctc_conf"};
    for (const auto& [k, _] : j.items())
        if (!known.contains(k)) invalid("unknown synth spec key '" + k + "'");

    SynthSpec s;
    try {
        if (j.contains("corpus_name")) s.corpus_name = j["corpus_name"].get<std::string>();
        if (j.contains("backbone_ids")) s.backbone_ids = j["backbone_ids"].get<std::vector<std::string>>();
        if (j.contains("backbone_extra_noise"))
            s.backbone_extra_noise = j["backbone_extra_noise"].get<std::vector<double>>();
        if (j.contains("dim")) s.dim = j["dim"].get<std::uint32_t>();
        if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("cells")) {
            for (const auto& jc : j["cells"]) {
                SynthCell c;
                c.dataset = jc.at("dataset").get<std::string>();
                c.language = jc.at("language").get<std::string>();
                c.aetiology = parse_enum<Aetiology>(jc.at("aetiology"), parse_aetiology, "aetiology");
                c.severity = parse_enum<Severity>(jc.at("severity"), parse_severity, "severity");
                if (jc.contains("severity_source"))
                    c.severity_source = parse_enum<SeveritySource>(jc["severity_source"],
                                                                   parse_severity_source, "severity source");
                c.n_speakers = jc.at("n_speakers").get<std::size_t>();
                s.cells.push_back(std::move(c));
            }
        }
        if (j.contains("templates"))
            for (const auto& [k, v] : j["templates"].items()) {
                const auto a = parse_aetiology(k);
                if (!a) invalid("unknown aetiology '" + k + "' in templates");
                const auto t = v.get<std::vector<double>>();
                if (t.size() != kSegmentalCount) invalid("template for " + k + " needs 9 values");
                std::copy(t.begin(), t.end(), s.templates[*a].begin());
            }
        if (j.contains("severity_multipliers")) {
            s.severity_multipliers.clear();
            for (const auto& [k, v] : j["severity_multipliers"].items()) {
                const auto sev = parse_severity(k);
                if (!sev) invalid("unknown severity '" + k + "' in severity_multipliers");
                s.severity_multipliers[*sev] = v.get<double>();
            }
        }
        if (j.contains("separation")) {
            const auto& sep = j["separation"];
            if (sep.is_number()) {
                s.separation.fill(sep.get<double>());
            } else {
                const auto v = sep.get<std::vector<double>>();
                if (v.size() != kSegmentalCount) invalid("separation needs 9 values or one number");
                std::copy(v.begin(), v.end(), s.separation.begin());
            }
        }
        if (j.contains("noise_sigma")) s.noise_sigma = j["noise_sigma"].get<double>();
        if (j.contains("speaker_jitter_sd")) s.speaker_jitter_sd = j["speaker_jitter_sd"].get<double>();
        if (j.contains("token_log_mean")) s.token_log_mean = j["token_log_mean"].get<double>();
        if (j.contains("token_log_sd")) s.token_log_sd = j["token_log_sd"].get<double>();
        if (j.contains("min_tokens")) s.min_tokens = j["min_tokens"].get<std::size_t>();
        if (j.contains("couple_tokens_to_severity"))
            s.couple_tokens_to_severity = j["couple_tokens_to_severity"].get<bool>();
        if (j.contains("phones_per_utterance")) s.phones_per_utterance = j["phones_per_utterance"].get<std::size_t>();
        if (j.contains("phone_duration_s")) s.phone_duration_s = j["phone_duration_s"].get<double>();
        if (j.contains("pause_probability")) s.pause_probability = j["pause_probability"].get<double>();
        if (j.contains("emit_ctc_conf")) s.emit_ctc_conf = j["emit_ctc_conf"].get<bool>();
    } catch (const json::exception& e) {
        invalid(std::string("synth spec: ") + e.what());
    }
    validate_spec(s);
    return s;
}

std::string spec_hash(const SynthSpec& spec) { return sha256_hex(dump_synth_spec(spec)); }

SynthSpec default_spec() {
    SynthSpec s;
    s.corpus_name = "synthetic-default";
    s.templates = {
        {Aetiology::HC, {1, 1, 1, 1, 1, 1, 1, 1, 1}},
        {Aetiology::PD, {0.9, 0.7, 0.9, 0.8, 0.7, 0.9, 0.9, 0.9, 0.9}},
        {Aetiology::CP, {0.8, 0.8, 0.6, 0.6, 0.8, 0.8, 0.8, 0.8, 0.8}},
        {Aetiology::ALS, {0.5, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8}},
        {Aetiology::DS, {0.8, 0.8, 0.8, 0.6, 0.6, 0.7, 0.8, 0.8, 0.8}},
        {Aetiology::Stroke, {0.8, 0.6, 0.8, 0.8, 0.8, 0.9, 0.9, 0.7, 0.8}},
    };
    for (const std::string lang : {"en", "es"}) {
        for (int d = 1; d <= 2; ++d) {
            const std::string dataset = lang + "-d" + std::to_string(d);
            const auto source = d == 1 ? SeveritySource::clinical : SeveritySource::threshold;
            s.cells.push_back({dataset, lang, Aetiology::HC, Severity::control, source, 4});
            for (Aetiology a : {Aetiology::PD, Aetiology::CP, Aetiology::ALS, Aetiology::DS, Aetiology::Stroke})
                for (Severity sev : {Severity::mild, Severity::moderate, Severity::severe})
                    s.cells.push_back({dataset, lang, a, sev, source, 2});
        }
    }
    return s;
}

FeatureConfig synth_feature_config(const std::string& language) {
    const auto& inv = inventory();
    FeatureConfig fc;
    fc.language = language;
    for (std::size_t f = 0; f < kSegmentalCount; ++f) {
        PhoneClasses pc;
        pc.pos.insert(inv.pos[f].begin(), inv.pos[f].end());
        pc.neg.insert(inv.neg[f].begin(), inv.neg[f].end());
        if (f >= kConsonantCount) {
            fc.vowel_set.insert(inv.pos[f].begin(), inv.pos[f].end());
            fc.vowel_set.insert(inv.neg[f].begin(), inv.neg[f].end());
        }
        fc.classes[f] = std::move(pc);
    }
    fc.vowel_corners = {"a", "i", "u"};
    return fc;
}

// --- ledger -----------------------------------------------------------------

std::string dump_ledger(const GroundTruthLedger& ledger) {
    json j;
    j["seed"] = ledger.seed;
    j["spec_hash"] = ledger.spec_hash;
    j["entries"] = json::array();
    for (const auto& e : ledger.entries)
        j["entries"].push_back({{"speaker_id", e.speaker_id},
                                {"backbone_id", e.backbone_id},
                                {"true_dprime", e.true_dprime}});
    return j.dump(2) + "\n";
}

GroundTruthLedger parse_ledger(std::string_view json_text) {
    try {
        const json j = json::parse(json_text);
        GroundTruthLedger l;
        l.seed = j.at("seed").get<std::uint64_t>();
        l.spec_hash = j.at("spec_hash").get<std::string>();
        for (const auto& je : j.at("entries")) {
            LedgerEntry e;
            e.speaker_id = je.at("speaker_id").get<std::string>();
            e.backbone_id = je.at("backbone_id").get<std::string>();
            const auto d = je.at("true_dprime").get<std::vector<double>>();
            if (d.size() != kSegmentalCount) fail(ErrorKind::MalformedFile, "ledger entry needs 9 d' values");
            std::copy(d.begin(), d.end(), e.true_dprime.begin());
            l.entries.push_back(std::move(e));
        }
        return l;
    } catch (const json::exception& e) {
        fail(ErrorKind::MalformedFile, std::string("ground_truth.json: ") + e.what());
    }
}

// --- generation -------------------------------------------------------------

Corpus SynthCorpus::corpus(const std::string& backbone_id) const {
    auto it = embeddings.find(backbone_id);
    if (it == embeddings.end()) fail(ErrorKind::InvalidArgument, "no backbone '" + backbone_id + "'");
    return Corpus(manifest, backbone_id, tokens, it->second);
}

namespace {

struct SpeakerOutput {
    std::vector<TokenRow> tokens;
    std::vector<RowRef> rows;
    std::vector<std::vector<float>> embeddings;  // per backbone, rows x dim
    std::vector<LedgerEntry> ledger;
};

struct PlannedToken {
    std::size_t feature;
    bool positive;
    const std::string* label;
};

double intelligibility_for(Severity s, Rng& rng) {
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    switch (s) {
    case Severity::control: return std::round(u(95.0, 100.0) * 10.0) / 10.0;
    case Severity::mild: return std::round(u(85.0, 94.0) * 10.0) / 10.0;
    case Severity::moderate: return std::round(u(70.0, 84.8) * 10.0) / 10.0;
    case Severity::severe: return std::round(u(40.0, 69.8) * 10.0) / 10.0;
    case Severity::unknown: break;
    }
    return std::round(u(0.0, 100.0) * 10.0) / 10.0;
}

struct BackboneMap {
    std::vector<std::size_t> perm;
    std::vector<float> sign;
    double extra_noise = 0.0;
};

SpeakerOutput generate_speaker(const SynthSpec& spec, const SpeakerMeta& meta, std::size_t index,
                               const std::vector<BackboneMap>& backbones) {
    const auto& inv = inventory();
    SpeakerOutput out;
    Rng rng = make_rng(spec.seed, {1, index});
    std::normal_distribution<double> std_normal(0.0, 1.0);

    const double sev_mult = spec.severity_multipliers.at(meta.severity);
    std::array<double, kSegmentalCount> collapse;
    collapse.fill(1.0);
    if (auto it = spec.templates.find(meta.aetiology); it != spec.templates.end()) collapse = it->second;

    std::array<double, kSegmentalCount> sep{};
    for (std::size_t f = 0; f < kSegmentalCount; ++f) {
        const double jitter = spec.speaker_jitter_sd > 0 ? std::exp(spec.speaker_jitter_sd * std_normal(rng)) : 1.0;
        sep[f] = spec.separation[f] * collapse[f] * sev_mult * jitter;
    }

    std::vector<PlannedToken> plan;
    for (std::size_t f = 0; f < kSegmentalCount; ++f)
        for (bool positive : {true, false}) {
            double n = std::exp(spec.token_log_mean + spec.token_log_sd * std_normal(rng));
            if (spec.couple_tokens_to_severity) n *= sev_mult;
            const auto count = std::max<std::size_t>(spec.min_tokens, static_cast<std::size_t>(std::llround(n)));
            const auto& labels = positive ? inv.pos[f] : inv.neg[f];
            for (std::size_t t = 0; t < count; ++t)
                plan.push_back({f, positive, &labels[uniform_index(rng, labels.size())]});
        }
    shuffle(std::span<PlannedToken>(plan), rng);

    const int ordinal = severity_ordinal(meta.severity).value_or(0);
    const double slow = 1.0 + 0.25 * ordinal;
    const std::size_t dim = spec.dim;
    out.embeddings.resize(backbones.size());

    std::size_t next = 0;
    std::size_t utt_no = 0;
    while (next < plan.size()) {
        const std::string utt_id = meta.speaker_id + "-u" + std::to_string(1000 + utt_no).substr(1);
        ++utt_no;
        const std::size_t end = std::min(plan.size(), next + spec.phones_per_utterance);
        long long t_ms = 0;
        std::uint32_t token_ordinal = 0;
        std::size_t k = next;
        while (k < end) {
            // One word of 2-4 phones, optionally followed by a pause.
            const std::size_t word_len = std::min(end - k, 2 + uniform_index(rng, 3));
            const long long word_start = t_ms;
            std::string word_label;
            for (std::size_t w = 0; w < word_len; ++w, ++k) {
                const PlannedToken& tok = plan[k];
                const double ms = std::max(kMinPhoneMs, spec.phone_duration_s * 1000.0 * slow *
                                                            std::exp(0.25 * std_normal(rng)));
                const long long d_ms = std::llround(ms);
                out.tokens.push_back({meta.speaker_id, utt_id, TierKind::phone, *tok.label,
                                      static_cast<double>(t_ms) / 1000.0,
                                      static_cast<double>(t_ms + d_ms) / 1000.0});
                t_ms += d_ms;
                word_label += *tok.label;

                std::vector<double> clean(dim, 0.0);
                for (std::size_t i = kSegmentalCount; i < dim; ++i) clean[i] = kSpareOffset;
                clean[tok.feature] = (tok.positive ? 0.5 : -0.5) * sep[tok.feature];
                for (std::size_t i = 0; i < dim; ++i) clean[i] += spec.noise_sigma * std_normal(rng);
                for (std::size_t b = 0; b < backbones.size(); ++b) {
                    const auto& bm = backbones[b];
                    Rng extra = make_rng(spec.seed, {2, index, b, out.rows.size()});
                    auto& dst = out.embeddings[b];
                    const std::size_t base = dst.size();
                    dst.resize(base + dim);
                    for (std::size_t i = 0; i < dim; ++i) {
                        double v = bm.sign[i] * clean[i];
                        if (bm.extra_noise > 0) v += bm.extra_noise * std_normal(extra);
                        dst[base + bm.perm[i]] = static_cast<float>(v);
                    }
                }
                out.rows.push_back({utt_id, token_ordinal++});
            }
            out.tokens.push_back({meta.speaker_id, utt_id, TierKind::word, word_label,
                                  static_cast<double>(word_start) / 1000.0, static_cast<double>(t_ms) / 1000.0});
            if (k < end && std::bernoulli_distribution(spec.pause_probability)(rng)) {
                const long long gap = 200 + static_cast<long long>(uniform_index(rng, 201));
                const double a = static_cast<double>(t_ms) / 1000.0;
                const double b = static_cast<double>(t_ms + gap) / 1000.0;
                out.tokens.push_back({meta.speaker_id, utt_id, TierKind::phone, "", a, b});
                out.tokens.push_back({meta.speaker_id, utt_id, TierKind::word, "", a, b});
                t_ms += gap;
            }
        }
        next = end;
    }

    for (std::size_t b = 0; b < backbones.size(); ++b) {
        LedgerEntry e;
        e.speaker_id = meta.speaker_id;
        e.backbone_id = spec.backbone_ids[b];
        const double sigma = std::sqrt(spec.noise_sigma * spec.noise_sigma +
                                       backbones[b].extra_noise * backbones[b].extra_noise);
        for (std::size_t f = 0; f < kSegmentalCount; ++f) e.true_dprime[f] = sep[f] / sigma;
        out.ledger.push_back(std::move(e));
    }
    return out;
}

} // namespace

SynthCorpus generate_corpus(const SynthSpec& spec) {
    validate_spec(spec);
    SynthCorpus sc;
    const std::string hash = spec_hash(spec);

    Manifest& m = sc.manifest;
    m.corpus_name = spec.corpus_name;
    m.backbone_id = spec.backbone_ids.front();
    m.dim = spec.dim;
    for (std::size_t b = 1; b < spec.backbone_ids.size(); ++b) m.backbone_dims[spec.backbone_ids[b]] = spec.dim;
    m.generator = GeneratorInfo{spec.seed, hash};

    std::size_t index = 0;
    std::set<std::string> languages;
    for (const auto& cell : spec.cells) {
        languages.insert(cell.language);
        for (std::size_t k = 0; k < cell.n_speakers; ++k, ++index) {
            SpeakerMeta s;
            s.speaker_id = cell.dataset + "-" + std::to_string(100000 + index).substr(1);
            s.dataset = cell.dataset;
            s.language = cell.language;
            s.aetiology = cell.aetiology;
            s.severity = cell.severity;
            s.severity_source = cell.severity_source;
            Rng rng = make_rng(spec.seed, {3, index});
            if (cell.severity_source == SeveritySource::threshold)
                s.intelligibility_pct = intelligibility_for(cell.severity, rng);
            if (spec.emit_ctc_conf) {
                const double base = cell.severity == Severity::unknown
                                        ? 0.85
                                        : 0.92 - 0.08 * severity_ordinal(cell.severity).value_or(0);
                const double v = base + 0.03 * std::normal_distribution<double>(0.0, 1.0)(rng);
                s.ctc_conf = std::round(std::clamp(v, 0.0, 1.0) * 1e4) / 1e4;
            }
            m.speakers.push_back(std::move(s));
        }
    }

    std::vector<BackboneMap> backbones(spec.backbone_ids.size());
    for (std::size_t b = 0; b < backbones.size(); ++b) {
        auto& bm = backbones[b];
        bm.perm.resize(spec.dim);
        std::iota(bm.perm.begin(), bm.perm.end(), 0);
        bm.sign.assign(spec.dim, 1.0f);
        if (b == 0) continue;
        Rng rng = make_rng(spec.seed, {4, b});
        shuffle(std::span<std::size_t>(bm.perm), rng);
        for (auto& s : bm.sign) s = std::bernoulli_distribution(0.5)(rng) ? 1.0f : -1.0f;
        if (b - 1 < spec.backbone_extra_noise.size()) bm.extra_noise = spec.backbone_extra_noise[b - 1];
    }

    std::vector<SpeakerOutput> outputs(m.speakers.size());
    parallel_for(outputs.size(), [&](std::size_t s) {
        outputs[s] = generate_speaker(spec, m.speakers[s], s, backbones);
    });

    std::size_t total_rows = 0;
    for (const auto& o : outputs) total_rows += o.rows.size();
    std::vector<std::vector<float>> data(backbones.size());
    for (auto& d : data) d.reserve(total_rows * spec.dim);
    std::vector<RowRef> rows;
    rows.reserve(total_rows);
    for (auto& o : outputs) {
        for (auto& t : o.tokens) sc.tokens.rows.push_back(std::move(t));
        for (auto& r : o.rows) rows.push_back(std::move(r));
        for (std::size_t b = 0; b < backbones.size(); ++b)
            data[b].insert(data[b].end(), o.embeddings[b].begin(), o.embeddings[b].end());
        for (auto& e : o.ledger) sc.ledger.entries.push_back(std::move(e));
    }
    for (std::size_t b = 0; b < backbones.size(); ++b) {
        EmbeddingStore store;
        store.matrix = EmbeddingMatrix(static_cast<std::uint32_t>(total_rows), spec.dim, std::move(data[b]));
        store.rows = rows;
        sc.embeddings.emplace(spec.backbone_ids[b], std::move(store));
    }
    sc.ledger.seed = spec.seed;
    sc.ledger.spec_hash = hash;
    for (const auto& lang : languages) sc.configs.emplace(lang, synth_feature_config(lang));
    return sc;
}

void write_synth_corpus(const SynthCorpus& sc, const std::filesystem::path& root,
                        const std::optional<std::filesystem::path>& config_dir) {
    std::filesystem::create_directories(root);
    write_text(root / "manifest.json", dump_manifest(sc.manifest));
    write_text(root / "tokens.tsv", dump_tokens_tsv(sc.tokens));
    for (const auto& [backbone, store] : sc.embeddings) write_embeddings(root, backbone, store);
    write_text(root / "ground_truth.json", dump_ledger(sc.ledger));
    if (config_dir) {
        std::filesystem::create_directories(*config_dir);
        for (const auto& [lang, fc] : sc.configs)
            write_text(*config_dir / (lang + ".json"), dump_feature_config(fc));
    }
}

// --- ledger check -------------------------------------------------------------

double dprime_standard_error(double d, std::size_t n_pos, std::size_t n_neg) {
    if (n_pos == 0 || n_neg == 0) fail(ErrorKind::InvalidArgument, "standard error needs both classes");
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return std::sqrt(1.0 / np + 1.0 / nn + d * d / (2.0 * (np + nn)));
}

LedgerCheck ledger_check(const Corpus& corpus, const GroundTruthLedger& ledger,
                         const ProfileTable& profiles, const std::vector<Finding>& profile_findings,
                         const LedgerPolicy& policy) {
    const auto& gen = corpus.manifest().generator;
    if (!gen) fail(ErrorKind::LedgerMismatch, "corpus was not written by the generator");
    if (gen->seed != ledger.seed || gen->spec_hash != ledger.spec_hash)
        fail(ErrorKind::LedgerMismatch, "corpus seed " + std::to_string(gen->seed) + " does not match ledger seed " +
                                            std::to_string(ledger.seed));

    std::map<std::string, const ProfileRow*> by_speaker;
    for (const auto& r : profiles.rows())
        if (r.profile.backbone_id == corpus.backbone_id()) by_speaker[r.meta.speaker_id] = &r;
    std::set<std::pair<std::string, std::string>> degenerate;
    for (const auto& f : profile_findings)
        if (f.code == "degenerate_variance") {
            const auto feature = f.message.substr(0, f.message.find(' '));
            degenerate.emplace(f.speaker_id, feature);
        }

    LedgerCheck out;
    for (const auto& e : ledger.entries) {
        if (e.backbone_id != corpus.backbone_id()) continue;
        const auto spk = corpus.speaker_index(e.speaker_id);
        auto row = by_speaker.find(e.speaker_id);
        if (!spk || row == by_speaker.end()) {
            out.missing += kSegmentalCount;
            out.findings.push_back("speaker " + e.speaker_id + " has no profile row");
            continue;
        }
        const FeatureConfig fc = synth_feature_config(corpus.speaker(*spk).language);
        std::array<ClassCount, kSegmentalCount> counts{};
        for (std::size_t u : corpus.utterances_of(*spk))
            for (const auto& p : corpus.utterances()[u].phones)
                for (std::size_t f = 0; f < kSegmentalCount; ++f) {
                    if (fc.classes[f]->pos.contains(p.label)) ++counts[f].pos;
                    if (fc.classes[f]->neg.contains(p.label)) ++counts[f].neg;
                }
        for (std::size_t f = 0; f < kSegmentalCount; ++f) {
            const auto name = std::string(feature_name(feature_at(f)));
            const auto& est = row->second->profile.values[f];
            if (!est) {
                if (degenerate.contains({e.speaker_id, name}))
                    ++out.degenerate;
                else
                    ++out.missing;
                continue;
            }
            ++out.cells;
            const double se = dprime_standard_error(e.true_dprime[f], counts[f].pos, counts[f].neg);
            if (std::abs(*est - e.true_dprime[f]) <= policy.n_se * se)
                ++out.within;
            else
                out.findings.push_back(e.speaker_id + " " + name + ": estimate " + std::to_string(*est) +
                                       " vs true " + std::to_string(e.true_dprime[f]) + " (se " +
                                       std::to_string(se) + ")");
        }
    }
    out.fraction = out.cells ? static_cast<double>(out.within) / static_cast<double>(out.cells) : 0.0;
    out.passed = out.cells > 0 && out.fraction >= policy.required_fraction;
    if (out.degenerate > 0)
        out.findings.push_back(std::to_string(out.degenerate) + " cells missing through degenerate variance");
    return out;
}

// --- profile-level generator ----------------------------------------------------

ProfileTable generate_profile_table(const ProfileSynthSpec& spec) {
    std::vector<ProfileRow> rows;
    std::size_t index = 0;
    for (const auto& cell : spec.cells) {
        auto means = spec.class_means.find(cell.aetiology);
        if (means == spec.class_means.end())
            fail(ErrorKind::SpecInvalid, "no class means for aetiology " + std::string(to_string(cell.aetiology)));
        const auto mult = spec.severity_multipliers.find(cell.severity);
        if (mult == spec.severity_multipliers.end()) fail(ErrorKind::SpecInvalid, "no severity multiplier");
        for (std::size_t k = 0; k < cell.n_speakers; ++k, ++index) {
            Rng rng = make_rng(spec.seed, {5, index});
            std::normal_distribution<double> noise(0.0, spec.noise_sd);
            std::normal_distribution<double> z(0.0, 1.0);
            ProfileRow r;
            r.meta.speaker_id = cell.dataset + "-p" + std::to_string(100000 + index).substr(1);
            r.meta.dataset = cell.dataset;
            r.meta.language = cell.language;
            r.meta.aetiology = cell.aetiology;
            r.meta.severity = cell.severity;
            r.meta.severity_source = cell.severity_source;
            const int ord = severity_ordinal(cell.severity).value_or(0);
            r.meta.ctc_conf = std::clamp(0.92 - 0.08 * ord + 0.03 * z(rng), 0.0, 1.0);
            if (cell.severity_source == SeveritySource::threshold)
                r.meta.intelligibility_pct = intelligibility_for(cell.severity, rng);
            r.profile.speaker_id = r.meta.speaker_id;
            r.profile.backbone_id = spec.backbone_id;
            r.profile.n_phones = 200 + uniform_index(rng, 800);
            auto& v = r.profile.values;
            for (std::size_t f = 0; f < kConsonantCount; ++f)
                v[f] = spec.base_dprime * means->second[f] * mult->second + noise(rng);
            for (std::size_t f = kConsonantCount; f < kSegmentalCount; ++f)
                v[f] = spec.base_dprime * mult->second + noise(rng);
            v[index_of(Feature::boundary_sharpness)] = 0.4 + 0.05 * z(rng);
            v[index_of(Feature::cross_position_cos)] = 0.6 + 0.05 * z(rng);
            v[index_of(Feature::vowel_triangle_area)] = std::max(0.0, 1.0 * mult->second + 0.1 * z(rng));
            v[index_of(Feature::speech_rate)] = std::max(0.5, 12.0 - 1.5 * ord + z(rng));
            v[index_of(Feature::pause_rate)] = std::clamp(0.2 + 0.05 * ord + 0.05 * z(rng), 0.0, 1.0);
            v[index_of(Feature::vowel_duration_cv)] = std::max(0.0, 0.3 + 0.05 * z(rng));
            rows.push_back(std::move(r));
        }
    }
    return ProfileTable(std::move(rows));
}

} // namespace phonoscope::synth
