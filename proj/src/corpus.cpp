#include "phonoscope/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "json.hpp"

#include "phonoscope/error.hpp"
#include "phonoscope/unicode.hpp"

namespace phonoscope {

using nlohmann::json;

namespace {

constexpr double kTimeEps = 1e-9;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingFile, path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::IoError, "short write to " + path.string());
}

// Splits on '\n', dropping a trailing '\r' per line and a final empty line.
std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = line.find('\t', start);
        if (end == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, end - start));
        start = end + 1;
    }
}

double parse_seconds(std::string_view s, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        fail(ErrorKind::MalformedFile,
             "tokens.tsv line " + std::to_string(line_no) + ": bad time '" + std::string(s) + "'");
    return v;
}

std::uint64_t parse_uint(std::string_view s, const std::string& where) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        fail(ErrorKind::MalformedFile, where + ": bad integer '" + std::string(s) + "'");
    return v;
}

std::string fixed6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

std::string_view tier_name(TierKind t) { return t == TierKind::phone ? "phone" : "word"; }

} // namespace

// --- manifest ---------------------------------------------------------------

std::uint32_t Manifest::dim_for(std::string_view backbone) const {
    if (backbone != backbone_id) {
        auto it = backbone_dims.find(std::string(backbone));
        if (it != backbone_dims.end()) return it->second;
    }
    return dim;
}

Manifest parse_manifest(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrorKind::ManifestInvalid, std::string("manifest.json: ") + e.what());
    }
    try {
        Manifest m;
        m.corpus_name = j.at("corpus_name").get<std::string>();
        m.backbone_id = j.at("backbone_id").get<std::string>();
        const auto dim = j.at("dim").get<std::int64_t>();
        if (m.backbone_id.empty()) fail(ErrorKind::ManifestInvalid, "backbone_id is empty");
        if (dim < 1 || dim > UINT32_MAX) fail(ErrorKind::ManifestInvalid, "dim must be >= 1");
        m.dim = static_cast<std::uint32_t>(dim);
        if (j.contains("backbone_dims")) {
            for (const auto& [k, v] : j["backbone_dims"].items()) {
                const auto d = v.get<std::int64_t>();
                if (d < 1 || d > UINT32_MAX)
                    fail(ErrorKind::ManifestInvalid, "backbone_dims." + k + " must be >= 1");
                m.backbone_dims[k] = static_cast<std::uint32_t>(d);
            }
        }
        if (j.contains("generator")) {
            GeneratorInfo g;
            g.seed = j["generator"].at("seed").get<std::uint64_t>();
            g.spec_hash = j["generator"].at("spec_hash").get<std::string>();
            m.generator = g;
        }
        std::set<std::string> seen;
        for (const auto& js : j.at("speakers")) {
            SpeakerMeta s;
            s.speaker_id = js.at("speaker_id").get<std::string>();
            s.dataset = js.at("dataset").get<std::string>();
            s.language = js.at("language").get<std::string>();
            const auto id = s.speaker_id;
            if (id.empty()) fail(ErrorKind::ManifestInvalid, "empty speaker_id");
            if (!seen.insert(id).second)
                fail(ErrorKind::ManifestInvalid, "duplicate speaker_id '" + id + "'");
            const auto a = parse_aetiology(js.at("aetiology").get<std::string>());
            const auto sev = parse_severity(js.at("severity").get<std::string>());
            const auto src = parse_severity_source(js.at("severity_source").get<std::string>());
            if (!a) fail(ErrorKind::ManifestInvalid, id + ": unknown aetiology");
            if (!sev) fail(ErrorKind::ManifestInvalid, id + ": unknown severity");
            if (!src) fail(ErrorKind::ManifestInvalid, id + ": unknown severity_source");
            s.aetiology = *a;
            s.severity = *sev;
            s.severity_source = *src;
            if (js.contains("intelligibility_pct") && !js["intelligibility_pct"].is_null()) {
                const double v = js["intelligibility_pct"].get<double>();
                if (!(v >= 0.0 && v <= 100.0))
                    fail(ErrorKind::ManifestInvalid, id + ": intelligibility_pct outside [0,100]");
                s.intelligibility_pct = v;
            }
            if (js.contains("ctc_conf") && !js["ctc_conf"].is_null()) {
                const double v = js["ctc_conf"].get<double>();
                if (!(v >= 0.0 && v <= 1.0))
                    fail(ErrorKind::ManifestInvalid, id + ": ctc_conf outside [0,1]");
                s.ctc_conf = v;
            }
            if (s.severity_source == SeveritySource::threshold && !s.intelligibility_pct)
                fail(ErrorKind::ManifestInvalid,
                     id + ": severity_source=threshold requires intelligibility_pct");
            m.speakers.push_back(std::move(s));
        }
        return m;
    } catch (const json::exception& e) {
        fail(ErrorKind::ManifestInvalid, std::string("manifest.json: ") + e.what());
    }
}

std::string dump_manifest(const Manifest& m) {
    json j;
    j["corpus_name"] = m.corpus_name;
    j["backbone_id"] = m.backbone_id;
    j["dim"] = m.dim;
    if (!m.backbone_dims.empty()) j["backbone_dims"] = m.backbone_dims;
    if (m.generator) j["generator"] = {{"seed", m.generator->seed}, {"spec_hash", m.generator->spec_hash}};
    j["speakers"] = json::array();
    for (const auto& s : m.speakers) {
        json js{{"speaker_id", s.speaker_id},
                {"dataset", s.dataset},
                {"language", s.language},
                {"aetiology", to_string(s.aetiology)},
                {"severity", to_string(s.severity)},
                {"severity_source", to_string(s.severity_source)}};
        if (s.intelligibility_pct) js["intelligibility_pct"] = *s.intelligibility_pct;
        if (s.ctc_conf) js["ctc_conf"] = *s.ctc_conf;
        j["speakers"].push_back(std::move(js));
    }
    return j.dump(2) + "\n";
}

// --- tokens.tsv -------------------------------------------------------------

static constexpr std::string_view kTokensHeader =
    "speaker_id\tutterance_id\ttier\tlabel\tstart_s\tend_s";

TokenTable parse_tokens_tsv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != kTokensHeader)
        fail(ErrorKind::MalformedFile, "tokens.tsv header must be: " + std::string(kTokensHeader));
    TokenTable t;
    t.rows.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_tabs(lines[i]);
        if (f.size() != 6)
            fail(ErrorKind::MalformedFile,
                 "tokens.tsv line " + std::to_string(i + 1) + ": expected 6 columns");
        TokenRow r;
        r.speaker_id = f[0];
        r.utterance_id = f[1];
        if (f[2] == "phone")
            r.tier = TierKind::phone;
        else if (f[2] == "word")
            r.tier = TierKind::word;
        else
            fail(ErrorKind::MalformedFile,
                 "tokens.tsv line " + std::to_string(i + 1) + ": tier must be phone or word");
        r.label = f[3];
        r.start_s = parse_seconds(f[4], i + 1);
        r.end_s = parse_seconds(f[5], i + 1);
        t.rows.push_back(std::move(r));
    }
    return t;
}

std::string dump_tokens_tsv(const TokenTable& t) {
    std::vector<const TokenRow*> order;
    order.reserve(t.rows.size());
    for (const auto& r : t.rows) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const TokenRow* a, const TokenRow* b) {
        if (a->utterance_id != b->utterance_id) return a->utterance_id < b->utterance_id;
        if (a->tier != b->tier) return a->tier < b->tier;
        return a->start_s < b->start_s;
    });
    std::string out(kTokensHeader);
    out += "\n";
    for (const TokenRow* r : order) {
        for (const std::string* s : {&r->speaker_id, &r->utterance_id, &r->label})
            if (s->find_first_of("\t\n\r") != std::string::npos)
                fail(ErrorKind::InvalidArgument, "token field contains a tab or newline");
        out += r->speaker_id;
        out += '\t';
        out += r->utterance_id;
        out += '\t';
        out += tier_name(r->tier);
        out += '\t';
        out += r->label;
        out += '\t';
        out += fixed6(r->start_s);
        out += '\t';
        out += fixed6(r->end_s);
        out += '\n';
    }
    return out;
}

// --- rows.tsv ---------------------------------------------------------------

static constexpr std::string_view kRowsHeader = "row\tutterance_id\ttoken_ordinal";

std::vector<RowRef> parse_rows_tsv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != kRowsHeader)
        fail(ErrorKind::MalformedFile, "rows.tsv header must be: " + std::string(kRowsHeader));
    std::vector<RowRef> rows;
    rows.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_tabs(lines[i]);
        const std::string where = "rows.tsv line " + std::to_string(i + 1);
        if (f.size() != 3) fail(ErrorKind::MalformedFile, where + ": expected 3 columns");
        if (parse_uint(f[0], where) != rows.size())
            fail(ErrorKind::MalformedFile, where + ": row indices must be 0, 1, 2, ...");
        const std::uint64_t ordinal = parse_uint(f[2], where);
        if (ordinal > UINT32_MAX) fail(ErrorKind::MalformedFile, where + ": ordinal too large");
        rows.push_back(RowRef{std::string(f[1]), static_cast<std::uint32_t>(ordinal)});
    }
    return rows;
}

std::string dump_rows_tsv(const std::vector<RowRef>& rows) {
    std::string out(kRowsHeader);
    out += "\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
        out += std::to_string(i) + "\t" + rows[i].utterance_id + "\t" +
               std::to_string(rows[i].token_ordinal) + "\n";
    return out;
}

// --- Corpus -----------------------------------------------------------------

Corpus::Corpus(Manifest manifest, std::string backbone_id, TokenTable tokens, EmbeddingStore store)
    : manifest_(std::move(manifest)),
      backbone_id_(std::move(backbone_id)),
      tokens_(std::move(tokens)),
      store_(std::move(store)) {
    if (store_.rows.size() != store_.matrix.n_rows())
        fail(ErrorKind::RowCountMismatch,
             "rows.tsv has " + std::to_string(store_.rows.size()) + " rows, embeddings have " +
                 std::to_string(store_.matrix.n_rows()));
    const std::uint32_t expected_dim = manifest_.dim_for(backbone_id_);
    if (store_.matrix.dim() != expected_dim)
        fail(ErrorKind::DimMismatch, "embeddings for '" + backbone_id_ + "' have dim " +
                                         std::to_string(store_.matrix.dim()) + ", manifest says " +
                                         std::to_string(expected_dim));

    for (std::size_t i = 0; i < manifest_.speakers.size(); ++i)
        speaker_lookup_.emplace(manifest_.speakers[i].speaker_id, i);
    speaker_utterances_.resize(manifest_.speakers.size());

    std::map<std::string, std::size_t> utt_index;
    for (const auto& row : tokens_.rows) {
        auto spk = speaker_lookup_.find(row.speaker_id);
        if (spk == speaker_lookup_.end())
            fail(ErrorKind::ManifestInvalid,
                 "token speaker '" + row.speaker_id + "' is not in the manifest");
        auto [it, inserted] = utt_index.emplace(row.utterance_id, utt_index.size());
        if (inserted) {
            Utterance u;
            u.id = row.utterance_id;
            u.speaker = spk->second;
            utterances_.push_back(std::move(u));
        }
        Utterance& u = utterances_[it->second];
        if (u.speaker != spk->second)
            fail(ErrorKind::MalformedFile,
                 "utterance '" + row.utterance_id + "' has tokens from two speakers");
        if (row.tier == TierKind::phone)
            u.phones.push_back(PhoneToken{nfc(row.label), row.start_s, row.end_s, -1});
        else
            u.words.push_back(WordToken{nfc(row.label), row.start_s, row.end_s});
    }

    // Order utterances by id and their tokens by start time.
    std::sort(utterances_.begin(), utterances_.end(),
              [](const Utterance& a, const Utterance& b) { return a.id < b.id; });
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < utterances_.size(); ++i) {
        auto& u = utterances_[i];
        std::stable_sort(u.phones.begin(), u.phones.end(),
                         [](const PhoneToken& a, const PhoneToken& b) { return a.start_s < b.start_s; });
        std::stable_sort(u.words.begin(), u.words.end(),
                         [](const WordToken& a, const WordToken& b) { return a.start_s < b.start_s; });
        position.emplace(u.id, i);
        speaker_utterances_[u.speaker].push_back(i);
    }

    std::vector<std::vector<std::size_t>> ordinal_to_phone(utterances_.size());
    for (std::size_t i = 0; i < utterances_.size(); ++i)
        for (std::size_t p = 0; p < utterances_[i].phones.size(); ++p)
            if (!utterances_[i].phones[p].empty_label()) ordinal_to_phone[i].push_back(p);

    for (std::size_t r = 0; r < store_.rows.size(); ++r) {
        const RowRef& ref = store_.rows[r];
        auto it = position.find(ref.utterance_id);
        if (it == position.end() || ref.token_ordinal >= ordinal_to_phone[it->second].size())
            fail(ErrorKind::UnmappedRow, "embedding row " + std::to_string(r) + " (" +
                                             ref.utterance_id + ", " +
                                             std::to_string(ref.token_ordinal) +
                                             ") matches no phone token");
        PhoneToken& token = utterances_[it->second].phones[ordinal_to_phone[it->second][ref.token_ordinal]];
        if (token.row >= 0)
            fail(ErrorKind::DuplicateRow, "phone token (" + ref.utterance_id + ", " +
                                              std::to_string(ref.token_ordinal) +
                                              ") has two embedding rows");
        token.row = static_cast<std::int64_t>(r);
    }
    for (const auto& u : utterances_)
        for (std::size_t k = 0; k < u.phones.size(); ++k)
            if (!u.phones[k].empty_label() && u.phones[k].row < 0)
                fail(ErrorKind::OrphanToken, "phone '" + u.phones[k].label + "' at " +
                                                 fixed6(u.phones[k].start_s) + " s in '" + u.id +
                                                 "' has no embedding row");
}

std::optional<std::size_t> Corpus::speaker_index(std::string_view speaker_id) const {
    auto it = speaker_lookup_.find(std::string(speaker_id));
    if (it == speaker_lookup_.end()) return std::nullopt;
    return it->second;
}

Corpus read_corpus(const std::filesystem::path& root, const std::string& backbone_id) {
    const auto emb_dir = root / "embeddings" / backbone_id;
    for (const auto& p : {root / "manifest.json", root / "tokens.tsv", emb_dir / "embeddings.phem",
                          emb_dir / "rows.tsv"})
        if (!std::filesystem::is_regular_file(p)) fail(ErrorKind::MissingFile, p.string());
    Manifest manifest = parse_manifest(read_file(root / "manifest.json"));
    TokenTable tokens = parse_tokens_tsv(read_file(root / "tokens.tsv"));
    EmbeddingStore store;
    store.matrix = read_phem(emb_dir / "embeddings.phem");
    store.rows = parse_rows_tsv(read_file(emb_dir / "rows.tsv"));
    return Corpus(std::move(manifest), backbone_id, std::move(tokens), std::move(store));
}

void write_embeddings(const std::filesystem::path& root, const std::string& backbone_id,
                      const EmbeddingStore& store) {
    const auto dir = root / "embeddings" / backbone_id;
    std::filesystem::create_directories(dir);
    write_phem(dir / "embeddings.phem", store.matrix);
    write_file(dir / "rows.tsv", dump_rows_tsv(store.rows));
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    write_file(root / "manifest.json", dump_manifest(corpus.manifest()));
    write_file(root / "tokens.tsv", dump_tokens_tsv(corpus.tokens()));
    write_embeddings(root, corpus.backbone_id(), corpus.store());
}

// --- validation ---------------------------------------------------------------

std::string_view to_string(FindingLevel level) noexcept {
    switch (level) {
    case FindingLevel::info: return "info";
    case FindingLevel::warning: return "warning";
    case FindingLevel::error: return "error";
    }
    return "info";
}

std::size_t ValidationReport::count(FindingLevel level) const noexcept {
    return static_cast<std::size_t>(std::count_if(
        findings.begin(), findings.end(), [level](const Finding& f) { return f.level == level; }));
}

std::size_t phone_count(const Corpus& corpus, std::size_t speaker) {
    std::size_t n = 0;
    for (std::size_t u : corpus.utterances_of(speaker))
        for (const auto& p : corpus.utterances()[u].phones)
            if (!p.empty_label()) ++n;
    return n;
}

namespace {

template <typename Token>
void check_intervals(const std::vector<Token>& tokens, const Utterance& u, std::string_view tier,
                     const std::string& speaker_id, std::vector<Finding>& out) {
    double previous_end = -INFINITY;
    for (const auto& t : tokens) {
        if (!(t.end_s > t.start_s))
            out.push_back({FindingLevel::error, "interval_order", speaker_id,
                           std::string(tier) + " interval at " + fixed6(t.start_s) + " s in '" +
                               u.id + "' has end_s <= start_s"});
        else if (t.start_s < previous_end - kTimeEps)
            out.push_back({FindingLevel::error, "interval_overlap", speaker_id,
                           std::string(tier) + " interval at " + fixed6(t.start_s) + " s in '" +
                               u.id + "' overlaps its predecessor"});
        previous_end = std::max(previous_end, t.end_s);
    }
}

} // namespace

ValidationReport validate_corpus(const Corpus& corpus, const FeatureConfigMap& configs) {
    ValidationReport report;
    auto& findings = report.findings;

    const auto& matrix = corpus.store().matrix;
    for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
        const auto row = matrix.row(r);
        if (std::any_of(row.begin(), row.end(), [](float v) { return !std::isfinite(v); })) {
            const auto& ref = corpus.store().rows[r];
            findings.push_back({FindingLevel::error, "non_finite_embedding", "",
                                "embedding row " + std::to_string(r) + " (" + ref.utterance_id +
                                    ", " + std::to_string(ref.token_ordinal) +
                                    ") contains NaN or Inf"});
        }
    }

    for (const auto& u : corpus.utterances()) {
        const auto& spk = corpus.speaker(u.speaker).speaker_id;
        check_intervals(u.phones, u, "phone", spk, findings);
        check_intervals(u.words, u, "word", spk, findings);
    }

    std::set<std::string> missing_languages;
    for (std::size_t s = 0; s < corpus.speaker_count(); ++s) {
        const SpeakerMeta& meta = corpus.speaker(s);
        SpeakerTokenCounts counts;
        counts.speaker_id = meta.speaker_id;
        counts.n_phones = phone_count(corpus, s);
        if (corpus.token_free(s))
            findings.push_back({FindingLevel::warning, "token_free", meta.speaker_id,
                                "speaker " + meta.speaker_id + " has no tokens"});

        auto cfg = configs.find(meta.language);
        if (cfg == configs.end()) {
            if (!configs.empty() && missing_languages.insert(meta.language).second)
                findings.push_back({FindingLevel::warning, "missing_feature_config", "",
                                    "no feature config for language '" + meta.language + "'"});
            report.counts.push_back(std::move(counts));
            continue;
        }
        const FeatureConfig& fc = cfg->second;
        for (std::size_t f = 0; f < kSegmentalCount; ++f) {
            const auto& pc = fc.classes[f];
            if (!pc) continue;
            ClassCount cc;
            for (std::size_t u : corpus.utterances_of(s))
                for (const auto& p : corpus.utterances()[u].phones) {
                    if (pc->pos.contains(p.label)) ++cc.pos;
                    if (pc->neg.contains(p.label)) ++cc.neg;
                }
            counts.classes[f] = cc;
            const std::size_t low = std::min(cc.pos, cc.neg);
            if (low < kMinTokensPerClass && !corpus.token_free(s))
                findings.push_back({FindingLevel::warning, "min_tokens", meta.speaker_id,
                                    "feature " + std::string(feature_name(feature_at(f))) +
                                        " unavailable for " + meta.speaker_id + " (" +
                                        std::to_string(low) + " < " +
                                        std::to_string(kMinTokensPerClass) + " per class)"});
        }
        report.counts.push_back(std::move(counts));
    }
    return report;
}

std::vector<TokenRow> tokens_from_textgrid(const TierSet& tiers, const std::string& speaker_id,
                                           const std::string& utterance_id,
                                           std::string_view phone_tier,
                                           std::string_view word_tier) {
    const TextGridTier* phones = tiers.find(phone_tier);
    if (!phones)
        fail(ErrorKind::MalformedTextGrid, "no tier named '" + std::string(phone_tier) + "'");
    std::vector<TokenRow> out;
    for (const auto& iv : phones->intervals)
        out.push_back({speaker_id, utterance_id, TierKind::phone, iv.label, iv.xmin, iv.xmax});
    if (const TextGridTier* words = tiers.find(word_tier))
        for (const auto& iv : words->intervals)
            out.push_back({speaker_id, utterance_id, TierKind::word, iv.label, iv.xmin, iv.xmax});
    return out;
}

} // namespace phonoscope
