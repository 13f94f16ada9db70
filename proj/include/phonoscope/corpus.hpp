#pragma once

// Corpus interchange layout:
//
//   <root>/manifest.json
//   <root>/tokens.tsv
//   <root>/embeddings/<backbone_id>/embeddings.phem
//   <root>/embeddings/<backbone_id>/rows.tsv

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "phonoscope/feature_config.hpp"
#include "phonoscope/phem.hpp"
#include "phonoscope/textgrid.hpp"
#include "phonoscope/types.hpp"

namespace phonoscope {

struct GeneratorInfo {
    std::uint64_t seed = 0;
    std::string spec_hash;

    bool operator==(const GeneratorInfo&) const = default;
};

struct Manifest {
    std::string corpus_name;
    std::string backbone_id;
    std::uint32_t dim = 0;
    // Dimensions of further backbones stored under embeddings/ (optional).
    std::map<std::string, std::uint32_t> backbone_dims;
    std::vector<SpeakerMeta> speakers;
    // Present on corpora written by the synthetic generator.
    std::optional<GeneratorInfo> generator;

    std::uint32_t dim_for(std::string_view backbone) const;
    bool operator==(const Manifest&) const = default;
};

Manifest parse_manifest(std::string_view json_text);
std::string dump_manifest(const Manifest& m);

enum class TierKind : std::uint8_t { phone, word };

struct TokenRow {
    std::string speaker_id;
    std::string utterance_id;
    TierKind tier = TierKind::phone;
    std::string label;
    double start_s = 0.0;
    double end_s = 0.0;

    bool operator==(const TokenRow&) const = default;
};

struct TokenTable {
    std::vector<TokenRow> rows;
    bool operator==(const TokenTable&) const = default;
};

TokenTable parse_tokens_tsv(std::string_view text);
// Sorted by utterance_id, tier, start_s; six decimals.
std::string dump_tokens_tsv(const TokenTable& t);

struct RowRef {
    std::string utterance_id;
    std::uint32_t token_ordinal = 0;

    bool operator==(const RowRef&) const = default;
};

struct EmbeddingStore {
    EmbeddingMatrix matrix;
    std::vector<RowRef> rows;  // rows[i] describes matrix row i

    bool operator==(const EmbeddingStore&) const = default;
};

std::vector<RowRef> parse_rows_tsv(std::string_view text);
std::string dump_rows_tsv(const std::vector<RowRef>& rows);

// Indexed view of one utterance. Phones and words are sorted by start time.
struct PhoneToken {
    std::string label;  // NFC
    double start_s = 0.0;
    double end_s = 0.0;
    std::int64_t row = -1;  // embedding row; -1 for empty-label intervals

    double duration() const noexcept { return end_s - start_s; }
    bool empty_label() const noexcept { return label.empty(); }
};

struct WordToken {
    std::string label;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct Utterance {
    std::string id;
    std::size_t speaker = 0;
    std::vector<PhoneToken> phones;
    std::vector<WordToken> words;
};

// Immutable after construction; safe to share across threads.
class Corpus {
public:
    Corpus(Manifest manifest, std::string backbone_id, TokenTable tokens, EmbeddingStore store);

    const Manifest& manifest() const noexcept { return manifest_; }
    const std::string& backbone_id() const noexcept { return backbone_id_; }
    const TokenTable& tokens() const noexcept { return tokens_; }
    const EmbeddingStore& store() const noexcept { return store_; }
    std::uint32_t dim() const noexcept { return store_.matrix.dim(); }

    std::size_t speaker_count() const noexcept { return manifest_.speakers.size(); }
    const SpeakerMeta& speaker(std::size_t i) const { return manifest_.speakers.at(i); }
    std::optional<std::size_t> speaker_index(std::string_view speaker_id) const;

    const std::vector<Utterance>& utterances() const noexcept { return utterances_; }
    std::span<const std::size_t> utterances_of(std::size_t speaker) const {
        return speaker_utterances_.at(speaker);
    }
    bool token_free(std::size_t speaker) const { return speaker_utterances_.at(speaker).empty(); }

    std::span<const float> embedding(std::int64_t row) const {
        return store_.matrix.row(static_cast<std::size_t>(row));
    }

private:
    Manifest manifest_;
    std::string backbone_id_;
    TokenTable tokens_;
    EmbeddingStore store_;
    std::vector<Utterance> utterances_;
    std::vector<std::vector<std::size_t>> speaker_utterances_;
    std::unordered_map<std::string, std::size_t> speaker_lookup_;
};

// Throws Error{MissingFile | RowCountMismatch | DimMismatch | OrphanToken | UnmappedRow |
// DuplicateRow | ManifestInvalid | MalformedFile}.
Corpus read_corpus(const std::filesystem::path& root, const std::string& backbone_id);

// Writes manifest.json, tokens.tsv and this corpus' backbone embeddings.
void write_corpus(const Corpus& corpus, const std::filesystem::path& root);
void write_embeddings(const std::filesystem::path& root, const std::string& backbone_id,
                      const EmbeddingStore& store);

enum class FindingLevel { info, warning, error };
std::string_view to_string(FindingLevel level) noexcept;

struct Finding {
    FindingLevel level = FindingLevel::info;
    std::string code;
    std::string speaker_id;  // empty for corpus-level findings
    std::string message;
};

struct ClassCount {
    std::size_t pos = 0;
    std::size_t neg = 0;
};

struct SpeakerTokenCounts {
    std::string speaker_id;
    std::size_t n_phones = 0;
    std::array<std::optional<ClassCount>, kSegmentalCount> classes;
};

struct ValidationReport {
    std::vector<Finding> findings;
    std::vector<SpeakerTokenCounts> counts;

    std::size_t count(FindingLevel level) const noexcept;
    bool has_errors() const noexcept { return count(FindingLevel::error) > 0; }
};

inline constexpr std::size_t kMinTokensPerClass = 5;

// Pure. Per-feature counts and min-token findings need the feature configs; pass an
// empty map to check only structural invariants.
ValidationReport validate_corpus(const Corpus& corpus, const FeatureConfigMap& configs = {});

// Count of non-empty phone tokens per speaker.
std::size_t phone_count(const Corpus& corpus, std::size_t speaker);

// Shorthand used by tests and adapters: turn one TextGrid into token rows.
std::vector<TokenRow> tokens_from_textgrid(const TierSet& tiers,
                                           const std::string& speaker_id,
                                           const std::string& utterance_id,
                                           std::string_view phone_tier = "phones",
                                           std::string_view word_tier = "words");

} // namespace phonoscope
