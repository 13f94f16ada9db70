#include "phonoscope/textgrid.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "phonoscope/error.hpp"
#include "phonoscope/report.hpp"

namespace phonoscope {

namespace {

constexpr double kTimeEps = 1e-9;

class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {
        if (text_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
    }

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    bool peek_literal(std::string_view lit) {
        skip_ws();
        return text_.substr(pos_, lit.size()) == lit;
    }

    bool try_literal(std::string_view lit) {
        if (!peek_literal(lit)) return false;
        pos_ += lit.size();
        return true;
    }

    void expect(std::string_view lit) {
        if (!try_literal(lit)) malformed("expected '" + std::string(lit) + "'");
    }

    // key = <number>
    double number_field(std::string_view key) {
        expect(key);
        expect("=");
        return read_number();
    }

    // key = "<string>"
    std::string string_field(std::string_view key) {
        expect(key);
        expect("=");
        return read_string();
    }

    double read_number() {
        skip_ws();
        std::size_t end = pos_;
        while (end < text_.size() && !std::isspace(static_cast<unsigned char>(text_[end])))
            ++end;
        double value = 0.0;
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + end;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last || !std::isfinite(value))
            malformed("expected a number");
        pos_ = end;
        return value;
    }

    std::size_t read_count() {
        const double v = read_number();
        if (v < 0 || v != std::floor(v) || v > 1e9) malformed("expected a non-negative count");
        return static_cast<std::size_t>(v);
    }

    // Praat strings: "..." with "" as an escaped quote; may span lines.
    std::string read_string() {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '"') malformed("expected a quoted string");
        ++pos_;
        std::string out;
        while (true) {
            if (pos_ >= text_.size()) malformed("unterminated string");
            const char c = text_[pos_++];
            if (c == '"') {
                if (pos_ < text_.size() && text_[pos_] == '"') {
                    out.push_back('"');
                    ++pos_;
                    continue;
                }
                return out;
            }
            if (c == '\n') ++line_;
            out.push_back(c);
        }
    }

    // "<word> [<index>]:"
    void expect_indexed(std::string_view word, std::size_t index) {
        expect(word);
        expect("[");
        if (read_index() != index) malformed("unexpected " + std::string(word) + " index");
        expect("]");
        expect(":");
    }

    [[noreturn]] void malformed(const std::string& what) const {
        fail(ErrorKind::MalformedTextGrid, what + " at line " + std::to_string(line_));
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t read_index() {
        skip_ws();
        std::size_t end = pos_;
        while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + end, value);
        if (ec != std::errc{} || ptr == text_.data() + pos_) malformed("expected an index");
        pos_ = end;
        return value;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

void check_monotone(const TextGridTier& tier) {
    double previous_end = -INFINITY;
    for (std::size_t j = 0; j < tier.intervals.size(); ++j) {
        const auto& iv = tier.intervals[j];
        if (!(iv.xmax > iv.xmin))
            fail(ErrorKind::NonMonotoneIntervals,
                 "tier '" + tier.name + "' interval " + std::to_string(j + 1) +
                     " has xmax <= xmin");
        if (iv.xmin < previous_end - kTimeEps)
            fail(ErrorKind::NonMonotoneIntervals,
                 "tier '" + tier.name + "' interval " + std::to_string(j + 1) +
                     " overlaps or precedes its predecessor");
        previous_end = iv.xmax;
    }
}

void parse_interval_tier(Cursor& in, TextGridTier& tier) {
    in.expect("intervals:");
    in.expect("size");
    in.expect("=");
    const std::size_t count = in.read_count();
    for (std::size_t j = 1; j <= count; ++j) {
        if (in.at_end() || in.peek_literal("item"))
            fail(ErrorKind::TruncatedTier, "tier '" + tier.name + "' declares " +
                                               std::to_string(count) + " intervals, found " +
                                               std::to_string(j - 1));
        in.expect_indexed("intervals", j);
        TextGridInterval iv;
        iv.xmin = in.number_field("xmin");
        iv.xmax = in.number_field("xmax");
        iv.label = in.string_field("text");
        tier.intervals.push_back(std::move(iv));
    }
    check_monotone(tier);
}

void skip_point_tier(Cursor& in, const std::string& name) {
    in.expect("points:");
    in.expect("size");
    in.expect("=");
    const std::size_t count = in.read_count();
    for (std::size_t j = 1; j <= count; ++j) {
        if (in.at_end() || in.peek_literal("item"))
            fail(ErrorKind::TruncatedTier, "point tier '" + name + "' is truncated");
        in.expect_indexed("points", j);
        if (in.peek_literal("number"))
            in.number_field("number");
        else
            in.number_field("time");
        in.string_field("mark");
    }
}

} // namespace

const TextGridTier* TierSet::find(std::string_view name) const noexcept {
    for (const auto& t : tiers)
        if (t.name == name) return &t;
    return nullptr;
}

TierSet parse_textgrid(std::string_view text) {
    Cursor in(text);
    if (!in.try_literal("File type = \"ooTextFile\""))
        fail(ErrorKind::MalformedHeader, "first line must be File type = \"ooTextFile\"");
    if (!in.try_literal("Object class = \"TextGrid\""))
        fail(ErrorKind::MalformedHeader, "second line must be Object class = \"TextGrid\"");

    // Short-form grids carry bare values where the long form has "xmin = ".
    if (!in.peek_literal("xmin"))
        fail(ErrorKind::MalformedHeader, "only long-form TextGrids are supported");

    TierSet out;
    out.xmin = in.number_field("xmin");
    out.xmax = in.number_field("xmax");
    in.expect("tiers?");
    if (in.try_literal("<absent>")) return out;
    in.expect("<exists>");
    in.expect("size");
    in.expect("=");
    const std::size_t n_tiers = in.read_count();
    in.expect("item");
    in.expect("[");
    in.expect("]");
    in.expect(":");

    for (std::size_t i = 1; i <= n_tiers; ++i) {
        if (in.at_end())
            fail(ErrorKind::TruncatedTier, "TextGrid declares " + std::to_string(n_tiers) +
                                               " tiers, found " + std::to_string(i - 1));
        in.expect_indexed("item", i);
        const std::string tier_class = in.string_field("class");
        TextGridTier tier;
        tier.name = in.string_field("name");
        tier.xmin = in.number_field("xmin");
        tier.xmax = in.number_field("xmax");
        if (tier_class == "IntervalTier") {
            parse_interval_tier(in, tier);
            out.tiers.push_back(std::move(tier));
        } else if (tier_class == "TextTier") {
            skip_point_tier(in, tier.name);
        } else {
            in.malformed("unknown tier class '" + tier_class + "'");
        }
    }
    return out;
}

namespace {

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string num(double x) {
    std::string s = format_number(x);
    return s.empty() ? "0" : s;
}

} // namespace

std::string write_textgrid(const TierSet& tiers) {
    std::ostringstream os;
    os << "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n";
    os << "xmin = " << num(tiers.xmin) << " \nxmax = " << num(tiers.xmax) << " \n";
    os << "tiers? <exists> \nsize = " << tiers.tiers.size() << " \nitem []: \n";
    for (std::size_t i = 0; i < tiers.tiers.size(); ++i) {
        const auto& t = tiers.tiers[i];
        os << "    item [" << i + 1 << "]:\n";
        os << "        class = \"IntervalTier\" \n";
        os << "        name = " << quote(t.name) << " \n";
        os << "        xmin = " << num(t.xmin) << " \n";
        os << "        xmax = " << num(t.xmax) << " \n";
        os << "        intervals: size = " << t.intervals.size() << " \n";
        for (std::size_t j = 0; j < t.intervals.size(); ++j) {
            const auto& iv = t.intervals[j];
            os << "        intervals [" << j + 1 << "]:\n";
            os << "            xmin = " << num(iv.xmin) << " \n";
            os << "            xmax = " << num(iv.xmax) << " \n";
            os << "            text = " << quote(iv.label) << " \n";
        }
    }
    return os.str();
}

} // namespace phonoscope
