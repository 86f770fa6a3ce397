#include "sneuron/corpus.hpp"

#include "sneuron/error.hpp"
#include "sneuron/io_util.hpp"

#include <cctype>
#include <unordered_set>

namespace sneuron {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{"<unk>", "<bos>"}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2) fail(ErrorKind::Input, "vocabulary needs at least UNK and BOS entries");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
        if (!inserted) {
            fail(ErrorKind::Input, "duplicate vocabulary entry '" + tokens_[i] + "' on line " + std::to_string(i + 1));
        }
    }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    auto lines = read_lines(path);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return Vocabulary(std::move(lines));
}

std::string Vocabulary::to_file_text() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    return out;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const { return find(token).value_or(kUnkId); }

namespace {

// Decodes one code point starting at s[i]; returns its byte length or 0 when
// the sequence is malformed.
std::size_t utf8_sequence(std::string_view s, std::size_t i, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t min = 0;
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
        min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
        min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
        min = 0x10000;
    } else {
        return 0;
    }
    if (i + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    return len;
}

bool is_ascii_space(char32_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r'; }

} // namespace

std::size_t utf8_length(std::string_view s, std::size_t line_number) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.size();) {
        char32_t cp = 0;
        const std::size_t n = utf8_sequence(s, i, cp);
        if (n == 0) {
            fail(ErrorKind::Input, "invalid UTF-8 on line " + std::to_string(line_number) + " at byte " +
                                       std::to_string(i));
        }
        i += n;
        ++count;
    }
    return count;
}

double symbol_fraction(std::string_view s) {
    std::size_t total = 0;
    std::size_t symbols = 0;
    for (std::size_t i = 0; i < s.size();) {
        char32_t cp = 0;
        std::size_t n = utf8_sequence(s, i, cp);
        if (n == 0) n = 1;
        i += n;
        ++total;
        if (cp < 0x80 && !is_ascii_space(cp) && !std::isalnum(static_cast<int>(cp))) ++symbols;
    }
    return total == 0 ? 0.0 : static_cast<double>(symbols) / static_cast<double>(total);
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (is_ascii_space(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

PreprocessResult preprocess(const std::vector<std::string>& raw, const PreprocessOptions& options) {
    PreprocessResult result;
    result.report.input_lines = raw.size();
    std::unordered_set<std::string> seen;
    for (std::size_t n = 0; n < raw.size(); ++n) {
        const std::string& line = raw[n];
        const std::size_t length = utf8_length(line, n + 1);
        std::string key = normalize_whitespace(line);
        if (key.empty()) {
            ++result.report.blank;
            continue;
        }
        if (length > options.max_chars) {
            ++result.report.too_long;
            continue;
        }
        if (!seen.insert(std::move(key)).second) {
            ++result.report.duplicate;
            continue;
        }
        if (symbol_fraction(line) > options.max_symbol_fraction) {
            ++result.report.symbol_heavy;
            continue;
        }
        result.lines.push_back(line);
        result.line_numbers.push_back(n + 1);
    }
    result.report.kept = result.lines.size();
    return result;
}

std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) words.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : line) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_ascii_space(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            words.emplace_back(1, ch);
        } else {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    return words;
}

std::vector<TokenId> tokenize(std::string_view line, const Vocabulary& vocab) {
    std::vector<TokenId> ids{kBosId};
    for (const auto& w : split_words(line)) ids.push_back(vocab.id_or_unk(w));
    return ids;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab) {
    static constexpr std::string_view kClosing = ",.!?;:)]}%";
    static constexpr std::string_view kOpening = "([{";
    std::string out;
    bool glue_next = true;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i == 0 && tokens[i] == kBosId) continue;
        const std::string& t = vocab.token(tokens[i]);
        const bool closing = t.size() == 1 && kClosing.find(t[0]) != std::string_view::npos;
        if (!glue_next && !closing) out.push_back(' ');
        out += t;
        glue_next = t.size() == 1 && kOpening.find(t[0]) != std::string_view::npos;
    }
    return out;
}

StyleCorpus make_corpus(std::string label, const std::vector<std::string>& lines,
                        const std::vector<std::size_t>& line_numbers, const Vocabulary& vocab) {
    StyleCorpus c;
    c.label = std::move(label);
    c.sentences.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        c.sentences.push_back(tokenize(lines[i], vocab));
        c.line_numbers.push_back(i < line_numbers.size() ? line_numbers[i] : i + 1);
    }
    return c;
}

std::set<TokenId> load_lexicon(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::set<TokenId> ids;
    const auto lines = read_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::string tok = normalize_whitespace(lines[n]);
        if (tok.empty()) continue;
        auto id = vocab.find(tok);
        if (!id) {
            fail(ErrorKind::Input, "lexicon '" + path.string() + "' line " + std::to_string(n + 1) + ": token '" + tok +
                                       "' not in vocabulary");
        }
        ids.insert(*id);
    }
    return ids;
}

} // namespace sneuron
