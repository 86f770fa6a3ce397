#pragma once

// Style corpora: preprocessing, word-level tokenization and vocabularies.
//
// Vocabulary file: one token per line, id = line number - 1. Line 1 is the
// unknown token and line 2 the BOS token.

#include "sneuron/model.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sneuron {

inline constexpr TokenId kUnkId = 0;
inline constexpr TokenId kBosId = 1;

class Vocabulary {
public:
    Vocabulary();
    // tokens[0] and tokens[1] are taken as UNK and BOS. Throws Input error on
    // duplicates or fewer than two entries.
    explicit Vocabulary(std::vector<std::string> tokens);

    static Vocabulary load(const std::filesystem::path& path);
    std::string to_file_text() const;

    std::size_t size() const { return tokens_.size(); }
    std::optional<TokenId> find(std::string_view token) const;
    TokenId id_or_unk(std::string_view token) const;
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

struct PreprocessOptions {
    std::size_t max_chars = 120;
    double max_symbol_fraction = 0.3;
};

struct PreprocessReport {
    std::size_t input_lines = 0;
    std::size_t kept = 0;
    std::size_t blank = 0;        // empty after trimming
    std::size_t too_long = 0;     // rule 1
    std::size_t duplicate = 0;    // rule 2
    std::size_t symbol_heavy = 0; // rule 3
};

struct PreprocessResult {
    std::vector<std::string> lines;
    std::vector<std::size_t> line_numbers; // 1-based, into the raw input
    PreprocessReport report;
};

// Rules are checked in order: blank, length > max_chars (code points),
// duplicate after whitespace normalisation (first kept), symbol fraction >
// max_symbol_fraction. Each rejected line is counted under the first rule it
// fails. Invalid UTF-8 raises an Input error naming the line.
PreprocessResult preprocess(const std::vector<std::string>& raw, const PreprocessOptions& options = {});

// Number of Unicode code points; throws Input error on malformed UTF-8.
std::size_t utf8_length(std::string_view s, std::size_t line_number = 0);

// Fraction of code points that are neither alphanumeric nor whitespace.
// Non-ASCII code points count as letters.
double symbol_fraction(std::string_view s);

// Collapse runs of whitespace to one space and trim.
std::string normalize_whitespace(std::string_view s);

// Lowercased words with every ASCII punctuation character split into its own
// piece.
std::vector<std::string> split_words(std::string_view line);

// BOS followed by the ids of split_words(line); unknown words map to UNK.
std::vector<TokenId> tokenize(std::string_view line, const Vocabulary& vocab);

// Inverse of tokenize up to whitespace: BOS dropped, closing punctuation
// attached to the preceding word.
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);

struct StyleCorpus {
    std::string label;
    std::vector<std::vector<TokenId>> sentences;
    std::vector<std::size_t> line_numbers;
};

StyleCorpus make_corpus(std::string label, const std::vector<std::string>& lines,
                        const std::vector<std::size_t>& line_numbers, const Vocabulary& vocab);

// One token string per line; blank lines ignored. Unknown tokens raise an
// Input error.
std::set<TokenId> load_lexicon(const std::filesystem::path& path, const Vocabulary& vocab);

} // namespace sneuron
