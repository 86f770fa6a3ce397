#include "support.hpp"

#include "sneuron/corpus.hpp"
#include "sneuron/error.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sstream>

#include <string>
#include <vector>

using namespace sneuron;
using testing_support::TempDir;

namespace {

Vocabulary small_vocab() {
    return Vocabulary({"<unk>", "<bos>", "hello", "world", "good", "bad", ",", ".", "(", ")", "!"});
}

std::string repeat(const std::string& s, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += s;
    return out;
}

} // namespace

TEST_CASE("preprocess: length boundary counts code points") {
    const std::string at = repeat("a", 120);
    const std::string over = repeat("a", 121);
    const std::string wide = repeat("\xC3\xA9", 120); // 120 code points, 240 bytes
    const auto r = preprocess({over, at, wide});
    CHECK(r.report.too_long == 1);
    CHECK(r.report.kept == 2);
    REQUIRE(r.lines.size() == 2);
    CHECK(r.lines[0] == at);
    CHECK(r.lines[1] == wide);
    CHECK(r.line_numbers == std::vector<std::size_t>{2, 3});
    CHECK(utf8_length(wide) == 120);
}

TEST_CASE("preprocess: duplicates after whitespace normalisation") {
    const auto r = preprocess({"the cat sat", "the  cat\tsat", "  the cat sat ", "The cat sat", "the cat sat"});
    CHECK(r.report.duplicate == 3);
    CHECK(r.lines == std::vector<std::string>{"the cat sat", "The cat sat"});
    CHECK(r.line_numbers == std::vector<std::size_t>{1, 4});
}

TEST_CASE("preprocess: symbol fraction") {
    CHECK(symbol_fraction("@@@@ ####!!") == doctest::Approx(10.0 / 11.0));
    CHECK(symbol_fraction("abcdefg!!!") == doctest::Approx(0.3));
    CHECK(symbol_fraction("caf\xC3\xA9") == 0.0);
    const auto r = preprocess({"@@@@ ####!!", "abcdefg!!!", "abcdef!!!"});
    CHECK(r.report.symbol_heavy == 2);
    CHECK(r.lines == std::vector<std::string>{"abcdefg!!!"});
}

TEST_CASE("preprocess: blank lines and report totals") {
    const auto r = preprocess({"", "   ", "one line", "\t"});
    CHECK(r.report.input_lines == 4);
    CHECK(r.report.blank == 3);
    CHECK(r.report.kept == 1);
}

TEST_CASE("preprocess: invalid UTF-8 names the line") {
    try {
        preprocess({"fine", "bad \xC3 byte"});
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Input);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(utf8_length("\xE2\x82"), Error);
    CHECK_THROWS_AS(utf8_length("\xC0\x80"), Error);
}

TEST_CASE("preprocess is idempotent") {
    std::vector<std::string> raw{"  a  b ", "a b", repeat("x", 130), "!!!!", "c, d.", "", "c,  d."};
    const auto once = preprocess(raw);
    const auto twice = preprocess(once.lines);
    CHECK(twice.lines == once.lines);
    CHECK(twice.report.kept == once.report.kept);
}

TEST_CASE("preprocess: labelled fixture") {
    const std::string dir = SNEURON_FIXTURE_DIR;
    std::vector<std::string> raw;
    {
        std::istringstream in(testing_support::slurp(dir + "/preprocess_50.txt"));
        for (std::string line; std::getline(in, line);) raw.push_back(line);
    }
    const auto expected = nlohmann::json::parse(testing_support::slurp(dir + "/preprocess_50.expected.json"));
    const auto r = preprocess(raw);
    CHECK(r.report.input_lines == expected["input_lines"].get<std::size_t>());
    CHECK(r.report.kept == expected["kept"].get<std::size_t>());
    CHECK(r.report.too_long == expected["too_long"].get<std::size_t>());
    CHECK(r.report.duplicate == expected["duplicate"].get<std::size_t>());
    CHECK(r.report.symbol_heavy == expected["symbol_heavy"].get<std::size_t>());
    CHECK(r.line_numbers == expected["kept_line_numbers"].get<std::vector<std::size_t>>());
}

TEST_CASE("tokenize and detokenize") {
    const auto v = small_vocab();
    CHECK(tokenize("Hello world", v) == std::vector<TokenId>{kBosId, 2, 3});
    CHECK(tokenize("hello planet", v) == std::vector<TokenId>{kBosId, 2, kUnkId});
    CHECK(tokenize("good, bad", v) == std::vector<TokenId>{kBosId, 4, 6, 5});
    CHECK(tokenize("", v) == std::vector<TokenId>{kBosId});
    CHECK(split_words("Hi,there!") == std::vector<std::string>{"hi", ",", "there", "!"});

    for (const std::string s : {"good, bad", "hello world.", "hello (world) good!", "bad"}) {
        const auto t = tokenize(s, v);
        CHECK(detokenize(t, v) == s);
        CHECK(tokenize(detokenize(t, v), v) == t);
    }
    CHECK(normalize_whitespace("  a \t b\n ") == "a b");
}

TEST_CASE("vocabulary files") {
    TempDir dir("vocab");
    const auto v = small_vocab();
    testing_support::spit(dir / "v.txt", v.to_file_text() + "\n\n");
    const auto back = Vocabulary::load(dir / "v.txt");
    CHECK(back.tokens() == v.tokens());
    CHECK(back.find("world") == TokenId{3});
    CHECK(!back.find("planet"));

    CHECK_THROWS_AS(Vocabulary({"<unk>", "<bos>", "a", "a"}), Error);
    CHECK_THROWS_AS(Vocabulary({"<unk>"}), Error);
    testing_support::spit(dir / "dup.txt", "<unk>\n<bos>\nx\nx\n");
    CHECK_THROWS_AS(Vocabulary::load(dir / "dup.txt"), Error);
}

TEST_CASE("lexicon files") {
    TempDir dir("lex");
    const auto v = small_vocab();
    testing_support::spit(dir / "ok.txt", "hello\n\nbad\n");
    CHECK(load_lexicon(dir / "ok.txt", v) == std::set<TokenId>{2, 5});
    testing_support::spit(dir / "bad.txt", "hello\nplanet\n");
    try {
        load_lexicon(dir / "bad.txt", v);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Input);
        CHECK(std::string(e.what()).find("planet") != std::string::npos);
    }
}

TEST_CASE("make_corpus") {
    const auto v = small_vocab();
    const auto c = make_corpus("A", {"hello world", "bad"}, {3, 7}, v);
    CHECK(c.label == "A");
    REQUIRE(c.sentences.size() == 2);
    CHECK(c.sentences[1] == std::vector<TokenId>{kBosId, 5});
    CHECK(c.line_numbers == std::vector<std::size_t>{3, 7});
}
