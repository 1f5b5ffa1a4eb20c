#include <doctest.h>

#include <algorithm>
#include <random>

#include "rlid/error.hpp"
#include "rlid/text.hpp"
#include "rlid/tokenizer.hpp"
#include "support.hpp"

using namespace rlid;
using namespace rlid::tokenizer;

namespace {

const std::string kLatin = "abcdefghijklmnopqrstuvwxyz0123456789 '-.,!?";

Vocabulary latin_vocab() {
  std::vector<std::string> chars;
  for (char c : kLatin) chars.emplace_back(1, c);
  return Vocabulary::from_characters(chars);
}

}  // namespace

TEST_SUITE("tokenizer") {
  TEST_CASE("vocabulary ties are ordered by code point") {
    const auto v = build_vocab(std::vector<std::string>{"ab", "ba"}, 100);
    CHECK(v.tokens() == std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "b"});
    CHECK(build_vocab(std::vector<std::string>{"ab", "ba"}, 100) == v);
  }

  TEST_CASE("vocabulary orders by descending frequency") {
    const auto v = build_vocab(std::vector<std::string>{"cbb", "c c"}, 100);
    // c:3, b:2, space:1
    CHECK(v.tokens() == std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "c", "b", " "});
  }

  TEST_CASE("vocabulary truncation keeps the most frequent characters") {
    std::mt19937 gen(2);
    std::vector<char32_t> distinct;
    for (char32_t c = 0x100; distinct.size() < 100; ++c) {
      if (text::lowercase(text::encode_utf8(c)) == text::encode_utf8(c) && text::nfc(text::encode_utf8(c)) == text::encode_utf8(c)) {
        distinct.push_back(c);
      }
    }
    std::vector<std::string> texts;
    for (int i = 0; i < 300; ++i) {
      std::vector<char32_t> cps;
      for (int k = 0; k < 10; ++k) cps.push_back(distinct[std::min<std::size_t>(gen() % 100, gen() % 100)]);
      texts.push_back(text::encode_utf8(cps));
    }
    texts.push_back(text::encode_utf8(distinct));  // every character at least once

    // brute force: count each candidate over the concatenated corpus
    std::vector<char32_t> all;
    for (const auto& t : texts) {
      const auto cps = text::decode_utf8(t);
      all.insert(all.end(), cps.begin(), cps.end());
    }
    std::vector<std::pair<long, char32_t>> ranked;
    for (char32_t c : distinct) ranked.push_back({-static_cast<long>(std::count(all.begin(), all.end(), c)), c});
    std::sort(ranked.begin(), ranked.end());

    const auto v = build_vocab(texts, 20);
    REQUIRE(v.size() == 20);
    for (std::size_t i = 0; i < 16; ++i) CHECK(v.token(static_cast<int32_t>(4 + i)) == text::encode_utf8(ranked[i].second));
  }

  TEST_CASE("vocabulary errors and serialization") {
    CHECK_THROWS_AS(build_vocab(std::vector<std::string>{"ab"}, 4), UsageError);
    CHECK_THROWS_AS(build_vocab(std::vector<std::string>{}, 10), DataError);
    CHECK_THROWS_AS(Vocabulary::from_characters({"a", "a"}), DataError);
    CHECK_THROWS_AS(Vocabulary::from_characters({"ab"}), DataError);
    CHECK_THROWS_AS(latin_vocab().token(99), DataError);

    const auto v = latin_vocab();
    const auto text = v.serialize();
    CHECK(Vocabulary::deserialize(text) == v);
    CHECK(Vocabulary::deserialize(text).serialize() == text);
    testing::TempDir dir("vocab");
    v.save(dir / "v.json");
    CHECK(Vocabulary::load(dir / "v.json") == v);
    CHECK_THROWS_AS(Vocabulary::deserialize("{\"format\": \"other\"}"), DataError);
    CHECK_THROWS_AS(Vocabulary::deserialize("not json"), DataError);
  }

  TEST_CASE("encode frames the example sentence") {
    const auto v = latin_vocab();
    const auto seq = encode("ap kaise ho", v, 16);
    CHECK(seq.true_length == 13);
    CHECK(seq.ids.size() == 16);
    CHECK(seq.ids[0] == kClsId);
    CHECK(seq.ids[12] == kSepId);
    CHECK(seq.ids[1] == *v.find("a"));
    CHECK(seq.ids[3] == *v.find(" "));
    for (std::size_t i = 0; i < 16; ++i) CHECK(seq.mask[i] == (i < 13 ? 1 : 0));
    for (std::size_t i = 13; i < 16; ++i) CHECK(seq.ids[i] == kPadId);
    CHECK(decode(seq, v).text == "ap kaise ho");
    CHECK_FALSE(decode(seq, v).lossy);
  }

  TEST_CASE("encode empty text and truncation") {
    const auto v = latin_vocab();
    const auto empty = encode("", v, 8);
    CHECK(empty.ids == std::vector<int32_t>{kClsId, kSepId, 0, 0, 0, 0, 0, 0});
    CHECK(empty.true_length == 2);
    CHECK(decode(empty, v).text == "");

    const std::string long_text(100, 'q');
    const auto t = encode(long_text, v, 16);
    CHECK(t.true_length == 16);
    CHECK(t.ids[15] == kSepId);
    CHECK(decode(t, v).text == std::string(14, 'q'));
    CHECK_THROWS_AS(encode("x", v, 2), UsageError);
  }

  TEST_CASE("out-of-vocabulary characters decode lossily") {
    const auto v = latin_vocab();
    const auto d = decode(encode("ПРИВЕТ", v, 16), v);
    CHECK(d.lossy);
    CHECK(d.text == "[UNK][UNK][UNK][UNK][UNK][UNK]");
  }

  TEST_CASE("encode normalizes like the corpus") {
    const auto v = latin_vocab();
    CHECK(encode("  AP   Kaise\tHO ", v, 32) == encode("ap kaise ho", v, 32));
  }

  TEST_CASE("round-trip and invariants on random inputs") {
    const auto v = latin_vocab();
    std::mt19937 gen(17);
    for (int trial = 0; trial < 2000; ++trial) {
      std::string s;
      for (int i = 0, n = static_cast<int>(gen() % 40); i < n; ++i) s += kLatin[gen() % kLatin.size()];
      const auto seq = encode(s, v, 64);
      CHECK(check_sequence(seq, v.size()) == std::nullopt);
      CHECK(decode(seq, v).text == text::normalize(s));
    }
    // arbitrary Unicode still yields valid sequences
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<char32_t> cps;
      for (int i = 0, n = static_cast<int>(gen() % 80); i < n; ++i) cps.push_back(0x20 + gen() % 0x3000);
      const auto seq = encode(text::encode_utf8(cps), v, 3 + gen() % 62);
      CHECK(check_sequence(seq, v.size()) == std::nullopt);
    }
  }

  TEST_CASE("longer max_len only adds padding") {
    const auto v = latin_vocab();
    const auto a = encode("kak dela", v, 12);
    const auto b = encode("kak dela", v, 40);
    CHECK(a.true_length == b.true_length);
    for (std::size_t i = 0; i < a.ids.size(); ++i) {
      CHECK(a.ids[i] == b.ids[i]);
      CHECK(a.mask[i] == b.mask[i]);
    }
    for (std::size_t i = a.ids.size(); i < b.ids.size(); ++i) {
      CHECK(b.ids[i] == kPadId);
      CHECK(b.mask[i] == 0);
    }
  }

  TEST_CASE("check_sequence detects broken invariants") {
    const auto v = latin_vocab();
    auto seq = encode("abc", v, 8);
    CHECK(check_sequence(seq, v.size()) == std::nullopt);
    auto bad = seq;
    bad.ids[0] = kPadId;
    CHECK(check_sequence(bad, v.size()).has_value());
    bad = seq;
    bad.mask[6] = 1;
    CHECK(check_sequence(bad, v.size()).has_value());
    bad = seq;
    bad.ids[6] = 5;
    CHECK(check_sequence(bad, v.size()).has_value());
    bad = seq;
    bad.ids[2] = 999;
    CHECK(check_sequence(bad, v.size()).has_value());
    bad = seq;
    bad.true_length = 3;
    CHECK(check_sequence(bad, v.size()).has_value());
  }
}
