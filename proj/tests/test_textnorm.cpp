#include <doctest.h>

#include "icdpipe/errors.hpp"
#include "icdpipe/hashing.hpp"
#include "icdpipe/textnorm.hpp"

using namespace icdpipe;

TEST_CASE("full-width punctuation maps to half-width") {
  CHECK(normalize_text("a，b") == "a,b");  // full-width comma
  CHECK(normalize_text("x。") == "x.");
  CHECK(normalize_text("（note）") == "(note)");
  CHECK(normalize_text("a　b") == "a b");  // ideographic space
}

TEST_CASE("paragraph markup is removed") {
  CHECK(normalize_text("<p>text</p>") == "text");
  CHECK(normalize_text("<p>1. Right distal radius</p><p>2. More</p>") ==
        "1. Right distal radius 2. More");
  CHECK(normalize_text("<P>upper</P>") == "upper");
}

TEST_CASE("whitespace collapses") {
  CHECK(normalize_text("x") == "x");
  CHECK(normalize_text("a   b\t\tc") == "a b c");
  CHECK(normalize_text("a\n\n\n\nb") == "a\n\nb");
  CHECK(normalize_text("  padded  ") == "padded");
  CHECK(normalize_text("a  \n  b") == "a\nb");
  CHECK(normalize_text("") == "");
}

TEST_CASE("normalize_text is idempotent on arbitrary input") {
  DetRng rng(41);
  const std::string pieces[] = {"a",  "B",    " ",     "\t",   "\n", "，",
                                "<p>", "</p>", "<",    "p",    ">",  "。",
                                "１",  "\r\n", "note", "x y", "＜", "＞"};
  for (int trial = 0; trial < 400; ++trial) {
    std::string input;
    std::size_t n = rng.next_below(24);
    for (std::size_t i = 0; i < n; ++i) {
      input += pieces[rng.next_below(std::size(pieces))];
    }
    std::string once = normalize_text(input);
    CHECK(normalize_text(once) == once);
  }
}

TEST_CASE("strip_nonclinical removes matched spans") {
  auto rules = default_strip_rules();
  CHECK(strip_nonclinical("Dx: flu\n[PRINTED 2021-01-01 03:14]", rules) ==
        "Dx: flu");
  CHECK(strip_nonclinical("plain note", {}) == "plain note");
  CHECK(strip_nonclinical("", rules) == "");
  CHECK(strip_nonclinical("head [PAGE 1 of 3] tail", rules) == "head tail");
  CHECK(strip_nonclinical("seen [2021/3/14 09:00] today", rules) ==
        "seen today");
}

TEST_CASE("strip_nonclinical applies rules in order and to a fixpoint") {
  // deleting the inner span splices a new match together
  CHECK(strip_nonclinical("[PRIN[PRINTED a]TED b]ok", default_strip_rules()) ==
        "ok");
  // custom ordered rules: the first deletes text the second would match
  std::vector<std::string> rules = {"abc", "b"};
  CHECK(strip_nonclinical("abcb", rules) == "");
  CHECK(strip_nonclinical("axbc", rules) == "axc");
}

TEST_CASE("strip_nonclinical with default rules is idempotent") {
  DetRng rng(42);
  const std::string pieces[] = {"[PRINTED ", "]", "[PAGE ", "note ",
                                "\n",        "x", "[2021/1/1", " 3:14"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string input;
    std::size_t n = rng.next_below(16);
    for (std::size_t i = 0; i < n; ++i) {
      input += pieces[rng.next_below(std::size(pieces))];
    }
    std::string once = strip_nonclinical(input, default_strip_rules());
    CHECK(strip_nonclinical(once, default_strip_rules()) == once);
  }
}

TEST_CASE("invalid patterns are reported with their index") {
  try {
    strip_nonclinical("x", {"ok", "(unclosed"});
    FAIL("expected InvalidPatternError");
  } catch (const InvalidPatternError& e) {
    CHECK(e.index() == 1);
  }
}
