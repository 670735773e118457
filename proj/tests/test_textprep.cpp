#include <gtest/gtest.h>

#include <random>
#include <regex>
#include <set>

#include "narrative/textprep.hpp"

using namespace narrative;

namespace {

const AbbreviationSet kPoeAbbrevs{"no", "No", "C", "G", "St"};

std::string poe_text() { return detail::read_file(NARRATIVE_DATA_DIR "/purloined_letter.txt"); }

std::string strip_ws(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != ' ' && c != '\n' && c != '\t' && c != '\r') out.push_back(c);
  }
  return out;
}

}  // namespace

TEST(Segment, EmptyInputGivesNoRecords) {
  EXPECT_TRUE(segment_text("", {}).empty());
  EXPECT_TRUE(segment_text("  \n\n \t\n", {}).empty());
}

TEST(Segment, AbbreviationKeepsSentenceOpen) {
  auto r = segment_text("See No. 33 Rue Dunot. He waited.", AbbreviationSet{"No"});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].text, "See No. 33 Rue Dunot.");
  EXPECT_EQ(r[1].text, "He waited.");
  EXPECT_EQ(r[0].paragraph_id, 1);
  EXPECT_EQ(r[1].paragraph_id, 1);
}

TEST(Segment, AbbreviationIsCaseSensitive) {
  EXPECT_EQ(segment_text("See no. 33 Rue. Then.", AbbreviationSet{"No"}).size(), 3u);
  EXPECT_EQ(segment_text("See No. 33 Rue. Then.", AbbreviationSet{"No"}).size(), 2u);
}

TEST(Segment, AbbreviationMustBeWholeToken) {
  // "Casino." ends in "no" but is not the token "no"
  EXPECT_EQ(segment_text("At the Casino. Later.", AbbreviationSet{"no"}).size(), 2u);
}

TEST(Segment, TerminatorRunsCollapse) {
  auto r = segment_text("Wait!!! Really?! Yes...", {});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].text, "Wait!!!");
  EXPECT_EQ(r[1].text, "Really?!");
}

TEST(Segment, ClosingQuoteStaysWithSentence) {
  auto r = segment_text("\"Go home.\" He left.", {});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].text, "\"Go home.\"");
}

TEST(Segment, LowercaseContinuationIsNotABoundary) {
  auto r = segment_text("\"Is it?\" said he. Done.", {});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].text, "\"Is it?\" said he.");
}

TEST(Segment, QuotedQuestionWithIAttribution) {
  auto r = segment_text("\"What now?\" I asked. \"Go!\" I Left.", {});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].text, "\"What now?\" I asked.");
  EXPECT_EQ(r[1].text, "\"Go!\"");
}

TEST(Segment, PeriodInsideTokenIsNotABoundary) {
  EXPECT_EQ(segment_text("Pi is 3.14 exactly. Yes.", {}).size(), 2u);
}

TEST(Segment, ParagraphsSplitOnBlankLines) {
  auto r = segment_text("One. Two.\n\n\n  \nThree.\r\n\r\nFour\nfive.", {});
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0].paragraph_id, 1);
  EXPECT_EQ(r[1].paragraph_id, 1);
  EXPECT_EQ(r[2].paragraph_id, 2);
  EXPECT_EQ(r[3].paragraph_id, 3);
  EXPECT_EQ(r[3].text, "Four five.");
}

TEST(Segment, MalformedUtf8Throws) {
  EXPECT_THROW(segment_text("bad \xC3 byte", {}), DecodeError);
  EXPECT_THROW(segment_text("overlong \xC0\xAF", {}), DecodeError);
  EXPECT_THROW(segment_text("surrogate \xED\xA0\x80", {}), DecodeError);
}

TEST(Segment, BundledTextCounts) {
  auto r = segment_text(poe_text(), kPoeAbbrevs);
  EXPECT_EQ(r.size(), 321u);
  EXPECT_EQ(r.back().paragraph_id, 123);
}

TEST(Segment, RecordInvariantsAndContentRecovery) {
  const auto text = poe_text();
  auto r = segment_text(text, kPoeAbbrevs);
  std::string joined;
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i].sentence_id, static_cast<int>(i) + 1);
    if (i) {
      EXPECT_GE(r[i].paragraph_id, r[i - 1].paragraph_id);
    }
    if (i) {
      EXPECT_LE(r[i].paragraph_id, r[i - 1].paragraph_id + 1);
    }
    EXPECT_FALSE(r[i].text.empty());
    joined += r[i].text;
  }
  EXPECT_EQ(strip_ws(joined), strip_ws(text));
}

TEST(Segment, Deterministic) {
  const auto text = poe_text();
  EXPECT_EQ(segment_text(text, kPoeAbbrevs), segment_text(text, kPoeAbbrevs));
}

TEST(Segment, ParagraphCountMatchesBlankLineBlocks) {
  std::mt19937 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    std::string text;
    const int blocks = 1 + static_cast<int>(rng() % 6);
    for (int b = 0; b < blocks; ++b) {
      if (b) text += std::string(1 + rng() % 3, '\n') + (rng() % 2 ? "  \n" : "\n");
      const int sents = 1 + static_cast<int>(rng() % 4);
      for (int s = 0; s < sents; ++s) text += "Word" + std::to_string(s) + " here. ";
    }
    auto r = segment_text(text, {});
    ASSERT_FALSE(r.empty());
    EXPECT_EQ(r.back().paragraph_id, blocks);
  }
}

TEST(Speakers, AssignsByParagraph) {
  auto r = segment_text("A one. A two.\n\nB one.", {});
  auto a = annotate_speakers(r, {{1, "Narrator"}});
  EXPECT_EQ(a[0].speaker, "Narrator");
  EXPECT_EQ(a[1].speaker, "Narrator");
  EXPECT_FALSE(a[2].speaker.has_value());
}

TEST(Speakers, EmptyMapLeavesAllAbsent) {
  auto r = annotate_speakers(segment_text("A. B.\n\nC.", {}), {});
  for (const auto& x : r) EXPECT_FALSE(x.speaker.has_value());
}

TEST(Speakers, UnknownParagraphNamed) {
  auto r = segment_text(poe_text(), kPoeAbbrevs);
  try {
    annotate_speakers(r, {{999, "Dupin"}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("999"), std::string::npos);
  }
}

TEST(Speakers, MapParsing) {
  auto m = parse_speaker_map("paragraph_id,label\n1,Narrator\n3,\"Prefect, G\"\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at(3), "Prefect, G");
  EXPECT_THROW(parse_speaker_map("1,A\n1,B\n"), ValidationError);
  EXPECT_THROW(parse_speaker_map("x,A\n"), ValidationError);
}

TEST(SentenceCsv, QuotingRule) {
  std::vector<SentenceRecord> r{{1, 1, std::nullopt, "a, \"b\""}};
  EXPECT_EQ(export_sentences_csv(r), "sentence_id,paragraph_id,speaker,text\n1,1,,\"a, \"\"b\"\"\"\n");
}

TEST(SentenceCsv, BundledTextLineCount) {
  auto csv = export_sentences_csv(segment_text(poe_text(), kPoeAbbrevs));
  EXPECT_EQ(detail::parse_csv(csv).size(), 322u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 322);
}

TEST(SentenceCsv, RoundTrip) {
  auto r = annotate_speakers(segment_text(poe_text(), kPoeAbbrevs), {{1, "Narrator"}, {2, "Dupin"}});
  EXPECT_EQ(import_sentences_csv(export_sentences_csv(r)), r);
}

TEST(SentenceCsv, RoundTripAwkwardText) {
  std::vector<SentenceRecord> r{{1, 1, "X", "line\nbreak, \"quoted\""}, {2, 2, std::nullopt, "ümlaut ,"}};
  EXPECT_EQ(import_sentences_csv(export_sentences_csv(r)), r);
}

TEST(SentenceCsv, Errors) {
  EXPECT_THROW(export_sentences_csv({}), ValidationError);
  EXPECT_THROW(import_sentences_csv("id,text\n"), ValidationError);
  EXPECT_THROW(import_sentences_csv("sentence_id,paragraph_id,speaker,text\n2,1,,x\n"), ValidationError);
  EXPECT_THROW(import_sentences_csv("sentence_id,paragraph_id,speaker,text\n1,2,,x\n2,1,,y\n"),
               ValidationError);
  EXPECT_THROW(import_sentences_csv("sentence_id,paragraph_id,speaker,text\n1,1,,\"x\n"), ValidationError);
}

TEST(Tokenize, Examples) {
  using V = std::vector<std::string>;
  EXPECT_EQ(tokenize({1, 1, {}, "It's D--"}).tokens, (V{"it", "s", "d"}));
  EXPECT_EQ(tokenize({1, 1, {}, "..."}).tokens, V{});
  EXPECT_EQ(tokenize({1, 1, {}, "No. 33 Rue Dunot"}).tokens, (V{"no", "rue", "dunot"}));
}

TEST(Tokenize, AccentsFoldAndLigaturesExpand) {
  using V = std::vector<std::string>;
  EXPECT_EQ(tokenize({1, 1, {}, "Rogêt's troisième vis inertiæ, Œuvre; Straße"}).tokens,
            (V{"roget", "s", "troisieme", "vis", "inertiae", "oeuvre", "strasse"}));
  EXPECT_EQ(tokenize({1, 1, {}, "a1b2c"}).tokens, (V{"abc"}));
  EXPECT_EQ(tokenize({4, 1, {}, "x"}).sentence_id, 4);
}

TEST(Tokenize, OnlyLowercaseAsciiLetters) {
  std::mt19937 rng(11);
  const std::u32string alphabet = U"aZé ,.'\"-–—!?0123456789ÆßΩ字\t\nœÿ";
  const std::regex ok("[a-z]+");
  for (int rep = 0; rep < 300; ++rep) {
    std::u32string s;
    const int len = static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    for (const auto& t : tokenize({1, 1, {}, detail::encode_utf8(s)}).tokens) {
      EXPECT_TRUE(std::regex_match(t, ok)) << t;
    }
  }
}

TEST(Abbreviations, Loading) {
  auto a = parse_abbreviations("# comment\nno\n  No  \n\nSt # saint\n");
  EXPECT_EQ(a.size(), 3u);
  EXPECT_TRUE(a.contains("St"));
  EXPECT_THROW(parse_abbreviations("Mr.\n"), ValidationError);
  EXPECT_EQ(load_abbreviations(NARRATIVE_DATA_DIR "/abbreviations.txt").size(), 5u);
  EXPECT_THROW(load_abbreviations("/nonexistent/abbrevs.txt"), IoError);
}
