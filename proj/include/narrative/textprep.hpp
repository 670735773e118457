#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "narrative/detail/csv.hpp"
#include "narrative/detail/io.hpp"
#include "narrative/detail/utf8.hpp"
#include "narrative/error.hpp"

namespace narrative {

struct SentenceRecord {
  int sentence_id = 0;
  int paragraph_id = 0;
  std::optional<std::string> speaker;
  std::string text;

  bool operator==(const SentenceRecord&) const = default;
};

// Tokens that do not end a sentence when a single period follows them.
// Matching is case-sensitive ("no" and "No" are distinct entries).
class AbbreviationSet {
 public:
  AbbreviationSet() = default;
  AbbreviationSet(std::initializer_list<std::string> entries) {
    for (const auto& e : entries) add(e);
  }

  void add(std::string entry) {
    if (entry.empty()) throw ValidationError("abbreviation entry is empty");
    if (entry.back() == '.') {
      throw ValidationError("abbreviation entry '" + entry + "' has a trailing period");
    }
    entries_.insert(std::move(entry));
  }
  bool contains(std::string_view token) const { return entries_.find(token) != entries_.end(); }
  std::size_t size() const { return entries_.size(); }
  const std::set<std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::set<std::string, std::less<>> entries_;
};

struct TokenList {
  int sentence_id = 0;
  std::vector<std::string> tokens;

  bool operator==(const TokenList&) const = default;
};

using SpeakerMap = std::map<int, std::string>;

namespace detail {

inline bool is_terminator(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

inline bool is_closer(char32_t c) {
  switch (c) {
    case U'"': case U'\'': case U')': case U']':
    case U'”': case U'’': case U'»':
      return true;
    default:
      return false;
  }
}

inline bool is_opener(char32_t c) {
  switch (c) {
    case U'"': case U'\'': case U'(': case U'[':
    case U'“': case U'‘': case U'«':
      return true;
    default:
      return false;
  }
}

// Trim, then collapse internal whitespace runs to one ASCII space.
inline std::string squeeze(std::u32string_view s) {
  std::string out;
  bool pending_space = false;
  for (char32_t c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    append_utf8(out, c);
  }
  return out;
}

inline std::vector<std::u32string> split_paragraphs(std::u32string_view text) {
  std::vector<std::u32string> out;
  std::u32string current;
  bool have_content = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find(U'\n', pos);
    if (nl == std::u32string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    const bool blank = std::all_of(line.begin(), line.end(), is_space);
    if (blank) {
      if (have_content) out.push_back(std::move(current));
      current.clear();
      have_content = false;
    } else {
      if (have_content) current.push_back(U'\n');
      current.append(line);
      have_content = true;
    }
    pos = nl + 1;
  }
  if (have_content) out.push_back(std::move(current));
  return out;
}

// Start of the next whitespace-delimited word at or after `pos`, skipping
// whitespace and (optionally) opening quotes/brackets.
inline std::size_t next_word_start(std::u32string_view p, std::size_t pos, bool skip_openers) {
  while (pos < p.size() && is_space(p[pos])) ++pos;
  if (skip_openers) {
    std::size_t q = pos;
    while (q < p.size() && is_opener(p[q])) ++q;
    // a bare run of openers is itself the word
    if (q < p.size() && !is_space(p[q])) pos = q;
  }
  return pos;
}

inline std::size_t word_end(std::u32string_view p, std::size_t pos) {
  while (pos < p.size() && !is_space(p[pos])) ++pos;
  return pos;
}

inline std::vector<std::string> split_sentences(std::u32string_view p,
                                                const AbbreviationSet& abbrevs) {
  std::vector<std::string> out;
  const std::size_t n = p.size();
  std::size_t start = 0;
  std::size_t i = 0;
  auto emit = [&](std::size_t end) {
    auto s = squeeze(p.substr(start, end - start));
    if (!s.empty()) out.push_back(std::move(s));
  };
  while (i < n) {
    if (!is_terminator(p[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_terminator(p[j])) ++j;
    std::size_t k = j;
    while (k < n && is_closer(p[k])) ++k;
    if (k < n && !is_space(p[k])) {
      i = j;
      continue;
    }
    if (j - i == 1 && p[i] == U'.') {
      std::size_t b = i;
      while (b > start && is_letter(p[b - 1])) --b;
      if (b < i && abbrevs.contains(encode_utf8(p.substr(b, i - b)))) {
        i = j;
        continue;
      }
    }
    if (k < n) {
      const std::size_t w = next_word_start(p, k, true);
      if (w < n) {
        if (is_lower_letter(p[w])) {
          i = j;
          continue;
        }
        // `"Why?" I asked.` keeps the attribution in the quoted sentence.
        const std::size_t we = word_end(p, w);
        if ((p[j - 1] == U'!' || p[j - 1] == U'?') && k > j && p.substr(w, we - w) == U"I") {
          const std::size_t w2 = next_word_start(p, we, false);
          if (w2 < n && is_lower_letter(p[w2])) {
            i = j;
            continue;
          }
        }
      }
    }
    emit(k);
    start = k;
    i = k;
  }
  emit(n);
  return out;
}

template <class T = int>
T parse_int_field(std::string_view s, std::string_view what) {
  T v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError(std::string(what) + ": not an integer: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

// Paragraphs are separated by one or more blank lines. Sentences end at runs
// of '.', '!', '?' (plus trailing closing quotes/brackets) that are followed
// by whitespace, unless the period closes an abbreviation or the following
// word starts in lowercase.
inline std::vector<SentenceRecord> segment_text(std::string_view raw_text,
                                                const AbbreviationSet& abbrevs) {
  std::u32string text = detail::decode_utf8(raw_text);
  std::erase(text, U'\r');
  std::vector<SentenceRecord> records;
  int paragraph_id = 0;
  for (const auto& para : detail::split_paragraphs(text)) {
    auto sentences = detail::split_sentences(para, abbrevs);
    if (sentences.empty()) continue;
    ++paragraph_id;
    for (auto& s : sentences) {
      records.push_back({static_cast<int>(records.size()) + 1, paragraph_id, std::nullopt,
                         std::move(s)});
    }
  }
  return records;
}

inline std::vector<SentenceRecord> annotate_speakers(std::vector<SentenceRecord> records,
                                                     const SpeakerMap& speaker_map) {
  std::set<int> known;
  for (const auto& r : records) known.insert(r.paragraph_id);
  for (const auto& [pid, label] : speaker_map) {
    if (!known.contains(pid)) {
      throw ValidationError("speaker map names unknown paragraph_id " + std::to_string(pid));
    }
    if (label.empty()) {
      throw ValidationError("empty speaker label for paragraph_id " + std::to_string(pid));
    }
  }
  for (auto& r : records) {
    auto it = speaker_map.find(r.paragraph_id);
    r.speaker = it == speaker_map.end() ? std::nullopt : std::optional(it->second);
  }
  return records;
}

inline std::string export_sentences_csv(const std::vector<SentenceRecord>& records) {
  if (records.empty()) throw ValidationError("no sentence records to export");
  std::string out = "sentence_id,paragraph_id,speaker,text\n";
  for (const auto& r : records) {
    detail::append_csv_row(out, {std::to_string(r.sentence_id), std::to_string(r.paragraph_id),
                                 r.speaker.value_or(""), r.text});
  }
  return out;
}

inline std::vector<SentenceRecord> import_sentences_csv(std::string_view csv) {
  auto rows = detail::parse_csv(csv);
  if (rows.empty() || rows[0] != detail::CsvRow{"sentence_id", "paragraph_id", "speaker", "text"}) {
    throw ValidationError("sentence CSV: missing or wrong header");
  }
  std::vector<SentenceRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 4) {
      throw ValidationError("sentence CSV row " + std::to_string(i) + ": expected 4 fields");
    }
    SentenceRecord r;
    r.sentence_id = detail::parse_int_field(row[0], "sentence_id");
    r.paragraph_id = detail::parse_int_field(row[1], "paragraph_id");
    if (!row[2].empty()) r.speaker = row[2];
    r.text = row[3];
    if (r.sentence_id != static_cast<int>(out.size()) + 1) {
      throw ValidationError("sentence CSV: sentence_id " + std::to_string(r.sentence_id) +
                            " out of sequence");
    }
    if (r.paragraph_id < 1 || (!out.empty() && r.paragraph_id < out.back().paragraph_id)) {
      throw ValidationError("sentence CSV: paragraph_id decreases at sentence " +
                            std::to_string(r.sentence_id));
    }
    if (r.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw ValidationError("sentence CSV: empty text at sentence " + std::to_string(r.sentence_id));
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Accents fold to base letters, case is lowered, digits vanish, and every
// other character separates tokens.
inline TokenList tokenize(const SentenceRecord& record) {
  TokenList out{record.sentence_id, {}};
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.tokens.push_back(std::move(current));
    current.clear();
  };
  for (char32_t c : detail::decode_utf8(record.text)) {
    if (c >= U'0' && c <= U'9') continue;
    auto folded = detail::fold_latin(c);
    if (folded.empty()) {
      flush();
      continue;
    }
    for (char f : folded) {
      current.push_back(f >= 'A' && f <= 'Z' ? static_cast<char>(f - 'A' + 'a') : f);
    }
  }
  flush();
  return out;
}

inline std::vector<TokenList> tokenize_all(const std::vector<SentenceRecord>& records) {
  std::vector<TokenList> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(tokenize(r));
  return out;
}

inline AbbreviationSet parse_abbreviations(std::string_view text) {
  AbbreviationSet set;
  for (auto& e : detail::parse_word_list(text)) set.add(std::move(e));
  return set;
}

inline AbbreviationSet load_abbreviations(const std::filesystem::path& path) {
  return parse_abbreviations(detail::read_file(path));
}

// CSV `paragraph_id,label`; a header row is optional.
inline SpeakerMap parse_speaker_map(std::string_view csv) {
  SpeakerMap map;
  auto rows = detail::parse_csv(csv);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (i == 0 && row.size() == 2 && row[0] == "paragraph_id") continue;
    if (row.size() != 2) {
      throw ValidationError("speaker map row " + std::to_string(i + 1) + ": expected 2 fields");
    }
    const int pid = detail::parse_int_field(row[0], "paragraph_id");
    if (!map.emplace(pid, row[1]).second) {
      throw ValidationError("speaker map lists paragraph_id " + std::to_string(pid) + " twice");
    }
  }
  return map;
}

inline SpeakerMap load_speaker_map(const std::filesystem::path& path) {
  return parse_speaker_map(detail::read_file(path));
}

}  // namespace narrative
