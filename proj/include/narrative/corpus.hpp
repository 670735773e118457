#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "narrative/detail/csv.hpp"
#include "narrative/detail/io.hpp"
#include "narrative/detail/utf8.hpp"
#include "narrative/error.hpp"
#include "narrative/textprep.hpp"

namespace narrative {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Documents x words table of raw counts.
class ContingencyTable {
 public:
  ContingencyTable() = default;
  ContingencyTable(std::vector<std::string> row_labels, std::vector<std::string> col_labels,
                   CountMatrix counts)
      : row_labels_(std::move(row_labels)),
        col_labels_(std::move(col_labels)),
        counts_(std::move(counts)) {
    if (counts_.rows() != static_cast<Eigen::Index>(row_labels_.size()) ||
        counts_.cols() != static_cast<Eigen::Index>(col_labels_.size())) {
      throw ValidationError("table shape does not match label counts");
    }
    if (counts_.size() > 0 && counts_.minCoeff() < 0) {
      throw ValidationError("table has negative counts");
    }
    check_unique(row_labels_, "row");
    check_unique(col_labels_, "column");
    total_ = counts_.sum();
  }

  const std::vector<std::string>& row_labels() const { return row_labels_; }
  const std::vector<std::string>& col_labels() const { return col_labels_; }
  const CountMatrix& counts() const { return counts_; }
  std::int64_t total() const { return total_; }
  Eigen::Index rows() const { return counts_.rows(); }
  Eigen::Index cols() const { return counts_.cols(); }

  std::optional<Eigen::Index> col_index(std::string_view label) const {
    auto it = std::find(col_labels_.begin(), col_labels_.end(), label);
    if (it == col_labels_.end()) return std::nullopt;
    return it - col_labels_.begin();
  }

  ContingencyTable transposed() const {
    return {col_labels_, row_labels_, counts_.transpose()};
  }

  bool operator==(const ContingencyTable& o) const {
    return row_labels_ == o.row_labels_ && col_labels_ == o.col_labels_ &&
           counts_ == o.counts_;
  }

 private:
  static void check_unique(const std::vector<std::string>& labels, const char* side) {
    std::unordered_set<std::string_view> seen;
    for (const auto& l : labels) {
      if (!seen.insert(l).second) {
        throw ValidationError(std::string("duplicate ") + side + " label '" + l + "'");
      }
    }
  }

  std::vector<std::string> row_labels_;
  std::vector<std::string> col_labels_;
  CountMatrix counts_;
  std::int64_t total_ = 0;
};

enum class Unit { sentence, paragraph };

struct CorpusFilter {
  int min_total_count = 1;
  int min_doc_count = 1;
  int min_word_length = 1;
  std::set<std::string, std::less<>> stopwords;
  std::optional<std::set<std::string, std::less<>>> lexicon;

  void validate() const {
    if (min_total_count < 1 || min_doc_count < 1 || min_word_length < 1) {
      throw ValidationError("filter thresholds must be positive");
    }
    for (const auto& w : stopwords) {
      if (std::any_of(w.begin(), w.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
        throw ValidationError("stopword '" + w + "' is not lowercase");
      }
    }
  }
};

struct FilterResult {
  ContingencyTable table;
  std::vector<std::string> dropped_rows;
};

// Maps document ids onto 1-based segments. Segments must be intervals of the
// chronological document order; aggregate() checks this against the table.
struct Segmentation {
  std::string name;
  std::map<std::string, int, std::less<>> assignment;

  // Consecutive blocks of the given sizes over `ordered_ids`.
  static Segmentation from_sizes(std::string name, const std::vector<std::string>& ordered_ids,
                                 const std::vector<int>& sizes) {
    std::size_t need = 0;
    for (int s : sizes) {
      if (s < 1) throw ValidationError("segment sizes must be positive");
      need += static_cast<std::size_t>(s);
    }
    if (need != ordered_ids.size()) {
      throw ValidationError("segment sizes sum to " + std::to_string(need) + " but there are " +
                            std::to_string(ordered_ids.size()) + " documents");
    }
    Segmentation seg{std::move(name), {}};
    std::size_t pos = 0;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      for (int k = 0; k < sizes[s]; ++k) seg.assignment[ordered_ids[pos++]] = static_cast<int>(s) + 1;
    }
    return seg;
  }

  int segment_count() const {
    int mx = 0;
    for (const auto& [id, s] : assignment) mx = std::max(mx, s);
    return mx;
  }
};

namespace detail {

inline ContingencyTable count_rows(const std::vector<std::vector<const TokenList*>>& groups,
                                   std::vector<std::string> row_labels) {
  std::unordered_map<std::string_view, Eigen::Index> index;
  std::vector<std::string> cols;
  for (const auto& g : groups) {
    for (const auto* tl : g) {
      for (const auto& t : tl->tokens) {
        if (index.emplace(t, static_cast<Eigen::Index>(cols.size())).second) cols.push_back(t);
      }
    }
  }
  if (cols.empty()) throw ValidationError("empty corpus");
  CountMatrix counts = CountMatrix::Zero(static_cast<Eigen::Index>(groups.size()),
                                         static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < groups.size(); ++r) {
    for (const auto* tl : groups[r]) {
      for (const auto& t : tl->tokens) ++counts(static_cast<Eigen::Index>(r), index.at(t));
    }
  }
  return {std::move(row_labels), std::move(cols), std::move(counts)};
}

}  // namespace detail

// One row per sentence, labelled by sentence_id. Columns follow first appearance.
inline ContingencyTable build_table(const std::vector<TokenList>& token_lists) {
  std::vector<std::vector<const TokenList*>> groups;
  std::vector<std::string> labels;
  for (const auto& tl : token_lists) {
    groups.push_back({&tl});
    labels.push_back(std::to_string(tl.sentence_id));
  }
  return detail::count_rows(groups, std::move(labels));
}

// Paragraph rows need the records to know which sentences share a paragraph.
inline ContingencyTable build_table(const std::vector<TokenList>& token_lists, Unit unit,
                                    const std::vector<SentenceRecord>& records) {
  if (unit == Unit::sentence) return build_table(token_lists);
  std::unordered_map<int, int> paragraph_of;
  for (const auto& r : records) paragraph_of[r.sentence_id] = r.paragraph_id;
  std::vector<std::vector<const TokenList*>> groups;
  std::vector<std::string> labels;
  int current = -1;
  for (const auto& tl : token_lists) {
    auto it = paragraph_of.find(tl.sentence_id);
    if (it == paragraph_of.end()) {
      throw ValidationError("no record for sentence_id " + std::to_string(tl.sentence_id));
    }
    if (it->second != current) {
      if (it->second < current) throw ValidationError("token lists are not in chronological order");
      current = it->second;
      groups.emplace_back();
      labels.push_back(std::to_string(current));
    }
    groups.back().push_back(&tl);
  }
  return detail::count_rows(groups, std::move(labels));
}

// Column passes run in order: stopwords, length, lexicon, thresholds. Totals
// and document frequencies come from the input table and are not recomputed
// after row removal, so one pass is already a fixed point.
inline FilterResult apply_filter(const ContingencyTable& table, const CorpusFilter& filter) {
  filter.validate();
  const auto& counts = table.counts();
  std::vector<Eigen::Index> keep_cols;
  for (Eigen::Index j = 0; j < table.cols(); ++j) {
    const auto& w = table.col_labels()[static_cast<std::size_t>(j)];
    if (filter.stopwords.contains(w)) continue;
    if (detail::codepoint_count(w) < static_cast<std::size_t>(filter.min_word_length)) continue;
    if (filter.lexicon && !filter.lexicon->contains(w)) continue;
    const std::int64_t total = counts.col(j).sum();
    const std::int64_t df = (counts.col(j).array() > 0).count();
    if (total < filter.min_total_count || df < filter.min_doc_count) continue;
    keep_cols.push_back(j);
  }
  if (keep_cols.empty()) throw ValidationError("empty vocabulary");

  std::vector<Eigen::Index> keep_rows;
  FilterResult result;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    std::int64_t s = 0;
    for (auto j : keep_cols) s += counts(i, j);
    if (s > 0) {
      keep_rows.push_back(i);
    } else {
      result.dropped_rows.push_back(table.row_labels()[static_cast<std::size_t>(i)]);
    }
  }
  CountMatrix out(static_cast<Eigen::Index>(keep_rows.size()),
                  static_cast<Eigen::Index>(keep_cols.size()));
  std::vector<std::string> rl, cl;
  for (std::size_t a = 0; a < keep_rows.size(); ++a) {
    rl.push_back(table.row_labels()[static_cast<std::size_t>(keep_rows[a])]);
    for (std::size_t b = 0; b < keep_cols.size(); ++b) {
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = counts(keep_rows[a], keep_cols[b]);
    }
  }
  for (auto j : keep_cols) cl.push_back(table.col_labels()[static_cast<std::size_t>(j)]);
  result.table = ContingencyTable(std::move(rl), std::move(cl), std::move(out));
  return result;
}

inline ContingencyTable aggregate(const ContingencyTable& table, const Segmentation& seg) {
  const int nseg = seg.segment_count();
  std::vector<int> row_seg(static_cast<std::size_t>(table.rows()));
  std::vector<bool> used(static_cast<std::size_t>(nseg) + 1, false);
  int prev = 0;
  for (std::size_t i = 0; i < row_seg.size(); ++i) {
    const auto& id = table.row_labels()[i];
    auto it = seg.assignment.find(id);
    if (it == seg.assignment.end()) {
      throw ValidationError("document '" + id + "' is not assigned to a segment");
    }
    const int s = it->second;
    if (s < 1) throw ValidationError("segment indices must start at 1");
    if (s < prev || (s != prev && used[static_cast<std::size_t>(s)])) {
      throw ValidationError("segment " + std::to_string(s) + " is not a chronological interval");
    }
    used[static_cast<std::size_t>(s)] = true;
    prev = s;
    row_seg[i] = s;
  }
  for (int s = 1; s <= nseg; ++s) {
    if (!used[static_cast<std::size_t>(s)]) {
      throw ValidationError("segment " + std::to_string(s) + " has no documents in the table");
    }
  }
  CountMatrix out = CountMatrix::Zero(nseg, table.cols());
  for (std::size_t i = 0; i < row_seg.size(); ++i) {
    out.row(row_seg[i] - 1) += table.counts().row(static_cast<Eigen::Index>(i));
  }
  std::vector<std::string> labels;
  for (int s = 1; s <= nseg; ++s) labels.push_back(std::to_string(s));
  return {std::move(labels), table.col_labels(), std::move(out)};
}

inline std::string export_table_csv(const ContingencyTable& table) {
  std::string out;
  detail::CsvRow header{"document"};
  header.insert(header.end(), table.col_labels().begin(), table.col_labels().end());
  detail::append_csv_row(out, header);
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    detail::CsvRow row{table.row_labels()[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < table.cols(); ++j) row.push_back(std::to_string(table.counts()(i, j)));
    detail::append_csv_row(out, row);
  }
  return out;
}

inline ContingencyTable import_table_csv(std::string_view csv) {
  auto rows = detail::parse_csv(csv);
  if (rows.empty() || rows[0].empty()) throw ValidationError("table CSV: missing header");
  std::vector<std::string> cols(rows[0].begin() + 1, rows[0].end());
  std::vector<std::string> labels;
  CountMatrix counts(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != cols.size() + 1) {
      throw ValidationError("table CSV row " + std::to_string(i) + ": wrong field count");
    }
    labels.push_back(rows[i][0]);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      counts(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) =
          detail::parse_int_field<std::int64_t>(rows[i][j + 1], "table cell");
    }
  }
  return {std::move(labels), std::move(cols), std::move(counts)};
}

inline std::set<std::string, std::less<>> load_word_set(const std::filesystem::path& path) {
  auto words = detail::parse_word_list(detail::read_file(path));
  return {words.begin(), words.end()};
}

}  // namespace narrative
