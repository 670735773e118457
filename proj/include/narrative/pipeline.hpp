#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "narrative/ca.hpp"
#include "narrative/characterize.hpp"
#include "narrative/clustering.hpp"
#include "narrative/corpus.hpp"
#include "narrative/detail/io.hpp"
#include "narrative/error.hpp"
#include "narrative/svg.hpp"
#include "narrative/textprep.hpp"

namespace narrative {

enum class Stage { prep, corpus, ca, cluster, vtest, plot };

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::prep: return "prep";
    case Stage::corpus: return "corpus";
    case Stage::ca: return "ca";
    case Stage::cluster: return "cluster";
    case Stage::vtest: return "vtest";
    case Stage::plot: return "plot";
  }
  return "?";
}

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct SegmentationSpec {
  enum class Kind { none, paragraphs, documents, clusters };
  Kind kind = Kind::none;
  std::vector<int> sizes;
};

struct CutRule {
  bool max_gap = true;
  int k = 0;
};

// Factor axes used for clustering. Automatic means 5 for constrained runs and
// every axis for Ward.
struct AxisCount {
  enum Kind { automatic, all, fixed } kind = automatic;
  int n = 0;

  Eigen::Index resolve(Criterion c, Eigen::Index available) const {
    if (kind == fixed) return std::min<Eigen::Index>(n, available);
    if (kind == automatic && c == Criterion::constrained_complete) return std::min<Eigen::Index>(5, available);
    return available;
  }
};

struct PipelineConfig {
  std::filesystem::path input_text;
  std::optional<std::filesystem::path> abbreviations;
  std::optional<std::filesystem::path> stopwords;
  std::optional<std::filesystem::path> lexicon;
  std::optional<std::filesystem::path> speaker_map;
  Unit unit = Unit::sentence;
  int min_total_count = 1;
  int min_doc_count = 1;
  int min_word_length = 2;
  SegmentationSpec segmentation;
  AxisCount cluster_axes;
  Side cluster_side = Side::row;
  std::optional<Criterion> criterion = Criterion::ward;  // nullopt: skip clustering
  CutRule cut;
  double alpha = 0.05;
  bool vtest_normalize = false;
  std::pair<int, int> plot_axes{0, 1};
  Side plot_side = Side::col;
  PointSelection plot_selection = PointSelection::top(40);
  std::filesystem::path output_dir = "out";
};

namespace detail {

inline std::vector<int> parse_int_list(std::string_view s, std::string_view what) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto c = s.find(',', pos);
    if (c == std::string_view::npos) c = s.size();
    auto item = s.substr(pos, c - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    out.push_back(parse_int_field(item, what));
    pos = c + 1;
  }
  return out;
}

inline std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto c = s.find(',', pos);
    if (c == std::string_view::npos) c = s.size();
    auto item = s.substr(pos, c - pos);
    const auto b = item.find_first_not_of(' ');
    if (b != std::string_view::npos) out.emplace_back(item.substr(b, item.find_last_not_of(' ') - b + 1));
    pos = c + 1;
  }
  return out;
}

inline double parse_double_field(std::string_view s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(std::string(what) + ": not a number: '" + std::string(s) + "'");
}

inline bool parse_bool_field(std::string_view s, std::string_view what) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ValidationError(std::string(what) + ": expected true or false");
}

inline std::pair<std::string_view, std::string_view> split_tag(std::string_view v) {
  const auto c = v.find(':');
  if (c == std::string_view::npos) return {v, {}};
  return {v.substr(0, c), v.substr(c + 1)};
}

}  // namespace detail

// `key = value` lines, '#' comments. Relative paths resolve against `base_dir`.
inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  PipelineConfig cfg;
  std::map<std::string, std::string, std::less<>> kv;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) continue;
    line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(fmt::format("config line {}: expected key = value", lineno));
    }
    auto key = line.substr(0, eq);
    auto val = line.substr(eq + 1);
    key = key.substr(0, key.find_last_not_of(" \t") + 1);
    val = val.substr(std::min(val.size(), val.find_first_not_of(" \t")));
    if (!kv.emplace(std::string(key), std::string(val)).second) {
      throw ValidationError(fmt::format("config line {}: duplicate key '{}'", lineno, key));
    }
  }
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };
  for (const auto& [key, val] : kv) {
    if (key == "input_text") cfg.input_text = path_of(val);
    else if (key == "abbreviations") cfg.abbreviations = path_of(val);
    else if (key == "stopwords") cfg.stopwords = path_of(val);
    else if (key == "lexicon") cfg.lexicon = path_of(val);
    else if (key == "speaker_map") cfg.speaker_map = path_of(val);
    else if (key == "output_dir") cfg.output_dir = path_of(val);
    else if (key == "unit") {
      if (val == "sentence") cfg.unit = Unit::sentence;
      else if (val == "paragraph") cfg.unit = Unit::paragraph;
      else throw ValidationError("unit must be sentence or paragraph");
    } else if (key == "min_total_count") cfg.min_total_count = detail::parse_int_field(val, key);
    else if (key == "min_doc_count") cfg.min_doc_count = detail::parse_int_field(val, key);
    else if (key == "min_word_length") cfg.min_word_length = detail::parse_int_field(val, key);
    else if (key == "segmentation") {
      auto [tag, rest] = detail::split_tag(val);
      if (tag == "none") cfg.segmentation = {};
      else if (tag == "clusters") cfg.segmentation = {SegmentationSpec::Kind::clusters, {}};
      else if (tag == "paragraphs" || tag == "documents") {
        cfg.segmentation.kind = tag == "paragraphs" ? SegmentationSpec::Kind::paragraphs
                                                    : SegmentationSpec::Kind::documents;
        cfg.segmentation.sizes = detail::parse_int_list(rest, "segmentation sizes");
      } else {
        throw ValidationError("segmentation must be none, clusters, paragraphs:N,.. or documents:N,..");
      }
    } else if (key == "cluster_axes") {
      if (val == "all") cfg.cluster_axes = {AxisCount::all, 0};
      else cfg.cluster_axes = {AxisCount::fixed, detail::parse_int_field(val, key)};
    } else if (key == "cluster_side") {
      if (val == "rows") cfg.cluster_side = Side::row;
      else if (val == "columns") cfg.cluster_side = Side::col;
      else throw ValidationError("cluster_side must be rows or columns");
    } else if (key == "criterion") {
      if (val == "ward") cfg.criterion = Criterion::ward;
      else if (val == "constrained_complete") cfg.criterion = Criterion::constrained_complete;
      else if (val == "none") cfg.criterion.reset();
      else throw ValidationError("criterion must be ward, constrained_complete or none");
    } else if (key == "cut") {
      auto [tag, rest] = detail::split_tag(val);
      if (tag == "max_gap") cfg.cut = {true, 0};
      else if (tag == "k") cfg.cut = {false, detail::parse_int_field(rest, "cut k")};
      else throw ValidationError("cut must be max_gap or k:N");
    } else if (key == "alpha") cfg.alpha = detail::parse_double_field(val, key);
    else if (key == "vtest_normalize") cfg.vtest_normalize = detail::parse_bool_field(val, key);
    else if (key == "plot_axes") {
      auto a = detail::parse_int_list(val, key);
      if (a.size() != 2 || a[0] < 1 || a[1] < 1 || a[0] == a[1]) {
        throw ValidationError("plot_axes must be two distinct factor numbers, e.g. 1,2");
      }
      cfg.plot_axes = {a[0] - 1, a[1] - 1};
    } else if (key == "plot_side") {
      if (val == "rows") cfg.plot_side = Side::row;
      else if (val == "columns") cfg.plot_side = Side::col;
      else throw ValidationError("plot_side must be rows or columns");
    } else if (key == "plot_selection") {
      auto [tag, rest] = detail::split_tag(val);
      if (tag == "top") {
        cfg.plot_selection = PointSelection::top(static_cast<std::size_t>(detail::parse_int_field(rest, "top")));
      } else if (tag == "near_origin") {
        cfg.plot_selection = PointSelection::near_origin(
            rest.empty() ? 0.25 : detail::parse_double_field(rest, "near_origin window"));
      } else if (tag == "labels") {
        cfg.plot_selection = PointSelection::explicit_labels(detail::split_commas(rest));
      } else {
        throw ValidationError("plot_selection must be top:N, near_origin[:W] or labels:a,b,..");
      }
    } else {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
  if (!kv.contains("input_text")) throw ValidationError("config lacks input_text");
  if (cfg.min_total_count < 1 || cfg.min_doc_count < 1 || cfg.min_word_length < 1) {
    throw ValidationError("filter thresholds must be positive");
  }
  if (cfg.cluster_axes.kind == AxisCount::fixed && cfg.cluster_axes.n < 1) throw ValidationError("cluster_axes must be positive");
  if (!cfg.cut.max_gap && cfg.cut.k < 1) throw ValidationError("cut k must be positive");
  if (!(cfg.alpha > 0 && cfg.alpha < 1)) throw ValidationError("alpha must lie in (0, 1)");
  if (cfg.segmentation.kind == SegmentationSpec::Kind::clusters &&
      (cfg.criterion != Criterion::constrained_complete || cfg.cluster_side != Side::row)) {
    throw ValidationError("segmentation = clusters needs constrained_complete clustering of rows");
  }
  for (const auto* p : {&cfg.input_text}) {
    if (!std::filesystem::is_regular_file(*p)) throw IoError("file not found: " + p->string());
  }
  for (const auto* p : {&cfg.abbreviations, &cfg.stopwords, &cfg.lexicon, &cfg.speaker_map}) {
    if (*p && !std::filesystem::is_regular_file(**p)) throw IoError("file not found: " + (*p)->string());
  }
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(detail::read_file(path), path.parent_path());
  } catch (const Error& e) {
    throw StageError("config", path.string() + ": " + e.what());
  }
}

struct RunSummary {
  std::size_t sentences = 0;
  int paragraphs = 0;
  std::size_t raw_words = 0;
  std::int64_t raw_occurrences = 0;
  std::size_t words = 0;
  std::int64_t occurrences = 0;
  std::size_t documents = 0;
  std::size_t dropped_documents = 0;
  Eigen::Index axes = 0;
  std::vector<double> cumulative_inertia;
  Eigen::Index cluster_axes = 0;
  int clusters = 0;
  std::vector<int> cluster_sizes;
  bool degenerate_cut = false;
  std::size_t significant_entries = 0;
  bool vtest_normalized = false;
  int segments = 0;
  std::vector<int> segment_sizes;
  Eigen::Index segment_axes = 0;
  std::vector<double> segment_cumulative_inertia;
};

struct PipelineResult {
  Stage last_stage = Stage::plot;
  std::vector<SentenceRecord> records;
  ContingencyTable raw_table;
  FilterResult filtered;
  std::optional<CAModel> model;
  std::optional<Dendrogram> dendrogram;
  std::optional<Partition> partition;
  std::optional<VTestReport> report;
  std::optional<ContingencyTable> segment_table;
  std::optional<CAModel> segment_model;
  std::vector<int> segment_sizes;
  RunSummary summary;
};

namespace detail {

template <class F>
auto in_stage(std::string_view name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string(name), e.what());
  }
}

template <class F>
auto in_stage(Stage s, F&& f) -> decltype(f()) {
  return in_stage(stage_name(s), std::forward<F>(f));
}

inline Segmentation segmentation_for(const PipelineConfig& cfg, const PipelineResult& r) {
  const auto& rows = r.filtered.table.row_labels();
  const auto& spec = cfg.segmentation;
  if (spec.kind == SegmentationSpec::Kind::documents) {
    return Segmentation::from_sizes("documents", rows, spec.sizes);
  }
  if (spec.kind == SegmentationSpec::Kind::clusters) {
    Segmentation seg{"clusters", {}};
    for (std::size_t i = 0; i < r.partition->labels.size(); ++i) {
      seg.assignment[r.partition->labels[i]] = r.partition->cluster[i];
    }
    return seg;
  }
  // paragraph blocks mapped onto whatever the document unit is
  const int npar = r.records.empty() ? 0 : r.records.back().paragraph_id;
  int need = 0;
  for (int s : spec.sizes) {
    if (s < 1) throw ValidationError("segment sizes must be positive");
    need += s;
  }
  if (need != npar) {
    throw ValidationError(fmt::format("paragraph segment sizes sum to {} but the text has {} paragraphs",
                                      need, npar));
  }
  std::vector<int> seg_of_par(static_cast<std::size_t>(npar) + 1);
  int p = 1;
  for (std::size_t s = 0; s < spec.sizes.size(); ++s) {
    for (int k = 0; k < spec.sizes[s]; ++k) seg_of_par[static_cast<std::size_t>(p++)] = static_cast<int>(s) + 1;
  }
  std::map<std::string, int> par_of_doc;
  if (cfg.unit == Unit::sentence) {
    for (const auto& rec : r.records) par_of_doc[std::to_string(rec.sentence_id)] = rec.paragraph_id;
  } else {
    for (int q = 1; q <= npar; ++q) par_of_doc[std::to_string(q)] = q;
  }
  Segmentation seg{"paragraphs", {}};
  for (const auto& id : rows) seg.assignment[id] = seg_of_par[static_cast<std::size_t>(par_of_doc.at(id))];
  return seg;
}

inline void fit_segments(const PipelineConfig& cfg, PipelineResult& r) {
  const auto seg = segmentation_for(cfg, r);
  r.segment_table = aggregate(r.filtered.table, seg);
  r.segment_sizes.assign(static_cast<std::size_t>(seg.segment_count()), 0);
  for (const auto& id : r.filtered.table.row_labels()) ++r.segment_sizes[static_cast<std::size_t>(seg.assignment.at(id) - 1)];
  // words absent from every segment cannot occur; all columns survive aggregation
  r.segment_model = fit_ca(*r.segment_table);
  auto& s = r.summary;
  s.segments = static_cast<int>(r.segment_sizes.size());
  s.segment_sizes = r.segment_sizes;
  s.segment_axes = r.segment_model->axes();
  s.segment_cumulative_inertia = cumulative_inertia(*r.segment_model);
}

}  // namespace detail

// Runs the in-memory pipeline through `last`; no files are written.
inline PipelineResult execute_pipeline(const PipelineConfig& cfg, Stage last = Stage::plot) {
  PipelineResult r;
  r.last_stage = last;
  auto& s = r.summary;

  detail::in_stage(Stage::prep, [&] {
    const auto abbrevs = cfg.abbreviations ? load_abbreviations(*cfg.abbreviations) : AbbreviationSet{};
    r.records = segment_text(detail::read_file(cfg.input_text), abbrevs);
    if (cfg.speaker_map) r.records = annotate_speakers(std::move(r.records), load_speaker_map(*cfg.speaker_map));
    if (r.records.empty()) throw ValidationError("input text has no sentences: " + cfg.input_text.string());
    s.sentences = r.records.size();
    s.paragraphs = r.records.back().paragraph_id;
  });
  if (last == Stage::prep) return r;

  detail::in_stage(Stage::corpus, [&] {
    const auto tokens = tokenize_all(r.records);
    r.raw_table = build_table(tokens, cfg.unit, r.records);
    s.raw_words = static_cast<std::size_t>(r.raw_table.cols());
    s.raw_occurrences = r.raw_table.total();
    CorpusFilter f;
    f.min_total_count = cfg.min_total_count;
    f.min_doc_count = cfg.min_doc_count;
    f.min_word_length = cfg.min_word_length;
    if (cfg.stopwords) f.stopwords = load_word_set(*cfg.stopwords);
    if (cfg.lexicon) f.lexicon = load_word_set(*cfg.lexicon);
    r.filtered = apply_filter(r.raw_table, f);
    s.words = static_cast<std::size_t>(r.filtered.table.cols());
    s.occurrences = r.filtered.table.total();
    s.documents = static_cast<std::size_t>(r.filtered.table.rows());
    s.dropped_documents = r.filtered.dropped_rows.size();
  });
  if (last == Stage::corpus) return r;

  detail::in_stage(Stage::ca, [&] {
    r.model = fit_ca(r.filtered.table);
    s.axes = r.model->axes();
    s.cumulative_inertia = cumulative_inertia(*r.model);
    const auto kind = cfg.segmentation.kind;
    if (kind == SegmentationSpec::Kind::paragraphs || kind == SegmentationSpec::Kind::documents) {
      detail::fit_segments(cfg, r);
    }
  });
  if (last == Stage::ca) return r;

  if (cfg.criterion) {
    detail::in_stage(Stage::cluster, [&] {
      const auto& m = *r.model;
      const Eigen::Index k_avail = m.axes();
      if (k_avail < 1) throw ValidationError("model has no axes to cluster on");
      const Eigen::Index k_use = cfg.cluster_axes.resolve(*cfg.criterion, k_avail);
      PointCloud cloud{m.labels(cfg.cluster_side), m.coords(cfg.cluster_side).leftCols(k_use), {}};
      s.cluster_axes = k_use;
      r.dendrogram = *cfg.criterion == Criterion::ward
                         ? ward_cluster(cloud)
                         : constrained_complete_link(cloud, detail::identity_order(static_cast<int>(cloud.size())));
      if (cfg.cut.max_gap) {
        auto g = cut_max_gap(*r.dendrogram);
        r.partition = std::move(g.partition);
        s.degenerate_cut = g.degenerate;
      } else {
        r.partition = cut_k(*r.dendrogram, cfg.cut.k);
      }
      s.clusters = r.partition->k;
      s.cluster_sizes = r.partition->sizes();
      if (cfg.segmentation.kind == SegmentationSpec::Kind::clusters) detail::fit_segments(cfg, r);
    });
  }
  if (last == Stage::cluster) return r;

  if (r.partition) {
    detail::in_stage(Stage::vtest, [&] {
      const auto docs = cfg.cluster_side == Side::row ? r.filtered.table : r.filtered.table.transposed();
      r.report = characterize_clusters(docs, *r.partition, cfg.alpha, {false, cfg.vtest_normalize});
      s.significant_entries = r.report->entries.size();
      s.vtest_normalized = r.report->normalized;
    });
  }
  return r;
}

inline std::string format_summary(const RunSummary& s) {
  auto join_pct = [](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size() && i < 10; ++i) out += fmt::format("{}{:.1f}", i ? " " : "", v[i]);
    if (v.size() > 10) out += " ...";
    return out;
  };
  auto join_int = [](const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += fmt::format("{}{}", i ? " " : "", v[i]);
    return out;
  };
  std::string out;
  out += fmt::format("sentences: {}\nparagraphs: {}\n", s.sentences, s.paragraphs);
  out += fmt::format("raw_words: {}\nraw_occurrences: {}\n", s.raw_words, s.raw_occurrences);
  out += fmt::format("words: {}\noccurrences: {}\ndocuments: {}\ndropped_documents: {}\n", s.words,
                     s.occurrences, s.documents, s.dropped_documents);
  out += fmt::format("axes: {}\ncumulative_inertia: {}\n", s.axes, join_pct(s.cumulative_inertia));
  if (s.clusters) {
    out += fmt::format("cluster_axes: {}\nclusters: {}{}\ncluster_sizes: {}\n", s.cluster_axes, s.clusters,
                       s.degenerate_cut ? " (degenerate cut)" : "", join_int(s.cluster_sizes));
    out += fmt::format("significant_entries: {}\n", s.significant_entries);
    out += fmt::format("vtest_values: {}, p-values uncorrected\n",
                       s.vtest_normalized ? "relative frequencies" : "raw counts");
  }
  if (s.segments) {
    out += fmt::format("segments: {}\nsegment_sizes: {}\nsegment_axes: {}\nsegment_cumulative_inertia: {}\n",
                       s.segments, join_int(s.segment_sizes), s.segment_axes,
                       join_pct(s.segment_cumulative_inertia));
  }
  return out;
}

// Artifacts for every stage that ran, keyed by file name.
inline std::map<std::string, std::string> render_artifacts(const PipelineConfig& cfg, const PipelineResult& r) {
  std::map<std::string, std::string> files;
  files["sentences.csv"] = export_sentences_csv(r.records);
  if (r.last_stage >= Stage::corpus) {
    files["table.csv"] = export_table_csv(r.filtered.table);
    std::string dropped;
    for (const auto& id : r.filtered.dropped_rows) dropped += id + "\n";
    files["dropped_documents.txt"] = dropped;
  }
  auto add_model = [&](const std::string& prefix, const CAModel& m) {
    files[prefix + "inertia.csv"] = export_inertia_csv(m);
    files[prefix + "row_coords.csv"] = export_coords_csv(m, Side::row);
    files[prefix + "col_coords.csv"] = export_coords_csv(m, Side::col);
    files[prefix + "row_contrib.csv"] = export_contrib_csv(m, Side::row);
    files[prefix + "col_contrib.csv"] = export_contrib_csv(m, Side::col);
  };
  if (r.model) add_model("", *r.model);
  if (r.segment_model) {
    files["segments_table.csv"] = export_table_csv(*r.segment_table);
    add_model("segments_", *r.segment_model);
  }
  if (r.dendrogram) {
    files["dendrogram.txt"] = export_dendrogram(*r.dendrogram);
    files["partition.csv"] = export_partition_csv(*r.partition);
  }
  if (r.report) files["vtest.csv"] = export_vtest_csv(*r.report);
  if (r.last_stage >= Stage::plot) {
    detail::in_stage(Stage::plot, [&] {
      const auto [ax, ay] = cfg.plot_axes;
      if (r.model && r.model->axes() > std::max(ax, ay)) {
        PlaneOptions po{cfg.plot_side, cfg.plot_selection, false, "", 800, 800};
        files["factor_plane.svg"] = render_factor_plane(*r.model, ax, ay, po);
      }
      if (r.segment_model && r.segment_model->axes() > std::max(ax, ay)) {
        PlaneOptions po{Side::col, cfg.plot_selection, true, "", 800, 800};
        files["segments_plane.svg"] = render_factor_plane(*r.segment_model, ax, ay, po);
      }
      if (r.dendrogram) {
        DendrogramPlotOptions dpo;
        dpo.cut_k = r.partition->k;
        files["dendrogram.svg"] = render_dendrogram(*r.dendrogram, dpo);
      }
    });
  }
  files["summary.txt"] = format_summary(r.summary);
  return files;
}

// Writes into `<out>.staging` first; nothing is left behind on failure.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::optional<std::filesystem::path> out_dir = {},
                               Stage last = Stage::plot) {
  namespace fs = std::filesystem;
  const fs::path out = out_dir ? *out_dir : cfg.output_dir;
  fs::path staging = out;
  staging += ".staging";
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    auto result = execute_pipeline(cfg, last);
    auto files = render_artifacts(cfg, result);
    detail::in_stage("output", [&] {
      fs::create_directories(staging);
      for (const auto& [name, content] : files) detail::write_file(staging / name, content);
      fs::create_directories(out);
      for (const auto& [name, content] : files) fs::rename(staging / name, out / name);
      fs::remove_all(staging);
    });
    return result;
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

}  // namespace narrative
