// Command-line front end: each subcommand runs the pipeline up to its stage.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "narrative/pipeline.hpp"

namespace {

void print_inertia(const narrative::CAModel& m, const char* title) {
  const auto pct = narrative::percent_inertia(m);
  const auto cum = narrative::cumulative_inertia(m);
  fmt::print("{}\n  axis  eigenvalue  percent  cumulative\n", title);
  const auto shown = std::min<Eigen::Index>(m.axes(), 10);
  for (Eigen::Index k = 0; k < shown; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    fmt::print("  {:>4}  {:>10.6f}  {:>7.1f}  {:>10.1f}\n", k + 1, m.eigenvalue(k), pct[kk], cum[kk]);
  }
  if (m.axes() > shown) fmt::print("  ... {} more axes\n", m.axes() - shown);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Narrative text analysis: segmentation, correspondence analysis, clustering"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  const std::pair<const char*, narrative::Stage> commands[] = {
      {"prep", narrative::Stage::prep},       {"corpus", narrative::Stage::corpus},
      {"ca", narrative::Stage::ca},           {"cluster", narrative::Stage::cluster},
      {"vtest", narrative::Stage::vtest},     {"plot", narrative::Stage::plot},
      {"run", narrative::Stage::plot}};
  const char* help[] = {"segment the text into sentence records",
                        "build and filter the document-term table",
                        "fit correspondence analysis",
                        "cluster factor coordinates and cut the tree",
                        "characterize clusters with v-tests",
                        "render factor planes and the dendrogram",
                        "run every stage"};
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->add_option("--config", config_path, "pipeline config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    subs.push_back(sub);
  }
  CLI11_PARSE(app, argc, argv);

  narrative::Stage last = narrative::Stage::plot;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (subs[i]->parsed()) last = commands[i].second;
  }

  try {
    const auto cfg = narrative::load_config(config_path);
    std::optional<std::filesystem::path> out;
    if (!out_dir.empty()) out = out_dir;
    const auto target = out.value_or(cfg.output_dir);
    const auto result = narrative::run_pipeline(cfg, out, last);
    fmt::print("{}", narrative::format_summary(result.summary));
    if (result.model) print_inertia(*result.model, "inertia:");
    if (result.segment_model) print_inertia(*result.segment_model, "segment inertia:");
    fmt::print("outputs written to {}\n", target.string());
  } catch (const narrative::StageError& e) {
    fmt::print(stderr, "error {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
