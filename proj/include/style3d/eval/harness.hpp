#pragma once

#include "style3d/eval/embedder.hpp"
#include "style3d/image.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace style3d::eval {

inline constexpr int kViewsPerCase = 6;

struct EvalCase {
  std::string content_id;
  std::string style_id;
  std::string prompt;
  std::vector<Image> views;
  Image content;

  std::string case_id() const { return content_id + "__" + style_id; }
  // Exactly six non-empty views, a content raster and a prompt.
  void validate() const;
};

// Mean cosine between the prompt embedding and each view embedding.
double clip_text_image(const std::vector<Image>& views, const std::string& prompt, const Embedder& embedder);
// Mean cosine between the content embedding and each view embedding.
double clip_image_image(const std::vector<Image>& views, const Image& content, const Embedder& embedder);

// flat: mean over every (case, view) pair. per_content: average the cases of
// each content object first, then average the objects.
enum class Aggregation { flat, per_content };
const char* to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& s);

struct CaseScore {
  std::string case_id;
  std::string content_id;
  std::string style_id;
  double text_image = 0.0;
  double image_image = 0.0;
};

struct ScoreReport {
  std::vector<CaseScore> cases;  // sorted by case_id
  double mean_text_image = 0.0;
  double mean_image_image = 0.0;
  std::string embedder;
  Aggregation aggregation = Aggregation::flat;
  std::string config_hash;

  nlohmann::ordered_json to_json() const;
  std::string json_text() const;
  std::string csv_text() const;
};

ScoreReport score_cases(const std::vector<EvalCase>& cases, const Embedder& embedder,
                        Aggregation aggregation = Aggregation::flat);

// Manifest: JSON list of {content, style, views_dir, prompt}. Relative paths
// resolve against the manifest's directory; views_dir must hold view_0.png ..
// view_5.png. Every missing path is collected and reported in one
// ValidationError. An empty list is an error.
std::vector<EvalCase> load_manifest(const std::filesystem::path& manifest);

// Loads, scores and, if out_dir is non-empty, writes report.json and report.csv.
ScoreReport eval_run(const std::filesystem::path& manifest, const Embedder& embedder,
                     Aggregation aggregation = Aggregation::flat, const std::filesystem::path& out_dir = {});

void write_report(const ScoreReport& report, const std::filesystem::path& out_dir);

}  // namespace style3d::eval
