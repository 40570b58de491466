#include "style3d/eval/harness.hpp"

#include "style3d/error.hpp"
#include "style3d/image_io.hpp"
#include "style3d/json_fixed.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace style3d::eval {
namespace fs = std::filesystem;
namespace {

void require_views(const std::vector<Image>& views) {
  if (views.empty()) throw ValidationError("no views to score");
}

double mean_cosine(const std::vector<Image>& views, const Eigen::VectorXd& ref, const Embedder& embedder) {
  // Shifted by the first term so repeated identical views give that term back exactly.
  const double first = cosine(embedder.embed_image(views.front()), ref);
  double offset = 0.0;
  for (std::size_t i = 1; i < views.size(); ++i) offset += cosine(embedder.embed_image(views[i]), ref) - first;
  return first + offset / static_cast<double>(views.size());
}

std::string stem_id(const std::string& path) {
  const std::string s = fs::path(path).stem().string();
  return s.empty() ? path : s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

}  // namespace

void EvalCase::validate() const {
  if (static_cast<int>(views.size()) != kViewsPerCase) {
    throw ValidationError(fmt::format("case {} has {} views; exactly {} are required", case_id(), views.size(),
                                      kViewsPerCase));
  }
  for (const Image& v : views)
    if (v.empty()) throw ValidationError("case " + case_id() + " has an empty view");
  if (content.empty()) throw ValidationError("case " + case_id() + " has no content image");
  if (prompt.empty()) throw ValidationError("case " + case_id() + " has an empty prompt");
}

double clip_text_image(const std::vector<Image>& views, const std::string& prompt, const Embedder& embedder) {
  require_views(views);
  if (prompt.empty()) throw ValidationError("empty prompt");
  return mean_cosine(views, embedder.embed_text(prompt), embedder);
}

double clip_image_image(const std::vector<Image>& views, const Image& content, const Embedder& embedder) {
  require_views(views);
  return mean_cosine(views, embedder.embed_image(content), embedder);
}

const char* to_string(Aggregation a) { return a == Aggregation::flat ? "flat" : "per_content"; }

Aggregation parse_aggregation(const std::string& s) {
  if (s == "flat") return Aggregation::flat;
  if (s == "per_content") return Aggregation::per_content;
  throw ValidationError("unknown aggregation '" + s + "' (expected flat or per_content)");
}

nlohmann::ordered_json ScoreReport::to_json() const {
  nlohmann::ordered_json j;
  j["embedder"] = embedder;
  j["aggregation"] = to_string(aggregation);
  j["config_hash"] = config_hash;
  j["num_cases"] = cases.size();
  auto arr = nlohmann::ordered_json::array();
  for (const CaseScore& c : cases) {
    nlohmann::ordered_json e;
    e["case_id"] = c.case_id;
    e["content"] = c.content_id;
    e["style"] = c.style_id;
    e["text_image"] = c.text_image;
    e["image_image"] = c.image_image;
    arr.push_back(std::move(e));
  }
  j["cases"] = std::move(arr);
  j["mean"] = {{"text_image", mean_text_image}, {"image_image", mean_image_image}};
  return j;
}

std::string ScoreReport::json_text() const { return dump_fixed(to_json(), 6); }

std::string ScoreReport::csv_text() const {
  std::string out = "case_id,text_image,image_image\n";
  for (const CaseScore& c : cases) out += fmt::format("{},{:.6f},{:.6f}\n", c.case_id, c.text_image, c.image_image);
  out += fmt::format("MEAN,{:.6f},{:.6f}\n", mean_text_image, mean_image_image);
  return out;
}

ScoreReport score_cases(const std::vector<EvalCase>& cases, const Embedder& embedder, Aggregation aggregation) {
  if (cases.empty()) throw ValidationError("evaluation manifest has no cases");
  ScoreReport r;
  r.embedder = embedder.name();
  r.aggregation = aggregation;
  for (const EvalCase& c : cases) {
    c.validate();
    r.cases.push_back({c.case_id(), c.content_id, c.style_id, clip_text_image(c.views, c.prompt, embedder),
                       clip_image_image(c.views, c.content, embedder)});
  }
  std::stable_sort(r.cases.begin(), r.cases.end(),
                   [](const CaseScore& a, const CaseScore& b) { return a.case_id < b.case_id; });

  // Every case has the same view count, so the flat (case, view) mean is the
  // mean of case means.
  if (aggregation == Aggregation::flat) {
    for (const CaseScore& c : r.cases) {
      r.mean_text_image += c.text_image;
      r.mean_image_image += c.image_image;
    }
    r.mean_text_image /= static_cast<double>(r.cases.size());
    r.mean_image_image /= static_cast<double>(r.cases.size());
  } else {
    std::map<std::string, std::vector<const CaseScore*>> groups;
    for (const CaseScore& c : r.cases) groups[c.content_id].push_back(&c);
    for (const auto& [id, members] : groups) {
      double t = 0.0, i = 0.0;
      for (const CaseScore* c : members) {
        t += c->text_image;
        i += c->image_image;
      }
      r.mean_text_image += t / static_cast<double>(members.size());
      r.mean_image_image += i / static_cast<double>(members.size());
    }
    r.mean_text_image /= static_cast<double>(groups.size());
    r.mean_image_image /= static_cast<double>(groups.size());
  }

  std::string key = r.embedder + "|" + to_string(aggregation);
  for (const EvalCase& c : cases) key += "|" + c.case_id() + "|" + c.prompt;
  r.config_hash = hex64(fnv1a64(key));
  return r;
}

std::vector<EvalCase> load_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ValidationError("cannot open manifest " + manifest.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest " + manifest.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_array()) throw ValidationError("manifest must be a JSON list of cases");
  if (j.empty()) throw ValidationError("evaluation manifest has no cases");

  const fs::path base = manifest.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  struct Entry {
    std::string content, style, views_dir, prompt;
  };
  std::vector<Entry> entries;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    Entry en;
    for (const char* key : {"content", "style", "views_dir", "prompt"}) {
      if (!e.is_object() || !e.contains(key) || !e[key].is_string()) {
        throw ValidationError(fmt::format("manifest entry {} needs string field '{}'", i, key));
      }
    }
    en.content = e["content"];
    en.style = e["style"];
    en.views_dir = e["views_dir"];
    en.prompt = e["prompt"];
    if (!fs::is_regular_file(resolve(en.content))) missing.push_back(resolve(en.content).string());
    for (int v = 0; v < kViewsPerCase; ++v) {
      const fs::path p = resolve(en.views_dir) / fmt::format("view_{}.png", v);
      if (!fs::is_regular_file(p)) missing.push_back(p.string());
    }
    entries.push_back(std::move(en));
  }
  if (!missing.empty()) {
    std::string msg = fmt::format("{} missing evaluation asset(s):", missing.size());
    for (const auto& m : missing) msg += "\n  " + m;
    throw ValidationError(msg);
  }

  std::vector<EvalCase> cases;
  for (const Entry& en : entries) {
    EvalCase c;
    c.content_id = stem_id(en.content);
    c.style_id = stem_id(en.style);
    c.prompt = en.prompt;
    c.content = read_image(resolve(en.content));
    for (int v = 0; v < kViewsPerCase; ++v)
      c.views.push_back(read_image(resolve(en.views_dir) / fmt::format("view_{}.png", v)));
    cases.push_back(std::move(c));
  }
  return cases;
}

ScoreReport eval_run(const fs::path& manifest, const Embedder& embedder, Aggregation aggregation,
                     const fs::path& out_dir) {
  ScoreReport r = score_cases(load_manifest(manifest), embedder, aggregation);
  if (!out_dir.empty()) write_report(r, out_dir);
  return r;
}

void write_report(const ScoreReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "report.json", report.json_text());
  write_text(out_dir / "report.csv", report.csv_text());
}

}  // namespace style3d::eval
