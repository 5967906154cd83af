#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "guis/guis.hpp"
#include "guis/http_llm.hpp"
#include "guis/png_io.hpp"
#include "json.hpp"

namespace guis::cli {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

inline TableCaptioner load_captioner(const std::string& path) {
  if (path.empty()) return TableCaptioner{};
  return TableCaptioner(read_json(path).get<std::map<std::string, std::string>>());
}

inline std::optional<CaseIndex> load_index(const std::string& path) {
  if (path.empty()) return std::nullopt;
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return CaseIndex::build(read_cases_jsonl(in));
}

inline std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw FormatError("not a number: '" + item + "'");
    }
  }
  return out;
}

inline ImageSize parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t a = 0, b = 0;
    const int w = std::stoi(s.substr(0, x), &a);
    const int h = std::stoi(s.substr(x + 1), &b);
    if (a != x || b != s.size() - x - 1 || w <= 0 || h <= 0) throw std::invalid_argument(s);
    return {w, h};
  } catch (const std::exception&) {
    throw FormatError("size must look like WIDTHxHEIGHT, got '" + s + "'");
  }
}

inline std::vector<TaskSpec> load_tasks(const fs::path& p) {
  try {
    return read_json(p).get<std::vector<TaskSpec>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

inline AppGraph load_graph(const fs::path& p) {
  AppGraph g;
  try {
    g = read_json(p).get<AppGraph>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  g.validate();
  return g;
}

inline std::unique_ptr<LlmClient> script_llm(const fs::path& p) {
  auto replies = split_script(read_file(p));
  if (replies.empty()) throw FormatError(p.string() + ": script has no replies");
  return std::make_unique<ScriptedLlm>(std::move(replies));
}

/// Entry point shared by the `guis` binary and the tests. Exit codes: 0 ok,
/// 1 domain/file error, 2 usage error.
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GUI screen parsing and app-operation agent toolkit", "guis"};
  app.require_subcommand(1);

  // parse
  std::string detections_path, captions_path, out_path;
  auto* parse = app.add_subcommand("parse", "Render detections as an HTML-like screen document");
  parse->add_option("--detections", detections_path, "Detection JSON")->required();
  parse->add_option("--captions", captions_path, "Icon caption table (fingerprint -> text)");
  parse->add_option("--out", out_path, "Write to file instead of stdout");

  // rectify
  std::string image_path, corners, size_str, rectify_out;
  auto* rectify = app.add_subcommand("rectify", "Warp a screen quad in a photo to an upright rectangle");
  rectify->add_option("--image", image_path, "Input PNG")->required();
  rectify->add_option("--corners", corners, "x0,y0,x1,y1,x2,y2,x3,y3 (TL, TR, BR, BL)")->required();
  rectify->add_option("--size", size_str, "Output WIDTHxHEIGHT")->required();
  rectify->add_option("--out", rectify_out, "Output PNG")->required();

  // augment
  std::string aug_in, aug_out, aug_config, aug_transforms;
  auto* augment = app.add_subcommand("augment", "Seeded color/shape augmentation of a PNG directory");
  augment->add_option("--in", aug_in, "Input directory")->required();
  augment->add_option("--out", aug_out, "Output directory")->required();
  augment->add_option("--config", aug_config, "Augmentation config JSON")->required();
  augment->add_option("--transforms", aug_transforms, "Write per-image geometric transforms (JSON Lines)");

  // cases query
  std::string db_path, query_task;
  std::size_t k = 1;
  auto* cases = app.add_subcommand("cases", "Case database tools");
  cases->require_subcommand(1);
  auto* query = cases->add_subcommand("query", "Most similar solved tasks");
  query->add_option("--db", db_path, "Case database (JSON Lines)")->required();
  query->add_option("--task", query_task, "Task description")->required();
  query->add_option("-k", k, "Number of hits")->check(CLI::PositiveNumber);

  // run
  std::string graph_path, run_task, script_path, trace_path, run_db, run_captions, start_screen;
  int max_steps = 15;
  auto* run = app.add_subcommand("run", "Run one episode against a simulated app");
  run->add_option("--graph", graph_path, "App graph JSON")->required();
  run->add_option("--task", run_task, "Task description")->required();
  run->add_option("--script", script_path, "Scripted replies ('---' separated); default: env-configured LLM");
  run->add_option("--trace", trace_path, "Trace output (JSON Lines)");
  run->add_option("--db", run_db, "Case database for prompt examples");
  run->add_option("--captions", run_captions, "Icon caption table");
  run->add_option("--start", start_screen, "Start screen (default: graph start)");
  run->add_option("--max-steps", max_steps, "Step limit")->check(CLI::PositiveNumber);

  // eval
  std::string eval_graph, tasks_path, script_dir, eval_script, eval_out, eval_db, eval_captions, trace_dir;
  auto* eval = app.add_subcommand("eval", "Plan success rate over a task set");
  eval->add_option("--graph", eval_graph, "App graph JSON")->required();
  eval->add_option("--tasks", tasks_path, "Task set JSON")->required();
  auto* dir_opt = eval->add_option("--script-dir", script_dir, "Per-task scripts named <task-id>.txt");
  eval->add_option("--script", eval_script, "One script used for every task")->excludes(dir_opt);
  eval->add_option("--out", eval_out, "Metrics JSON output (default: stdout)");
  eval->add_option("--db", eval_db, "Case database for prompt examples");
  eval->add_option("--captions", eval_captions, "Icon caption table");
  eval->add_option("--trace-dir", trace_dir, "Write <task-id>.jsonl traces here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (parse->parsed()) {
      const DetectionSet dets = parse_detections(read_file(detections_path));
      TableCaptioner captioner = load_captioner(captions_path);
      const ScreenDocument doc = build_document(dets, captioner);
      for (const auto& w : doc.warnings) err << "warning: " << w << "\n";
      const std::string text = render_document(doc) + "\n";
      if (out_path.empty())
        out << text;
      else
        write_text(out_path, text);
      return 0;
    }

    if (rectify->parsed()) {
      const auto v = parse_number_list(corners);
      if (v.size() != 8) throw FormatError("--corners needs 8 numbers");
      const ImageSize size = parse_size(size_str);
      const Image img = read_png(image_path);
      const std::array<Point, 4> src{{{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}}};
      const double w = size.width - 1, h = size.height - 1;
      const std::array<Point, 4> dst{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
      write_png(rectify_out, warp_perspective(img, homography_from_quad(src, dst), size.width, size.height));
      return 0;
    }

    if (augment->parsed()) {
      const AugmentConfig cfg = read_json(aug_config).get<AugmentConfig>();
      std::vector<fs::path> inputs;
      for (const auto& entry : fs::directory_iterator(aug_in))
        if (entry.is_regular_file() && entry.path().extension() == ".png") inputs.push_back(entry.path());
      std::sort(inputs.begin(), inputs.end());
      fs::create_directories(aug_out);
      std::ofstream transforms;
      if (!aug_transforms.empty()) {
        transforms.open(aug_transforms);
        if (!transforms) throw Error("cannot write " + aug_transforms);
      }
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const AugmentResult r = augment_pipeline(read_png(inputs[i]), cfg, i);
        write_png(fs::path(aug_out) / inputs[i].filename(), r.image);
        if (transforms.is_open())
          transforms << nlohmann::json{{"file", inputs[i].filename().string()}, {"homography", r.transform.matrix()}}
                            .dump()
                     << "\n";
      }
      out << nlohmann::json{{"images", inputs.size()}}.dump() << "\n";
      return 0;
    }

    if (query->parsed()) {
      const auto index = load_index(db_path);
      nlohmann::json hits = nlohmann::json::array();
      int rank = 1;
      for (const auto& h : index->query(query_task, k)) {
        nlohmann::json j = h.task_case;
        j["rank"] = rank++;
        j["similarity"] = h.similarity;
        hits.push_back(std::move(j));
      }
      out << hits.dump(2) << "\n";
      return 0;
    }

    if (run->parsed()) {
      const AppGraph graph = load_graph(graph_path);
      const auto index = load_index(run_db);
      TableCaptioner captioner = load_captioner(run_captions);
      std::unique_ptr<LlmClient> llm =
          script_path.empty() ? std::make_unique<HttpLlmClient>(LlmConfig::from_env()) : script_llm(script_path);
      EpisodeOptions opts;
      opts.limits.max_steps = max_steps;
      opts.retriever = index ? &*index : nullptr;
      opts.captioner = &captioner;
      SimulatedDevice device(graph, initial_state(graph, start_screen.empty() ? std::nullopt
                                                                              : std::optional<std::string>(start_screen)));
      const EpisodeResult r = run_episode(run_task, device, *llm, opts);
      if (!trace_path.empty()) {
        std::ofstream t(trace_path);
        if (!t) throw Error("cannot write " + trace_path);
        write_trace_jsonl(t, r.trace);
      }
      out << nlohmann::json{{"status", to_string(r.status)},
                            {"reason", r.reason},
                            {"steps", r.steps},
                            {"screen", device.state().screen}}
                 .dump()
          << "\n";
      return 0;
    }

    if (eval->parsed()) {
      const AppGraph graph = load_graph(eval_graph);
      const auto tasks = load_tasks(tasks_path);
      const auto index = load_index(eval_db);
      TableCaptioner captioner = load_captioner(eval_captions);
      EpisodeOptions opts;
      opts.retriever = index ? &*index : nullptr;
      opts.captioner = &captioner;
      LlmFactory factory = [&](const TaskSpec& t) -> std::unique_ptr<LlmClient> {
        if (!script_dir.empty()) return script_llm(fs::path(script_dir) / (t.id + ".txt"));
        if (!eval_script.empty()) return script_llm(eval_script);
        return std::make_unique<HttpLlmClient>(LlmConfig::from_env());
      };
      const Metrics m = evaluate_taskset(graph, tasks, factory, opts);
      if (!trace_dir.empty()) {
        fs::create_directories(trace_dir);
        for (const auto& t : m.tasks) {
          std::ofstream f(fs::path(trace_dir) / (t.id + ".jsonl"));
          write_trace_jsonl(f, t.episode.trace);
        }
      }
      const std::string text = metrics_json(m).dump(2) + "\n";
      if (eval_out.empty())
        out << text;
      else
        write_text(eval_out, text);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace guis::cli
