// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Seeds differ from the unit tests so the two suites sample
// different inputs.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

#include "guis/png_io.hpp"
#include "oracles.hpp"
#include "parser_corpus.hpp"

using namespace guis;
namespace fs = std::filesystem;

namespace {

int failures = 0;

// `body` returns an empty string on success, otherwise what went wrong.
void criterion(const std::string& name, const std::function<std::string()>& body) {
  std::string problem;
  try {
    problem = body();
  } catch (const std::exception& e) {
    problem = std::string("exception: ") + e.what();
  }
  if (problem.empty()) {
    std::cout << "PASS " << name << "\n";
  } else {
    std::cout << "FAIL " << name << ": " << problem << "\n";
    ++failures;
  }
}

fs::path toy() { return oracle::data_dir() / "toy"; }

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(oracle::slurp(p)); }

std::vector<TaskSpec> app_tasks(const nlohmann::json& app) {
  return load_json(toy() / app.at("tasks").get<std::string>()).get<std::vector<TaskSpec>>();
}

// Evaluates one manifest app with a script chosen per task.
Metrics eval_app(const nlohmann::json& manifest, const nlohmann::json& app,
                 const std::function<fs::path(const TaskSpec&)>& script_for) {
  const auto graph = load_json(toy() / app.at("graph").get<std::string>()).get<AppGraph>();
  const auto tasks = app_tasks(app);
  std::istringstream db(oracle::slurp(toy() / manifest.at("cases").get<std::string>()));
  const CaseIndex index = CaseIndex::build(read_cases_jsonl(db));
  TableCaptioner captioner(
      load_json(toy() / manifest.at("captions").get<std::string>()).get<std::map<std::string, std::string>>());
  EpisodeOptions opts;
  opts.retriever = &index;
  opts.captioner = &captioner;
  return evaluate_taskset(graph, tasks, [&](const TaskSpec& t) {
    return std::make_unique<ScriptedLlm>(split_script(oracle::slurp(script_for(t))));
  }, opts);
}

std::string same_shape(const std::vector<GuiNode>& a, const std::vector<GuiNode>& b) {
  if (a.size() != b.size()) return "child count " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i].element, &y = b[i].element;
    if (x.id != y.id || x.cls != y.cls || x.content != y.content || x.inferred != y.inferred)
      return "element " + std::to_string(y.id) + " differs";
    if (auto p = same_shape(a[i].children, b[i].children); !p.empty()) return p;
  }
  return "";
}

}  // namespace

int main() {
  std::cout.setf(std::ios::unitbuf);

  criterion("offline end-to-end: scripted-optimal toy set gives plan_sr 1.0 and the pinned avg_steps in < 5 s", [] {
    const auto manifest = load_json(toy() / "manifest.json");
    const auto start = std::chrono::steady_clock::now();
    std::vector<TaskResult> all;
    long long optimal = 0;
    const fs::path scripts = toy() / manifest.at("scripts").get<std::string>();
    for (const auto& app : manifest.at("apps")) {
      const auto m = eval_app(manifest, app, [&](const TaskSpec& t) { return scripts / (t.id + ".txt"); });
      all.insert(all.end(), m.tasks.begin(), m.tasks.end());
      for (const auto& t : app_tasks(app)) optimal += t.optimal_steps;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Metrics m = metrics_from_results(all);
    const auto& want = manifest.at("expected");
    const double mean_optimal = static_cast<double>(optimal) / static_cast<double>(all.size());
    if (all.size() != want.at("tasks").get<std::size_t>()) return "ran " + std::to_string(all.size()) + " tasks";
    if (m.plan_sr != 1.0) return "plan_sr " + std::to_string(m.plan_sr);
    if (!m.avg_steps || std::abs(*m.avg_steps - want.at("avg_steps").get<double>()) > 1e-12 ||
        std::abs(*m.avg_steps - mean_optimal) > 1e-12)
      return "avg_steps " + (m.avg_steps ? std::to_string(*m.avg_steps) : std::string("null")) + ", mean optimal " +
             std::to_string(mean_optimal);
    if (seconds >= 5.0) return "took " + std::to_string(seconds) + " s";
    return std::string();
  });

  criterion("adversarial scripts: always-Back gives plan_sr 0.0, Tap(99) loop ends in repeated_errors", [] {
    const auto manifest = load_json(toy() / "manifest.json");
    const int budget = EpisodeLimits{}.max_consecutive_errors;
    for (const auto& app : manifest.at("apps")) {
      const std::string name = app.at("name").get<std::string>();
      const auto back = eval_app(manifest, app, [](const TaskSpec&) { return toy() / "adversarial" / "always_back.txt"; });
      if (back.plan_sr != 0.0) return name + ": always-Back plan_sr " + std::to_string(back.plan_sr);
      const auto tap = eval_app(manifest, app, [](const TaskSpec&) { return toy() / "adversarial" / "tap_99.txt"; });
      if (tap.plan_sr != 0.0) return name + ": Tap(99) plan_sr " + std::to_string(tap.plan_sr);
      for (const auto& t : tap.tasks)
        if (t.reason != kRepeatedErrors || t.steps > budget + 3)
          return t.id + ": reason '" + t.reason + "' after " + std::to_string(t.steps) + " steps";
    }
    return std::string();
  });

  criterion("DBSCAN equals the naive reference on 100 seeded sets (n <= 200)", [] {
    std::mt19937_64 rng(1001);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 200)(rng);
      const std::size_t dim = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
      const double eps = std::uniform_real_distribution<double>(0.2, 1.5)(rng);
      const std::size_t min_pts = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
      const auto pts = oracle::random_points(rng, n, dim);
      if (!oracle::same_partition(dbscan(pts, eps, min_pts), oracle::dbscan_reference(pts, eps, min_pts)))
        return "trial " + std::to_string(trial);
    }
    return std::string();
  });

  criterion("hierarchy invariants on 500 fuzzed screens (<= 60 boxes)", [] {
    std::mt19937_64 rng(1002);
    for (int trial = 0; trial < 500; ++trial) {
      const auto els = oracle::random_layout(rng, std::uniform_int_distribution<std::size_t>(0, 60)(rng));
      if (auto p = oracle::check_hierarchy(els, build_hierarchy(els, 0.9), 0.9); !p.empty())
        return "trial " + std::to_string(trial) + ": " + p;
    }
    return std::string();
  });

  criterion("XY-cut equals row-major order on 50 grids and permutes arbitrary input", [] {
    auto ids = [](const std::vector<GuiElement>& els) {
      std::vector<int> out;
      for (const auto& e : els) out.push_back(e.id);
      return out;
    };
    std::mt19937_64 rng(1003);
    for (int trial = 0; trial < 50; ++trial) {
      const auto g = oracle::random_grid(rng);
      if (ids(xy_cut_order(g.elements)) != g.row_major_ids) return "grid " + std::to_string(trial);
    }
    for (int trial = 0; trial < 200; ++trial) {
      const auto els = oracle::random_boxes(rng, std::uniform_int_distribution<std::size_t>(0, 40)(rng));
      auto got = ids(xy_cut_order(els));
      std::sort(got.begin(), got.end());
      if (got != ids(els)) return "permutation " + std::to_string(trial);
    }
    return std::string();
  });

  criterion("homography reprojects corners within 1e-6 on 1000 quads; identity warp is byte-identical", [] {
    std::mt19937_64 rng(1004);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto src = oracle::random_quad(rng), dst = oracle::random_quad(rng);
      const Homography h = homography_from_quad(src, dst);
      for (int i = 0; i < 4; ++i) worst = std::max(worst, distance(h.apply(src[i]), dst[i]));
    }
    if (worst > 1e-6) return "worst corner error " + std::to_string(worst);
    const Image img = oracle::photo_like(53, 31);
    if (!(warp_perspective(img, Homography::identity()) == img)) return std::string("identity warp changed pixels");
    return std::string();
  });

  criterion("augmentation: same seed gives byte-identical PNGs, zero parameters are identities, 1x2 ramp is (255, 153)", [] {
    const auto cfg = load_json(oracle::data_dir() / "augment.json").get<AugmentConfig>();
    const fs::path dir = fs::temp_directory_path() / "guis_acceptance_aug";
    fs::remove_all(dir);
    for (const char* run : {"a", "b"}) {
      fs::create_directories(dir / run);
      const std::vector<Image> inputs{oracle::photo_like(64, 48), oracle::gradient(40, 40), oracle::photo_like(17, 29)};
      for (std::size_t i = 0; i < inputs.size(); ++i)
        write_png(dir / run / (std::to_string(i) + ".png"), augment_pipeline(inputs[i], cfg, i).image);
    }
    for (int i = 0; i < 3; ++i) {
      const std::string f = std::to_string(i) + ".png";
      if (oracle::slurp(dir / "a" / f) != oracle::slurp(dir / "b" / f)) return "image " + f + " differs between runs";
    }
    fs::remove_all(dir);

    const Image img = oracle::photo_like(32, 24);
    CounterRng rng(cfg.seed, 0, 1);
    if (!(light_mask(img, {0.0, LightKind::Radial, {0.4, 0.6}, 30}) == img)) return std::string("light strength 0");
    if (!(gaussian_noise(img, 0.0, rng) == img)) return std::string("noise sigma 0");
    if (!(rotate(img, 0.0) == img)) return std::string("rotation 0");
    if (!(perspective_jitter(img, 0.0, rng).image == img)) return std::string("perspective jitter 0");
    AugmentConfig zero = cfg;
    zero.light_strength = {0, 0};
    zero.noise_sigma = {0, 0};
    zero.rotation_deg = {0, 0};
    zero.perspective_jitter = 0;
    if (!(augment_pipeline(img, zero).image == img)) return std::string("zero-parameter pipeline");

    const Image ramp = light_mask(Image(2, 1, 255), {-0.4, LightKind::Linear, {0.0, 0.5}, 0.0});
    if (ramp.at(0, 0, 0) != 255 || ramp.at(1, 0, 0) != 153)
      return "ramp gave (" + std::to_string(ramp.at(0, 0, 0)) + ", " + std::to_string(ramp.at(1, 0, 0)) + ")";
    return std::string();
  });

  criterion("reply/call parser corpus classified exactly; 10k fuzz inputs without crash", [] {
    int pos = 0, neg = 0;
    for (const auto& c : corpus::cases()) {
      (c.positive ? pos : neg)++;
      std::string got;
      try {
        got = "ok:" + render_call(c.reply ? parse_reply(c.input).action : parse_call(c.input));
      } catch (const CallError& e) {
        got = std::string(CallError::kind_name(e.kind()));
      } catch (const MissingSection& e) {
        got = "MissingSection:" + e.name();
      }
      if (got != (c.positive ? "ok:" + c.expect : c.expect)) return "'" + c.input + "' classified as " + got;
    }
    if (pos < 20 || neg < 20) return "corpus has " + std::to_string(pos) + "/" + std::to_string(neg) + " cases";
    std::mt19937_64 rng(1005);
    std::uniform_int_distribution<int> byte(0, 255), len(0, 120);
    const std::string alphabet = "TapLong_prsexScrolBackFinish()\"\\,:\n 0123456789SummaryThoughtActionFunction";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (int i = 0; i < 10000; ++i) {
      std::string s;
      for (int k = len(rng); k > 0; --k) s += i % 2 ? static_cast<char>(byte(rng)) : alphabet[pick(rng)];
      for (const std::string& input : {s, corpus::reply(s)}) {
        try {
          (void)parse_reply(input);
        } catch (const MissingSection&) {
        } catch (const CallError&) {
        }
        try {
          (void)parse_call(input);
        } catch (const CallError&) {
        }
      }
    }
    return std::string();
  });

  criterion("document round trip on 200 fuzzed trees; 5 golden files byte-equal", [] {
    std::mt19937_64 rng(1006);
    for (int trial = 0; trial < 200; ++trial) {
      const ScreenDocument doc = oracle::random_document(rng);
      const ScreenDocument back = parse_document(render_document(doc));
      if (auto p = same_shape(back.tree.roots, doc.tree.roots); !p.empty())
        return "trial " + std::to_string(trial) + ": " + p;
      if (!(back.image_size == doc.image_size) || !(back.lists == doc.lists)) return "trial " + std::to_string(trial);
    }
    for (const auto& name : oracle::golden_names())
      if (oracle::render_golden(name) != oracle::slurp(oracle::data_dir() / "golden" / (name + ".expected.txt")))
        return "golden " + name;
    return std::string();
  });

  criterion("retrieval ranking equals brute-force cosine on 50 corpora; verbatim self-retrieval is 1.0", [] {
    std::mt19937_64 rng(1007);
    const std::vector<std::string> vocab{"open", "the", "news", "search", "sports", "weather", "settings", "font",
                                         "size", "follow", "team", "cart", "buy", "shoes", "wi-fi", "dark", "mode"};
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::string> corpus;
      std::vector<TaskCase> cases;
      const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        corpus.push_back(oracle::random_sentence(rng, vocab));
        cases.push_back({"app", corpus.back(), {{"Finish()", std::nullopt}}});
      }
      const CaseIndex index = CaseIndex::build(cases);
      for (int q = 0; q < 5; ++q) {
        const std::string query = oracle::random_sentence(rng, vocab);
        const auto want = oracle::brute_force_ranking(corpus, query);
        const auto got = index.query(query, n);
        for (std::size_t i = 0; i < n; ++i)
          if (got[i].index != want[i].first || std::abs(got[i].similarity - want[i].second) > 1e-9)
            return "trial " + std::to_string(trial) + " rank " + std::to_string(i);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto top = index.query(corpus[i], 1).front();
        if (std::abs(top.similarity - 1.0) > 1e-12 || corpus[top.index] != corpus[i])
          return "self-retrieval of '" + corpus[i] + "' gave " + std::to_string(top.similarity);
      }
    }
    return std::string();
  });

  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failures ? 1 : 0;
}
