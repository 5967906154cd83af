#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace guis;

namespace {

std::string reply_with(const std::string& fn) {
  return "Summary: s\nThought: t\nAction: a\nFunction: " + fn;
}

DetectionSet three_texts() {
  DetectionSet d;
  d.image = {1080, 1920};
  d.elements = {{"Text", {40, 100, 600, 200}, 0.9, "Alpha"},
                {"Button", {40, 400, 600, 500}, 0.9, "Beta"},
                {"Text", {40, 700, 600, 800}, 0.9, "Gamma"}};
  return d;
}

// Accepts everything, records what it was asked to do.
class RecordingDevice final : public DeviceInterface {
 public:
  explicit RecordingDevice(DetectionSet d, bool keyboard = false) : obs_{std::move(d), keyboard} {}
  Observation observe() const override { return obs_; }
  DeviceFeedback apply(const DeviceCommand& cmd) override {
    commands.push_back(cmd);
    if (std::holds_alternative<action::Text>(cmd) && !obs_.keyboard_visible)
      return {Feedback::error("no keyboard on screen"), std::nullopt};
    return {Feedback::success(), std::nullopt};
  }
  std::vector<DeviceCommand> commands;

 private:
  Observation obs_;
};

class FailingLlm final : public LlmClient {
 public:
  std::string complete(std::string_view, const Image*) override { throw TransportError("connection refused"); }
};

AppGraph load_graph(const std::string& app) {
  std::ifstream in(oracle::data_dir() / "toy" / (app + ".graph.json"));
  return nlohmann::json::parse(in).get<AppGraph>();
}

std::vector<TaskSpec> load_tasks(const std::string& app) {
  std::ifstream in(oracle::data_dir() / "toy" / (app + ".tasks.json"));
  return nlohmann::json::parse(in).get<std::vector<TaskSpec>>();
}

}  // namespace

TEST(Prompt, MinimalBundle) {
  const std::string p = build_prompt({"open settings", "", {}, std::nullopt, false});
  EXPECT_EQ(p,
            "You are an agent operating a smartphone on behalf of a user.\n"
            "# Task\nopen settings\n"
            "# Screen\n\n"
            "# History\nNone\n"
            "# Instructions\n"
            "Reply in exactly this format:\n"
            "Summary: <state summary>\n"
            "Thought: <reflection>\n"
            "Action: <explanation>\n"
            "Function: <Tap(id) | Long_press(id) | Text(\"...\") | Scroll(\"up|down|left|right\") | Back() | Finish()>\n");
  EXPECT_EQ(p.find("# Example"), std::string::npos);
}

TEST(Prompt, HistoryLines) {
  const std::vector<HistoryEntry> history{{1, action::Tap{3}, Feedback::success()},
                                          {2, action::Text{"hi"}, Feedback::error("no keyboard on screen")}};
  const std::string p = build_prompt({"t", "doc", history, std::nullopt, false});
  EXPECT_NE(p.find("# History\n1. Tap(3) -> ok\n2. Text(\"hi\") -> error: no keyboard on screen\n# Instructions"),
            std::string::npos)
      << p;
}

TEST(Prompt, UnparseableHistoryEntry) {
  EXPECT_EQ(render_history_line({4, std::nullopt, Feedback::error("unparseable reply: x")}),
            "4. <unparseable> -> error: unparseable reply: x");
}

TEST(Prompt, ExampleSectionListsCallsInOrder) {
  const TaskCase ex{"news", "follow a team", {{"Tap(5)", "the Following tab"}, {"Finish()", std::nullopt}}};
  const std::string p = build_prompt({"t", "doc", {}, ex, false});
  EXPECT_NE(p.find("# History\nNone\n# Example\nTask: follow a team\nSteps:\n1. Tap(5) # the Following tab\n2. "
                   "Finish()\n# Instructions\n"),
            std::string::npos)
      << p;
}

TEST(Prompt, EmptyTaskRejected) {
  EXPECT_THROW(build_prompt({"  ", "", {}, std::nullopt, false}), EmptyTask);
}

TEST(Prompt, DeterministicAndDistinguishing) {
  const PromptBundle a{"t", "<screen>", {}, std::nullopt, false};
  PromptBundle b = a;
  EXPECT_EQ(build_prompt(a), build_prompt(b));
  b.screen_doc = "<screen/>";
  EXPECT_NE(build_prompt(a), build_prompt(b));
  b = a;
  b.history.push_back({1, action::Back{}, Feedback::success()});
  EXPECT_NE(build_prompt(a), build_prompt(b));
}

TEST(Resolve, TapAtCenter) {
  ScreenDocument doc;
  doc.image_size = {100, 200};
  doc.tree.roots.push_back({GuiElement{0, ElementClass::Text, {0, 0, 5, 5}, "a", 1.0, false}, {}});
  doc.tree.roots.push_back({GuiElement{1, ElementClass::Button, {10, 20, 30, 40}, "b", 1.0, false}, {}});
  doc.tree.roots.push_back({GuiElement{2, ElementClass::Text, {50, 50, 60, 60}, "c", 1.0, false}, {}});
  EXPECT_EQ(std::get<command::Tap>(resolve_action(action::Tap{1}, doc)).at, (Point{20, 30}));
  EXPECT_EQ(std::get<command::LongPress>(resolve_action(action::LongPress{1}, doc)).at, (Point{20, 30}));
  try {
    resolve_action(action::Tap{99}, doc);
    FAIL();
  } catch (const UnknownId& e) {
    EXPECT_EQ(e.id(), 99);
  }
}

TEST(Resolve, ScrollSwipes) {
  ScreenDocument doc;
  doc.image_size = {100, 200};
  const auto down = std::get<command::Swipe>(resolve_action(action::Scroll{Direction::Down}, doc));
  EXPECT_EQ(down.from, (Point{50, 100}));
  EXPECT_EQ(down.to, (Point{50, 20}));
  const auto up = std::get<command::Swipe>(resolve_action(action::Scroll{Direction::Up}, doc));
  EXPECT_EQ(up.to, (Point{50, 180}));
  const auto left = std::get<command::Swipe>(resolve_action(action::Scroll{Direction::Left}, doc));
  EXPECT_EQ(left.to, (Point{90, 100}));
  const auto right = std::get<command::Swipe>(resolve_action(action::Scroll{Direction::Right}, doc));
  EXPECT_EQ(right.to, (Point{10, 100}));
}

TEST(Resolve, PassThrough) {
  const ScreenDocument doc;
  EXPECT_EQ(std::get<action::Text>(resolve_action(action::Text{"x"}, doc)).text, "x");
  EXPECT_TRUE(std::holds_alternative<action::Back>(resolve_action(action::Back{}, doc)));
  EXPECT_TRUE(std::holds_alternative<action::Finish>(resolve_action(action::Finish{}, doc)));
}

TEST(Episode, FinishOnFirstStep) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm({reply_with("Finish()")});
  const auto r = run_episode("do nothing", device, llm);
  EXPECT_EQ(r.status, EpisodeStatus::Finished);
  EXPECT_EQ(r.steps, 1);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].action, "Finish()");
  EXPECT_EQ(r.trace[0].feedback, "ok");
}

TEST(Episode, ScriptedOptimalTraceOnToyApp) {
  const AppGraph graph = load_graph("news");
  const auto tasks = load_tasks("news");
  const auto it = std::find_if(tasks.begin(), tasks.end(), [](const TaskSpec& t) { return t.optimal_steps == 3; });
  ASSERT_NE(it, tasks.end());
  SimulatedDevice device(graph, initial_state(graph, it->start_screen));
  ScriptedLlm llm(split_script(oracle::slurp(oracle::data_dir() / "toy" / "scripts" / (it->id + ".txt"))));
  const auto r = run_episode(it->description, device, llm);
  EXPECT_EQ(r.status, EpisodeStatus::Finished);
  EXPECT_EQ(r.steps, 3);
  for (const auto& s : r.trace) EXPECT_EQ(s.feedback, "ok") << s.action;
  EXPECT_TRUE(it->goal.holds(device.state()));
}

TEST(Episode, RepeatedUnknownIdFails) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm(std::vector<std::string>(10, reply_with("Tap(99)")));
  const auto r = run_episode("tap something", device, llm);
  EXPECT_EQ(r.status, EpisodeStatus::Failed);
  EXPECT_EQ(r.reason, kRepeatedErrors);
  EXPECT_EQ(r.steps, 3);
  EXPECT_TRUE(device.commands.empty());
  EXPECT_EQ(r.trace[0].feedback, "error: unknown id 99");
}

TEST(Episode, ErrorStreakResetsOnSuccess) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm({reply_with("Tap(99)"), reply_with("Tap(99)"), reply_with("Tap(0)"), reply_with("Tap(99)"),
                   reply_with("Tap(99)"), reply_with("Finish()")});
  const auto r = run_episode("t", device, llm);
  EXPECT_EQ(r.status, EpisodeStatus::Finished);
  EXPECT_EQ(r.steps, 6);
}

TEST(Episode, UnparseableReplyConsumesStep) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm({"I think I should tap", reply_with("Jump()"), reply_with("Finish()")});
  const auto r = run_episode("t", device, llm);
  EXPECT_EQ(r.status, EpisodeStatus::Finished);
  EXPECT_EQ(r.steps, 3);
  EXPECT_EQ(r.trace[0].feedback, "error: unparseable reply: missing section Summary");
  EXPECT_TRUE(r.trace[1].feedback.starts_with("error: unparseable reply: "));
  EXPECT_NE(r.trace[2].prompt.find("1. <unparseable> -> error: unparseable reply"), std::string::npos);
}

TEST(Episode, KeyboardErrorReachesHistory) {
  RecordingDevice device(three_texts(), false);
  ScriptedLlm llm({reply_with("Text(\"hi\")"), reply_with("Finish()")});
  const auto r = run_episode("type", device, llm);
  ASSERT_EQ(r.steps, 2);
  EXPECT_NE(r.trace[1].prompt.find("1. Text(\"hi\") -> error: no keyboard on screen"), std::string::npos);
}

TEST(Episode, StepLimit) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm(std::vector<std::string>(20, reply_with("Tap(0)")));
  EpisodeOptions opts;
  opts.limits.max_steps = 4;
  const auto r = run_episode("t", device, llm, opts);
  EXPECT_EQ(r.status, EpisodeStatus::Failed);
  EXPECT_EQ(r.reason, kStepLimit);
  EXPECT_EQ(r.steps, 4);
  EXPECT_EQ(r.trace.size(), 4u);
}

TEST(Episode, TransportErrorAborts) {
  RecordingDevice device(three_texts());
  FailingLlm llm;
  const auto r = run_episode("t", device, llm);
  EXPECT_EQ(r.status, EpisodeStatus::Aborted);
  EXPECT_EQ(r.steps, 0);
  EXPECT_NE(r.reason.find("connection refused"), std::string::npos);
}

TEST(Episode, ExhaustedScriptAborts) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm({reply_with("Tap(0)")});
  const auto r = run_episode("t", device, llm);
  EXPECT_EQ(r.status, EpisodeStatus::Aborted);
  EXPECT_EQ(r.steps, 1);
}

TEST(Episode, PromptEmbedsRenderedDocumentAndExample) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm({reply_with("Tap(1)"), reply_with("Finish()")});
  const CaseIndex index = CaseIndex::build({TaskCase{"a", "press beta", {{"Tap(1)", std::nullopt}, {"Finish()", {}}}}});
  EpisodeOptions opts;
  opts.retriever = &index;
  const auto r = run_episode("press beta please", device, llm, opts);
  TableCaptioner none;
  const std::string doc = render_document(build_document(three_texts(), none));
  ASSERT_EQ(r.trace.size(), static_cast<std::size_t>(r.steps));
  for (const auto& s : r.trace) {
    EXPECT_NE(s.prompt.find("# Screen\n" + doc + "\n# History"), std::string::npos);
    EXPECT_NE(s.prompt.find("# Example\nTask: press beta\n"), std::string::npos);
  }
  ASSERT_EQ(device.commands.size(), 2u);
  EXPECT_EQ(std::get<command::Tap>(device.commands[0]).at, (Point{320, 450}));
}

TEST(Episode, TraceJsonLines) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm({reply_with("Back()"), reply_with("Finish()")});
  const auto r = run_episode("t", device, llm);
  std::ostringstream out;
  write_trace_jsonl(out, r.trace);
  std::istringstream in(out.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step").get<int>(), ++n);
    for (const char* key : {"prompt", "reply", "action", "feedback"}) EXPECT_TRUE(j.at(key).is_string());
  }
  EXPECT_EQ(n, 2);
}

TEST(Episode, EmptyTask) {
  RecordingDevice device(three_texts());
  ScriptedLlm llm({reply_with("Finish()")});
  EXPECT_THROW(run_episode("", device, llm), EmptyTask);
}
