#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "guis/agent.hpp"
#include "guis/error.hpp"
#include "guis/perception.hpp"
#include "json.hpp"

namespace guis {

enum class Trigger { Tap, LongPress, Scroll, Back, TextSubmit };

struct Transition {
  Trigger on = Trigger::Tap;
  int element = -1;                       // Tap / LongPress
  Direction direction = Direction::Down;  // Scroll
  std::optional<std::string> target;      // screen to go to; stays put when empty
  std::map<std::string, bool> sets;
};

struct ScreenSpec {
  DetectionSet detections;
  bool keyboard_visible = false;
  std::vector<int> interactive;
  std::vector<Transition> transitions;
};

class InvalidGraph : public Error {
 public:
  using Error::Error;
};

struct AppGraph {
  std::string app;
  std::string start;
  std::map<std::string, ScreenSpec> screens;
  std::map<std::string, bool> initial_flags;

  void validate() const {
    if (!screens.contains(start)) throw InvalidGraph("start screen '" + start + "' does not exist");
    for (const auto& [id, s] : screens) {
      const int n = static_cast<int>(s.detections.elements.size());
      std::set<int> interactive;
      for (int i : s.interactive) {
        if (i < 0 || i >= n) throw InvalidGraph("screen '" + id + "': interactive index out of range");
        interactive.insert(i);
      }
      for (const auto& t : s.transitions) {
        if (t.target && !screens.contains(*t.target))
          throw InvalidGraph("screen '" + id + "': transition to unknown screen '" + *t.target + "'");
        if ((t.on == Trigger::Tap || t.on == Trigger::LongPress) && !interactive.contains(t.element))
          throw InvalidGraph("screen '" + id + "': transition on non-interactive element " +
                             std::to_string(t.element));
      }
    }
  }
};

struct DeviceState {
  std::string screen;
  std::map<std::string, bool> flags;
  std::optional<std::string> entered_text;
  friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

inline DeviceState initial_state(const AppGraph& g, const std::optional<std::string>& start = std::nullopt) {
  const std::string screen = start.value_or(g.start);
  if (!g.screens.contains(screen)) throw InvalidGraph("unknown start screen '" + screen + "'");
  return {screen, g.initial_flags, std::nullopt};
}

inline Observation observe(const AppGraph& g, const DeviceState& s) {
  const auto& spec = g.screens.at(s.screen);
  return {spec.detections, spec.keyboard_visible};
}

/// Interactive element whose box centre is nearest to `p`, ties to the lower
/// index. No distance cutoff.
inline std::optional<std::pair<int, double>> nearest_interactive(const ScreenSpec& spec, Point p) {
  std::optional<std::pair<int, double>> best;
  std::vector<int> candidates = spec.interactive;
  std::sort(candidates.begin(), candidates.end());
  for (int i : candidates) {
    const double d = distance(spec.detections.elements[static_cast<std::size_t>(i)].bbox.center(), p);
    if (!best || d < best->second) best = {i, d};
  }
  return best;
}

// Scroll direction implied by a swipe: content follows the finger.
inline std::optional<Direction> swipe_direction(const command::Swipe& s) {
  const double dx = s.to.x - s.from.x;
  const double dy = s.to.y - s.from.y;
  if (dx == 0.0 && dy == 0.0) return std::nullopt;
  if (std::abs(dy) >= std::abs(dx)) return dy < 0 ? Direction::Down : Direction::Up;
  return dx > 0 ? Direction::Left : Direction::Right;
}

namespace detail {

inline DeviceState fire(const Transition& t, DeviceState s) {
  if (t.target) s.screen = *t.target;
  for (const auto& [flag, value] : t.sets) s.flags[flag] = value;
  return s;
}

}  // namespace detail

inline constexpr std::string_view kNoOp = "no-op";
inline constexpr std::string_view kNoKeyboard = "no keyboard on screen";

/// Pure transition function of the simulated device.
inline std::pair<DeviceState, DeviceFeedback> apply_command(const AppGraph& g, const DeviceState& state,
                                                            const DeviceCommand& cmd) {
  const ScreenSpec& spec = g.screens.at(state.screen);
  auto find = [&](auto pred) -> const Transition* {
    for (const auto& t : spec.transitions)
      if (pred(t)) return &t;
    return nullptr;
  };
  auto no_op = [&](std::optional<double> dist = std::nullopt) {
    return std::pair{state, DeviceFeedback{Feedback::error(std::string(kNoOp)), dist}};
  };

  if (std::holds_alternative<command::Tap>(cmd) || std::holds_alternative<command::LongPress>(cmd)) {
    const bool tap = std::holds_alternative<command::Tap>(cmd);
    const Point at = tap ? std::get<command::Tap>(cmd).at : std::get<command::LongPress>(cmd).at;
    const auto hit = nearest_interactive(spec, at);
    if (!hit) return no_op();
    const Trigger kind = tap ? Trigger::Tap : Trigger::LongPress;
    const Transition* t = find([&](const Transition& t) { return t.on == kind && t.element == hit->first; });
    if (!t) return no_op(hit->second);
    return {detail::fire(*t, state), DeviceFeedback{Feedback::success(), hit->second}};
  }
  if (const auto* swipe = std::get_if<command::Swipe>(&cmd)) {
    const auto dir = swipe_direction(*swipe);
    if (!dir) return no_op();
    const Transition* t = find([&](const Transition& t) { return t.on == Trigger::Scroll && t.direction == *dir; });
    if (!t) return no_op();
    return {detail::fire(*t, state), DeviceFeedback{Feedback::success(), std::nullopt}};
  }
  if (const auto* text = std::get_if<action::Text>(&cmd)) {
    if (!spec.keyboard_visible)
      return {state, DeviceFeedback{Feedback::error(std::string(kNoKeyboard)), std::nullopt}};
    DeviceState next = state;
    next.entered_text = text->text;
    if (const Transition* t = find([](const Transition& t) { return t.on == Trigger::TextSubmit; }))
      next = detail::fire(*t, std::move(next));
    return {next, DeviceFeedback{Feedback::success(), std::nullopt}};
  }
  if (std::holds_alternative<action::Back>(cmd)) {
    const Transition* t = find([](const Transition& t) { return t.on == Trigger::Back; });
    if (!t) return no_op();
    return {detail::fire(*t, state), DeviceFeedback{Feedback::success(), std::nullopt}};
  }
  return {state, DeviceFeedback{Feedback::success(), std::nullopt}};  // Finish
}

class SimulatedDevice final : public DeviceInterface {
 public:
  SimulatedDevice(const AppGraph& graph, DeviceState state) : graph_(graph), state_(std::move(state)) {}

  Observation observe() const override { return guis::observe(graph_, state_); }

  DeviceFeedback apply(const DeviceCommand& cmd) override {
    auto [next, fb] = apply_command(graph_, state_, cmd);
    state_ = std::move(next);
    return fb;
  }

  const DeviceState& state() const noexcept { return state_; }

 private:
  const AppGraph& graph_;
  DeviceState state_;
};

// ---------------------------------------------------------------------------
// Tasks and metrics

struct Goal {
  std::optional<std::string> screen;
  std::map<std::string, bool> flags;
  std::optional<std::string> text;

  bool empty() const { return !screen && flags.empty() && !text; }

  bool holds(const DeviceState& s) const {
    if (screen && s.screen != *screen) return false;
    for (const auto& [flag, value] : flags) {
      auto it = s.flags.find(flag);
      if ((it != s.flags.end() && it->second) != value) return false;
    }
    if (text && s.entered_text != *text) return false;
    return true;
  }
};

struct TaskSpec {
  std::string id;
  std::string description;
  std::optional<std::string> start_screen;
  Goal goal;
  int optimal_steps = 1;
};

struct TaskResult {
  std::string id;
  bool success = false;
  int steps = 0;
  std::string reason;
  EpisodeResult episode;
};

struct Metrics {
  double plan_sr = 0.0;
  std::optional<double> avg_steps;  // over successful episodes only
  std::vector<TaskResult> tasks;
};

class EmptyTaskSet : public Error {
 public:
  EmptyTaskSet() : Error("task set is empty") {}
};

inline Metrics metrics_from_results(std::vector<TaskResult> results) {
  if (results.empty()) throw EmptyTaskSet();
  Metrics m;
  int successes = 0;
  long long success_steps = 0;
  for (const auto& r : results)
    if (r.success) {
      ++successes;
      success_steps += r.steps;
    }
  m.plan_sr = static_cast<double>(successes) / static_cast<double>(results.size());
  if (successes > 0) m.avg_steps = static_cast<double>(success_steps) / successes;
  m.tasks = std::move(results);
  return m;
}

using LlmFactory = std::function<std::unique_ptr<LlmClient>(const TaskSpec&)>;

/// Runs every task from a fresh device. A task succeeds when its episode ends
/// with Finish and the goal predicate holds on the final state.
inline Metrics evaluate_taskset(const AppGraph& graph, const std::vector<TaskSpec>& tasks, const LlmFactory& make_llm,
                                const EpisodeOptions& opts = {}) {
  if (tasks.empty()) throw EmptyTaskSet();
  graph.validate();
  std::vector<TaskResult> results;
  for (const auto& task : tasks) {
    SimulatedDevice device(graph, initial_state(graph, task.start_screen));
    std::unique_ptr<LlmClient> llm = make_llm(task);
    EpisodeResult ep = run_episode(task.description, device, *llm, opts);
    ep.success = ep.status == EpisodeStatus::Finished && task.goal.holds(device.state());
    TaskResult r{task.id, ep.success, ep.steps, "", {}};
    if (ep.status == EpisodeStatus::Finished)
      r.reason = ep.success ? "" : "goal_not_met";
    else if (ep.status == EpisodeStatus::Aborted)
      r.reason = "aborted: " + ep.reason;
    else
      r.reason = ep.reason;
    r.episode = std::move(ep);
    results.push_back(std::move(r));
  }
  return metrics_from_results(std::move(results));
}

// ---------------------------------------------------------------------------
// JSON

inline std::string_view to_string(Trigger t) {
  switch (t) {
    case Trigger::Tap: return "tap";
    case Trigger::LongPress: return "long_press";
    case Trigger::Scroll: return "scroll";
    case Trigger::Back: return "back";
    case Trigger::TextSubmit: return "text_submit";
  }
  return "tap";
}

inline void from_json(const nlohmann::json& j, Transition& t) {
  const auto on = j.at("on").get<std::string>();
  if (on == "tap")
    t.on = Trigger::Tap;
  else if (on == "long_press")
    t.on = Trigger::LongPress;
  else if (on == "scroll")
    t.on = Trigger::Scroll;
  else if (on == "back")
    t.on = Trigger::Back;
  else if (on == "text_submit")
    t.on = Trigger::TextSubmit;
  else
    throw InvalidGraph("unknown transition trigger '" + on + "'");
  if (t.on == Trigger::Tap || t.on == Trigger::LongPress) t.element = j.at("element").get<int>();
  if (t.on == Trigger::Scroll && !parse_direction(j.at("direction").get<std::string>(), t.direction))
    throw InvalidGraph("bad scroll direction");
  if (auto it = j.find("goto"); it != j.end() && !it->is_null()) t.target = it->get<std::string>();
  t.sets = j.value("sets", std::map<std::string, bool>{});
}

inline void to_json(nlohmann::json& j, const Transition& t) {
  j = nlohmann::json{{"on", to_string(t.on)}};
  if (t.on == Trigger::Tap || t.on == Trigger::LongPress) j["element"] = t.element;
  if (t.on == Trigger::Scroll) j["direction"] = to_string(t.direction);
  if (t.target) j["goto"] = *t.target;
  if (!t.sets.empty()) j["sets"] = t.sets;
}

inline void from_json(const nlohmann::json& j, ScreenSpec& s) {
  s.detections = j.at("detections").get<DetectionSet>();
  s.keyboard_visible = j.value("keyboard_visible", false);
  s.interactive = j.value("interactive", std::vector<int>{});
  s.transitions = j.value("transitions", std::vector<Transition>{});
}

inline void to_json(nlohmann::json& j, const ScreenSpec& s) {
  j = nlohmann::json{{"detections", s.detections},
                     {"keyboard_visible", s.keyboard_visible},
                     {"interactive", s.interactive},
                     {"transitions", s.transitions}};
}

inline void from_json(const nlohmann::json& j, AppGraph& g) {
  g.app = j.value("app", std::string());
  g.start = j.at("start").get<std::string>();
  g.screens = j.at("screens").get<std::map<std::string, ScreenSpec>>();
  g.initial_flags = j.value("flags", std::map<std::string, bool>{});
}

inline void to_json(nlohmann::json& j, const AppGraph& g) {
  j = nlohmann::json{{"app", g.app}, {"start", g.start}, {"screens", g.screens}, {"flags", g.initial_flags}};
}

inline void from_json(const nlohmann::json& j, Goal& g) {
  if (auto it = j.find("screen"); it != j.end() && !it->is_null()) g.screen = it->get<std::string>();
  g.flags = j.value("flags", std::map<std::string, bool>{});
  if (auto it = j.find("text"); it != j.end() && !it->is_null()) g.text = it->get<std::string>();
}

inline void from_json(const nlohmann::json& j, TaskSpec& t) {
  t.id = j.at("id").get<std::string>();
  t.description = j.at("description").get<std::string>();
  if (auto it = j.find("start_screen"); it != j.end() && !it->is_null()) t.start_screen = it->get<std::string>();
  t.goal = j.at("goal").get<Goal>();
  t.optimal_steps = j.at("optimal_steps").get<int>();
  if (t.goal.empty()) throw FormatError("task '" + t.id + "' has an empty goal");
  if (t.optimal_steps < 1) throw FormatError("task '" + t.id + "' needs optimal_steps >= 1");
}

inline nlohmann::json metrics_json(const Metrics& m) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : m.tasks)
    tasks.push_back({{"id", t.id}, {"success", t.success}, {"steps", t.steps}, {"reason", t.reason}});
  return {{"plan_sr", m.plan_sr},
          {"avg_steps", m.avg_steps ? nlohmann::json(*m.avg_steps) : nlohmann::json(nullptr)},
          {"tasks", tasks}};
}

inline std::vector<TaskResult> task_results_from_json(const nlohmann::json& j) {
  std::vector<TaskResult> out;
  for (const auto& t : j.at("tasks"))
    out.push_back({t.at("id").get<std::string>(), t.at("success").get<bool>(), t.at("steps").get<int>(),
                   t.at("reason").get<std::string>(), {}});
  return out;
}

}  // namespace guis
