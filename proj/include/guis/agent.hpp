#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "guis/action.hpp"
#include "guis/clients.hpp"
#include "guis/document.hpp"
#include "guis/error.hpp"
#include "guis/perception.hpp"
#include "guis/retrieval.hpp"
#include "json.hpp"

namespace guis {

// ---------------------------------------------------------------------------
// Prompt

struct Feedback {
  bool ok = true;
  std::string message;

  static Feedback success() { return {}; }
  static Feedback error(std::string msg) { return {false, std::move(msg)}; }
  std::string str() const { return ok ? "ok" : "error: " + message; }
  friend bool operator==(const Feedback&, const Feedback&) = default;
};

struct HistoryEntry {
  int step = 1;
  std::optional<Action> action;  // empty when the reply could not be parsed
  Feedback feedback;
};

struct PromptBundle {
  std::string task;
  std::string screen_doc;
  std::vector<HistoryEntry> history;
  std::optional<TaskCase> example;
  bool attach_screenshot = false;
};

class EmptyTask : public Error {
 public:
  EmptyTask() : Error("task description is empty") {}
};

inline std::string render_history_line(const HistoryEntry& h) {
  return std::to_string(h.step) + ". " + (h.action ? render_call(*h.action) : std::string("<unparseable>")) +
         " -> " + h.feedback.str();
}

inline std::string build_prompt(const PromptBundle& b) {
  if (trim(b.task).empty()) throw EmptyTask();
  std::string p = "You are an agent operating a smartphone on behalf of a user.\n";
  p += "# Task\n" + b.task + "\n";
  p += "# Screen\n" + b.screen_doc + "\n";
  p += "# History\n";
  if (b.history.empty()) p += "None\n";
  for (const auto& h : b.history) p += render_history_line(h) + "\n";
  if (b.example) {
    p += "# Example\nTask: " + b.example->task + "\nSteps:\n";
    for (std::size_t i = 0; i < b.example->steps.size(); ++i) {
      const auto& s = b.example->steps[i];
      p += std::to_string(i + 1) + ". " + s.call;
      if (s.note && !s.note->empty()) p += " # " + *s.note;
      p += "\n";
    }
  }
  p +=
      "# Instructions\n"
      "Reply in exactly this format:\n"
      "Summary: <state summary>\n"
      "Thought: <reflection>\n"
      "Action: <explanation>\n"
      "Function: <Tap(id) | Long_press(id) | Text(\"...\") | Scroll(\"up|down|left|right\") | Back() | Finish()>\n";
  return p;
}

// ---------------------------------------------------------------------------
// Reply

struct AgentReply {
  std::string summary;
  std::string thought;
  std::string explanation;
  Action action;
};

class MissingSection : public Error {
 public:
  explicit MissingSection(std::string name) : Error("missing section " + name), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

namespace detail {

// Prefix of `line` up to the parenthesis closing the first call, quotes
// respected. Falls back to the whole line if the call never closes.
inline std::string_view first_call(std::string_view line) {
  const std::size_t open = line.find('(');
  if (open == std::string_view::npos) return line;
  bool in_string = false;
  for (std::size_t i = open + 1; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
    } else if (c == '"') {
      in_string = true;
    } else if (c == ')') {
      return line.substr(0, i + 1);
    }
  }
  return line;
}

}  // namespace detail

/// Splits a reply into its Summary/Thought/Action/Function sections. Each
/// label starts a line; a section runs until the next label. Only the first
/// call on the Function line is parsed.
inline AgentReply parse_reply(std::string_view text) {
  static constexpr std::string_view kLabels[] = {"Summary:", "Thought:", "Action:", "Function:"};
  std::optional<std::string> bodies[4];
  int current = -1;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    std::string_view lead = line;
    while (!lead.empty() && (lead.front() == ' ' || lead.front() == '\t')) lead.remove_prefix(1);
    int label = -1;
    for (int i = 0; i < 4; ++i)
      if (lead.starts_with(kLabels[i])) label = i;
    if (label >= 0) {
      if (bodies[label]) {
        current = -1;  // repeated label: keep the first occurrence
        continue;
      }
      current = label;
      bodies[label] = std::string(lead.substr(kLabels[label].size()));
      continue;
    }
    if (current >= 0) *bodies[current] += "\n" + std::string(line);
  }
  static constexpr std::string_view kNames[] = {"Summary", "Thought", "Action", "Function"};
  for (int i = 0; i < 4; ++i)
    if (!bodies[i]) throw MissingSection(std::string(kNames[i]));

  std::string_view fn = trim(*bodies[3]);
  fn = fn.substr(0, std::min(fn.find('\n'), fn.size()));
  return AgentReply{std::string(trim(*bodies[0])), std::string(trim(*bodies[1])), std::string(trim(*bodies[2])),
                    parse_call(detail::first_call(trim(fn)))};
}

// ---------------------------------------------------------------------------
// Device commands

namespace command {

struct Tap {
  Point at;
  friend bool operator==(const Tap&, const Tap&) = default;
};
struct LongPress {
  Point at;
  friend bool operator==(const LongPress&, const LongPress&) = default;
};
struct Swipe {
  Point from;
  Point to;
  friend bool operator==(const Swipe&, const Swipe&) = default;
};

}  // namespace command

using DeviceCommand =
    std::variant<command::Tap, command::LongPress, command::Swipe, action::Text, action::Back, action::Finish>;

class UnknownId : public Error {
 public:
  explicit UnknownId(int id) : Error("unknown id " + std::to_string(id)), id_(id) {}
  int id() const noexcept { return id_; }

 private:
  int id_;
};

/// Swipe for a scroll: starts at the screen centre and moves 40% of the
/// relevant dimension against the scroll direction (content follows the
/// finger, so scrolling down drags upward).
inline command::Swipe scroll_swipe(Direction d, ImageSize size) {
  const Point c{size.width / 2.0, size.height / 2.0};
  const double dy = 0.4 * size.height;
  const double dx = 0.4 * size.width;
  switch (d) {
    case Direction::Down: return {c, {c.x, c.y - dy}};
    case Direction::Up: return {c, {c.x, c.y + dy}};
    case Direction::Left: return {c, {c.x + dx, c.y}};
    case Direction::Right: return {c, {c.x - dx, c.y}};
  }
  return {c, c};
}

inline DeviceCommand resolve_action(const Action& a, const ScreenDocument& doc) {
  auto center_of = [&](int id) {
    auto e = find_element(doc, id);
    if (!e) throw UnknownId(id);
    return e->bbox.center();
  };
  if (auto* t = std::get_if<action::Tap>(&a)) return command::Tap{center_of(t->id)};
  if (auto* t = std::get_if<action::LongPress>(&a)) return command::LongPress{center_of(t->id)};
  if (auto* s = std::get_if<action::Scroll>(&a)) return scroll_swipe(s->direction, doc.image_size);
  if (auto* t = std::get_if<action::Text>(&a)) return *t;
  if (std::holds_alternative<action::Back>(a)) return action::Back{};
  return action::Finish{};
}

// ---------------------------------------------------------------------------
// Episodes

struct Observation {
  DetectionSet detections;
  bool keyboard_visible = false;
};

struct DeviceFeedback {
  Feedback feedback;
  std::optional<double> matched_distance;  // set for coordinate commands
};

class DeviceInterface {
 public:
  virtual ~DeviceInterface() = default;
  virtual Observation observe() const = 0;
  virtual DeviceFeedback apply(const DeviceCommand& cmd) = 0;
};

struct EpisodeLimits {
  int max_steps = 15;
  int max_consecutive_errors = 3;
};

struct EpisodeOptions {
  EpisodeLimits limits;
  const CaseRetriever* retriever = nullptr;
  IconCaptioner* captioner = nullptr;
  PerceptionConfig perception;
  bool attach_screenshot = false;
};

enum class EpisodeStatus { Finished, Failed, Aborted };

inline std::string_view to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Finished: return "finished";
    case EpisodeStatus::Failed: return "failed";
    case EpisodeStatus::Aborted: return "aborted";
  }
  return "failed";
}

struct StepRecord {
  int step = 0;
  std::string prompt;
  std::string reply;
  std::string action;
  std::string feedback;
  std::optional<double> matched_distance;
};

struct EpisodeResult {
  EpisodeStatus status = EpisodeStatus::Failed;
  std::string reason;  // "repeated_errors", "step_limit", or the abort cause
  int steps = 0;
  bool success = false;  // filled in by whoever owns the goal predicate
  std::vector<StepRecord> trace;
};

inline constexpr std::string_view kRepeatedErrors = "repeated_errors";
inline constexpr std::string_view kStepLimit = "step_limit";

/// Perceive -> decide -> act until Finish, the step limit, or too many
/// consecutive error feedbacks. Transport failures abort the episode.
inline EpisodeResult run_episode(std::string_view task, DeviceInterface& device, LlmClient& llm,
                                 const EpisodeOptions& opts = {}) {
  if (trim(task).empty()) throw EmptyTask();
  TableCaptioner no_captions;
  IconCaptioner& captioner = opts.captioner ? *opts.captioner : no_captions;
  std::optional<TaskCase> example;
  if (opts.retriever) {
    auto hits = opts.retriever->query(task, 1);
    if (!hits.empty()) example = std::move(hits.front().task_case);
  }

  EpisodeResult result;
  std::vector<HistoryEntry> history;
  int consecutive_errors = 0;
  for (int step = 1; step <= opts.limits.max_steps; ++step) {
    const Observation obs = device.observe();
    const ScreenDocument doc = build_document(obs.detections, captioner, opts.perception);
    const std::string prompt = build_prompt(
        PromptBundle{std::string(task), render_document(doc), history, example, opts.attach_screenshot});

    std::string reply;
    try {
      reply = llm.complete(prompt);
    } catch (const LlmError& e) {
      result.status = EpisodeStatus::Aborted;
      result.reason = e.what();
      return result;
    }

    StepRecord rec{step, prompt, reply, "", "", std::nullopt};
    HistoryEntry entry{step, std::nullopt, Feedback::success()};
    bool finished = false;
    try {
      const AgentReply parsed = parse_reply(reply);
      entry.action = parsed.action;
      rec.action = render_call(parsed.action);
      try {
        const DeviceCommand cmd = resolve_action(parsed.action, doc);
        const DeviceFeedback fb = device.apply(cmd);
        entry.feedback = fb.feedback;
        rec.matched_distance = fb.matched_distance;
        finished = std::holds_alternative<action::Finish>(parsed.action);
      } catch (const UnknownId& e) {
        entry.feedback = Feedback::error(e.what());
      }
    } catch (const MissingSection& e) {
      entry.feedback = Feedback::error(std::string("unparseable reply: ") + e.what());
    } catch (const CallError& e) {
      entry.feedback = Feedback::error(std::string("unparseable reply: ") + e.what());
    }
    rec.feedback = entry.feedback.str();
    result.trace.push_back(std::move(rec));
    history.push_back(std::move(entry));
    result.steps = step;

    if (finished) {
      result.status = EpisodeStatus::Finished;
      return result;
    }
    consecutive_errors = history.back().feedback.ok ? 0 : consecutive_errors + 1;
    if (consecutive_errors >= opts.limits.max_consecutive_errors) {
      result.status = EpisodeStatus::Failed;
      result.reason = kRepeatedErrors;
      return result;
    }
  }
  result.status = EpisodeStatus::Failed;
  result.reason = kStepLimit;
  return result;
}

inline nlohmann::json step_record_json(const StepRecord& r) {
  nlohmann::json j{{"step", r.step}, {"prompt", r.prompt}, {"reply", r.reply}, {"action", r.action},
                   {"feedback", r.feedback}};
  if (r.matched_distance) j["matched_distance"] = *r.matched_distance;
  return j;
}

inline void write_trace_jsonl(std::ostream& out, const std::vector<StepRecord>& trace) {
  for (const auto& r : trace) out << step_record_json(r).dump() << '\n';
}

}  // namespace guis
