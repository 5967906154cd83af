#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "guis/error.hpp"
#include "guis/format.hpp"

namespace guis {

enum class Direction { Up, Down, Left, Right };

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Up: return "up";
    case Direction::Down: return "down";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "up";
}

inline bool parse_direction(std::string_view s, Direction& out) {
  for (auto d : {Direction::Up, Direction::Down, Direction::Left, Direction::Right})
    if (to_string(d) == s) {
      out = d;
      return true;
    }
  return false;
}

namespace action {

struct Tap {
  int id = 0;
  friend bool operator==(const Tap&, const Tap&) = default;
};
struct LongPress {
  int id = 0;
  friend bool operator==(const LongPress&, const LongPress&) = default;
};
struct Text {
  std::string text;
  friend bool operator==(const Text&, const Text&) = default;
};
struct Scroll {
  Direction direction = Direction::Down;
  friend bool operator==(const Scroll&, const Scroll&) = default;
};
struct Back {
  friend bool operator==(const Back&, const Back&) = default;
};
struct Finish {
  friend bool operator==(const Finish&, const Finish&) = default;
};

}  // namespace action

using Action = std::variant<action::Tap, action::LongPress, action::Text, action::Scroll, action::Back, action::Finish>;

class CallError : public Error {
 public:
  enum class Kind { UnknownFunction, BadArity, BadArgument };

  CallError(Kind kind, std::string offending, const std::string& detail)
      : Error(std::string(kind_name(kind)) + ": " + detail + " in '" + offending + "'"),
        kind_(kind),
        offending_(std::move(offending)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& offending() const noexcept { return offending_; }

  static std::string_view kind_name(Kind k) {
    switch (k) {
      case Kind::UnknownFunction: return "UnknownFunction";
      case Kind::BadArity: return "BadArity";
      case Kind::BadArgument: return "BadArgument";
    }
    return "BadArgument";
  }

 private:
  Kind kind_;
  std::string offending_;
};

inline std::string quote_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

/// Canonical call text, e.g. Tap(3), Text("hi"), Scroll("down").
inline std::string render_call(const Action& a) {
  struct Visitor {
    std::string operator()(const action::Tap& t) const { return "Tap(" + std::to_string(t.id) + ")"; }
    std::string operator()(const action::LongPress& t) const { return "Long_press(" + std::to_string(t.id) + ")"; }
    std::string operator()(const action::Text& t) const { return "Text(" + quote_string(t.text) + ")"; }
    std::string operator()(const action::Scroll& s) const {
      return "Scroll(" + quote_string(to_string(s.direction)) + ")";
    }
    std::string operator()(const action::Back&) const { return "Back()"; }
    std::string operator()(const action::Finish&) const { return "Finish()"; }
  };
  return std::visit(Visitor{}, a);
}

namespace detail {

// Splits the text between the call's parentheses on top-level commas. Returns
// the index just past the closing parenthesis, or npos if it is missing.
inline std::size_t split_args(std::string_view s, std::size_t open, std::vector<std::string_view>& args) {
  bool in_string = false;
  std::size_t start = open + 1;
  for (std::size_t i = open + 1; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == ',') {
      args.push_back(s.substr(start, i - start));
      start = i + 1;
    } else if (c == ')') {
      std::string_view last = s.substr(start, i - start);
      if (!args.empty() || !trim(last).empty()) args.push_back(last);
      return i + 1;
    }
  }
  return std::string_view::npos;
}

inline int parse_id(std::string_view arg, const std::string& call) {
  arg = trim(arg);
  int v = 0;
  if (arg.empty() || arg.front() == '-' || arg.front() == '+')
    throw CallError(CallError::Kind::BadArgument, call, "expected a non-negative integer id");
  auto res = std::from_chars(arg.data(), arg.data() + arg.size(), v);
  if (res.ec != std::errc() || res.ptr != arg.data() + arg.size())
    throw CallError(CallError::Kind::BadArgument, call, "expected a non-negative integer id");
  return v;
}

inline std::string parse_quoted(std::string_view arg, const std::string& call) {
  arg = trim(arg);
  if (arg.size() < 2 || arg.front() != '"' || arg.back() != '"')
    throw CallError(CallError::Kind::BadArgument, call, "expected a double-quoted string");
  std::string out;
  for (std::size_t i = 1; i + 1 < arg.size(); ++i) {
    char c = arg[i];
    if (c == '"') throw CallError(CallError::Kind::BadArgument, call, "unescaped quote in string");
    if (c == '\\') {
      if (i + 2 >= arg.size()) throw CallError(CallError::Kind::BadArgument, call, "dangling escape");
      const char e = arg[++i];
      switch (e) {
        case '"': c = '"'; break;
        case '\\': c = '\\'; break;
        case 'n': c = '\n'; break;
        case 't': c = '\t'; break;
        case 'r': c = '\r'; break;
        case '\'': c = '\''; break;
        default: throw CallError(CallError::Kind::BadArgument, call, "unknown escape");
      }
    }
    out += c;
  }
  return out;
}

}  // namespace detail

/// Parses one function call of the action grammar. Names are case-sensitive;
/// whitespace around the call and its arguments is ignored.
inline Action parse_call(std::string_view text) {
  const std::string_view s = trim(text);
  const std::string call(s);
  std::size_t name_end = 0;
  while (name_end < s.size() &&
         (std::isalnum(static_cast<unsigned char>(s[name_end])) || s[name_end] == '_'))
    ++name_end;
  const std::string_view name = s.substr(0, name_end);
  static constexpr std::string_view kNames[] = {"Tap", "Long_press", "Text", "Scroll", "Back", "Finish"};
  bool known = false;
  for (auto n : kNames) known = known || n == name;
  if (!known) throw CallError(CallError::Kind::UnknownFunction, call, "unknown function '" + std::string(name) + "'");

  std::size_t open = name_end;
  while (open < s.size() && (s[open] == ' ' || s[open] == '\t')) ++open;
  if (open >= s.size() || s[open] != '(') throw CallError(CallError::Kind::BadArgument, call, "expected '('");
  std::vector<std::string_view> args;
  const std::size_t end = detail::split_args(s, open, args);
  if (end == std::string_view::npos) throw CallError(CallError::Kind::BadArgument, call, "missing ')'");
  if (!trim(s.substr(end)).empty()) throw CallError(CallError::Kind::BadArgument, call, "trailing text after call");

  auto arity = [&](std::size_t n) {
    if (args.size() != n)
      throw CallError(CallError::Kind::BadArity, call,
                      std::string(name) + " takes " + std::to_string(n) + " argument(s), got " +
                          std::to_string(args.size()));
  };

  if (name == "Tap") {
    arity(1);
    return action::Tap{detail::parse_id(args[0], call)};
  }
  if (name == "Long_press") {
    arity(1);
    return action::LongPress{detail::parse_id(args[0], call)};
  }
  if (name == "Text") {
    arity(1);
    return action::Text{detail::parse_quoted(args[0], call)};
  }
  if (name == "Scroll") {
    arity(1);
    Direction d{};
    if (!parse_direction(detail::parse_quoted(args[0], call), d))
      throw CallError(CallError::Kind::BadArgument, call, "direction must be up, down, left or right");
    return action::Scroll{d};
  }
  if (name == "Back") {
    arity(0);
    return action::Back{};
  }
  arity(0);
  return action::Finish{};
}

}  // namespace guis
