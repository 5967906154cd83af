#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "guis/error.hpp"
#include "guis/format.hpp"
#include "guis/perception.hpp"

// HTML-like screen document:
//
//   <screen w=1080 h=2400>
//     <Modal id=0>
//       <Button id=1>OK</Button>
//       <Icon id=2 alt="search"/>
//     </Modal>
//     <!-- list: ids=[1,2] axis=vertical pitch=100 -->
//   </screen>

namespace guis {

class DocumentSyntaxError : public FormatError {
 public:
  DocumentSyntaxError(std::size_t line, const std::string& what)
      : FormatError("syntax error at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public FormatError {
 public:
  DuplicateId(std::size_t line, int id)
      : FormatError("duplicate id " + std::to_string(id) + " at line " + std::to_string(line)), id_(id) {}
  int id() const noexcept { return id_; }

 private:
  int id_;
};

inline std::string escape_content(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#10;"; break;
      default: out += c;
    }
  }
  return out;
}

inline bool uses_alt(ElementClass cls) { return cls == ElementClass::Icon || cls == ElementClass::Image; }

namespace detail {

inline void render_nodes(const std::vector<GuiNode>& nodes, int depth, std::string& out) {
  for (const auto& n : nodes) {
    const auto& e = n.element;
    const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    const std::string name(to_string(e.cls));
    std::string attrs = " id=" + std::to_string(e.id);
    if (e.inferred) attrs += " inferred=true";
    const bool alt = uses_alt(e.cls);
    if (!e.content.empty() && alt) attrs += " alt=\"" + escape_content(e.content) + "\"";
    if (!n.children.empty()) {
      if (!e.content.empty() && !alt) attrs += " text=\"" + escape_content(e.content) + "\"";
      out += indent + "<" + name + attrs + ">\n";
      render_nodes(n.children, depth + 1, out);
      out += indent + "</" + name + ">\n";
    } else if (!e.content.empty() && !alt) {
      out += indent + "<" + name + attrs + ">" + escape_content(e.content) + "</" + name + ">\n";
    } else {
      out += indent + "<" + name + attrs + "/>\n";
    }
  }
}

}  // namespace detail

inline std::string render_list_comment(const ListGroup& g) {
  std::string ids;
  for (std::size_t i = 0; i < g.member_ids.size(); ++i) {
    if (i) ids += ",";
    ids += std::to_string(g.member_ids[i]);
  }
  return "<!-- list: ids=[" + ids + "] axis=" + std::string(to_string(g.axis)) +
         " pitch=" + format_number(g.pitch) + " -->";
}

/// Byte-stable rendering; no trailing newline after </screen>.
inline std::string render_document(const ScreenDocument& doc) {
  std::string out = "<screen w=" + std::to_string(doc.image_size.width) +
                    " h=" + std::to_string(doc.image_size.height) + ">\n";
  detail::render_nodes(doc.tree.roots, 1, out);
  for (const auto& g : doc.lists) out += "  " + render_list_comment(g) + "\n";
  out += "</screen>";
  return out;
}

namespace detail {

class LineCursor {
 public:
  LineCursor(std::string_view s, std::size_t line) : s_(s), line_(line) {}

  bool done() const { return pos_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }
  std::string_view rest() const { return s_.substr(pos_); }
  void skip_spaces() {
    while (!done() && s_[pos_] == ' ') ++pos_;
  }
  bool consume(std::string_view token) {
    if (s_.substr(pos_).starts_with(token)) {
      pos_ += token.size();
      return true;
    }
    return false;
  }
  void expect(std::string_view token) {
    if (!consume(token)) fail("expected '" + std::string(token) + "'");
  }
  std::string_view word() {
    const std::size_t start = pos_;
    while (!done()) {
      const char c = s_[pos_];
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) break;
      ++pos_;
    }
    return s_.substr(start, pos_ - start);
  }
  long long integer() {
    const std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    while (!done() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    long long v = 0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) fail("expected an integer");
    return v;
  }
  double number() {
    const std::size_t start = pos_;
    while (!done() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                       s_[pos_] == 'e' || s_[pos_] == 'E' || s_[pos_] == '-' || s_[pos_] == '+'))
      ++pos_;
    double v = 0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) fail("expected a number");
    return v;
  }
  std::string quoted() {
    expect("\"");
    const std::size_t end = s_.find('"', pos_);
    if (end == std::string_view::npos) fail("unterminated attribute value");
    std::string v = unescape(s_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return v;
  }
  std::string unescape(std::string_view s) const {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '&') {
        out += s[i];
        continue;
      }
      static constexpr std::pair<std::string_view, char> kEntities[] = {
          {"&lt;", '<'}, {"&gt;", '>'}, {"&amp;", '&'}, {"&quot;", '"'}, {"&#10;", '\n'}};
      bool matched = false;
      for (const auto& [entity, ch] : kEntities) {
        if (s.substr(i).starts_with(entity)) {
          out += ch;
          i += entity.size() - 1;
          matched = true;
          break;
        }
      }
      if (!matched) fail("unknown entity");
    }
    return out;
  }
  [[noreturn]] void fail(const std::string& what) const { throw DocumentSyntaxError(line_, what); }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

}  // namespace detail

/// Inverse of render_document. Bounding boxes are not part of the format and
/// come back zeroed. Indentation is not significant.
inline ScreenDocument parse_document(std::string_view text) {
  ScreenDocument doc;
  struct Open {
    GuiNode node;
    std::size_t line;
  };
  std::vector<Open> stack;
  std::set<int> seen;
  bool opened = false;
  bool closed = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    detail::LineCursor cur(line, line_no);
    if (closed) cur.fail("content after </screen>");

    if (!opened) {
      cur.expect("<screen");
      cur.skip_spaces();
      cur.expect("w=");
      doc.image_size.width = static_cast<int>(cur.integer());
      cur.skip_spaces();
      cur.expect("h=");
      doc.image_size.height = static_cast<int>(cur.integer());
      cur.expect(">");
      if (!cur.done()) cur.fail("trailing text after <screen>");
      opened = true;
      continue;
    }

    if (cur.consume("</screen>")) {
      if (!stack.empty())
        throw DocumentSyntaxError(stack.back().line, "unclosed <" + std::string(to_string(stack.back().node.element.cls)) + ">");
      if (!cur.done()) cur.fail("trailing text after </screen>");
      closed = true;
      continue;
    }

    if (cur.consume("<!--")) {
      cur.skip_spaces();
      cur.expect("list:");
      cur.skip_spaces();
      cur.expect("ids=[");
      ListGroup g;
      while (cur.peek() != ']') {
        g.member_ids.push_back(static_cast<int>(cur.integer()));
        if (!cur.consume(",") && cur.peek() != ']') cur.fail("expected ',' or ']'");
      }
      cur.expect("]");
      cur.skip_spaces();
      cur.expect("axis=");
      const auto axis = cur.word();
      if (axis == "vertical")
        g.axis = Axis::Vertical;
      else if (axis == "horizontal")
        g.axis = Axis::Horizontal;
      else
        cur.fail("bad axis");
      cur.skip_spaces();
      cur.expect("pitch=");
      g.pitch = cur.number();
      cur.skip_spaces();
      cur.expect("-->");
      if (!cur.done()) cur.fail("trailing text after comment");
      doc.lists.push_back(std::move(g));
      continue;
    }

    if (cur.consume("</")) {
      const auto name = cur.word();
      cur.expect(">");
      if (!cur.done()) cur.fail("trailing text after closing tag");
      if (stack.empty() || to_string(stack.back().node.element.cls) != name)
        cur.fail("unexpected </" + std::string(name) + ">");
      GuiNode node = std::move(stack.back().node);
      stack.pop_back();
      (stack.empty() ? doc.tree.roots : stack.back().node.children).push_back(std::move(node));
      continue;
    }

    cur.expect("<");
    const std::string name(cur.word());
    const auto cls = try_parse_element_class(name);
    if (!cls || name == "CheckedTextView") cur.fail("unknown element <" + name + ">");
    GuiElement e;
    e.cls = *cls;
    bool has_id = false;
    std::string text_attr;
    for (;;) {
      cur.skip_spaces();
      if (cur.peek() == '/' || cur.peek() == '>') break;
      const auto key = cur.word();
      cur.expect("=");
      if (key == "id") {
        const long long id = cur.integer();
        if (id < 0 || id > 1'000'000'000) cur.fail("id out of range");
        e.id = static_cast<int>(id);
        has_id = true;
      } else if (key == "inferred") {
        const auto v = cur.word();
        if (v != "true" && v != "false") cur.fail("inferred must be true or false");
        e.inferred = v == "true";
      } else if (key == "alt" && uses_alt(e.cls)) {
        e.content = cur.quoted();
      } else if (key == "text" && !uses_alt(e.cls)) {
        text_attr = cur.quoted();
      } else {
        cur.fail("unknown attribute '" + std::string(key) + "'");
      }
    }
    if (!has_id) cur.fail("missing id");
    if (!seen.insert(e.id).second) throw DuplicateId(line_no, e.id);

    auto attach = [&](GuiNode node) {
      (stack.empty() ? doc.tree.roots : stack.back().node.children).push_back(std::move(node));
    };
    if (cur.consume("/>")) {
      if (!cur.done()) cur.fail("trailing text after element");
      attach(GuiNode{e, {}});
      continue;
    }
    cur.expect(">");
    if (cur.done()) {
      if (!text_attr.empty()) e.content = text_attr;
      stack.push_back({GuiNode{e, {}}, line_no});
      continue;
    }
    const std::string closing = "</" + name + ">";
    const std::string_view rest = cur.rest();
    if (!rest.ends_with(closing)) cur.fail("unclosed <" + name + ">");
    const std::string_view body = rest.substr(0, rest.size() - closing.size());
    if (body.find('<') != std::string_view::npos) cur.fail("markup inside inline content");
    e.content = cur.unescape(body);
    attach(GuiNode{e, {}});
  }

  if (!opened) throw DocumentSyntaxError(line_no == 0 ? 1 : line_no, "missing <screen>");
  if (!stack.empty())
    throw DocumentSyntaxError(stack.back().line,
                              "unclosed <" + std::string(to_string(stack.back().node.element.cls)) + ">");
  if (!closed) throw DocumentSyntaxError(line_no, "missing </screen>");
  return doc;
}

}  // namespace guis
