#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "guis/error.hpp"
#include "guis/format.hpp"
#include "guis/geometry.hpp"
#include "guis/image.hpp"

namespace guis {

// ---------------------------------------------------------------------------
// LLM completion

class LlmError : public Error {
 public:
  using Error::Error;
};

class TransportError : public LlmError {
 public:
  explicit TransportError(const std::string& reason) : LlmError("transport error: " + reason) {}
};

class AuthError : public LlmError {
 public:
  explicit AuthError(const std::string& reason) : LlmError("auth error: " + reason) {}
};

class TimeoutError : public LlmError {
 public:
  explicit TimeoutError(const std::string& reason) : LlmError("timeout: " + reason) {}
};

class OutOfScript : public LlmError {
 public:
  OutOfScript() : LlmError("scripted llm exhausted") {}
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the model's reply or throws an LlmError. Must not block past the
  // implementation's timeout budget.
  virtual std::string complete(std::string_view prompt, const Image* attachment = nullptr) = 0;
};

// Replays canned replies in order; one instance per episode.
class ScriptedLlm final : public LlmClient {
 public:
  explicit ScriptedLlm(std::vector<std::string> replies) : replies_(std::move(replies)) {
    if (replies_.empty()) throw std::invalid_argument("scripted llm needs at least one reply");
  }

  std::string complete(std::string_view, const Image* = nullptr) override {
    if (cursor_ >= replies_.size()) throw OutOfScript();
    return replies_[cursor_++];
  }

  std::size_t consumed() const noexcept { return cursor_; }

 private:
  std::vector<std::string> replies_;
  std::size_t cursor_ = 0;
};

// Script files hold one reply per block, blocks separated by a line that is
// exactly "---".
inline std::vector<std::string> split_script(std::string_view text) {
  std::vector<std::string> replies;
  std::string current;
  bool any = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == "---") {
      if (!trim(current).empty()) replies.push_back(std::string(trim(current)));
      current.clear();
      any = false;
    } else {
      if (any) current += '\n';
      current += line;
      any = true;
    }
    pos = eol + 1;
  }
  if (!trim(current).empty()) replies.push_back(std::string(trim(current)));
  return replies;
}

// ---------------------------------------------------------------------------
// Icon captioning

struct IconQuery {
  BBox bbox;
  std::string fingerprint;
  const Image* screenshot = nullptr;
};

// "x0,y0,x1,y1" in shortest decimal form; the key used by lookup captioners.
inline std::string fingerprint(const BBox& b) {
  return format_number(b.x_min) + "," + format_number(b.y_min) + "," + format_number(b.x_max) + "," +
         format_number(b.y_max);
}

class IconCaptioner {
 public:
  virtual ~IconCaptioner() = default;
  virtual std::string caption(const IconQuery& query) = 0;
};

class TableCaptioner final : public IconCaptioner {
 public:
  TableCaptioner() = default;
  explicit TableCaptioner(std::map<std::string, std::string> table) : table_(std::move(table)) {}

  std::string caption(const IconQuery& query) override {
    auto it = table_.find(query.fingerprint);
    return it == table_.end() ? std::string() : it->second;
  }

 private:
  std::map<std::string, std::string> table_;
};

// ---------------------------------------------------------------------------
// OCR

struct OcrLine {
  std::string text;
  BBox bbox;
};

class OcrClient {
 public:
  virtual ~OcrClient() = default;
  virtual std::vector<OcrLine> recognize(const Image& image) = 0;
};

// Returns a fixed set of lines, clipped to the queried image.
class StaticOcr final : public OcrClient {
 public:
  explicit StaticOcr(std::vector<OcrLine> lines) : lines_(std::move(lines)) {}

  std::vector<OcrLine> recognize(const Image& image) override {
    std::vector<OcrLine> out;
    for (const auto& l : lines_) {
      BBox b = clip(l.bbox, image.width, image.height);
      if (b.area() > 0.0) out.push_back({l.text, b});
    }
    return out;
  }

 private:
  std::vector<OcrLine> lines_;
};

}  // namespace guis
