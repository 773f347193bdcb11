#pragma once

#include <cctype>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace turnwise {

/// Single-pass `{name}` substitution. The template is scanned once; values
/// are emitted verbatim and never rescanned, so a placeholder token inside a
/// value survives untouched. Unknown `{...}` sequences pass through.
inline std::string render_template(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::size_t close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const std::string_view name = tmpl.substr(open + 1, close - open - 1);
    bool replaced = false;
    for (const auto& [key, value] : values) {
      if (key == name) {
        out.append(value);
        replaced = true;
        break;
      }
    }
    if (!replaced) out.append(tmpl.substr(open, close - open + 1));
    pos = close + 1;
  }
  return out;
}

/// Trims whitespace and removes a surrounding triple-backtick fence
/// (with optional language tag) when present.
inline std::string strip_code_fences(std::string_view text) {
  auto trim = [](std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
  };

  std::string_view body = trim(text);
  if (body.size() >= 6 && body.substr(0, 3) == "```" &&
      body.substr(body.size() - 3) == "```") {
    body.remove_prefix(3);
    body.remove_suffix(3);
    // Drop a language tag on the opening fence line.
    const std::size_t newline = body.find('\n');
    if (newline != std::string_view::npos) {
      const std::string_view tag = trim(body.substr(0, newline));
      bool word = !tag.empty();
      for (unsigned char c : tag) {
        if (!std::isalnum(c)) { word = false; break; }
      }
      if (word) body.remove_prefix(newline + 1);
    }
    body = trim(body);
  }
  return std::string(body);
}

}  // namespace turnwise
