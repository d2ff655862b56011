#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace loopbench {

/// Two-space indented dump with every array of scalars kept on one line.
template <typename Json>
std::string compact_json_dump(const Json& doc) {
  const std::string full = doc.dump(2);
  std::string out;
  out.reserve(full.size());
  std::size_t i = 0;
  while (i < full.size()) {
    const char c = full[i];
    if (c == '"') {
      const std::size_t start = i++;
      while (i < full.size() && full[i] != '"') i += full[i] == '\\' ? 2 : 1;
      out.append(full, start, ++i - start);
      continue;
    }
    if (c == '[') {
      // Scan ahead: collapse only if no nested container appears before ']'.
      std::size_t j = i + 1;
      bool flat = true;
      bool in_str = false;
      for (; j < full.size(); ++j) {
        const char d = full[j];
        if (in_str) {
          if (d == '\\') ++j;
          else if (d == '"') in_str = false;
          continue;
        }
        if (d == '"') in_str = true;
        else if (d == '[' || d == '{') { flat = false; break; }
        else if (d == ']') break;
      }
      if (flat && j < full.size()) {
        out.push_back('[');
        bool in_s = false;
        bool pending_space = false;
        for (std::size_t k = i + 1; k < j; ++k) {
          const char d = full[k];
          if (in_s) {
            out.push_back(d);
            if (d == '\\') out.push_back(full[++k]);
            else if (d == '"') in_s = false;
            continue;
          }
          if (d == '\n' || d == ' ') continue;
          if (pending_space) out.push_back(' ');
          pending_space = false;
          out.push_back(d);
          if (d == ',') pending_space = true;
          if (d == '"') in_s = true;
        }
        out.push_back(']');
        i = j + 1;
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  out.push_back('\n');
  return out;
}

}  // namespace loopbench
