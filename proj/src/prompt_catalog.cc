#include "recon/prompt_catalog.h"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace recon {
namespace {

bool IsNameChar(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls `on_placeholder(name, begin, end)` for every {name} in `text`.
template <typename F>
void ScanPlaceholders(std::string_view text, F on_placeholder) {
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    std::size_t end = pos + 1;
    while (end < text.size() && IsNameChar(text[end])) ++end;
    if (end < text.size() && text[end] == '}' && end > pos + 1) {
      on_placeholder(text.substr(pos + 1, end - pos - 1), pos, end + 1);
      pos = end + 1;
    } else {
      ++pos;
    }
  }
}

}  // namespace

std::vector<std::string> Placeholders(std::string_view text) {
  std::vector<std::string> names;
  ScanPlaceholders(text, [&](std::string_view name, std::size_t, std::size_t) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      names.emplace_back(name);
    }
  });
  return names;
}

std::string RenderTemplate(std::string_view text, const TemplateValues& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t copied = 0;
  ScanPlaceholders(text, [&](std::string_view name, std::size_t begin,
                             std::size_t end) {
    const auto it = values.find(name);
    if (it == values.end()) {
      throw TemplateError("no value for placeholder {" + std::string(name) + "}");
    }
    out.append(text.substr(copied, begin - copied));
    out.append(it->second);
    copied = end;
  });
  out.append(text.substr(copied));
  return out;
}

PromptCatalog PromptCatalog::Builtin() {
  PromptCatalog catalog;
  for (const auto& [id, text] : BuiltinPromptTexts()) catalog.Set(id, text);
  return catalog;
}

PromptCatalog PromptCatalog::LoadDirectory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw TemplateError("prompt catalog directory not found: " + dir.string());
  }
  PromptCatalog catalog = Builtin();
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    catalog.Set(file.stem().string(), text.str());
  }
  return catalog;
}

bool PromptCatalog::Has(std::string_view id) const {
  return templates_.find(id) != templates_.end();
}

const std::string& PromptCatalog::Get(std::string_view id) const {
  const auto it = templates_.find(id);
  if (it == templates_.end()) {
    throw TemplateError("prompt catalog has no template '" + std::string(id) + "'");
  }
  return it->second;
}

void PromptCatalog::Set(std::string id, std::string text) {
  // Files end with a newline; templates are spliced into other text.
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  templates_[std::move(id)] = std::move(text);
}

std::vector<std::string> PromptCatalog::Ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, text] : templates_) ids.push_back(id);
  return ids;
}

std::string PromptCatalog::Render(std::string_view id,
                                  const TemplateValues& values) const {
  try {
    return RenderTemplate(Get(id), values);
  } catch (const TemplateError& e) {
    throw TemplateError("template '" + std::string(id) + "': " + e.what());
  }
}

}  // namespace recon
