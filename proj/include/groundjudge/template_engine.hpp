#pragma once

// Minimal double-brace template renderer.
//
//   {{name}}              variable substitution
//   {{#flag}}..{{/flag}}  kept when flag is true
//   {{^flag}}..{{/flag}}  kept when flag is false
//   {{>name}}             partial, rendered with the same context
//   {{! text}}            comment
//
// Section, partial and comment tags that sit alone on a line consume that
// line. Unknown names are errors, not empty strings.

#include <map>
#include <string>
#include <string_view>

namespace groundjudge {

struct TemplateContext {
  std::map<std::string, std::string, std::less<>> variables;
  std::map<std::string, bool, std::less<>> flags;
  std::map<std::string, std::string, std::less<>> partials;
};

/// Throws Error(kTemplate) on malformed tags, unbalanced sections, unknown
/// names or partial recursion deeper than 8.
std::string RenderTemplate(std::string_view text, const TemplateContext& context);

}  // namespace groundjudge
