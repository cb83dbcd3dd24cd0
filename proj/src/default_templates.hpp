#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace groundjudge::internal {

// Contents of templates/*.md, embedded at configure time.
const std::vector<std::pair<std::string_view, std::string_view>>& DefaultTemplates();

}  // namespace groundjudge::internal
