#pragma once

// Agreement tables and pass grids over one or more meta results.

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "groundjudge/meta.hpp"

namespace groundjudge {

enum class ReportFormat { kMarkdown, kCsv, kJson };

std::optional<ReportFormat> ReportFormatFromName(std::string_view name);

/// One row per result with the six agreement rates and the total. Markdown
/// bolds each column's maximum and appends the grids; csv is a header and
/// numeric rows only. Throws Error(kMixedSuites) when suite names differ
/// and Error(kEmptyInput) for no results.
std::string RenderReport(std::span<const MetaResult> results, ReportFormat format);

/// Glyph legend shared by the text grids.
std::string GridLegend();

}  // namespace groundjudge
