// Minimal raster box-plot renderer for metric summaries.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ganedit {

/// Renders a single box plot (median, quartiles, 1.5 IQR whiskers, outlier
/// dots) of `values` to an RGB PNG.
void render_box_plot(const std::filesystem::path& path, const std::string& title,
                     const std::vector<double>& values);

}  // namespace ganedit
