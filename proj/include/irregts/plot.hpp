#pragma once

#include <string>
#include <vector>

namespace irregts::plot {

// minimal CSV table (no quoting; produced by this project's own writers)
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text);

// Line chart of one metric from a sweep report CSV: x positions follow the
// condition order of first appearance, one line per model, error bars from
// the std column. Labels are carried verbatim from the CSV.
std::string render_sweep_svg(const CsvTable& report, const std::string& metric);

// confusion-matrix heatmap from the CSV grid
std::string render_cm_svg(const CsvTable& grid);

}  // namespace irregts::plot
