#pragma once

#include <string>
#include <vector>

// Dependency-free SVG charts. Output is a pure function of the inputs (fixed
// number formatting, no timestamps), so re-emission is byte-identical.
namespace eostb {

struct Series {
  std::string name;
  std::vector<double> x, y;  // NaN y values leave a gap
};

struct BarGroup {
  std::string name;
  std::vector<double> values;  // one per category
};

std::string line_plot_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series);

std::string bar_plot_svg(const std::string& title, const std::vector<std::string>& categories,
                         const std::vector<BarGroup>& groups);

// Tab-separated data behind a plot: one row per (series, point).
std::string series_tsv(const std::vector<Series>& series);
std::string bars_tsv(const std::vector<std::string>& categories, const std::vector<BarGroup>& groups);

// Writes `<stem>.svg` and its sibling data file `<stem>.tsv`.
void write_plot(const std::string& stem, const std::string& svg, const std::string& tsv);

}  // namespace eostb
