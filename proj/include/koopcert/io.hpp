#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace koopcert::io {

/// Round-trip decimal ("%.17g"); "inf", "-inf", "nan" for non-finite values.
std::string fmt(double v);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Minimal CSV emitter: a "# key=value" provenance line, a header, then rows.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header,
              const std::string& config_hash = "");
    void row(const std::vector<std::string>& cells);

private:
    std::ostream& os_;
    std::size_t columns_;
};

struct SvgSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct SvgPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<SvgSeries> series;
};

/// Line plot with axes, ticks at the data range ends and a legend; non-finite or
/// (on log axes) non-positive points break the polyline.
void write_svg(std::ostream& os, const SvgPlot& plot, const std::string& config_hash = "");

}  // namespace koopcert::io
