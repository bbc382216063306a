#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace frameflow::csv {

/// Fixed formatting for every CSV number: 17 significant digits.
std::string num(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Parse a numeric CSV with one header line. Blank lines and lines starting
/// with '#' are skipped. Throws InvalidArgument naming the offending line.
Table read_numeric(std::istream& in);

}  // namespace frameflow::csv
