// Headerless CSV matrix I/O. Values are written with enough digits to
// round-trip doubles exactly; parse failures carry the offending line number.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace kbl {

struct ParseError : std::runtime_error {
  ParseError(const std::string& file, int line_number, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line_number) + ": " + what),
        line(line_number) {}

  int line;
};

// Comma-separated rows, no header. Blank lines are skipped; every data row
// must have the same number of fields.
Eigen::MatrixXd read_matrix_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

// Formats one double exactly as the CSV writer does ("%.17g").
std::string format_value(double v);

}  // namespace kbl
