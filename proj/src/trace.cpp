#include "bdr/trace.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bdr {

void write_trace_csv(const std::filesystem::path& path, const SolveTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("trace: cannot write " + path.string());
  out << kTraceHeader << '\n';
  out.precision(17);
  for (const TraceRow& r : trace.rows) {
    out << r.iter << ',' << r.residual_s << ',' << r.lambda_delta << ',' << r.active_set_changes
        << ',' << r.bytes_up << ',' << r.bytes_down << ',' << r.wall_ms << '\n';
  }
}

SolveTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("trace: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw std::runtime_error("trace: unexpected header in " + path.string());
  }
  SolveTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw std::runtime_error("trace: row has wrong column count");
    TraceRow r;
    r.iter = std::stoi(cells[0]);
    r.residual_s = std::stod(cells[1]);
    r.lambda_delta = std::stod(cells[2]);
    r.active_set_changes = std::stoi(cells[3]);
    r.bytes_up = std::stoll(cells[4]);
    r.bytes_down = std::stoll(cells[5]);
    r.wall_ms = std::stod(cells[6]);
    trace.rows.push_back(r);
  }
  return trace;
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

int symmetric_difference_size(const std::vector<int>& a, const std::vector<int>& b) {
  int count = 0;
  size_t i = 0;
  size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++count;
      ++i;
    } else {
      ++count;
      ++j;
    }
  }
  return count + static_cast<int>(a.size() - i) + static_cast<int>(b.size() - j);
}

}  // namespace bdr
