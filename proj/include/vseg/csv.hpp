#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "vseg/error.hpp"

namespace vseg {

// Minimal CSV emitter. Comment lines ('# key=value') carry the resolved
// experiment config ahead of the header row.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : f_(path, std::ios::binary) {
    if (!f_) throw io_error("cannot open for writing: " + path);
  }

  void comment(const std::string& line) { f_ << "# " << line << "\n"; }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) f_ << ",";
      f_ << cells[i];
    }
    f_ << "\n";
  }

  void close() { f_.close(); }

 private:
  std::ofstream f_;
};

}  // namespace vseg
