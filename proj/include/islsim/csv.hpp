#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace islsim {

// Minimal CSV writer. Numbers are formatted with %.12g, which round-trips the
// values we care about and, being locale-independent, keeps repeated runs
// byte-identical (a hard requirement on the output files).
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for write: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
    ncols_ = header.size();
  }

  void field(const std::string& s) {
    sep();
    out_ << s;
  }
  void field(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    sep();
    out_ << buf;
  }
  void field(long long v) {
    sep();
    out_ << v;
  }
  void field(unsigned long long v) {  // full-range seeds
    sep();
    out_ << v;
  }
  void field(int v) { field(static_cast<long long>(v)); }
  void field(std::size_t v) { field(static_cast<unsigned long long>(v)); }

  void endrow() {
    if (col_ != ncols_) throw std::logic_error("csv row width mismatch");
    out_ << '\n';
    col_ = 0;
  }

 private:
  void sep() {
    if (col_) out_ << ',';
    ++col_;
  }
  std::ofstream out_;
  std::size_t ncols_ = 0;
  std::size_t col_ = 0;
};

inline std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace islsim
