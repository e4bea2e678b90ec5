#pragma once

#include <string>
#include <vector>

namespace annih {

// Shortest decimal representation that round-trips to the same double;
// byte-stable across runs, which keeps CSV goldens diffable.
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  const std::string& body() const { return body_; }
  void write(const std::string& path) const;

 private:
  std::string body_;
  std::size_t n_cols_;
};

}  // namespace annih
