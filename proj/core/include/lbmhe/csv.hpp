#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace lbmhe {

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// CSV file whose first line is `# git=<describe> seed=<seed>`, followed by
/// the header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::uint64_t seed, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);
  void flush() { out_.flush(); }
  std::size_t columns() const { return columns_; }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace lbmhe
