#include "lbmhe/csv.hpp"

#include <charconv>

#include "lbmhe/errors.hpp"
#include "lbmhe/logging.hpp"

namespace lbmhe {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) line += ',';
    line += cells[i];
  }
  return line;
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, std::uint64_t seed, const std::vector<std::string>& header)
    : columns_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path);
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  out_ << "# git=" << build_version() << " seed=" << seed << '\n' << join(header) << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw UsageError("csv: row has " + std::to_string(cells.size()) + " cells, header has " +
                                                 std::to_string(columns_));
  out_ << join(cells) << '\n';
}

}  // namespace lbmhe
