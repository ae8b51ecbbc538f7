#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace stredalab {

/// Renders a double with the requested number of significant digits in a
/// locale-independent way; NaN and infinities get fixed spellings so the
/// schema stays machine-readable.
inline std::string format_number(double v, int digits) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

/// Minimal ordered JSON object writer: numbers, integers, strings. Key order
/// is the insertion order, so identical inputs yield byte-identical files.
class JsonReport {
 public:
  explicit JsonReport(int digits) : digits_(digits) {}

  void add(const std::string& key, double v) {
    const std::string s = format_number(v, digits_);
    // bare nan/inf are not valid JSON numbers; quote the sentinel spellings
    const bool bare = std::isfinite(v);
    entries_.emplace_back(key, bare ? s : "\"" + s + "\"");
  }
  void add(const std::string& key, int v) { entries_.emplace_back(key, std::to_string(v)); }
  void add_string(const std::string& key, const std::string& v) {
    entries_.emplace_back(key, "\"" + v + "\"");
  }

  std::string str() const {
    std::string out = "{\n";
    for (size_t i = 0; i < entries_.size(); ++i) {
      out += "  \"" + entries_[i].first + "\": " + entries_[i].second;
      out += i + 1 < entries_.size() ? ",\n" : "\n";
    }
    out += "}\n";
    return out;
  }

  /// Writes via a temp file and rename so readers never see a partial report.
  void write(const std::filesystem::path& path) const {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw std::runtime_error("report: cannot write " + tmp.string());
      out << str();
      if (!out) throw std::runtime_error("report: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

 private:
  int digits_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Frozen sweep schema; downstream plotting scripts key on this exact header.
inline const char* kSweepCsvHeader =
    "B,E_F,gap_lower,gap_upper,rank_below,isdos,fd_derivative,ch_up,ch_down,sch,"
    "sigma_contour,residual_streda_fd,residual_streda_kubo,gapped_flag";

/// One fully materialized sweep row. Rows are appended as single writes and
/// flushed, so an interrupted sweep still ends with a complete row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& header)
      : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("csv: cannot write " + path.string());
    const std::string line = header + "\n";
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
  }

  void write_row(const std::vector<std::string>& cells) {
    std::string line;
    for (size_t i = 0; i < cells.size(); ++i) {
      line += cells[i];
      if (i + 1 < cells.size()) line += ',';
    }
    line += '\n';
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace stredalab
