#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pancakes/common.hpp"

namespace pancakes::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Formats a double with full round-trip precision; output is byte-stable
/// for identical inputs.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// Output target: a file path or "-" for standard output.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path == "-") {
      out_ = &std::cout;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::domain_error("cannot open output file: " + path);
      out_ = file_.get();
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
};

/// CSV writer: one comment line echoing the resolved configuration, then a
/// header row, then data rows. '\n' endings, '.' decimal point.
class CsvWriter {
 public:
  CsvWriter(Sink& sink, const nlohmann::json& config,
            const std::vector<std::string>& header)
      : out_(sink.stream()) {
    nlohmann::json echo = config;
    echo["version"] = kVersion;
    out_ << "# pancakes " << echo.dump() << "\n";
    for (std::size_t i = 0; i < header.size(); ++i)
      out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ostream& out_;
};

inline void write_json_report(const std::string& path, nlohmann::json report,
                              const nlohmann::json& config) {
  report["config"] = config;
  report["version"] = kVersion;
  Sink sink(path);
  sink.stream() << report.dump(2) << "\n";
}

/// Derives a secondary output path from the primary one ("-" yields "").
/// The extension is kept unless a replacement is given.
inline std::string derive_path(const std::string& out,
                               const std::string& suffix,
                               const std::string& new_ext = "") {
  if (out == "-") return "";
  const std::size_t slash = out.rfind('/');
  const std::size_t dot = out.rfind('.');
  const bool has_ext =
      dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? out.substr(0, dot) : out;
  const std::string ext =
      new_ext.empty() ? (has_ext ? out.substr(dot) : "") : new_ext;
  return stem + suffix + ext;
}

}  // namespace pancakes::cli
