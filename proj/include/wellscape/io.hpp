#pragma once

// Text formats: the WSF1 field dump, CSV tables, atomic file replacement.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wellscape/error.hpp"
#include "wellscape/field.hpp"

namespace wellscape {

/// 17 significant digits: enough for every double to read back bit-identically.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view token) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorKind::IoError, "bad number '" + std::string(token) + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// WSF1: "WSF1 nx=<int> ny=<int> L=<float>" then nx+1 lines of ny values.

inline void write_wsf1(std::ostream& os, const ScalarField& u) {
  const Grid& g = u.grid();
  os << "WSF1 nx=" << g.nx << " ny=" << g.ny << " L=" << format_double(g.L) << '\n';
  std::string line;
  for (int i = 0; i <= g.nx; ++i) {
    line.clear();
    for (int j = 0; j < g.ny; ++j) {
      if (j) line += ' ';
      line += format_double(u(i, j));
    }
    line += '\n';
    os << line;
  }
}

inline std::string to_wsf1(const ScalarField& u) {
  std::ostringstream os;
  write_wsf1(os, u);
  return os.str();
}

inline ScalarField read_wsf1(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error(ErrorKind::IoError, "empty WSF1 stream");
  int nx = 0, ny = 0;
  char lbuf[64] = {0};
  if (std::sscanf(header.c_str(), "WSF1 nx=%d ny=%d L=%63s", &nx, &ny, lbuf) != 3) {
    throw Error(ErrorKind::IoError, "bad WSF1 header '" + header + "'");
  }
  const Grid g = make_grid(parse_double(lbuf), nx, ny);
  std::vector<double> v(g.size());
  std::string line;
  for (int i = 0; i <= nx; ++i) {
    if (!std::getline(is, line)) throw Error(ErrorKind::IoError, "WSF1 truncated at row " + std::to_string(i));
    std::string_view rest(line);
    for (int j = 0; j < ny; ++j) {
      const auto start = rest.find_first_not_of(" \t\r");
      if (start == std::string_view::npos) {
        throw Error(ErrorKind::IoError, "WSF1 row " + std::to_string(i) + " too short");
      }
      rest.remove_prefix(start);
      const auto end = rest.find_first_of(" \t\r");
      v[g.index(i, j)] = parse_double(rest.substr(0, end));
      rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
    }
    if (rest.find_first_not_of(" \t\r") != std::string_view::npos) {
      throw Error(ErrorKind::IoError, "WSF1 row " + std::to_string(i) + " too long");
    }
  }
  return ScalarField(g, std::move(v));
}

inline ScalarField read_wsf1_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return read_wsf1(in);
}

// ---------------------------------------------------------------------------

/// Writes to a sibling temp file and renames it into place.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Minimal CSV builder: '.' decimals, '\n' line endings, header row first.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { add_row(header); }

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw Error(ErrorKind::IoError, "CSV row width mismatch");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) text_ += ',';
      text_ += escape(cells[k]);
    }
    text_ += '\n';
  }

  const std::string& str() const { return text_; }

 private:
  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

  std::size_t columns_;
  std::string text_;
};

}  // namespace wellscape
